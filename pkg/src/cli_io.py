"""
Command-line entry point and deterministic result files
"""

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from config.config import Config
from .bounds import bounds_table
from .core_table import BothFreePolicy, InvalidConfigError
from .harness import ExperimentConfig, ExperimentResult, run_experiment
from .random_source import derive_seeds

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("run", "verify", "census", "probe", "bounds")
FORMATS = ("json", "csv")

WALK_COLUMNS = ["seed", "walk_steps", "count"]
CENSUS_COLUMNS = ["seed", "component_id", "k", "e", "ell", "cycle_count"]
PROBE_COLUMNS = ["seed", "k", "samples", "mean_steps", "mean_within_s_steps",
                 "max_within_s_steps", "tree_samples", "tree_violations"]

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_UNWRITABLE = 3


class EmitError(OSError):
    """Output path could not be written"""


@dataclass
class CliInvocation:
    subcommand: str
    n: Optional[int] = None
    d: Optional[int] = None
    epsilon: Optional[float] = None
    m: Optional[int] = None
    seeds: List[int] = field(default_factory=list)
    trials: Optional[int] = None
    probes: int = Config.PROBES_PER_RUN
    max_walk_steps: Optional[int] = None
    policy: str = Config.BOTH_FREE_POLICY
    format: str = "json"
    output: Optional[str] = None
    workers: int = Config.MAX_WORKERS
    M: float = Config.BOUND_CONSTANT_M
    dump_graphs: Optional[str] = None

    def resolved_seeds(self) -> List[int]:
        if self.seeds:
            return list(self.seeds)
        return derive_seeds(Config.DEFAULT_SEED, self.trials or 1)

    def experiment_config(self) -> ExperimentConfig:
        probes = self.probes
        if self.subcommand in ("verify", "census"):
            probes = 0
        return ExperimentConfig(
            n=self.n, d=self.d, epsilon=self.epsilon, m=self.m,
            seeds=tuple(self.resolved_seeds()),
            probes_per_run=probes,
            M=self.M,
            max_walk_steps=self.max_walk_steps,
            both_free_policy=self.policy,
            check_oracles=self.subcommand == "verify" and self.n <= Config.ORACLE_MAX_N,
            workers=self.workers,
            export_graphs=self.dump_graphs is not None,
        )


# ----------------------------------------------------------------------
# argument parsing
# ----------------------------------------------------------------------
def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _non_negative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return value


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must be a 64-bit unsigned integer, got {text}")
    return value


def _open_unit(text: str) -> float:
    value = float(text)
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"epsilon must be in (0, 1), got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0 or math.isinf(value):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rwi-sim",
                                 description="Random walk insertion: experiments and bound checks")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--n", type=_positive_int)
    ap.add_argument("--d", type=_positive_int)
    load = ap.add_mutually_exclusive_group()
    load.add_argument("--epsilon", type=_open_unit, help="slack; m = floor((1-eps)dn)")
    load.add_argument("--m", type=_non_negative_int, help="explicit item count")
    ap.add_argument("--seed", dest="seeds", type=_seed, action="append", default=[],
                    help="repeatable; default derives --trials seeds from a fixed root")
    ap.add_argument("--trials", type=_positive_int)
    ap.add_argument("--probes", type=_non_negative_int, default=Config.PROBES_PER_RUN)
    ap.add_argument("--max-walk-steps", type=_positive_int)
    ap.add_argument("--policy", choices=[p.value for p in BothFreePolicy], default=Config.BOTH_FREE_POLICY)
    ap.add_argument("--format", choices=FORMATS, default="json")
    ap.add_argument("--output", help="JSON file, or prefix for the three CSV files")
    ap.add_argument("--workers", type=_positive_int, default=Config.MAX_WORKERS)
    ap.add_argument("--M", type=_positive_float, default=Config.BOUND_CONSTANT_M)
    ap.add_argument("--dump-graphs", metavar="PREFIX",
                    help="write D and D' edge lists and eviction traces per seed")
    return ap


def parse_args(argv: Optional[Sequence[str]] = None) -> CliInvocation:
    """Validated invocation; usage problems exit through argparse with status 2"""
    ap = build_parser()
    args = ap.parse_args(argv)

    if args.seeds and args.trials is not None:
        ap.error("--seed and --trials are mutually exclusive")
    if args.subcommand == "bounds":
        if args.d is None:
            ap.error("bounds requires --d")
        if args.n is not None and args.n < 2:
            ap.error("--n must be at least 2")
        if args.dump_graphs is not None:
            ap.error("--dump-graphs does not apply to bounds")
    else:
        if args.n is None or args.d is None:
            ap.error(f"{args.subcommand} requires --n and --d")
        if args.n < 2:
            ap.error("--n must be at least 2")
        if args.epsilon is None and args.m is None:
            ap.error(f"{args.subcommand} requires --epsilon or --m")
        if args.m is not None and args.m > args.n * args.d - 1:
            ap.error(f"--m must be at most dn - 1 = {args.n * args.d - 1}")
    if args.format == "csv" and args.output is None and args.subcommand != "bounds":
        ap.error("--format csv needs --output")

    return CliInvocation(
        subcommand=args.subcommand, n=args.n, d=args.d, epsilon=args.epsilon, m=args.m,
        seeds=args.seeds, trials=args.trials, probes=args.probes,
        max_walk_steps=args.max_walk_steps, policy=args.policy, format=args.format,
        output=args.output, workers=args.workers, M=args.M,
        dump_graphs=args.dump_graphs,
    )


# ----------------------------------------------------------------------
# output
# ----------------------------------------------------------------------
def _format_float(value: float) -> str:
    if math.isnan(value) or math.isinf(value):
        return "null"
    text = format(value, ".17g")
    if "e" not in text and "." not in text and "n" not in text:
        text += ".0"
    return text


def dumps_json(obj: Any) -> str:
    """JSON with sorted keys and floats at 17 significant digits"""
    def encode(value: Any) -> str:
        if isinstance(value, bool) or value is None:
            return json.dumps(value)
        if isinstance(value, int):
            return str(int(value))
        if isinstance(value, float):
            return _format_float(value)
        if isinstance(value, str):
            return json.dumps(value, ensure_ascii=False)
        if isinstance(value, dict):
            items = sorted((str(k), v) for k, v in value.items())
            return "{" + ", ".join(f"{json.dumps(k, ensure_ascii=False)}: {encode(v)}" for k, v in items) + "}"
        if isinstance(value, (list, tuple)):
            return "[" + ", ".join(encode(v) for v in value) + "]"
        if hasattr(value, "item"):  # numpy scalars
            return encode(value.item())
        raise TypeError(f"cannot serialise {type(value).__name__}")

    return encode(obj) + "\n"


def _write_text(path: Path, text: str):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as e:
        raise EmitError(f"cannot write {path}: {e}") from e


def _write_csv(path: Path, rows: List[Dict], columns: List[str]):
    frame = pd.DataFrame(rows, columns=columns)
    try:
        frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n", encoding="utf-8")
    except OSError as e:
        raise EmitError(f"cannot write {path}: {e}") from e


def csv_paths(output: str) -> Dict[str, Path]:
    base = Path(output)
    stem = base.name[:-4] if base.name.endswith(".csv") else base.name
    return {name: base.with_name(f"{stem}_{name}.csv") for name in ("walks", "census", "probes")}


def emit(result: ExperimentResult, format: str = "json", path: Optional[str] = None,
         subcommand: str = "run"):
    """
    Byte-deterministic output. JSON goes to `path` (stdout when None); CSV
    writes `<path>_walks.csv`, `<path>_census.csv` and `<path>_probes.csv`.
    """
    if format == "json":
        document = result.to_dict()
        if subcommand == "census":
            for seed in document["seeds"]:
                seed.pop("probe", None)
        text = dumps_json(document)
        if path is None:
            sys.stdout.write(text)
        else:
            _write_text(Path(path), text)
            logger.info(f"wrote {path}")
        return

    if format != "csv":
        raise ValueError(f"unknown format: {format}")
    if path is None:
        raise ValueError("CSV output needs a path")
    tables = {
        "walks": (result.walk_rows(), WALK_COLUMNS),
        "census": (result.census_rows(), CENSUS_COLUMNS),
        "probes": (result.probe_rows(), PROBE_COLUMNS),
    }
    wanted = {"census": ["census"], "probe": ["probes"]}.get(subcommand, list(tables))
    for name, target in csv_paths(path).items():
        if name in wanted:
            rows, columns = tables[name]
            _write_csv(target, rows, columns)
            logger.info(f"wrote {target}")


def graph_paths(prefix: str, seed: int) -> Dict[str, Path]:
    base = Path(prefix)
    return {name: base.with_name(f"{base.name}_seed{seed}_{name}.csv")
            for name in ("d_edges", "dprime_edges", "evictions")}


def emit_graphs(result: ExperimentResult, prefix: str):
    """Per seed: `item,tail,head` for D and D', and `item,from,to` per eviction"""
    for seed_result in result.seeds:
        for name, target in graph_paths(prefix, seed_result.seed).items():
            _write_text(target, seed_result.exports.get(name, ""))
            logger.info(f"wrote {target}")


def emit_bounds(table: Dict, format: str = "json", path: Optional[str] = None):
    if format == "json":
        text = dumps_json(table)
        if path is None:
            sys.stdout.write(text)
        else:
            _write_text(Path(path), text)
        return
    frame = pd.DataFrame(table["theorem_bounds"], columns=["epsilon", "theorem_bound", "in_regime"])
    text = frame.to_csv(index=False, float_format="%.17g", lineterminator="\n")
    if path is None:
        sys.stdout.write(text)
    else:
        _write_text(Path(path), text)


def failure_summary(result: ExperimentResult) -> str:
    return dumps_json({"passed": False, "failures": result.failures()})


# ----------------------------------------------------------------------
# main
# ----------------------------------------------------------------------
def setup_logging():
    handlers = [logging.StreamHandler(sys.stderr)]
    if Config.LOG_FILE:
        handlers.append(logging.FileHandler(Config.LOG_FILE, encoding="utf-8"))
    logging.basicConfig(level=Config.LOG_LEVEL,
                        format="%(levelname)s %(name)s: %(message)s",
                        handlers=handlers)


def main(argv: Optional[Sequence[str]] = None) -> int:
    setup_logging()
    problems = Config.validate_config()
    if problems:
        for problem in problems:
            logger.error(problem)
        return EXIT_USAGE

    invocation = parse_args(argv)

    if invocation.subcommand == "bounds":
        table = bounds_table(invocation.d, invocation.M, invocation.n, invocation.epsilon)
        try:
            emit_bounds(table, invocation.format, invocation.output)
        except EmitError as e:
            logger.error(str(e))
            return EXIT_UNWRITABLE
        return EXIT_OK

    try:
        config = invocation.experiment_config()
    except InvalidConfigError as e:
        logger.error(f"invalid configuration: {e}")
        return EXIT_USAGE

    result = run_experiment(config)

    try:
        emit(result, invocation.format, invocation.output, invocation.subcommand)
        if invocation.dump_graphs is not None:
            emit_graphs(result, invocation.dump_graphs)
    except EmitError as e:
        logger.error(str(e))
        return EXIT_UNWRITABLE

    for warning in result.warnings():
        logger.warning(warning)

    if not result.passed:
        sys.stderr.write(failure_summary(result))
        print(f"❌ {len(result.failures())} deterministic checks failed", file=sys.stderr)
        return EXIT_FAILED
    print("✅ all deterministic checks passed", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
