"""
Experiment harness for RWI
Seeded end-to-end runs: insert m items, analyse the final D, verify the
deterministic lemmas, compare against the bound formulas and run the
probe-walk study
"""

import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import repeat
from typing import Dict, FrozenSet, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from config.config import Config
from . import __version__
from .bounds import (
    component_count_bound,
    epsilon_threshold,
    insertion_time_accounting,
    k0_bound,
    large_component_tail,
    max_component_allowance,
    multi_cycle_bound,
    theorem_bound,
    walk_exit_bound,
)
from .allocation_graph import Orientation
from .core_table import InvalidConfigError, Item, Table, TableConfig, WalkCapExceededError
from .random_source import RandomSource, uniform_index
from .structure_analysis import (
    MULTIPLICITY,
    CensusReport,
    OracleVerdict,
    SaturatedSetResult,
    StructureVerdict,
    SubsetVerdict,
    census,
    compute_S,
    verify_component_structure,
    verify_oracles,
    verify_saturated_subset,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExperimentConfig:
    """
    One experiment over several seeds. `m` overrides ⌊(1-ε)dn⌋ when given;
    ε then defaults to the slack 1 - m/(dn) for the bound formulas.
    """
    n: int
    d: int
    epsilon: Optional[float] = None
    m: Optional[int] = None
    seeds: Tuple[int, ...] = (Config.DEFAULT_SEED,)
    probes_per_run: int = Config.PROBES_PER_RUN
    M: float = Config.BOUND_CONSTANT_M
    max_walk_steps: Optional[int] = None
    both_free_policy: str = Config.BOTH_FREE_POLICY
    neighbor_counting: str = Config.NEIGHBOR_COUNTING
    check_oracles: bool = False
    workers: int = Config.MAX_WORKERS
    export_graphs: bool = False

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.n < 2:
            raise InvalidConfigError(f"n must be at least 2, got {self.n}")
        if self.d < 1:
            raise InvalidConfigError(f"d must be at least 1, got {self.d}")
        if self.epsilon is None and self.m is None:
            raise InvalidConfigError("either epsilon or m is required")
        if self.epsilon is not None and not 0 < self.epsilon < 1:
            raise InvalidConfigError(f"epsilon must be in (0, 1), got {self.epsilon}")
        if self.m is not None and self.m < 0:
            raise InvalidConfigError(f"m must be non-negative, got {self.m}")
        if self.item_count > self.n * self.d - 1:
            raise InvalidConfigError(f"m = {self.item_count} leaves no unsaturated bin "
                                     f"(dn - 1 = {self.n * self.d - 1})")
        if not self.seeds:
            raise InvalidConfigError("at least one seed is required")
        if any(not 0 <= s < 2 ** 64 for s in self.seeds):
            raise InvalidConfigError("seeds must be 64-bit unsigned integers")
        if self.probes_per_run < 0:
            raise InvalidConfigError(f"probes_per_run must be non-negative, got {self.probes_per_run}")
        if self.M <= 0:
            raise InvalidConfigError(f"M must be positive, got {self.M}")
        if self.workers < 1:
            raise InvalidConfigError(f"workers must be positive, got {self.workers}")
        # validates policy and walk cap
        self.table_config(self.seeds[0])

    @property
    def item_count(self) -> int:
        if self.m is not None:
            return self.m
        # the small offset keeps ⌊0.3·dn⌋ from landing one below due to rounding
        return int(math.floor((1 - self.epsilon) * self.d * self.n + 1e-9))

    @property
    def effective_epsilon(self) -> float:
        if self.epsilon is not None:
            return self.epsilon
        return 1 - self.item_count / (self.d * self.n)

    def table_config(self, seed: int) -> TableConfig:
        return TableConfig(n=self.n, d=self.d, seed=seed,
                           max_walk_steps=self.max_walk_steps,
                           both_free_policy=self.both_free_policy)

    def manifest(self) -> Dict:
        eps = self.effective_epsilon
        fields = asdict(self)
        fields["seeds"] = list(self.seeds)
        fields["max_walk_steps"] = self.table_config(self.seeds[0]).max_walk_steps
        return {
            "app": Config.APP_NAME,
            "version": __version__,
            "numpy_version": np.__version__,
            "config": fields,
            "m": self.item_count,
            "epsilon_effective": eps,
            "epsilon_threshold": epsilon_threshold(self.d, self.M),
            "theorem_regime": eps >= epsilon_threshold(self.d, self.M),
        }


# ----------------------------------------------------------------------
# probe study
# ----------------------------------------------------------------------
@dataclass
class ProbeBucket:
    k: int
    samples: int = 0
    steps_total: int = 0
    within_total: int = 0
    within_max: int = 0
    tree_samples: int = 0
    tree_violations: int = 0

    @property
    def mean_steps(self) -> Optional[float]:
        return self.steps_total / self.samples if self.samples else None

    @property
    def mean_within(self) -> Optional[float]:
        return self.within_total / self.samples if self.samples else None

    def merge(self, other: "ProbeBucket"):
        self.samples += other.samples
        self.steps_total += other.steps_total
        self.within_total += other.within_total
        self.within_max = max(self.within_max, other.within_max)
        self.tree_samples += other.tree_samples
        self.tree_violations += other.tree_violations

    def row(self) -> Dict:
        return {"k": self.k, "samples": self.samples, "mean_steps": self.mean_steps,
                "mean_within_s_steps": self.mean_within, "max_within_s_steps": self.within_max,
                "tree_samples": self.tree_samples, "tree_violations": self.tree_violations}


@dataclass
class ProbeStudy:
    buckets: Dict[int, ProbeBucket]
    samples: int
    capped: int
    outside_s: int
    unbucketed: int
    saturated_count: int
    steps_total: int
    walk_start_estimate: float
    accounting_estimate: float

    @property
    def tree_violations(self) -> int:
        return sum(b.tree_violations for b in self.buckets.values())

    def rows(self) -> List[Dict]:
        return [self.buckets[k].row() for k in sorted(self.buckets)]


def probe_study(table: Table, saturated_set: SaturatedSetResult, report: CensusReport,
                samples: int, rng: np.random.Generator,
                covered: Optional[FrozenSet[int]] = None) -> ProbeStudy:
    """
    Replacement walks from uniform saturated bins, bucketed by the size of
    the start's G_S component. Within-S steps in a tree component can never
    exceed its size; each sample is checked. Starts outside the census S but
    inside `covered` (the multiplicity closure) are counted, not bucketed.
    """
    n = table.n
    saturated = table.saturated_bins()
    inside = report.vertex_component >= 0
    buckets: Dict[int, ProbeBucket] = {}
    capped = outside = unbucketed = steps_total = 0
    covered = saturated_set.s if covered is None else covered

    for _ in range(samples if saturated else 0):
        start = saturated[uniform_index(rng, len(saturated))]
        walk = table.probe(start, rng, inside)
        steps_total += walk.steps
        capped += walk.capped
        comp_id = int(report.vertex_component[start])
        if comp_id < 0:
            if start in covered:
                unbucketed += 1
            else:
                outside += 1
            continue
        component = report.components[comp_id]
        bucket = buckets.setdefault(component.k, ProbeBucket(component.k))
        bucket.samples += 1
        bucket.steps_total += walk.steps
        bucket.within_total += walk.within_steps
        bucket.within_max = max(bucket.within_max, walk.within_steps)
        if component.is_tree:
            bucket.tree_samples += 1
            if walk.within_steps > component.k:
                bucket.tree_violations += 1
                logger.error(f"probe from bin {start} took {walk.within_steps} steps inside "
                             f"a tree component of size {component.k}")

    drawn = samples if saturated else 0
    mean_steps = steps_total / drawn if drawn else 0.0
    walk_start_estimate = (len(saturated) / n) ** 2 * mean_steps
    weighted = sum(k * count * k for k, count in report.size_histogram.items())
    accounting_estimate = 2 * (len(saturated_set.s) / n) * weighted / n

    return ProbeStudy(buckets=buckets, samples=drawn, capped=capped, outside_s=outside,
                      unbucketed=unbucketed,
                      saturated_count=len(saturated), steps_total=steps_total,
                      walk_start_estimate=walk_start_estimate,
                      accounting_estimate=accounting_estimate)


# ----------------------------------------------------------------------
# per-seed run
# ----------------------------------------------------------------------
@dataclass
class SeedResult:
    seed: int
    m: int
    inserted: int
    capped_items: List[int]
    walk_histogram: Dict[int, int]
    walk_total: int
    walk_max: int
    walk_count: int
    double_saturated: int
    zero_walk_mismatches: int
    load_histogram: Dict[int, int]
    saturated_count: int
    flip_count: int
    proof_s_size: int
    saturated_set: SaturatedSetResult = field(repr=False)
    census: CensusReport = field(repr=False)
    structure: StructureVerdict = field(repr=False)
    subset: SubsetVerdict = field(repr=False)
    invariant_violations: List[str] = field(default_factory=list)
    oracle: Optional[OracleVerdict] = None
    probe: Optional[ProbeStudy] = None
    bound_checks: Dict = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)
    exports: Dict[str, str] = field(default_factory=dict, repr=False)

    @property
    def mean_walk(self) -> Optional[float]:
        return self.walk_total / self.inserted if self.inserted else None

    @property
    def conditional_mean_walk(self) -> Optional[float]:
        return self.walk_total / self.walk_count if self.walk_count else None

    @property
    def walk_fraction(self) -> Optional[float]:
        return self.walk_count / self.inserted if self.inserted else None

    def failures(self) -> List[str]:
        """Deterministic-lemma violations; any entry fails the run"""
        found = [f"seed {self.seed}: {v}" for v in self.invariant_violations]
        if not self.subset.ok:
            found.append(f"seed {self.seed}: saturated bins outside S {self.subset.violations[:10]}")
        if self.zero_walk_mismatches:
            found.append(f"seed {self.seed}: {self.zero_walk_mismatches} insertions break the "
                         f"zero-walk characterisation")
        if self.walk_count != self.double_saturated:
            found.append(f"seed {self.seed}: {self.walk_count} walks for "
                         f"{self.double_saturated} doubly saturated arrivals")
        if self.oracle is not None and not self.oracle.ok:
            found.append(f"seed {self.seed}: oracle mismatch {self.oracle}")
        if self.probe is not None and self.probe.tree_violations:
            found.append(f"seed {self.seed}: {self.probe.tree_violations} probe walks overstayed "
                         f"a tree component")
        if self.probe is not None and self.probe.outside_s:
            found.append(f"seed {self.seed}: {self.probe.outside_s} saturated probe starts outside S")
        return found

    def to_dict(self) -> Dict:
        report = self.census
        return {
            "seed": self.seed,
            "m": self.m,
            "inserted": self.inserted,
            "not_inserted": self.m - self.inserted,
            "walk_cap_exceeded": list(self.capped_items),
            "walks": {
                "mean": self.mean_walk,
                "max": self.walk_max,
                "total_steps": self.walk_total,
                "walk_count": self.walk_count,
                "walk_fraction": self.walk_fraction,
                "conditional_mean": self.conditional_mean_walk,
                "double_saturated_arrivals": self.double_saturated,
                "histogram": {str(k): v for k, v in sorted(self.walk_histogram.items())},
            },
            "loads": {
                "histogram": {str(k): v for k, v in sorted(self.load_histogram.items())},
                "saturated_bins": self.saturated_count,
                "flips": self.flip_count,
            },
            "structure": {
                "a_size": len(self.saturated_set.a),
                "t_size": len(self.saturated_set.t),
                "s_size": len(self.saturated_set.s),
                "s_size_multiplicity": self.proof_s_size,
                "layer_sizes": [len(layer) for layer in self.saturated_set.layers],
                "census": report.summary(),
                "flags": self.structure.counts(),
            },
            "verdicts": {
                "invariants_ok": not self.invariant_violations,
                "invariant_violations": list(self.invariant_violations),
                "saturated_subset_ok": self.subset.ok,
                "saturated_outside_s": list(self.subset.violations),
                "oracle": None if self.oracle is None else asdict(self.oracle),
            },
            "bounds": self.bound_checks,
            "probe": None if self.probe is None else {
                "samples": self.probe.samples,
                "capped": self.probe.capped,
                "unbucketed": self.probe.unbucketed,
                "saturated_bins": self.probe.saturated_count,
                "walk_start_estimate": self.probe.walk_start_estimate,
                "accounting_estimate": self.probe.accounting_estimate,
                "buckets": self.probe.rows(),
            },
            "warnings": list(self.warnings),
        }


def _bound_checks(config: ExperimentConfig, result: SeedResult) -> Tuple[Dict, List[str]]:
    """Statistical comparisons; they only ever produce warnings"""
    eps, d, n, M = config.effective_epsilon, config.d, config.n, config.M
    slack = Config.STAT_SLACK
    warnings = []

    if result.capped_items:
        warnings.append(f"seed {result.seed}: {len(result.capped_items)} insertions hit the walk cap "
                        f"and were rolled back; walk histogram sums to {result.inserted} of m={result.m}")

    ceiling = theorem_bound(eps, M)
    mean = result.mean_walk or 0.0
    if mean > ceiling:
        warnings.append(f"seed {result.seed}: mean walk {mean:.4g} exceeds 4M/eps^2 = {ceiling:.4g}")

    k0 = k0_bound(n, eps, d, M)
    allowance = max_component_allowance(n, eps, d, M)
    tail = large_component_tail(n, k0, eps, d, M)
    if result.census.max_size > allowance:
        warnings.append(f"seed {result.seed}: largest G_S component {result.census.max_size} "
                        f"exceeds max(1, ceil(k0)+2) = {allowance} "
                        f"(tail bound {tail:.4g})")
    cycle_bound = multi_cycle_bound(n, d, k0)
    if result.census.multi_cycle_count:
        warnings.append(f"seed {result.seed}: {result.census.multi_cycle_count} components "
                        f"with two or more cycles (union bound {cycle_bound:.4g})")
    if result.structure.ell_flags:
        warnings.append(f"seed {result.seed}: {len(result.structure.ell_flags)} components "
                        f"with ell < (k+2)/2")

    rows = []
    for k, observed in result.census.size_histogram.items():
        bound = component_count_bound(n, k, eps, d, M)
        rows.append({"k": k, "observed": observed, "bound": bound})
        if observed > slack * bound and observed >= Config.MIN_BUCKET_SAMPLES:
            warnings.append(f"seed {result.seed}: {observed} components of size {k} "
                            f"vs bound {bound:.4g}")

    exit_rows = []
    if result.probe is not None:
        for k in sorted(result.probe.buckets):
            bucket = result.probe.buckets[k]
            if not bucket.samples:
                continue
            # the shortest cycle (two parallel edges) gives the largest exit bound
            exit_bound = walk_exit_bound(k, 0 if bucket.tree_samples == bucket.samples else 2, d)
            exit_rows.append({"k": k, "mean_within_s_steps": bucket.mean_within,
                              "walk_exit_bound": exit_bound})
            if bucket.samples < Config.MIN_BUCKET_SAMPLES:
                continue
            if bucket.mean_within > slack * 2 * bucket.k:
                warnings.append(f"seed {result.seed}: bucket k={bucket.k} mean within-S steps "
                                f"{bucket.mean_within:.4g} exceeds {slack:g}*2k")
            elif bucket.mean_within > slack * exit_bound:
                warnings.append(f"seed {result.seed}: bucket k={bucket.k} mean within-S steps "
                                f"{bucket.mean_within:.4g} exceeds {slack:g}*{exit_bound:.4g}")

    checks = {
        "theorem_bound": ceiling,
        "mean_within_theorem_bound": mean <= ceiling,
        "k0_bound": k0,
        "max_component_allowance": allowance,
        "max_component_within_allowance": result.census.max_size <= allowance,
        "large_component_tail": tail,
        "multi_cycle_bound": cycle_bound,
        "multi_cycle_count": result.census.multi_cycle_count,
        "insertion_time_accounting": insertion_time_accounting(eps, d, M),
        "component_counts": rows,
        "walk_exit": exit_rows,
    }
    return checks, warnings


def run_seed(config: ExperimentConfig, seed: int, source: Optional[RandomSource] = None,
             progress: bool = False, m: Optional[int] = None) -> SeedResult:
    """
    Insert m items into a fresh table, then analyse and verify the final state.
    `m` overrides the configured item count for scripted replays, which may
    fill every slot as long as each insertion still finds a free one.
    """
    m = config.item_count if m is None else m
    table = Table(config.table_config(seed), source)
    table.graph.reserve(m)
    logger.info(f"seed {seed}: inserting {m} items into n={config.n}, d={config.d}")

    steps: List[int] = []
    capped: List[int] = []
    traces: List[str] = []
    double_saturated = mismatches = 0
    for item_id in tqdm(range(m), desc=f"seed {seed}", disable=not progress, leave=False):
        p, q = table.generate_pair()
        both_full = table.is_saturated(p) and table.is_saturated(q)
        try:
            outcome = table.insert(Item(item_id, p, q))
        except WalkCapExceededError:
            # rolled back by the table; the item stays out
            capped.append(item_id)
            continue
        double_saturated += both_full
        mismatches += (outcome.walk_steps == 0) == both_full
        steps.append(outcome.walk_steps)
        if config.export_graphs:
            traces.append(outcome.trace_lines())

    walk_counts = np.bincount(np.asarray(steps, dtype=np.int64)) if steps else np.zeros(0, dtype=np.int64)
    walk_histogram = {r: int(c) for r, c in enumerate(walk_counts.tolist()) if c}
    loads = table.loads()
    load_histogram = dict(sorted(Counter(loads.tolist()).items()))

    view = table.graph.snapshot()
    saturated_set = compute_S(view, config.d, config.neighbor_counting)
    report = census(view, saturated_set.s, saturated_set.a)
    # saturated ⊆ S holds for the multiplicity closure; the distinct one can be smaller
    if config.neighbor_counting == MULTIPLICITY:
        proof_set = saturated_set
    else:
        proof_set = compute_S(view, config.d, MULTIPLICITY)

    oracle = None
    if config.check_oracles:
        oracle = verify_oracles(view, config.d, saturated_set, report, config.neighbor_counting)

    probe = None
    if config.probes_per_run:
        probe = probe_study(table, saturated_set, report, config.probes_per_run,
                            table.source.probe_stream(), covered=proof_set.s)

    result = SeedResult(
        seed=seed,
        m=m,
        inserted=len(steps),
        capped_items=capped,
        walk_histogram=walk_histogram,
        walk_total=int(sum(steps)),
        walk_max=max(steps, default=0),
        walk_count=len(steps) - walk_histogram.get(0, 0),
        double_saturated=double_saturated,
        zero_walk_mismatches=mismatches,
        load_histogram=load_histogram,
        saturated_count=int(np.count_nonzero(loads >= config.d)),
        flip_count=table.graph.flip_count,
        proof_s_size=len(proof_set.s),
        saturated_set=saturated_set,
        census=report,
        structure=verify_component_structure(report),
        subset=verify_saturated_subset(table, proof_set.s),
        invariant_violations=table.check_invariants(),
        oracle=oracle,
        probe=probe,
    )
    result.bound_checks, result.warnings = _bound_checks(config, result)
    if config.export_graphs:
        result.exports = {
            "d_edges": table.graph.export_edges(Orientation.D),
            "dprime_edges": table.graph.export_edges(Orientation.DPRIME),
            "evictions": "".join(traces),
        }

    for failure in result.failures():
        logger.error(failure)
    logger.info(f"seed {seed}: mean r={result.mean_walk}, max r={result.walk_max}, "
                f"|S|={len(saturated_set.s)}, components={len(report.components)}")
    return result


# ----------------------------------------------------------------------
# experiment
# ----------------------------------------------------------------------
@dataclass
class ExperimentResult:
    config: ExperimentConfig
    seeds: List[SeedResult]

    @property
    def passed(self) -> bool:
        return not self.failures()

    def failures(self) -> List[str]:
        return [f for result in self.seeds for f in result.failures()]

    def warnings(self) -> List[str]:
        return [w for result in self.seeds for w in result.warnings]

    def aggregate(self) -> Dict:
        """Pooled statistics built from integer totals, independent of seed order"""
        total_m = sum(r.inserted for r in self.seeds)
        total_steps = sum(r.walk_total for r in self.seeds)
        walks = sum(r.walk_count for r in self.seeds)
        histogram: Counter = Counter()
        sizes: Counter = Counter()
        buckets: Dict[int, ProbeBucket] = {}
        for r in self.seeds:
            histogram.update(r.walk_histogram)
            sizes.update(r.census.size_histogram)
            if r.probe is not None:
                for k, bucket in r.probe.buckets.items():
                    buckets.setdefault(k, ProbeBucket(k)).merge(bucket)
        return {
            "seed_count": len(self.seeds),
            "items_requested": sum(r.m for r in self.seeds),
            "insertions": total_m,
            "walk_cap_exceeded": sum(len(r.capped_items) for r in self.seeds),
            "histograms_cover_all_items": all(r.inserted == r.m for r in self.seeds),
            "walk_mean": total_steps / total_m if total_m else None,
            "walk_max": max((r.walk_max for r in self.seeds), default=0),
            "walk_fraction": walks / total_m if total_m else None,
            "walk_conditional_mean": total_steps / walks if walks else None,
            "walk_histogram": {str(k): v for k, v in sorted(histogram.items())},
            "component_size_histogram": {str(k): v for k, v in sorted(sizes.items())},
            "max_component_size": max((r.census.max_size for r in self.seeds), default=0),
            "multi_cycle_components": sum(r.census.multi_cycle_count for r in self.seeds),
            "ell_flags": sum(len(r.structure.ell_flags) for r in self.seeds),
            "probe_buckets": [buckets[k].row() for k in sorted(buckets)],
        }

    def to_dict(self) -> Dict:
        failures = self.failures()
        return {
            "manifest": self.config.manifest(),
            "aggregate": self.aggregate(),
            "seeds": [r.to_dict() for r in self.seeds],
            "warnings": self.warnings(),
            "failures": failures,
            "passed": not failures,
        }

    # CSV tables, rows sorted by (seed, index)
    def walk_rows(self) -> List[Dict]:
        return [{"seed": r.seed, "walk_steps": k, "count": v}
                for r in sorted(self.seeds, key=lambda r: r.seed)
                for k, v in sorted(r.walk_histogram.items())]

    def census_rows(self) -> List[Dict]:
        return [dict(seed=r.seed, **row)
                for r in sorted(self.seeds, key=lambda r: r.seed)
                for row in r.census.rows()]

    def probe_rows(self) -> List[Dict]:
        return [dict(seed=r.seed, **row)
                for r in sorted(self.seeds, key=lambda r: r.seed) if r.probe is not None
                for row in r.probe.rows()]


def run_experiment(config: ExperimentConfig, progress: Optional[bool] = None) -> ExperimentResult:
    """Run every seed (optionally in a process pool) and merge in seed-list order"""
    progress = Config.SHOW_PROGRESS if progress is None else progress
    logger.info(f"experiment: n={config.n}, d={config.d}, m={config.item_count}, "
                f"eps={config.effective_epsilon:.4g}, seeds={len(config.seeds)}")

    if config.workers > 1 and len(config.seeds) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(run_seed, repeat(config), config.seeds))
    else:
        results = [run_seed(config, seed, progress=progress)
                   for seed in tqdm(config.seeds, desc="seeds", disable=not progress)]

    experiment = ExperimentResult(config, results)
    if experiment.passed:
        logger.info("all deterministic checks passed")
    else:
        logger.error(f"{len(experiment.failures())} deterministic check failures")
    return experiment

