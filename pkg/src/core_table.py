"""
Two-choice bin table with Random Walk Insertion
n bins of capacity d; every item has two candidate bins and lives in one of them
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from config.config import Config
from .allocation_graph import (
    AllocationGraph,
    DuplicateItemError,
    Orientation,
    UnknownItemError,
)
from .random_source import RandomSource, SeededRandomSource

logger = logging.getLogger(__name__)

__all__ = [
    "BothFreePolicy", "TableConfig", "Item", "Eviction", "InsertOutcome", "ProbeWalk",
    "Table", "InvalidConfigError", "DuplicateItemError", "UnknownItemError",
    "WalkCapExceededError", "new_table", "generate_pair", "insert", "lookup", "probe_walk",
]


class InvalidConfigError(ValueError):
    """Table or experiment parameters out of range"""


class WalkCapExceededError(RuntimeError):
    """Loop A ran past max_walk_steps, or no unsaturated bin exists"""

    def __init__(self, item_id: int, steps: int, reason: str):
        super().__init__(f"item {item_id}: {reason} after {steps} steps")
        self.item_id = item_id
        self.steps = steps


class BothFreePolicy(str, Enum):
    FOLLOW_D = "follow_d"
    PREFER_FIRST = "prefer_first"


@dataclass(frozen=True)
class TableConfig:
    """Table parameters; max_walk_steps defaults to MAX_WALK_FACTOR·n·d, policy to BOTH_FREE_POLICY"""
    n: int
    d: int
    seed: int = Config.DEFAULT_SEED
    max_walk_steps: Optional[int] = None
    both_free_policy: Optional[BothFreePolicy] = None

    def __post_init__(self):
        if self.n < 2:
            raise InvalidConfigError(f"n must be at least 2 (two distinct choices), got {self.n}")
        if self.d < 1:
            raise InvalidConfigError(f"d must be at least 1, got {self.d}")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.max_walk_steps is None:
            object.__setattr__(self, "max_walk_steps", Config.MAX_WALK_FACTOR * self.n * self.d)
        if self.max_walk_steps < 1:
            raise InvalidConfigError(f"max_walk_steps must be positive, got {self.max_walk_steps}")
        policy = Config.BOTH_FREE_POLICY if self.both_free_policy is None else self.both_free_policy
        try:
            policy = BothFreePolicy(policy)
        except ValueError:
            raise InvalidConfigError(f"unknown both-free policy: {policy}") from None
        object.__setattr__(self, "both_free_policy", policy)

    @property
    def slots(self) -> int:
        return self.n * self.d


@dataclass(frozen=True)
class Item:
    id: int
    p: int
    q: int

    def __post_init__(self):
        if self.p == self.q:
            raise InvalidConfigError(f"item {self.id} needs two distinct bins, got {self.p} twice")


class Eviction(NamedTuple):
    item_id: int
    from_bin: int
    to_bin: int


@dataclass
class InsertOutcome:
    item_id: int
    placed_bin: int
    walk_steps: int
    eviction_trace: List[Eviction] = field(default_factory=list)

    def trace_lines(self) -> str:
        """`item,from,to` per eviction, one per line"""
        return "".join(f"{e.item_id},{e.from_bin},{e.to_bin}\n" for e in self.eviction_trace)


@dataclass
class ProbeWalk:
    start_bin: int
    steps: int
    within_steps: int
    capped: bool


class Table:
    """
    RWI table.

    Placement lives in one place: the D' head of each item's edge in
    `self.graph`. `self.bins` holds the resident ids per bin in slot order,
    which is what the uniform resident pick indexes into.
    """

    def __init__(self, config: TableConfig, source: Optional[RandomSource] = None,
                 audit_log: Optional[bool] = None):
        self.config = config
        self.n = config.n
        self.d = config.d
        self.source = source if source is not None else SeededRandomSource(config.seed)
        self.graph = AllocationGraph(config.n, config.d,
                                     audit_log=Config.FLIP_AUDIT_LOG if audit_log is None else audit_log)
        self.bins: List[List[int]] = [[] for _ in range(config.n)]
        self.inserted_count = 0

    # ------------------------------------------------------------------
    # loads
    # ------------------------------------------------------------------
    def load(self, bin_id: int) -> int:
        return len(self.bins[bin_id])

    def loads(self) -> np.ndarray:
        return np.fromiter((len(b) for b in self.bins), dtype=np.int64, count=self.n)

    def is_saturated(self, bin_id: int) -> bool:
        return len(self.bins[bin_id]) >= self.d

    def saturated_bins(self) -> List[int]:
        d = self.d
        return [v for v, residents in enumerate(self.bins) if len(residents) >= d]

    # ------------------------------------------------------------------
    # operations
    # ------------------------------------------------------------------
    def generate_pair(self) -> Tuple[int, int]:
        return self.source.next_pair(self.n)

    def insert(self, item: Item) -> InsertOutcome:
        p, q = item.p, item.q
        for bin_id in (p, q):
            if not 0 <= bin_id < self.n:
                raise InvalidConfigError(f"item {item.id}: bin {bin_id} outside [0, {self.n})")
        if self.graph.contains(item.id):
            raise DuplicateItemError(f"item {item.id} already inserted")
        if self.inserted_count >= self.config.slots:
            raise WalkCapExceededError(item.id, 0, "every bin is saturated")

        # D orientation is drawn for every item, walk or not
        head_d = self.source.d_head(p, q)
        bins, d = self.bins, self.d
        p_free = len(bins[p]) < d
        q_free = len(bins[q]) < d

        if p_free and q_free:
            placed = head_d if self.config.both_free_policy == BothFreePolicy.FOLLOW_D else p
        elif p_free:
            placed = p
        elif q_free:
            placed = q
        else:
            return self._walk(item, head_d)

        bins[placed].append(item.id)
        self.graph.record_edge(item.id, p, q, head_d, placed)
        self.inserted_count += 1
        return InsertOutcome(item.id, placed, 0, [])

    def _walk(self, item: Item, head_d: int) -> InsertOutcome:
        """Loop A: carry an item, swap it into a saturated bin, continue with the evictee"""
        bins, d, graph, source = self.bins, self.d, self.graph, self.source
        cap = self.config.max_walk_steps

        b = source.walk_start(item.p, item.q)
        graph.record_edge(item.id, item.p, item.q, head_d, b)
        carried = item.id
        trace: List[Eviction] = []
        undo: List[Tuple[int, int, int]] = []

        while len(bins[b]) >= d:
            if len(trace) >= cap:
                self._rollback(item.id, undo)
                raise WalkCapExceededError(item.id, len(trace), f"walk exceeded cap {cap}")
            residents = bins[b]
            slot = source.resident_index(len(residents)) if len(residents) > 1 else 0
            evicted = residents[slot]
            residents[slot] = carried
            undo.append((b, slot, evicted))
            c = graph.flip(evicted, old_head_load=len(residents))
            trace.append(Eviction(evicted, b, c))
            carried, b = evicted, c

        bins[b].append(carried)
        self.inserted_count += 1
        if logger.isEnabledFor(logging.DEBUG):
            logger.debug(f"item {item.id} walked {len(trace)} steps: {trace}")
        return InsertOutcome(item.id, graph.head(item.id), len(trace), trace)

    def _rollback(self, item_id: int, undo: List[Tuple[int, int, int]]):
        for b, slot, evicted in reversed(undo):
            self.bins[b][slot] = evicted
            self.graph._unflip(evicted, old_head_load=len(self.bins[b]))
        self.graph._discard(item_id)
        logger.error(f"item {item_id}: walk rolled back after {len(undo)} steps")

    def insert_generated(self, item_id: int) -> InsertOutcome:
        p, q = self.generate_pair()
        return self.insert(Item(item_id, p, q))

    def lookup(self, item_id: int) -> int:
        return self.graph.head(item_id, Orientation.DPRIME)

    def choices(self, item_id: int) -> Tuple[int, int]:
        return self.graph.endpoints(item_id)

    def probe(self, start_bin: int, rng: np.random.Generator,
              inside: Optional[np.ndarray] = None) -> ProbeWalk:
        """
        Replacement walk simulated without moving anything: from a saturated
        bin, hop to the other choice of a uniform resident until an unsaturated
        bin is reached. `inside` is a boolean vertex mask; steps taken from
        inside it before the walk first leaves it are counted as within_steps.
        """
        if not 0 <= start_bin < self.n:
            raise IndexError(f"bin {start_bin} outside [0, {self.n})")
        bins, d, graph = self.bins, self.d, self.graph
        cap = self.config.max_walk_steps
        v = start_bin
        steps = within = 0
        left = inside is None
        while len(bins[v]) >= d:
            if steps >= cap:
                logger.warning(f"probe from bin {start_bin} hit the cap of {cap} steps")
                return ProbeWalk(start_bin, steps, within, True)
            if not left:
                if inside[v]:
                    within += 1
                else:
                    left = True
            residents = bins[v]
            x = residents[int(rng.integers(0, len(residents)))] if len(residents) > 1 else residents[0]
            v = graph.other_end(x, v)
            steps += 1
        return ProbeWalk(start_bin, steps, within, False)

    # ------------------------------------------------------------------
    # invariants
    # ------------------------------------------------------------------
    def check_invariants(self) -> List[str]:
        """Occupancy, conservation, residency and D/D' consistency; returns violations"""
        violations = []
        loads = self.loads()
        view = self.graph.snapshot()

        over = np.flatnonzero(loads > self.d)
        if over.size:
            violations.append(f"occupancy: bins over capacity {over[:10].tolist()}")

        if int(loads.sum()) != self.inserted_count:
            violations.append(f"conservation: loads sum to {int(loads.sum())}, "
                              f"inserted {self.inserted_count}")
        if view.edge_count != self.inserted_count:
            violations.append(f"conservation: {view.edge_count} edges for {self.inserted_count} items")

        # every resident's D' head is the bin it sits in, and that bin is one of its choices
        if self.inserted_count:
            resident_ids = np.fromiter((x for b in self.bins for x in b), dtype=np.int64,
                                       count=int(loads.sum()))
            resident_bins = np.repeat(np.arange(self.n), loads)
            ids = view.item_ids
            head_of = np.full(int(ids.max()) + 1 if ids.size else 0, -1, dtype=np.int64)
            head_of[ids] = view.head_dprime
            known = resident_ids < head_of.size
            misplaced = ~known
            misplaced[known] |= head_of[resident_ids[known]] != resident_bins[known]
            if np.any(misplaced):
                violations.append(f"residency: items not at their D' head "
                                  f"{resident_ids[misplaced][:10].tolist()}")
            if np.unique(resident_ids).size != resident_ids.size:
                violations.append("residency: an item sits in more than one slot")

        legal_dprime = (view.head_dprime == view.u) | (view.head_dprime == view.v)
        legal_d = (view.head_d == view.u) | (view.head_d == view.v)
        if not np.all(legal_dprime & legal_d):
            violations.append("eviction legality: a head lies outside its item's two choices")

        if not np.array_equal(view.in_degree_dprime, loads):
            bad = np.flatnonzero(view.in_degree_dprime != loads)
            violations.append(f"D' in-degree differs from load at bins {bad[:10].tolist()}")

        if not np.array_equal(view.undirected_degrees(Orientation.D),
                              view.undirected_degrees(Orientation.DPRIME)):
            violations.append("undirected degree differs between D and D'")

        if not np.array_equal(np.bincount(view.head_d, minlength=self.n), view.in_degree_d):
            violations.append("D in-degree tallies out of sync with edge heads")

        if self.graph.unsaturated_flip_count:
            violations.append(f"flip audit: {self.graph.unsaturated_flip_count} flips "
                              f"away from an unsaturated bin")
        return violations


def new_table(config: TableConfig, source: Optional[RandomSource] = None) -> Table:
    return Table(config, source)


def generate_pair(table: Table) -> Tuple[int, int]:
    return table.generate_pair()


def insert(table: Table, item: Item) -> InsertOutcome:
    return table.insert(item)


def lookup(table: Table, item_id: int) -> int:
    return table.lookup(item_id)


def probe_walk(table: Table, start_bin: int, rng_stream: np.random.Generator) -> int:
    """Steps of a non-mutating replacement walk; a cap hit is logged, not raised"""
    return table.probe(start_bin, rng_stream).steps
