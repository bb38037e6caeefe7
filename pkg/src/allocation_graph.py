"""
Twin digraphs D and D' over the allocation multigraph G
D keeps each item's original random orientation, D' follows current placements
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

_ABSENT = -1


class Orientation(str, Enum):
    D = "D"
    DPRIME = "Dprime"


class IllegalHeadError(ValueError):
    """Edge head outside its endpoints, or an edge with equal endpoints"""


class DuplicateItemError(ValueError):
    """Item id already present"""


class UnknownItemError(KeyError):
    """Item id never recorded"""


@dataclass(frozen=True)
class EdgeRecord:
    """One item as an edge of G with its heads in D and D'"""
    item_id: int
    endpoints: Tuple[int, int]  # unordered; kept in (p, q) order
    head_d: int
    head_dprime: int

    def tail(self, which: Orientation) -> int:
        head = self.head_d if which == Orientation.D else self.head_dprime
        u, v = self.endpoints
        return v if head == u else u


@dataclass(frozen=True)
class FlipAuditEntry:
    item_id: int
    old_head: int
    new_head: int
    old_head_load: int
    saturated: bool


@dataclass(frozen=True)
class DigraphView:
    """
    Immutable snapshot of D and D' as flat arrays.

    Edge i of the snapshot is item `item_ids[i]` with endpoints
    (`u[i]`, `v[i]`) and heads `head_d[i]` / `head_dprime[i]`.
    """
    n: int
    item_ids: np.ndarray
    u: np.ndarray
    v: np.ndarray
    head_d: np.ndarray
    head_dprime: np.ndarray
    in_degree_d: np.ndarray = field(repr=False)
    in_degree_dprime: np.ndarray = field(repr=False)

    @classmethod
    def from_edges(cls, n: int, edges: Sequence[Tuple[int, int]],
                   dprime_heads: Optional[Sequence[int]] = None) -> "DigraphView":
        """Build a view from (tail, head) pairs of D; D' copies D unless heads are given"""
        edges = list(edges)
        tails = np.array([t for t, _ in edges], dtype=np.int64)
        heads = np.array([h for _, h in edges], dtype=np.int64)
        if np.any(tails == heads):
            raise IllegalHeadError("edge endpoints must be distinct")
        if edges and (min(tails.min(), heads.min()) < 0 or max(tails.max(), heads.max()) >= n):
            raise IllegalHeadError(f"edge endpoint outside [0, {n})")
        dprime = heads.copy() if dprime_heads is None else np.asarray(dprime_heads, dtype=np.int64)
        if np.any((dprime != tails) & (dprime != heads)):
            raise IllegalHeadError("D' head must be an endpoint")
        return cls(
            n=n,
            item_ids=np.arange(len(edges), dtype=np.int64),
            u=tails,
            v=heads,
            head_d=heads,
            head_dprime=dprime,
            in_degree_d=np.bincount(heads, minlength=n).astype(np.int64),
            in_degree_dprime=np.bincount(dprime, minlength=n).astype(np.int64),
        )

    @property
    def edge_count(self) -> int:
        return int(self.u.size)

    def in_degree(self, vertex: int, which: Orientation = Orientation.D) -> int:
        if not 0 <= vertex < self.n:
            raise IndexError(f"vertex {vertex} outside [0, {self.n})")
        tallies = self.in_degree_d if which == Orientation.D else self.in_degree_dprime
        return int(tallies[vertex])

    def undirected_degrees(self, which: Orientation = Orientation.D) -> np.ndarray:
        """In-degree plus out-degree in the chosen digraph"""
        heads = self.head_d if which == Orientation.D else self.head_dprime
        tails = np.where(heads == self.u, self.v, self.u)
        return (np.bincount(heads, minlength=self.n) + np.bincount(tails, minlength=self.n)).astype(np.int64)

    def underlying_multigraph(self) -> Dict[int, Counter]:
        """Orientation-erased adjacency, neighbor -> edge multiplicity"""
        adjacency: Dict[int, Counter] = {}
        for a, b in zip(self.u.tolist(), self.v.tolist()):
            adjacency.setdefault(a, Counter())[b] += 1
            adjacency.setdefault(b, Counter())[a] += 1
        return adjacency


class AllocationGraph:
    """
    D and D' for one table. Storage is array-per-field indexed by item id,
    which keeps million-edge runs compact.
    """

    def __init__(self, n: int, d: int, audit_log: bool = False, capacity: int = 1024):
        self.n = n
        self.d = d
        self.audit_log = audit_log
        self.edge_count = 0

        self._u = np.full(capacity, _ABSENT, dtype=np.int64)
        self._v = np.full(capacity, _ABSENT, dtype=np.int64)
        self._head_d = np.full(capacity, _ABSENT, dtype=np.int64)
        self._head_dprime = np.full(capacity, _ABSENT, dtype=np.int64)
        self._in_d = np.zeros(n, dtype=np.int64)
        self._in_dprime = np.zeros(n, dtype=np.int64)

        self.flip_count = 0
        self.unsaturated_flip_count = 0
        self.flip_audit: List[FlipAuditEntry] = []

    # ------------------------------------------------------------------
    # storage
    # ------------------------------------------------------------------
    def reserve(self, capacity: int):
        """Grow per-item arrays to hold ids below `capacity`"""
        current = self._u.size
        if capacity <= current:
            return
        new_size = max(capacity, 2 * current)
        for name in ("_u", "_v", "_head_d", "_head_dprime"):
            old = getattr(self, name)
            grown = np.full(new_size, _ABSENT, dtype=np.int64)
            grown[:current] = old
            setattr(self, name, grown)

    def contains(self, item_id: int) -> bool:
        return 0 <= item_id < self._u.size and self._u[item_id] != _ABSENT

    def _require(self, item_id: int):
        if not self.contains(item_id):
            raise UnknownItemError(item_id)

    # ------------------------------------------------------------------
    # mutation
    # ------------------------------------------------------------------
    def record_edge(self, item_id: int, u: int, v: int, head_d: int, head_dprime: int):
        if item_id < 0:
            raise ValueError(f"item id must be non-negative: {item_id}")
        if self.contains(item_id):
            raise DuplicateItemError(f"item {item_id} already recorded")
        if u == v:
            raise IllegalHeadError(f"item {item_id} has equal endpoints {u}")
        for vertex in (u, v):
            if not 0 <= vertex < self.n:
                raise IllegalHeadError(f"endpoint {vertex} outside [0, {self.n})")
        if head_d not in (u, v) or head_dprime not in (u, v):
            raise IllegalHeadError(f"heads ({head_d}, {head_dprime}) not in {{{u}, {v}}}")

        self.reserve(item_id + 1)
        self._u[item_id] = u
        self._v[item_id] = v
        self._head_d[item_id] = head_d
        self._head_dprime[item_id] = head_dprime
        self._in_d[head_d] += 1
        self._in_dprime[head_dprime] += 1
        self.edge_count += 1

    def flip(self, item_id: int, old_head_load: Optional[int] = None) -> int:
        """
        Point the item's D' edge at its other endpoint and return the new head.
        `old_head_load` is the table load of the old head when the flip happens.
        """
        self._require(item_id)
        old_head = int(self._head_dprime[item_id])
        new_head = self.other_end(item_id, old_head)
        self._head_dprime[item_id] = new_head
        self._in_dprime[old_head] -= 1
        self._in_dprime[new_head] += 1

        saturated = old_head_load is not None and old_head_load >= self.d
        self.flip_count += 1
        if old_head_load is not None and not saturated:
            self.unsaturated_flip_count += 1
            logger.error(f"item {item_id} flipped away from unsaturated bin {old_head} "
                         f"(load {old_head_load})")
        if self.audit_log:
            self.flip_audit.append(FlipAuditEntry(item_id, old_head, new_head,
                                                  -1 if old_head_load is None else old_head_load,
                                                  saturated))
        return new_head

    def _unflip(self, item_id: int, old_head_load: Optional[int] = None):
        """Undo the most recent flip of `item_id` during rollback"""
        old_head = int(self._head_dprime[item_id])
        new_head = self.other_end(item_id, old_head)
        self._head_dprime[item_id] = new_head
        self._in_dprime[old_head] -= 1
        self._in_dprime[new_head] += 1
        self.flip_count -= 1
        if old_head_load is not None and old_head_load < self.d:
            self.unsaturated_flip_count -= 1
        if self.audit_log and self.flip_audit:
            self.flip_audit.pop()

    def _discard(self, item_id: int):
        """Remove an edge recorded by an insertion that is being rolled back"""
        self._in_d[self._head_d[item_id]] -= 1
        self._in_dprime[self._head_dprime[item_id]] -= 1
        for arr in (self._u, self._v, self._head_d, self._head_dprime):
            arr[item_id] = _ABSENT
        self.edge_count -= 1

    # ------------------------------------------------------------------
    # queries
    # ------------------------------------------------------------------
    def endpoints(self, item_id: int) -> Tuple[int, int]:
        self._require(item_id)
        return int(self._u[item_id]), int(self._v[item_id])

    def other_end(self, item_id: int, vertex: int) -> int:
        u = int(self._u[item_id])
        return int(self._v[item_id]) if vertex == u else u

    def head(self, item_id: int, which: Orientation = Orientation.DPRIME) -> int:
        self._require(item_id)
        arr = self._head_d if which == Orientation.D else self._head_dprime
        return int(arr[item_id])

    def edge(self, item_id: int) -> EdgeRecord:
        self._require(item_id)
        return EdgeRecord(item_id, self.endpoints(item_id),
                          int(self._head_d[item_id]), int(self._head_dprime[item_id]))

    def edges(self) -> Iterable[EdgeRecord]:
        for item_id in self._present_ids().tolist():
            yield self.edge(item_id)

    def in_degree(self, vertex: int, which: Orientation = Orientation.D) -> int:
        if not 0 <= vertex < self.n:
            raise IndexError(f"vertex {vertex} outside [0, {self.n})")
        tallies = self._in_d if which == Orientation.D else self._in_dprime
        return int(tallies[vertex])

    def _present_ids(self) -> np.ndarray:
        return np.flatnonzero(self._u != _ABSENT)

    def snapshot(self) -> DigraphView:
        ids = self._present_ids()
        return DigraphView(
            n=self.n,
            item_ids=ids,
            u=self._u[ids].copy(),
            v=self._v[ids].copy(),
            head_d=self._head_d[ids].copy(),
            head_dprime=self._head_dprime[ids].copy(),
            in_degree_d=self._in_d.copy(),
            in_degree_dprime=self._in_dprime.copy(),
        )

    def underlying_multigraph(self) -> Dict[int, Counter]:
        return self.snapshot().underlying_multigraph()

    def export_edges(self, which: Orientation = Orientation.D) -> str:
        """One `item_id,tail,head` line per edge, ascending item id"""
        lines = []
        for record in self.edges():
            head = record.head_d if which == Orientation.D else record.head_dprime
            lines.append(f"{record.item_id},{record.tail(which)},{head}")
        return "\n".join(lines) + ("\n" if lines else "")


def record_edge(graph: AllocationGraph, item_id: int, u: int, v: int, head_d: int, head_dprime: int):
    graph.record_edge(item_id, u, v, head_d, head_dprime)


def flip(graph: AllocationGraph, item_id: int, old_head_load: Optional[int] = None) -> int:
    return graph.flip(item_id, old_head_load)


def in_degree(graph: AllocationGraph, vertex: int, which: Orientation = Orientation.D) -> int:
    return graph.in_degree(vertex, which)
