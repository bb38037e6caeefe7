"""
Saturated-superset analysis
Closure S = A ∪ T over the final D, component census of G_S, and the
deterministic checks built on them
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from config.config import Config
from .allocation_graph import DigraphView

if TYPE_CHECKING:
    from .core_table import Table

logger = logging.getLogger(__name__)

DISTINCT = "distinct"
MULTIPLICITY = "multiplicity"


@dataclass(frozen=True)
class SaturatedSetResult:
    a: FrozenSet[int]
    layers: Tuple[FrozenSet[int], ...]
    s: FrozenSet[int]

    @property
    def t(self) -> FrozenSet[int]:
        return self.s - self.a


@dataclass(frozen=True)
class Component:
    component_id: int
    vertices: FrozenSet[int]
    edge_count: int
    ell: int

    @property
    def k(self) -> int:
        return len(self.vertices)

    @property
    def cycle_count(self) -> int:
        return self.edge_count - self.k + 1

    @property
    def is_tree(self) -> bool:
        return self.cycle_count == 0


@dataclass
class CensusReport:
    components: List[Component]
    vertex_component: np.ndarray = field(repr=False)  # component id per vertex, -1 outside S

    @property
    def size_histogram(self) -> Dict[int, int]:
        return dict(sorted(Counter(c.k for c in self.components).items()))

    @property
    def max_size(self) -> int:
        return max((c.k for c in self.components), default=0)

    @property
    def multi_cycle_count(self) -> int:
        return sum(1 for c in self.components if c.cycle_count >= 2)

    def partition(self) -> List[Tuple[FrozenSet[int], int, int]]:
        """(vertices, edge_count, cycle_count) per component, order-free form for comparisons"""
        return sorted(((c.vertices, c.edge_count, c.cycle_count) for c in self.components),
                      key=lambda row: min(row[0]))

    def rows(self) -> List[Dict[str, int]]:
        return [
            {"component_id": c.component_id, "k": c.k, "e": c.edge_count,
             "ell": c.ell, "cycle_count": c.cycle_count}
            for c in self.components
        ]

    def summary(self) -> Dict:
        return {
            "component_count": len(self.components),
            "size_histogram": {str(k): v for k, v in self.size_histogram.items()},
            "max_size": self.max_size,
            "multi_cycle_count": self.multi_cycle_count,
            "tree_count": sum(1 for c in self.components if c.is_tree),
            "unicyclic_count": sum(1 for c in self.components if c.cycle_count == 1),
        }


@dataclass
class SubsetVerdict:
    ok: bool
    violations: List[int]


@dataclass
class StructureVerdict:
    ell_flags: List[int]
    multi_cycle_flags: List[int]
    singleton_count: int
    singleton_a_count: int

    @property
    def ok(self) -> bool:
        return not self.ell_flags and not self.multi_cycle_flags

    def counts(self) -> Dict[str, int]:
        return {
            "ell_flags": len(self.ell_flags),
            "multi_cycle_flags": len(self.multi_cycle_flags),
            "singletons": self.singleton_count,
            "singletons_in_a": self.singleton_a_count,
        }


# ----------------------------------------------------------------------
# adjacency
# ----------------------------------------------------------------------
def _adjacency(view: DigraphView, counting: str) -> Tuple[np.ndarray, np.ndarray]:
    """CSR (indptr, neighbors) of G; distinct mode drops parallel edges"""
    if counting not in (DISTINCT, MULTIPLICITY):
        raise ValueError(f"unknown neighbor counting mode: {counting}")
    n = view.n
    src = np.concatenate([view.u, view.v])
    dst = np.concatenate([view.v, view.u])
    if counting == DISTINCT:
        keys = np.unique(src * n + dst)
        src, dst = keys // n, keys % n
    else:
        order = np.argsort(src, kind="stable")
        src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return indptr, dst


def _gather(indptr: np.ndarray, neighbors: np.ndarray, rows: np.ndarray) -> np.ndarray:
    if rows.size == 0:
        return rows
    starts, stops = indptr[rows], indptr[rows + 1]
    lengths = stops - starts
    offsets = np.repeat(starts - np.cumsum(lengths) + lengths, lengths)
    return neighbors[np.arange(int(lengths.sum())) + offsets]


# ----------------------------------------------------------------------
# closure
# ----------------------------------------------------------------------
def compute_A(view: DigraphView, d: int) -> FrozenSet[int]:
    """Vertices with in-degree at least d-1 in D"""
    return frozenset(np.flatnonzero(view.in_degree_d >= d - 1).tolist())


def compute_S(view: DigraphView, d: int, counting: Optional[str] = None) -> SaturatedSetResult:
    """
    Layered closure: T_{k+1} is every vertex outside the current set with at
    least two neighbors inside it, taken simultaneously; stop at an empty layer.
    """
    counting = counting or Config.NEIGHBOR_COUNTING
    n = view.n
    indptr, neighbors = _adjacency(view, counting)

    in_set = view.in_degree_d >= d - 1
    a = frozenset(np.flatnonzero(in_set).tolist())

    rows = np.repeat(np.arange(n), np.diff(indptr))
    count = np.bincount(rows[in_set[neighbors]], minlength=n)

    layers: List[FrozenSet[int]] = []
    frontier = np.flatnonzero((count >= 2) & ~in_set)
    while frontier.size:
        layers.append(frozenset(frontier.tolist()))
        in_set[frontier] = True
        touched = _gather(indptr, neighbors, frontier)
        np.add.at(count, touched, 1)
        candidates = touched[(count[touched] >= 2) & ~in_set[touched]]
        frontier = np.unique(candidates)

    s = a.union(*layers) if layers else a
    logger.debug(f"closure: |A|={len(a)}, {len(layers)} layers, |S|={len(s)}")
    return SaturatedSetResult(a=a, layers=tuple(layers), s=frozenset(s))


def compute_S_oracle(view: DigraphView, d: int, counting: Optional[str] = None,
                     order: Optional[Sequence[int]] = None) -> FrozenSet[int]:
    """
    Generic fixed point: starting from A, add any vertex with at least two
    neighbors in the current set, scanning in `order`, until nothing changes.
    Intended for small instances.
    """
    counting = counting or Config.NEIGHBOR_COUNTING
    adjacency = view.underlying_multigraph()
    current = set(compute_A(view, d))
    scan = list(range(view.n)) if order is None else list(order)

    changed = True
    while changed:
        changed = False
        for vertex in scan:
            if vertex in current:
                continue
            neighbors = adjacency.get(vertex, {})
            if counting == DISTINCT:
                hits = sum(1 for w in neighbors if w in current)
            else:
                hits = sum(mult for w, mult in neighbors.items() if w in current)
            if hits >= 2:
                current.add(vertex)
                changed = True
    return frozenset(current)


# ----------------------------------------------------------------------
# census
# ----------------------------------------------------------------------
def census(view: DigraphView, s: Iterable[int], a: Iterable[int] = ()) -> CensusReport:
    """Connected components of the multigraph induced on S, with k, e, ell and cycles"""
    n = view.n
    in_s = np.zeros(n, dtype=bool)
    s_list = np.fromiter(s, dtype=np.int64)
    in_s[s_list] = True
    in_a = np.zeros(n, dtype=bool)
    a_list = np.fromiter(a, dtype=np.int64)
    in_a[a_list] = True

    vertex_component = np.full(n, -1, dtype=np.int64)
    if s_list.size == 0:
        return CensusReport([], vertex_component)

    inner = in_s[view.u] & in_s[view.v]
    eu, ev = view.u[inner], view.v[inner]
    matrix = coo_matrix((np.ones(eu.size, dtype=np.int32), (eu, ev)), shape=(n, n))
    _, labels = connected_components(matrix, directed=False)

    # renumber components by smallest vertex so ids are stable
    members = np.flatnonzero(in_s)
    _, first, inverse = np.unique(labels[members], return_index=True, return_inverse=True)
    rank = np.argsort(np.argsort(members[first]))
    comp_of_member = rank[inverse]
    vertex_component[members] = comp_of_member

    count = first.size
    sizes = np.bincount(comp_of_member, minlength=count)
    edges = np.bincount(vertex_component[eu], minlength=count)
    ells = np.bincount(comp_of_member, weights=in_a[members].astype(np.float64), minlength=count).astype(np.int64)
    order = np.argsort(comp_of_member, kind="stable")
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    sorted_members = members[order].tolist()

    components = [
        Component(component_id=i,
                  vertices=frozenset(sorted_members[bounds[i]:bounds[i + 1]]),
                  edge_count=int(edges[i]),
                  ell=int(ells[i]))
        for i in range(count)
    ]
    return CensusReport(components, vertex_component)


def census_oracle(view: DigraphView, s: Iterable[int], a: Iterable[int] = ()) -> List[Tuple[FrozenSet[int], int, int]]:
    """Independent census via a networkx MultiGraph, in CensusReport.partition() form"""
    s = set(s)
    graph = nx.MultiGraph()
    graph.add_nodes_from(s)
    graph.add_edges_from((x, y) for x, y in zip(view.u.tolist(), view.v.tolist())
                         if x in s and y in s)
    rows = []
    for nodes in nx.connected_components(graph):
        e = graph.subgraph(nodes).number_of_edges()
        rows.append((frozenset(nodes), e, e - len(nodes) + 1))
    return sorted(rows, key=lambda row: min(row[0]))


# ----------------------------------------------------------------------
# verification
# ----------------------------------------------------------------------
def verify_saturated_subset(table: "Table", s: Iterable[int]) -> SubsetVerdict:
    """Every bin holding d items must lie in S"""
    s = set(s)
    missing = [v for v in table.saturated_bins() if v not in s]
    if missing:
        logger.error(f"saturated bins outside S: {missing[:10]}")
    return SubsetVerdict(ok=not missing, violations=missing)


def verify_component_structure(report: CensusReport) -> StructureVerdict:
    """
    Flag components of size k >= 2 with ell < (k+2)/2 and components with two
    or more cycles. Singletons are counted separately and never flagged.
    """
    ell_flags, multi_flags = [], []
    singletons = singletons_in_a = 0
    for c in report.components:
        if c.k == 1:
            singletons += 1
            singletons_in_a += c.ell
        elif 2 * c.ell < c.k + 2:
            ell_flags.append(c.component_id)
        if c.cycle_count >= 2:
            multi_flags.append(c.component_id)
    if multi_flags:
        logger.warning(f"{len(multi_flags)} components with two or more cycles")
    if ell_flags:
        logger.warning(f"{len(ell_flags)} components with ell < (k+2)/2")
    return StructureVerdict(ell_flags, multi_flags, singletons, singletons_in_a)


@dataclass
class OracleVerdict:
    closure_ok: bool
    orders_agree: bool
    census_ok: bool

    @property
    def ok(self) -> bool:
        return self.closure_ok and self.orders_agree and self.census_ok


def verify_oracles(view: DigraphView, d: int, result: SaturatedSetResult, report: CensusReport,
                   counting: Optional[str] = None) -> OracleVerdict:
    """Layered closure vs. generic fixed point in two scan orders, census vs. networkx"""
    forward = compute_S_oracle(view, d, counting, order=range(view.n))
    backward = compute_S_oracle(view, d, counting, order=range(view.n - 1, -1, -1))
    verdict = OracleVerdict(
        closure_ok=forward == result.s,
        orders_agree=forward == backward,
        census_ok=census_oracle(view, result.s, result.a) == report.partition(),
    )
    if not verdict.ok:
        logger.error(f"oracle mismatch: {verdict}")
    return verdict
