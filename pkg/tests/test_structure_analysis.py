"""
Tests for the saturated closure, the G_S census and the structural checks
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.allocation_graph import DigraphView
from src.structure_analysis import (
    MULTIPLICITY,
    CensusReport,
    Component,
    census,
    census_oracle,
    compute_A,
    compute_S,
    compute_S_oracle,
    verify_component_structure,
    verify_oracles,
    verify_saturated_subset,
)

# d=2: edges 1->0, 2->0, 2->3 give in-degrees (2, 0, 0, 1)
FOUR_VERTEX = DigraphView.from_edges(4, [(1, 0), (2, 0), (2, 3)])


class TestClosure:

    def test_d1_takes_every_vertex(self):
        assert compute_A(FOUR_VERTEX, 1) == {0, 1, 2, 3}

    def test_empty_graph(self):
        empty = DigraphView.from_edges(5, [])
        assert compute_A(empty, 2) == frozenset()
        assert compute_S(empty, 2).s == frozenset()
        assert compute_S_oracle(empty, 2) == frozenset()

    def test_direct_tally(self):
        assert compute_A(FOUR_VERTEX, 2) == {0, 3}

    def test_four_vertex_layers(self):
        result = compute_S(FOUR_VERTEX, 2)
        assert result.a == {0, 3}
        assert result.layers == (frozenset({2}),)
        assert result.t == {2}
        assert result.s == {0, 2, 3}

    def test_four_vertex_oracle(self):
        assert compute_S_oracle(FOUR_VERTEX, 2) == {0, 2, 3}

    def test_empty_base(self):
        view = DigraphView.from_edges(3, [(0, 1)])
        assert compute_S(view, 3).s == frozenset()
        assert compute_S_oracle(view, 3) == frozenset()

    def test_complete_graph_from_two_base_vertices(self):
        # d=3 so A needs in-degree 2: only vertices 0 and 1 qualify
        view = DigraphView.from_edges(4, [(2, 0), (3, 0), (2, 1), (3, 1), (0, 1), (2, 3)])
        assert compute_A(view, 3) == {0, 1}
        result = compute_S(view, 3)
        assert result.s == {0, 1, 2, 3}
        assert result.layers == (frozenset({2, 3}),)

    def test_layers_are_simultaneous(self):
        # path 0-1-2-3-4 with A = {0, 2, 4}; 1 and 3 both join in the first layer
        view = DigraphView.from_edges(5, [(1, 0), (1, 2), (3, 2), (3, 4)])
        result = compute_S(view, 2)
        assert result.a == {0, 2, 4}
        assert result.layers == (frozenset({1, 3}),)

    def test_chained_layers(self):
        # d=3: 0 and 1 have in-degree 2; 2 joins first, then 3 through {1, 2}
        view = DigraphView.from_edges(5, [(2, 0), (4, 0), (2, 1), (3, 1), (4, 1), (3, 2)])
        result = compute_S(view, 3)
        assert result.a == {0, 1}
        assert result.layers == (frozenset({2, 4}), frozenset({3}))

    def test_parallel_edges_depend_on_counting(self):
        # vertex 1 touches A = {0} through two parallel edges only
        view = DigraphView.from_edges(3, [(2, 0), (1, 0), (0, 1)])
        d = 3
        assert compute_A(view, d) == {0}
        assert compute_S(view, d).s == {0}
        assert compute_S(view, d, MULTIPLICITY).s == {0, 1}
        assert compute_S_oracle(view, d, MULTIPLICITY) == {0, 1}

    def test_unknown_counting_mode(self):
        with pytest.raises(ValueError):
            compute_S(FOUR_VERTEX, 2, "weighted")


class TestCensus:

    def test_path(self):
        view = DigraphView.from_edges(3, [(0, 1), (1, 2)])
        report = census(view, {0, 1, 2})
        assert len(report.components) == 1
        component = report.components[0]
        assert (component.k, component.edge_count, component.cycle_count) == (3, 2, 0)
        assert component.is_tree

    def test_parallel_pair(self):
        view = DigraphView.from_edges(2, [(0, 1), (1, 0)])
        component = census(view, {0, 1}).components[0]
        assert (component.k, component.edge_count, component.cycle_count) == (2, 2, 1)

    def test_empty(self):
        report = census(FOUR_VERTEX, set())
        assert report.components == []
        assert report.max_size == 0
        assert report.rows() == []

    def test_induced_edges_only(self):
        result = compute_S(FOUR_VERTEX, 2)
        report = census(FOUR_VERTEX, result.s, result.a)
        assert report.partition() == [(frozenset({0, 2, 3}), 2, 0)]
        assert report.components[0].ell == 2
        assert report.vertex_component.tolist() == [0, -1, 0, 0]

    def test_ids_follow_smallest_vertex(self):
        view = DigraphView.from_edges(6, [(4, 5), (0, 1), (2, 3)])
        report = census(view, {5, 4, 3, 2, 1, 0}, {0})
        assert [min(c.vertices) for c in report.components] == [0, 2, 4]
        assert report.size_histogram == {2: 3}
        assert [c.ell for c in report.components] == [1, 0, 0]

    def test_singletons(self):
        report = census(DigraphView.from_edges(3, []), {0, 2}, {0, 2})
        assert report.size_histogram == {1: 2}
        assert all(c.cycle_count == 0 for c in report.components)

    def test_oracle_matches(self):
        view = DigraphView.from_edges(5, [(0, 1), (1, 0), (1, 2), (3, 4)])
        s = {0, 1, 2, 3, 4}
        assert census_oracle(view, s) == census(view, s).partition()


class TestVerification:

    def test_vacuous_subset(self):
        from src.core_table import Table, TableConfig
        table = Table(TableConfig(n=4, d=2))
        assert verify_saturated_subset(table, set()).ok

    def test_hand_trace_subset(self, hand_traced):
        table, _ = hand_traced
        view = table.graph.snapshot()
        result = compute_S(view, 1)
        assert result.s == {0, 1, 2}
        assert verify_saturated_subset(table, result.s).ok

    def test_corrupted_subset(self, hand_traced):
        table, _ = hand_traced
        verdict = verify_saturated_subset(table, {0, 2})
        assert not verdict.ok
        assert verdict.violations == [1]

    def _report(self, *components):
        return CensusReport(list(components), np.full(8, -1))

    def test_ell_bound_met(self):
        verdict = verify_component_structure(
            self._report(Component(0, frozenset({0, 1, 2, 3}), edge_count=3, ell=3)))
        assert verdict.ok

    def test_ell_bound_flagged(self):
        verdict = verify_component_structure(
            self._report(Component(0, frozenset({0, 1, 2, 3}), edge_count=3, ell=2)))
        assert verdict.ell_flags == [0]
        assert not verdict.ok

    def test_singletons_never_flagged(self):
        verdict = verify_component_structure(
            self._report(Component(0, frozenset({0}), edge_count=0, ell=0),
                         Component(1, frozenset({1}), edge_count=0, ell=1)))
        assert verdict.ok
        assert verdict.counts()["singletons"] == 2
        assert verdict.counts()["singletons_in_a"] == 1

    def test_multi_cycle_flagged(self):
        verdict = verify_component_structure(
            self._report(Component(0, frozenset({0, 1, 2}), edge_count=4, ell=3)))
        assert verdict.multi_cycle_flags == [0]


@st.composite
def random_views(draw, max_n=30, max_edges=60):
    n = draw(st.integers(2, max_n))
    pairs = draw(st.lists(
        st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)).filter(lambda e: e[0] != e[1]),
        max_size=max_edges))
    return DigraphView.from_edges(n, pairs)


@settings(max_examples=200, deadline=None)
@given(view=random_views(), d=st.integers(1, 5), counting=st.sampled_from(["distinct", "multiplicity"]))
def test_layered_closure_matches_fixed_point(view, d, counting):
    result = compute_S(view, d, counting)
    report = census(view, result.s, result.a)
    verdict = verify_oracles(view, d, result, report, counting)
    assert verdict.closure_ok
    assert verdict.orders_agree
    assert verdict.census_ok


@settings(max_examples=100, deadline=None)
@given(view=random_views(), d=st.integers(1, 5), extra=st.tuples(st.integers(0, 29), st.integers(0, 29)))
def test_closure_grows_with_edges(view, d, extra):
    tail, head = extra[0] % view.n, extra[1] % view.n
    if tail == head:
        return
    edges = list(zip(np.where(view.head_d == view.u, view.v, view.u).tolist(), view.head_d.tolist()))
    bigger = DigraphView.from_edges(view.n, edges + [(tail, head)])
    assert compute_S(view, d).s <= compute_S(bigger, d).s


@settings(max_examples=100, deadline=None)
@given(view=random_views(), d=st.integers(1, 5))
def test_census_cycle_rank(view, d):
    result = compute_S(view, d)
    report = census(view, result.s, result.a)
    assert sum(c.k for c in report.components) == len(result.s)
    assert all(c.cycle_count >= 0 for c in report.components)
    assert sum(c.ell for c in report.components) == len(result.a)
