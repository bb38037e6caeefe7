"""
Tests for the D / D' digraph pair
"""

import numpy as np
import pytest

from src.allocation_graph import (
    AllocationGraph,
    DigraphView,
    DuplicateItemError,
    IllegalHeadError,
    Orientation,
    UnknownItemError,
    flip,
    in_degree,
    record_edge,
)


@pytest.fixture
def graph():
    return AllocationGraph(n=4, d=1, audit_log=True)


def test_single_edge_degrees(graph):
    record_edge(graph, 0, 0, 1, head_d=0, head_dprime=0)
    assert in_degree(graph, 0, Orientation.D) == 1
    assert in_degree(graph, 0, Orientation.DPRIME) == 1
    assert in_degree(graph, 1, Orientation.D) == 0


def test_split_heads_keep_undirected_degree(graph):
    record_edge(graph, 0, 0, 1, head_d=0, head_dprime=1)
    assert graph.in_degree(0, Orientation.D) == 1
    assert graph.in_degree(0, Orientation.DPRIME) == 0
    assert graph.in_degree(1, Orientation.DPRIME) == 1
    view = graph.snapshot()
    assert view.undirected_degrees(Orientation.D).tolist() == [1, 1, 0, 0]
    assert view.undirected_degrees(Orientation.DPRIME).tolist() == [1, 1, 0, 0]


def test_head_outside_endpoints(graph):
    with pytest.raises(IllegalHeadError):
        record_edge(graph, 0, 0, 1, head_d=2, head_dprime=0)


def test_equal_endpoints(graph):
    with pytest.raises(IllegalHeadError):
        record_edge(graph, 0, 2, 2, head_d=2, head_dprime=2)


def test_duplicate_item(graph):
    record_edge(graph, 0, 0, 1, 0, 0)
    with pytest.raises(DuplicateItemError):
        record_edge(graph, 0, 2, 3, 2, 2)


def test_flip_is_involution(graph):
    record_edge(graph, 0, 0, 1, head_d=0, head_dprime=1)
    assert flip(graph, 0) == 0
    assert graph.head(0) == 0
    assert flip(graph, 0) == 1
    assert graph.head(0) == 1
    # D never moves
    assert graph.head(0, Orientation.D) == 0
    assert graph.flip_count == 2


def test_flip_unknown(graph):
    with pytest.raises(UnknownItemError):
        graph.flip(3)


def test_unsaturated_flip_is_counted(graph):
    record_edge(graph, 0, 0, 1, 0, 0)
    graph.flip(0, old_head_load=0)
    assert graph.unsaturated_flip_count == 1
    assert graph.flip_audit[-1].saturated is False


def test_flip_without_load_is_not_judged(graph):
    record_edge(graph, 0, 0, 1, 0, 0)
    graph.flip(0)
    assert graph.unsaturated_flip_count == 0


def test_hand_trace_audit(hand_traced):
    table, _ = hand_traced
    audit = table.graph.flip_audit
    assert [(e.item_id, e.old_head, e.new_head) for e in audit] == [(0, 0, 1), (1, 1, 2)]
    assert all(e.saturated for e in audit)


def test_hand_trace_multigraph(hand_traced):
    table, _ = hand_traced
    adjacency = table.graph.underlying_multigraph()
    assert adjacency[0] == {1: 2}
    assert adjacency[1] == {0: 2, 2: 1}
    assert adjacency[2] == {1: 1}


def test_parallel_edges_multiplicity():
    view = DigraphView.from_edges(3, [(0, 1), (1, 0)])
    assert view.underlying_multigraph() == {0: {1: 2}, 1: {0: 2}}


def test_empty_multigraph():
    assert DigraphView.from_edges(3, []).underlying_multigraph() == {}
    assert AllocationGraph(3, 2).underlying_multigraph() == {}


def test_isolated_and_star():
    view = DigraphView.from_edges(4, [(1, 0), (2, 0), (3, 0)])
    assert view.in_degree(0) == 3
    assert view.in_degree(1) == 0
    with pytest.raises(IndexError):
        view.in_degree(4)


def test_view_rejects_bad_dprime():
    with pytest.raises(IllegalHeadError):
        DigraphView.from_edges(4, [(0, 1)], dprime_heads=[3])


def test_reserve_grows_storage():
    graph = AllocationGraph(5, 2, capacity=2)
    for item_id in range(9):
        graph.record_edge(item_id, item_id % 5, (item_id + 1) % 5, item_id % 5, item_id % 5)
    assert graph.edge_count == 9
    assert graph.snapshot().item_ids.tolist() == list(range(9))
    assert int(graph.snapshot().in_degree_d.sum()) == 9


def test_export_edges(hand_traced):
    table, _ = hand_traced
    assert table.graph.export_edges(Orientation.D) == "0,1,0\n1,2,1\n2,0,1\n"
    assert table.graph.export_edges(Orientation.DPRIME) == "0,0,1\n1,1,2\n2,1,0\n"


def test_snapshot_is_detached(graph):
    record_edge(graph, 0, 0, 1, 0, 0)
    view = graph.snapshot()
    graph.flip(0)
    assert view.head_dprime.tolist() == [0]
    assert np.array_equal(view.in_degree_dprime, [1, 0, 0, 0])
