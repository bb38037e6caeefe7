"""
Shared fixtures: scripted hand traces and small seeded tables
"""

import pytest

from src.core_table import Item, Table, TableConfig
from src.random_source import ScriptedRandomSource


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run full-scale acceptance experiments")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


# n=3, d=1: items 0 and 1 land without walking, item 2 walks 0 -> 1 -> 2
HAND_TRACE_PAIRS = [(0, 1), (1, 2), (0, 1)]
HAND_TRACE_D_HEADS = [0, 1, 1]
HAND_TRACE_WALK_STARTS = [0]


def hand_trace_source() -> ScriptedRandomSource:
    return ScriptedRandomSource(pairs=HAND_TRACE_PAIRS,
                                d_heads=HAND_TRACE_D_HEADS,
                                walk_starts=HAND_TRACE_WALK_STARTS)


@pytest.fixture
def hand_trace_table():
    """Empty n=3, d=1 table wired to the hand-trace script, flip audit on"""
    return Table(TableConfig(n=3, d=1, seed=7), hand_trace_source(), audit_log=True)


@pytest.fixture
def hand_traced(hand_trace_table):
    """The hand-trace table after all three insertions, with their outcomes"""
    outcomes = [hand_trace_table.insert(Item(i, p, q)) for i, (p, q) in enumerate(HAND_TRACE_PAIRS)]
    return hand_trace_table, outcomes


@pytest.fixture
def filled_table():
    """A seeded n=50, d=3 table at 80% load"""
    table = Table(TableConfig(n=50, d=3, seed=1234), audit_log=True)
    for item_id in range(120):
        table.insert_generated(item_id)
    return table
