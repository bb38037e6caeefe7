"""
Tests for the experiment harness and probe study
"""

import pytest

from src.cli_io import dumps_json
from src.core_table import InvalidConfigError
from src.harness import ExperimentConfig, ProbeBucket, run_experiment, run_seed
from src.structure_analysis import DISTINCT
from tests.conftest import hand_trace_source


class TestExperimentConfig:

    def test_item_count_from_epsilon(self):
        assert ExperimentConfig(n=2000, d=2048, epsilon=0.7).item_count == 1228800
        assert ExperimentConfig(n=10 ** 5, d=8, epsilon=0.2).item_count == 640000

    def test_explicit_m(self):
        config = ExperimentConfig(n=10, d=4, m=30)
        assert config.item_count == 30
        assert config.effective_epsilon == pytest.approx(0.25)

    def test_needs_a_free_slot(self):
        ExperimentConfig(n=10, d=4, m=39)
        with pytest.raises(InvalidConfigError):
            ExperimentConfig(n=10, d=4, m=40)

    @pytest.mark.parametrize("kwargs", [
        dict(n=1, d=4, m=0),
        dict(n=10, d=0, m=0),
        dict(n=10, d=4),
        dict(n=10, d=4, epsilon=1.0),
        dict(n=10, d=4, epsilon=0.0),
        dict(n=10, d=4, m=-1),
        dict(n=10, d=4, m=5, seeds=()),
        dict(n=10, d=4, m=5, seeds=(2 ** 64,)),
        dict(n=10, d=4, m=5, M=0.0),
        dict(n=10, d=4, m=5, both_free_policy="random"),
        dict(n=10, d=4, m=5, max_walk_steps=0),
    ])
    def test_rejects(self, kwargs):
        with pytest.raises(InvalidConfigError):
            ExperimentConfig(**kwargs)

    def test_manifest(self):
        manifest = ExperimentConfig(n=2000, d=2048, epsilon=0.7, seeds=(1, 2)).manifest()
        assert manifest["theorem_regime"] is True
        assert manifest["config"]["seeds"] == [1, 2]
        assert manifest["config"]["max_walk_steps"] == 64 * 2000 * 2048
        assert manifest["m"] == 1228800


class TestRunSeed:

    def test_hand_trace(self):
        config = ExperimentConfig(n=3, d=1, m=2, seeds=(7,), probes_per_run=0)
        result = run_seed(config, 7, hand_trace_source(), m=3)
        assert result.walk_histogram == {0: 2, 2: 1}
        assert result.mean_walk == pytest.approx(2 / 3)
        assert result.walk_max == 2
        assert result.walk_count == result.double_saturated == 1
        assert result.load_histogram == {1: 3}
        assert result.failures() == []

    def test_empty_run(self):
        config = ExperimentConfig(n=10, d=2, m=0, seeds=(1,), probes_per_run=50)
        result = run_seed(config, 1)
        assert result.walk_histogram == {}
        assert result.mean_walk is None
        assert result.walk_max == 0
        assert result.census.components == []
        assert result.probe.samples == 0
        assert result.failures() == []

    def test_verdicts_on_loaded_table(self):
        config = ExperimentConfig(n=300, d=4, epsilon=0.1, seeds=(11,), probes_per_run=300,
                                  check_oracles=True)
        result = run_seed(config, 11)
        assert result.failures() == []
        assert result.oracle.ok
        assert result.probe.samples == 300
        assert result.probe.tree_violations == 0
        assert sum(result.load_histogram.values()) == 300

    def test_probes_do_not_change_insertions(self):
        quiet = run_seed(ExperimentConfig(n=200, d=3, epsilon=0.15, probes_per_run=0), 5)
        busy = run_seed(ExperimentConfig(n=200, d=3, epsilon=0.15, probes_per_run=400), 5)
        assert quiet.walk_histogram == busy.walk_histogram
        assert quiet.census.partition() == busy.census.partition()

    def test_walk_cap_is_reported_not_fatal(self):
        # d=1 near capacity: some arrivals land in components without a free bin
        config = ExperimentConfig(n=40, d=1, m=39, seeds=(3,), probes_per_run=0, max_walk_steps=500)
        result = run_seed(config, 3)
        assert result.inserted + len(result.capped_items) == 39
        assert result.invariant_violations == []
        assert result.subset.ok
        summary = run_experiment(config).aggregate()
        assert summary["items_requested"] == 39
        assert summary["insertions"] + summary["walk_cap_exceeded"] == 39
        assert summary["histograms_cover_all_items"] is (not result.capped_items)
        assert result.to_dict()["not_inserted"] == len(result.capped_items)

    def test_saturated_bins_checked_against_multiplicity_closure(self):
        # parallel edges to one saturated neighbour leave a saturated bin out of distinct S
        config = ExperimentConfig(n=40, d=2, m=77, seeds=(763308099,), probes_per_run=200,
                                  max_walk_steps=320, neighbor_counting=DISTINCT)
        result = run_seed(config, 763308099)
        assert result.capped_items == []
        assert result.subset.ok
        assert result.failures() == []
        structure = result.to_dict()["structure"]
        assert structure["s_size_multiplicity"] > structure["s_size"]
        assert result.probe.outside_s == 0

    def test_supplementary_bounds_reported(self):
        config = ExperimentConfig(n=300, d=4, epsilon=0.2, seeds=(2,), probes_per_run=300)
        checks = run_seed(config, 2).bound_checks
        assert checks["large_component_tail"] >= 0
        assert checks["multi_cycle_bound"] >= 0
        assert checks["walk_exit"]
        for row in checks["walk_exit"]:
            assert row["walk_exit_bound"] >= row["k"]

    def test_graph_exports(self):
        config = ExperimentConfig(n=3, d=1, m=2, seeds=(7,), probes_per_run=0, export_graphs=True)
        result = run_seed(config, 7, hand_trace_source(), m=3)
        assert result.exports["d_edges"] == "0,1,0\n1,2,1\n2,0,1\n"
        assert result.exports["dprime_edges"] == "0,0,1\n1,1,2\n2,1,0\n"
        assert result.exports["evictions"] == "0,0,1\n1,1,2\n"
        assert run_seed(ExperimentConfig(n=3, d=1, m=2, seeds=(7,), probes_per_run=0), 7).exports == {}


class TestExperiment:

    def test_repeatable(self):
        config = ExperimentConfig(n=150, d=4, epsilon=0.2, seeds=(1, 2), probes_per_run=100)
        first = dumps_json(run_experiment(config).to_dict())
        second = dumps_json(run_experiment(config).to_dict())
        assert first == second

    def test_aggregate_ignores_seed_order(self):
        forward = run_experiment(ExperimentConfig(n=120, d=3, epsilon=0.2, seeds=(4, 9), probes_per_run=50))
        backward = run_experiment(ExperimentConfig(n=120, d=3, epsilon=0.2, seeds=(9, 4), probes_per_run=50))
        assert forward.aggregate() == backward.aggregate()
        assert forward.walk_rows() == backward.walk_rows()

    def test_process_pool_matches_serial(self):
        serial = ExperimentConfig(n=100, d=4, epsilon=0.2, seeds=(1, 2, 3), probes_per_run=50)
        pooled = ExperimentConfig(n=100, d=4, epsilon=0.2, seeds=(1, 2, 3), probes_per_run=50, workers=2)
        a, b = run_experiment(serial).to_dict(), run_experiment(pooled).to_dict()
        a["manifest"]["config"].pop("workers")
        b["manifest"]["config"].pop("workers")
        assert dumps_json(a) == dumps_json(b)

    def test_rows_sorted_by_seed(self):
        result = run_experiment(ExperimentConfig(n=100, d=2, epsilon=0.3, seeds=(8, 3), probes_per_run=20))
        seeds = [row["seed"] for row in result.census_rows()]
        assert seeds == sorted(seeds)
        assert [r.seed for r in result.seeds] == [8, 3]


def test_probe_bucket_merge():
    a = ProbeBucket(3, samples=2, steps_total=5, within_total=4, within_max=3, tree_samples=2)
    b = ProbeBucket(3, samples=1, steps_total=1, within_total=1, within_max=1, tree_samples=1)
    a.merge(b)
    assert (a.samples, a.steps_total, a.within_max, a.tree_samples) == (3, 6, 3, 3)
    assert a.mean_within == pytest.approx(5 / 3)
    assert ProbeBucket(1).mean_steps is None
