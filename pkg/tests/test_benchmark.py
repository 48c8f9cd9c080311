"""Ablation benchmark plumbing on miniature instances.

The real protocol (2000 points, 50 epochs, 5 seeds) lives in the
acceptance suite; here the machinery is exercised at toy scale.
"""

import json

import numpy as np
import pytest

from jwass.benchmark import (
    BenchmarkConfig,
    BenchmarkResult,
    benchmark_datasets,
    make_train_config,
    run_cell,
    run_rotation_benchmark,
)
from jwass.errors import ContractError

TINY = dict(kinds=("none", "class_dependent"), seeds=(0, 1),
            n_per_domain=40, epochs=2, batch_size=8, eval_max_points=60)


class TestConfig:
    def test_defaults_match_protocol(self):
        c = BenchmarkConfig()
        assert c.kinds == ("none", "marginal", "class_dependent")
        assert c.seeds == (0, 1, 2, 3, 4)
        assert c.n_per_domain == 2000
        assert c.rotation_deg == 35.0
        assert c.labeled_fraction == 0.1
        assert c.epochs == 50
        assert c.w_critic == 0.1

    def test_rejects_empty_and_duplicate(self):
        with pytest.raises(ContractError):
            BenchmarkConfig(kinds=())
        with pytest.raises(ContractError):
            BenchmarkConfig(seeds=(1, 1))


class TestDatasets:
    def test_masked_and_full_share_points(self):
        config = BenchmarkConfig(**TINY)
        masked_p, masked_q, full_p, full_q = benchmark_datasets(config, 3)
        np.testing.assert_array_equal(masked_p.features, full_p.features)
        np.testing.assert_array_equal(masked_q.features, full_q.features)
        assert (full_p.labels != -1).all()
        assert (full_q.labels != -1).all()
        # masked splits hide most labels but keep the fraction
        kept = (masked_p.labels != -1).sum()
        assert kept == int(np.ceil(config.labeled_fraction * full_p.n))
        m = masked_p.labeled_mask
        np.testing.assert_array_equal(masked_p.labels[m], full_p.labels[m])

    def test_train_config_mapping(self):
        config = BenchmarkConfig(**TINY)
        tc = make_train_config(config, "marginal", 7)
        assert tc.critic_kind == "marginal"
        assert tc.seed == 7
        assert tc.epochs == config.epochs
        assert tc.w_critic == config.w_critic
        assert tc.batch_size == config.batch_size


@pytest.fixture(scope="module")
def tiny_result():
    return run_rotation_benchmark(BenchmarkConfig(**TINY))


class TestRun:
    @pytest.fixture
    def result(self, tiny_result):
        return tiny_result

    def test_all_cells_present(self, result):
        assert len(result.outcomes) == 4
        for kind in ("none", "class_dependent"):
            for seed in (0, 1):
                out = result.cell(kind, seed)
                assert out.kind == kind and out.seed == seed
                assert len(out.log.records) == 2
                assert out.metrics.w_dist >= 0.0

    def test_missing_cell_raises(self, result):
        with pytest.raises(ContractError):
            result.cell("marginal", 0)
        with pytest.raises(ContractError):
            result.cell("none", 99)

    def test_medians_and_summary_shape(self, result):
        s = result.summary()
        assert set(s["cells"]) == {"none", "class_dependent"}
        for kind, cell in s["cells"].items():
            seeds = [r["seed"] for r in cell["per_seed"]]
            assert seeds == sorted(seeds) == [0, 1]
            assert cell["median_w_dist"] == result.median_w(kind)
            assert cell["median_min_acc"] == result.median_min_acc(kind)
        assert s["config"]["n_per_domain"] == 40

    def test_summary_json_deterministic(self, result, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        result.to_json(a)
        rerun = run_rotation_benchmark(BenchmarkConfig(**TINY))
        rerun.to_json(b)
        assert a.read_bytes() == b.read_bytes()

    def test_cell_rerun_bit_identical(self, result):
        config = BenchmarkConfig(**TINY)
        again = run_cell(config, "class_dependent", 1)
        first = result.cell("class_dependent", 1)
        assert again.metrics.to_dict() == first.metrics.to_dict()
        for r1, r2 in zip(first.log.records, again.log.records):
            assert r1.to_record() == r2.to_record()
