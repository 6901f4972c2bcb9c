"""Synthetic corpus generator: shape, determinism, skew, label health."""

from __future__ import annotations

import json

import numpy as np
import pytest

from fedopt.data import load_libsvm
from fedopt.generator import (
    GenConfig,
    _base_measure,
    _solve_power_exponent,
    _truncated_power_mean,
    feature_skew_ratio,
    generate,
    save_generated,
    summarize,
)
from fedopt.partitioning import load_partition, partition_by_group


def small_cfg(**overrides) -> GenConfig:
    base = dict(num_nodes=12, num_features=150, min_node_size=10,
                max_node_size=60, mean_node_size=20.0,
                features_per_example=8.0, node_skew=0.1,
                zipf_exponent=0.8, label_bias=0.5, seed=0)
    base.update(overrides)
    return GenConfig(**base)


class TestConfigValidation:
    def test_accepts_default(self):
        GenConfig()

    def test_rejects_zero_min_size(self):
        with pytest.raises(ValueError):
            small_cfg(min_node_size=0)

    def test_rejects_mean_outside_bounds(self):
        with pytest.raises(ValueError):
            small_cfg(mean_node_size=5.0)
        with pytest.raises(ValueError):
            small_cfg(mean_node_size=70.0)

    def test_rejects_unattainable_mean(self):
        # decreasing-density law on [10, 60] cannot average close to the cap
        with pytest.raises(ValueError):
            small_cfg(mean_node_size=55.0)

    def test_rejects_nonpositive_skew(self):
        with pytest.raises(ValueError):
            small_cfg(node_skew=0.0)

    def test_rejects_tiny_dimension(self):
        with pytest.raises(ValueError):
            small_cfg(num_features=1)


class TestPowerLaw:
    def test_mean_solver_hits_target(self):
        a = _solve_power_exponent(10.0, 60.0, 20.0)
        assert _truncated_power_mean(a, 10.0, 60.0) == pytest.approx(20.0, rel=1e-6)

    def test_mean_monotone_in_exponent(self):
        means = [_truncated_power_mean(a, 75.0, 1000.0) for a in (0.5, 1.5, 3.0)]
        assert means[0] > means[1] > means[2]

    def test_base_measure_normalized_and_decreasing(self):
        p = _base_measure(small_cfg())
        assert p.sum() == pytest.approx(1.0)
        assert np.all(np.diff(p) <= 0)


class TestGenerate:
    def test_deterministic(self):
        a = generate(small_cfg())
        b = generate(small_cfg())
        assert a.train == b.train
        assert a.test == b.test
        assert a.partition == b.partition
        np.testing.assert_array_equal(a.w_true, b.w_true)

    def test_seed_changes_data(self):
        a = generate(small_cfg())
        b = generate(small_cfg(seed=1))
        assert a.train != b.train

    def test_shapes_and_bounds(self):
        cfg = small_cfg()
        data = generate(cfg)
        sizes = data.partition.node_sizes
        assert data.partition.num_nodes == cfg.num_nodes
        assert sizes.min() >= cfg.min_node_size
        assert sizes.max() <= cfg.max_node_size
        assert data.train.n == int(sizes.sum())
        assert data.train.d == cfg.num_features

    def test_test_split_sizes(self):
        data = generate(small_cfg())
        sizes = data.partition.node_sizes
        expected = int(sum(round(int(s) / 3.0) for s in sizes))
        assert data.test.n == expected

    def test_rows_unit_norm(self):
        data = generate(small_cfg())
        for ds in (data.train, data.test):
            sq = ds.row_sq_norms()
            nonempty = sq > 0
            np.testing.assert_allclose(sq[nonempty], 1.0, rtol=1e-12)

    def test_groups_match_partition(self):
        data = generate(small_cfg())
        rebuilt = partition_by_group(data.train, data.train_groups)
        assert rebuilt == data.partition

    def test_node_bias_within_range(self):
        cfg = small_cfg(label_bias=0.3)
        data = generate(cfg)
        assert np.all(np.abs(data.node_bias) <= 0.3)

    def test_labels_nontrivial(self):
        data = generate(small_cfg())
        rate = float(np.mean(data.train.labels == 1))
        assert 0.2 <= rate <= 0.8

    def test_feature_probs_rows_sum_to_one(self):
        data = generate(small_cfg())
        np.testing.assert_allclose(data.node_feature_probs.sum(axis=1), 1.0,
                                   rtol=1e-9)


class TestSkewKnob:
    def test_small_skew_is_strongly_non_iid(self):
        data = generate(small_cfg(node_skew=0.1))
        assert feature_skew_ratio(data.train, data.partition) >= 3.0

    def test_huge_skew_approaches_base_measure(self):
        cfg = small_cfg(node_skew=1e6)
        data = generate(cfg)
        base = _base_measure(cfg)
        tv = 0.5 * np.abs(data.node_feature_probs - base).sum(axis=1)
        assert tv.max() <= 0.05

    def test_skew_ratio_decreases_with_concentration(self):
        low = generate(small_cfg(node_skew=0.1))
        high = generate(small_cfg(node_skew=100.0))
        assert (feature_skew_ratio(low.train, low.partition)
                > feature_skew_ratio(high.train, high.partition))


class TestSummarize:
    def test_totals_match_dataset(self):
        data = generate(small_cfg())
        report = summarize(data)
        assert report["num_train"] == data.train.n
        assert report["num_test"] == data.test.n
        assert report["num_features"] == data.train.d
        assert report["num_nodes"] == data.partition.num_nodes
        assert report["node_size_max"] == int(data.partition.node_sizes.max())

    def test_spread_histogram_sums_to_dimension(self):
        data = generate(small_cfg())
        report = summarize(data)
        assert sum(report["feature_node_spread_hist"].values()) == data.train.d

    def test_single_node_spread(self):
        data = generate(small_cfg(num_nodes=1))
        report = summarize(data)
        assert set(report["feature_node_spread_hist"]) <= {0, 1}


class TestSaveGenerated:
    def test_files_round_trip(self, tmp_path):
        cfg = small_cfg()
        data = generate(cfg)
        save_generated(data, tmp_path, cfg)
        assert load_libsvm(tmp_path / "train.libsvm") == data.train
        assert load_libsvm(tmp_path / "test.libsvm") == data.test
        assert load_partition(tmp_path / "partition.txt") == data.partition
        meta = json.loads((tmp_path / "meta.json").read_text())
        assert meta["config"]["num_nodes"] == cfg.num_nodes
        assert meta["summary"]["num_train"] == data.train.n
