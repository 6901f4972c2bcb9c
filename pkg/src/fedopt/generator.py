"""Synthetic sparse, non-IID, unbalanced, node-clustered data.

Each node gets a private feature distribution drawn around a shared
power-law base measure; examples are bags of feature draws; labels come from
a planted linear model plus a per-node bias shift. Node sizes follow a
bounded power law, so partitions are unbalanced by construction.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass

import numpy as np

from fedopt.data import SparseDataset, save_libsvm
from fedopt.partitioning import Partition, compute_stats, save_partition


@dataclass(frozen=True)
class GenConfig:
    """Generator knobs.

    Node training-set sizes are drawn from a power law truncated to
    [min_node_size, max_node_size] with the exponent solved to hit
    mean_node_size in expectation. node_skew controls how far per-node
    feature distributions sit from the shared base measure: the Dirichlet
    concentration is node_skew * d * base, so 1e6 is effectively IID and 0.1
    is strongly non-IID. Labels are +1 with probability
    sigmoid(x . w_true + node_bias), node biases uniform in
    [-label_bias, label_bias]. Each node also gets round(n_k/3) test examples
    generated after its training examples (a 75/25 split in generation
    order).
    """

    num_nodes: int = 100
    num_features: int = 2000
    min_node_size: int = 75
    max_node_size: int = 1000
    mean_node_size: float = 200.0
    features_per_example: float = 20.0
    node_skew: float = 0.25
    zipf_exponent: float = 0.8
    label_bias: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.num_nodes < 1:
            raise ValueError("num_nodes must be >= 1")
        if self.num_features < 2:
            raise ValueError("num_features must be >= 2")
        if self.min_node_size < 1:
            raise ValueError("min_node_size must be >= 1")
        if self.max_node_size < self.min_node_size:
            raise ValueError("max_node_size must be >= min_node_size")
        if self.features_per_example <= 0.0:
            raise ValueError("features_per_example must be positive")
        if self.node_skew <= 0.0:
            raise ValueError("node_skew must be positive")
        if self.label_bias < 0.0:
            raise ValueError("label_bias must be nonnegative")
        lo, hi = float(self.min_node_size), float(self.max_node_size)
        if not lo <= self.mean_node_size <= hi:
            raise ValueError("mean_node_size must lie within the size bounds")
        if lo < hi:
            attainable_lo = _truncated_power_mean(_EXPONENT_HI, lo, hi)
            attainable_hi = _truncated_power_mean(_EXPONENT_LO, lo, hi)
            if not attainable_lo <= self.mean_node_size <= attainable_hi:
                raise ValueError(
                    f"mean_node_size {self.mean_node_size} unattainable for bounds "
                    f"[{lo:.0f}, {hi:.0f}]; attainable range is "
                    f"[{attainable_lo:.1f}, {attainable_hi:.1f}]"
                )


@dataclass
class GeneratedData:
    """Generator output: datasets, node partition, and planted truth."""

    train: SparseDataset
    test: SparseDataset
    partition: Partition
    w_true: np.ndarray
    node_bias: np.ndarray
    train_groups: np.ndarray
    node_feature_probs: np.ndarray


_EXPONENT_LO = 1e-6
_EXPONENT_HI = 50.0


def _truncated_power_mean(a: float, lo: float, hi: float) -> float:
    """Mean of density proportional to x^(-a-1) on [lo, hi]."""
    norm = lo ** (-a) - hi ** (-a)
    if abs(a - 1.0) < 1e-9:
        return math.log(hi / lo) / (1.0 / lo - 1.0 / hi)
    return a * (hi ** (1.0 - a) - lo ** (1.0 - a)) / ((1.0 - a) * norm)


def _solve_power_exponent(lo: float, hi: float, target: float) -> float:
    """Exponent whose truncated-power-law mean equals target (bisection)."""
    a_lo, a_hi = _EXPONENT_LO, _EXPONENT_HI
    for _ in range(200):
        mid = 0.5 * (a_lo + a_hi)
        if _truncated_power_mean(mid, lo, hi) > target:
            a_lo = mid
        else:
            a_hi = mid
    return 0.5 * (a_lo + a_hi)


def _draw_node_sizes(rng: np.random.Generator, cfg: GenConfig) -> np.ndarray:
    lo, hi = float(cfg.min_node_size), float(cfg.max_node_size)
    if lo == hi:
        return np.full(cfg.num_nodes, cfg.min_node_size, dtype=np.int64)
    a = _solve_power_exponent(lo, hi, float(cfg.mean_node_size))
    u = rng.random(cfg.num_nodes)
    x = (lo ** (-a) - u * (lo ** (-a) - hi ** (-a))) ** (-1.0 / a)
    return np.clip(np.rint(x), cfg.min_node_size, cfg.max_node_size).astype(np.int64)


def _base_measure(cfg: GenConfig) -> np.ndarray:
    p = (np.arange(cfg.num_features, dtype=np.float64) + 1.0) ** (-cfg.zipf_exponent)
    return p / p.sum()


def _draw_node_examples(rng, q, counts, w_true, bias):
    """Bags of feature draws from q, labels from the planted model.

    Rows are L2-normalized count vectors, so every example has unit norm
    and the loss smoothness is bounded independently of bag size. Returns
    (indices, values, labels, per-row sizes) as flat lists.
    """
    cum = np.cumsum(q)
    cum[-1] = 1.0
    all_idx: list[np.ndarray] = []
    all_val: list[np.ndarray] = []
    labels = np.empty(counts.shape[0], dtype=np.int64)
    nnz_per_row = np.empty(counts.shape[0], dtype=np.int64)
    draws = np.searchsorted(cum, rng.random(int(counts.sum())), side="right")
    pos = 0
    for r in range(counts.shape[0]):
        c = int(counts[r])
        feats, mult = np.unique(draws[pos:pos + c], return_counts=True)
        pos += c
        values = mult.astype(np.float64)
        if values.size:
            values /= math.sqrt(float(values @ values))
        margin = float(values @ w_true[feats]) + bias
        p_plus = 1.0 / (1.0 + math.exp(-margin)) if margin >= 0 else (
            math.exp(margin) / (1.0 + math.exp(margin)))
        labels[r] = 1 if rng.random() < p_plus else -1
        all_idx.append(feats.astype(np.int64))
        all_val.append(values)
        nnz_per_row[r] = feats.shape[0]
    return all_idx, all_val, labels, nnz_per_row


def generate(cfg: GenConfig) -> GeneratedData:
    """Draw a full train/test corpus; deterministic per cfg.seed."""
    rng_global = np.random.default_rng((cfg.seed, 0))
    sizes = _draw_node_sizes(rng_global, cfg)
    node_bias = rng_global.uniform(-cfg.label_bias, cfg.label_bias, cfg.num_nodes)
    raw = rng_global.normal(size=cfg.num_features)
    base = _base_measure(cfg)
    # rare features carry more per-occurrence signal (inverse-frequency
    # weighting, as with rare words in text classification); the constant
    # calibrates planted margins to variance ~4 under unit-norm rows
    scale = base ** -0.5
    scale *= 2.0 / math.sqrt(float((base * scale**2).sum()))
    w_true = raw * scale
    concentration = cfg.node_skew * cfg.num_features * base

    train_parts = []
    test_parts = []
    node_feature_probs = np.empty((cfg.num_nodes, cfg.num_features))
    for k in range(cfg.num_nodes):
        rng_k = np.random.default_rng((cfg.seed, 1, k))
        q = rng_k.dirichlet(concentration)
        node_feature_probs[k] = q
        n_train = int(sizes[k])
        n_test = int(round(n_train / 3.0))
        counts = rng_k.poisson(cfg.features_per_example, n_train + n_test)
        idx, val, labels, nnz = _draw_node_examples(rng_k, q, counts, w_true,
                                                    float(node_bias[k]))
        train_parts.append((idx[:n_train], val[:n_train], labels[:n_train],
                            nnz[:n_train]))
        test_parts.append((idx[n_train:], val[n_train:], labels[n_train:],
                           nnz[n_train:]))

    def _assemble(parts) -> SparseDataset:
        nnz_all = np.concatenate([p[3] for p in parts])
        indptr = np.concatenate(([0], np.cumsum(nnz_all)))
        idx_all = [a for p in parts for a in p[0]]
        val_all = [a for p in parts for a in p[1]]
        indices = np.concatenate(idx_all) if idx_all else np.zeros(0, dtype=np.int64)
        values = np.concatenate(val_all) if val_all else np.zeros(0)
        labels = np.concatenate([p[2] for p in parts])
        return SparseDataset(indptr, indices, values, labels, cfg.num_features)

    train = _assemble(train_parts)
    test = _assemble(test_parts)
    train_groups = np.repeat(np.arange(cfg.num_nodes, dtype=np.int64), sizes)
    bounds = np.concatenate(([0], np.cumsum(sizes)))
    partition = Partition([np.arange(bounds[k], bounds[k + 1], dtype=np.int64)
                           for k in range(cfg.num_nodes)])
    return GeneratedData(train, test, partition, w_true, node_bias,
                         train_groups, node_feature_probs)


def feature_skew_ratio(dataset: SparseDataset, part: Partition) -> float:
    """Median over present features of the worst-node local/global
    appearance-frequency ratio; 1 means IID-like, large means skewed."""
    stats = compute_stats(dataset, part)
    present = stats.feature_counts > 0
    local_freq = stats.node_feature_counts.toarray().astype(np.float64)
    local_freq /= stats.node_sizes[:, None].astype(np.float64)
    global_freq = stats.feature_counts.astype(np.float64) / stats.num_examples
    ratios = local_freq[:, present].max(axis=0) / global_freq[present]
    return float(np.median(ratios))


def summarize(data: GeneratedData) -> dict:
    """Shape statistics of a generated corpus, JSON-friendly."""
    stats = compute_stats(data.train, data.partition)
    sizes = data.partition.node_sizes
    spread = stats.feature_node_spread
    hist_values, hist_counts = np.unique(spread, return_counts=True)
    return {
        "num_train": data.train.n,
        "num_test": data.test.n,
        "num_features": data.train.d,
        "num_nodes": data.partition.num_nodes,
        "node_size_min": int(sizes.min()),
        "node_size_mean": float(sizes.mean()),
        "node_size_max": int(sizes.max()),
        "train_nnz": int(data.train.indices.shape[0]),
        "sparsity": float(data.train.indices.shape[0] / (data.train.n * data.train.d)),
        "positive_rate": float(np.mean(data.train.labels == 1)),
        "feature_node_spread_hist": {int(v): int(c) for v, c in zip(hist_values, hist_counts)},
        "feature_skew_ratio": feature_skew_ratio(data.train, data.partition),
    }


def save_generated(data: GeneratedData, outdir, cfg: GenConfig | None = None) -> None:
    """Write train/test libsvm files, the partition, and a JSON summary."""
    os.makedirs(outdir, exist_ok=True)
    save_libsvm(data.train, os.path.join(outdir, "train.libsvm"))
    save_libsvm(data.test, os.path.join(outdir, "test.libsvm"))
    save_partition(data.partition, os.path.join(outdir, "partition.txt"))
    meta = {"summary": summarize(data)}
    if cfg is not None:
        meta["config"] = asdict(cfg)
    meta["node_bias"] = [float(b) for b in data.node_bias]
    with open(os.path.join(outdir, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
