"""Node partitions, per-node feature statistics, and update-scaling vectors.

The statistics drive two diagonal rescalings used by the federated solver:
a per-node one that divides each feature's stochastic update by its local
over-representation, and a global one that amplifies aggregated updates for
features only a few nodes have seen.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse

from fedopt.data import SparseDataset


class Partition:
    """Disjoint, complete assignment of example indices to K nodes.

    Every node holds at least one example; per-node index lists are kept
    sorted ascending.
    """

    __slots__ = ("nodes", "num_examples")

    def __init__(self, assignments, *, validate: bool = True):
        self.nodes = [np.sort(np.asarray(a, dtype=np.int64)) for a in assignments]
        self.num_examples = int(sum(a.shape[0] for a in self.nodes))
        if validate:
            self._validate()

    def _validate(self) -> None:
        if not self.nodes:
            raise ValueError("partition has no nodes")
        for k, a in enumerate(self.nodes):
            if a.shape[0] == 0:
                raise ValueError(f"node {k} is empty")
        merged = np.concatenate(self.nodes)
        order = np.sort(merged)
        if not np.array_equal(order, np.arange(self.num_examples, dtype=np.int64)):
            raise ValueError("assignments must partition 0..n-1 (overlap or gap)")

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def node_sizes(self) -> np.ndarray:
        return np.array([a.shape[0] for a in self.nodes], dtype=np.int64)

    def node_examples(self, k: int) -> np.ndarray:
        if not 0 <= k < self.num_nodes:
            raise IndexError(f"node id {k} out of range [0, {self.num_nodes})")
        return self.nodes[k]

    def node_of_examples(self) -> np.ndarray:
        """Inverse map: array of length n giving each example's node id."""
        out = np.empty(self.num_examples, dtype=np.int64)
        for k, a in enumerate(self.nodes):
            out[a] = k
        return out

    @classmethod
    def from_node_ids(cls, node_of: np.ndarray) -> "Partition":
        """Build from an example->node array; node ids must cover 0..K-1."""
        node_of = np.asarray(node_of, dtype=np.int64)
        if node_of.size == 0:
            raise ValueError("no examples")
        num_nodes = int(node_of.max()) + 1
        if node_of.min() < 0:
            raise ValueError("negative node id")
        order = np.argsort(node_of, kind="stable")
        bounds = np.searchsorted(node_of[order], np.arange(num_nodes + 1))
        return cls([order[bounds[k]:bounds[k + 1]] for k in range(num_nodes)])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Partition):
            return NotImplemented
        return len(self.nodes) == len(other.nodes) and all(
            np.array_equal(a, b) for a, b in zip(self.nodes, other.nodes)
        )


def save_partition(part: Partition, path) -> None:
    """One line per example: "<example_index> <node_id>", ordered by example."""
    node_of = part.node_of_examples()
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(part.num_examples):
            fh.write(f"{i} {node_of[i]}\n")


def load_partition(path) -> Partition:
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                i_s, k_s = line.split()
                pairs.append((int(i_s), int(k_s)))
            except ValueError as exc:
                raise ValueError(f"line {lineno}: expected '<example> <node>'") from exc
    if not pairs:
        raise ValueError("no assignments")
    pairs.sort()
    idx = np.array([p[0] for p in pairs], dtype=np.int64)
    if not np.array_equal(idx, np.arange(len(pairs))):
        raise ValueError("example indices must cover 0..n-1 exactly once")
    return Partition.from_node_ids(np.array([p[1] for p in pairs], dtype=np.int64))


class PartitionStats:
    """Feature-appearance counts of a dataset under a partition.

    node_sizes[k] is the example count of node k; feature_counts[j] the
    number of examples (globally) where feature j is nonzero;
    node_feature_counts the K x d sparse matrix of the same count per node;
    feature_node_spread[j] the number of nodes where feature j appears.
    """

    __slots__ = ("num_examples", "num_nodes", "num_features", "node_sizes",
                 "feature_counts", "node_feature_counts", "feature_node_spread")

    def __init__(self, num_examples, num_nodes, num_features, node_sizes,
                 feature_counts, node_feature_counts, feature_node_spread):
        self.num_examples = int(num_examples)
        self.num_nodes = int(num_nodes)
        self.num_features = int(num_features)
        self.node_sizes = node_sizes
        self.feature_counts = feature_counts
        self.node_feature_counts = node_feature_counts
        self.feature_node_spread = feature_node_spread
        self._validate()

    def _validate(self) -> None:
        if int(self.node_sizes.sum()) != self.num_examples:
            raise ValueError("node sizes do not sum to n")
        per_feature = np.asarray(self.node_feature_counts.sum(axis=0)).ravel()
        if not np.array_equal(per_feature.astype(np.int64), self.feature_counts):
            raise ValueError("per-node feature counts do not sum to global counts")
        spread = self.feature_node_spread
        if spread.min() < 0 or spread.max() > self.num_nodes:
            raise ValueError("feature node spread out of [0, K]")
        if not np.array_equal(spread == 0, self.feature_counts == 0):
            raise ValueError("zero spread must coincide with zero global count")

    def node_count_row(self, k: int) -> np.ndarray:
        """Dense length-d vector of node k's per-feature example counts."""
        return self.node_feature_counts.getrow(k).toarray().ravel().astype(np.int64)


def compute_stats(dataset: SparseDataset, part: Partition) -> PartitionStats:
    """Count feature appearances globally and per node.

    An appearance is an example with a stored (hence nonzero) value for the
    feature, regardless of magnitude.
    """
    if part.num_examples != dataset.n:
        raise ValueError(f"partition covers {part.num_examples} examples, dataset has {dataset.n}")
    n, d, num_nodes = dataset.n, dataset.d, part.num_nodes
    feature_counts = np.bincount(dataset.indices, minlength=d).astype(np.int64)
    row_of_entry = np.repeat(np.arange(n, dtype=np.int64), np.diff(dataset.indptr))
    node_of = part.node_of_examples()
    # each (example, feature) pair occurs at most once, so entry counts are
    # example counts
    node_feature_counts = scipy.sparse.coo_matrix(
        (np.ones(dataset.indices.shape[0], dtype=np.int64),
         (node_of[row_of_entry], dataset.indices)),
        shape=(num_nodes, d),
    ).tocsr()
    node_feature_counts.sum_duplicates()
    feature_node_spread = np.asarray((node_feature_counts > 0).sum(axis=0)).ravel().astype(np.int64)
    return PartitionStats(n, num_nodes, d, part.node_sizes, feature_counts,
                          node_feature_counts, feature_node_spread)


def local_scaling(stats: PartitionStats, k: int, num_bias: int = 0) -> np.ndarray:
    """Per-feature multiplier for node k's stochastic data-gradient updates.

    Entry j is the global appearance frequency of feature j divided by its
    local frequency on node k, computed as one correctly rounded division of
    exact integer products; features absent from node k get 0 (their local
    stochastic updates are identically zero). Bias coordinates get 1.
    """
    if not 0 <= k < stats.num_nodes:
        raise IndexError(f"node id {k} out of range [0, {stats.num_nodes})")
    local = stats.node_count_row(k)
    out = np.zeros(stats.num_features + num_bias, dtype=np.float64)
    present = local > 0
    num = stats.feature_counts[present] * int(stats.node_sizes[k])
    den = local[present] * stats.num_examples
    out[:stats.num_features][present] = num / den
    out[stats.num_features:] = 1.0
    return out


def aggregation_weights(stats: PartitionStats, num_bias: int = 0) -> np.ndarray:
    """Per-feature multiplier for the aggregated cross-node update.

    Entry j is K divided by the number of nodes where feature j appears;
    features appearing nowhere get 1 (only the regularizer moves them), as do
    bias coordinates. Features on every node get exactly 1; features on one
    node get K, turning the weighted average into a sum.
    """
    out = np.ones(stats.num_features + num_bias, dtype=np.float64)
    spread = stats.feature_node_spread
    present = spread > 0
    out[:stats.num_features][present] = float(stats.num_nodes) / spread[present]
    return out


def reshuffle(part: Partition, seed: int) -> Partition:
    """Same node sizes, example membership redrawn uniformly at random."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(part.num_examples)
    sizes = part.node_sizes
    bounds = np.concatenate(([0], np.cumsum(sizes)))
    return Partition([perm[bounds[k]:bounds[k + 1]] for k in range(part.num_nodes)])


def partition_by_group(dataset: SparseDataset, group_of_example) -> Partition:
    """One node per distinct group id, nodes ordered by ascending group id."""
    groups = np.asarray(group_of_example, dtype=np.int64)
    if groups.shape[0] != dataset.n:
        raise ValueError(f"got {groups.shape[0]} group ids for {dataset.n} examples")
    ids = np.unique(groups)
    return Partition([np.flatnonzero(groups == g) for g in ids])
