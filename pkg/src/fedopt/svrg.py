"""Round-based distributed SVRG with optional frequency-aware rescaling.

One communication round: broadcast the shared iterate and its full gradient,
run m variance-reduced stochastic steps on every node in parallel, then fold
the node deltas back into the shared iterate. The "naive" variant averages
deltas uniformly and uses one global stepsize. The "modified" variant adds
three changes for sparse non-IID partitions: per-node stepsizes, per-node
diagonal rescaling of the stochastic data-gradient difference, and
spread-aware weights on the aggregated update.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from fedopt import _kernels
from fedopt.data import DenseModel
from fedopt.objective import LogisticObjective
from fedopt.partitioning import Partition, PartitionStats, aggregation_weights, compute_stats, local_scaling

VARIANTS = ("naive", "modified")
STEPSIZE_RULES = ("fixed_h", "inverse_nk")

# a run is declared divergent when the objective exceeds this multiple of its
# starting value
DIVERGENCE_FACTOR = 1e3


class DivergenceError(RuntimeError):
    """Iterate became non-finite during a local epoch."""

    def __init__(self, node: int, step: int, round_index: int):
        super().__init__(
            f"non-finite iterate on node {node} at local step {step} of round {round_index}"
        )
        self.node = node
        self.step = step
        self.round_index = round_index


@dataclass(frozen=True)
class FedSvrgConfig:
    """Knobs of the round-based solver.

    m is the number of local stochastic steps per round (None means one local
    pass in expectation: round(n/K)). Normal operation expects m >= 1 and
    rounds >= 1; zero is tolerated and yields the degenerate no-op behavior.
    """

    m: int | None = None
    h: float = 0.1
    variant: str = "modified"
    stepsize_rule: str = "fixed_h"
    rounds: int = 30
    seed: int = 0

    def __post_init__(self):
        if self.m is not None and self.m < 0:
            raise ValueError("m must be >= 0")
        if self.h <= 0.0:
            raise ValueError("h must be positive")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.stepsize_rule not in STEPSIZE_RULES:
            raise ValueError(f"stepsize_rule must be one of {STEPSIZE_RULES}")
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")


@dataclass
class RoundState:
    """Broadcast state: shared iterate, its full gradient, round index."""

    w_tilde: DenseModel
    full_grad: np.ndarray
    round_index: int


@dataclass
class NodeUpdate:
    node: int
    delta: DenseModel


@dataclass
class RoundRecord:
    """Result of one completed communication round."""

    round_index: int
    objective: float
    w: DenseModel
    diverged: bool = False


def node_rng(seed: int, round_index: int, node: int) -> np.random.Generator:
    """Stream keyed by (seed, round, node): independent of scheduling order."""
    return np.random.default_rng((seed, round_index, node))


def node_stepsize(cfg: FedSvrgConfig, stats: PartitionStats, k: int) -> float:
    """fixed_h: the base h. inverse_nk: h scaled by (n/K)/n_k, so nodes with
    more than the average share of data take proportionally smaller steps."""
    if cfg.stepsize_rule == "fixed_h":
        return cfg.h
    mean_size = stats.num_examples / stats.num_nodes
    return cfg.h * mean_size / float(stats.node_sizes[k])


def _resolve_m(cfg: FedSvrgConfig, stats: PartitionStats) -> int:
    if cfg.m is not None:
        return cfg.m
    return max(1, round(stats.num_examples / stats.num_nodes))


def local_epoch(obj: LogisticObjective, part: Partition, stats: PartitionStats,
                k: int, state: RoundState, cfg: FedSvrgConfig,
                rng: np.random.Generator) -> NodeUpdate:
    """Run m variance-reduced steps on node k starting from the broadcast
    iterate; returns the resulting delta w_k - w_tilde.

    Sampling is uniform over the node's examples, with replacement. The naive
    variant takes plain SVRG steps at the base stepsize; the modified variant
    rescales the data-gradient difference by the node's frequency ratios and
    uses the per-node stepsize. The regularizer difference and the broadcast
    full gradient are never rescaled.
    """
    rows = part.node_examples(k)
    m = _resolve_m(cfg, stats)
    w = state.w_tilde.copy()
    if m == 0:
        return NodeUpdate(k, w - state.w_tilde)
    samples = rows[rng.integers(0, rows.shape[0], size=m)]
    if cfg.variant == "naive":
        s_diag = np.ones(obj.dim, dtype=np.float64)
        h_k = cfg.h
    else:
        s_diag = local_scaling(stats, k, num_bias=obj.num_bias)
        h_k = node_stepsize(cfg, stats, k)
    ds = obj.dataset
    bad_step = _kernels.svrg_epoch(ds.indptr, ds.indices, ds.values, ds.labels,
                                   samples, w, state.w_tilde, state.full_grad,
                                   s_diag, h_k, obj.lam, obj.num_bias)
    if bad_step >= 0:
        raise DivergenceError(k, int(bad_step), state.round_index)
    return NodeUpdate(k, w - state.w_tilde)


def aggregate(state: RoundState, updates: list[NodeUpdate],
              stats: PartitionStats, variant: str,
              num_bias: int = 0) -> DenseModel:
    """Fold node deltas into the shared iterate, ascending node id.

    naive: uniform average of deltas. modified: deltas weighted by the node's
    data share n_k/n, then amplified per feature by K over the number of
    nodes holding the feature.
    """
    seen = sorted(u.node for u in updates)
    if seen != list(range(stats.num_nodes)):
        raise ValueError("need exactly one update per node")
    by_node = {u.node: u for u in updates}
    total = np.zeros_like(state.w_tilde)
    if variant == "naive":
        for k in range(stats.num_nodes):
            total += by_node[k].delta
        return state.w_tilde + total / stats.num_nodes
    n = stats.num_examples
    for k in range(stats.num_nodes):
        total += (float(stats.node_sizes[k]) / n) * by_node[k].delta
    return state.w_tilde + aggregation_weights(stats, num_bias=num_bias) * total


def run(obj: LogisticObjective, part: Partition, cfg: FedSvrgConfig,
        sink=None, stats: PartitionStats | None = None,
        w0: DenseModel | None = None) -> tuple[DenseModel, list[RoundRecord]]:
    """Execute cfg.rounds communication rounds from w0 (default zeros).

    Emits one RoundRecord per completed round (to ``sink`` as well, if
    given). A non-finite iterate or an objective above DIVERGENCE_FACTOR
    times the starting value marks the record diverged and stops the run.
    """
    if stats is None:
        stats = compute_stats(obj.dataset, part)
    w_tilde = np.zeros(obj.dim) if w0 is None else w0.astype(np.float64).copy()
    records: list[RoundRecord] = []
    f0 = obj.loss_value(w_tilde)
    for s in range(1, cfg.rounds + 1):
        state = RoundState(w_tilde, obj.full_gradient(w_tilde), s)
        try:
            updates = [
                local_epoch(obj, part, stats, k, state, cfg,
                            node_rng(cfg.seed, s, k))
                for k in range(part.num_nodes)
            ]
        except DivergenceError:
            record = RoundRecord(s, float("nan"), w_tilde.copy(), diverged=True)
            records.append(record)
            if sink is not None:
                sink(record)
            break
        w_tilde = aggregate(state, updates, stats, cfg.variant, num_bias=obj.num_bias)
        f_new = obj.loss_value(w_tilde)
        diverged = not np.isfinite(f_new) or f_new > DIVERGENCE_FACTOR * max(f0, 1e-300)
        record = RoundRecord(s, f_new, w_tilde.copy(), diverged=diverged)
        records.append(record)
        if sink is not None:
            sink(record)
        if diverged:
            break
    return w_tilde, records


def config_hash(payload: dict) -> str:
    """Stable short hash of a JSON-serializable config mapping."""
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def save_checkpoint(path, w: DenseModel, round_index: int, cfg_hash: str = "") -> None:
    """JSON header line then the raw little-endian float64 coordinates."""
    header = {"d": int(w.shape[0]), "round": int(round_index), "config": cfg_hash}
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode("ascii"))
        fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[DenseModel, dict]:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("ascii"))
        w = np.frombuffer(fh.read(), dtype="<f8").copy()
    if w.shape[0] != header["d"]:
        raise ValueError(f"checkpoint holds {w.shape[0]} values, header says {header['d']}")
    return w, header
