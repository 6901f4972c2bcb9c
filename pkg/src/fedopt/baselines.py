"""Comparison algorithms: distributed gradient descent, a dual
coordinate-ascent method with per-round communication, and the offline
optimum solver used as the suboptimality reference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from fedopt import _kernels
from fedopt.data import DenseModel
from fedopt.objective import LogisticObjective
from fedopt.partitioning import Partition
from fedopt.svrg import node_rng


class LineSearchError(RuntimeError):
    """Backtracking failed to satisfy the sufficient-decrease condition."""


class ConvergenceError(RuntimeError):
    """Evaluation budget exhausted before reaching the tolerance."""


@dataclass(frozen=True)
class GdConfig:
    """Full-gradient descent; one communication round per step.

    fixed mode takes steps of length eta; backtracking starts each round at
    eta and multiplies by rho until the sufficient-decrease condition
    f(w - eta g) <= f(w) - c eta ||g||^2 holds.
    """

    stepsize_mode: str = "backtracking"
    eta: float = 1.0
    c: float = 0.25
    rho: float = 0.5
    rounds: int = 30

    def __post_init__(self):
        if self.stepsize_mode not in ("fixed", "backtracking"):
            raise ValueError("stepsize_mode must be 'fixed' or 'backtracking'")
        if self.eta <= 0.0:
            raise ValueError("eta must be positive")
        if not 0.0 < self.c < 1.0:
            raise ValueError("c must be in (0, 1)")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must be in (0, 1)")
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")


def _backtrack(obj: LogisticObjective, w: DenseModel, g: np.ndarray,
               f_w: float, eta0: float, c: float, rho: float,
               max_shrinks: int = 60) -> tuple[DenseModel, float, float]:
    """Shrink eta until sufficient decrease holds; returns (w_new, f_new, eta)."""
    g_sq = float(g @ g)
    if g_sq == 0.0:
        return w.copy(), f_w, eta0
    eta = eta0
    for _ in range(max_shrinks + 1):
        w_new = w - eta * g
        f_new = obj.loss_value(w_new)
        if f_new <= f_w - c * eta * g_sq:
            return w_new, f_new, eta
        eta *= rho
    raise LineSearchError(f"no sufficient decrease after {max_shrinks} shrinks")


def gd_round(obj: LogisticObjective, w: DenseModel, cfg: GdConfig) -> DenseModel:
    """One full gradient computation plus one descent step."""
    g = obj.full_gradient(w)
    if cfg.stepsize_mode == "fixed":
        return w - cfg.eta * g
    w_new, _, _ = _backtrack(obj, w, g, obj.loss_value(w), cfg.eta, cfg.c, cfg.rho)
    return w_new


@dataclass(frozen=True)
class CocoaConfig:
    """Per-round local dual coordinate ascent with delta aggregation.

    local_iters coordinate steps per node per round. 'average' aggregation
    scales summed deltas by 1/K and solves local subproblems with quadratic
    safety factor sigma_prime=1 (the safe default); 'add' uses factor 1 with
    sigma_prime=K. An explicit sigma_prime overrides those defaults.
    """

    local_iters: int = 200
    aggregation: str = "average"
    sigma_prime: float | None = None
    rounds: int = 30
    seed: int = 0

    def __post_init__(self):
        if self.local_iters < 0:
            raise ValueError("local_iters must be >= 0")
        if self.aggregation not in ("average", "add"):
            raise ValueError("aggregation must be 'average' or 'add'")
        if self.sigma_prime is not None and self.sigma_prime <= 0.0:
            raise ValueError("sigma_prime must be positive")
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")


@dataclass
class DualState:
    """One dual variable per example plus the induced primal vector.

    Invariant: v = (1/(lam n)) sum_i alpha_i x_i, and every y_i alpha_i lies
    in [0, 1), the feasible range of the dual coordinate (0 = untouched
    coordinate; interior after any update).
    """

    alpha: np.ndarray
    v: DenseModel


def init_dual(obj: LogisticObjective) -> DualState:
    """All-zero dual; induced primal is the zero vector."""
    return DualState(np.zeros(obj.dataset.n), np.zeros(obj.dim))


def _recompute_v(obj: LogisticObjective, alpha: np.ndarray) -> DenseModel:
    ds = obj.dataset
    v = np.zeros(obj.dim)
    per_entry = np.repeat(alpha, np.diff(ds.indptr)) * ds.values
    np.add.at(v, ds.indices, per_entry)
    if obj.use_bias:
        v[-1] = alpha.sum()
    return v / (obj.lam * ds.n)


def check_dual_consistency(obj: LogisticObjective, state: DualState,
                           tol: float = 1e-10) -> None:
    """Raise if v drifted from its definition or alpha left the feasible box."""
    u = obj.dataset.labels * state.alpha
    if np.any(u < 0.0) or np.any(u >= 1.0):
        raise ValueError("dual coordinate outside feasible range")
    drift = np.abs(state.v - _recompute_v(obj, state.alpha)).max()
    if not drift <= tol:
        raise ValueError(f"dual vector inconsistent with alpha: drift {drift:.3e}")


def _row_norms_sq(obj: LogisticObjective) -> np.ndarray:
    row_sq = obj.dataset.row_sq_norms()
    if obj.use_bias:
        row_sq = row_sq + 1.0
    return row_sq


def cocoa_round(obj: LogisticObjective, part: Partition, state: DualState,
                cfg: CocoaConfig, round_index: int) -> DualState:
    """One communication round of local dual steps plus delta aggregation.

    Every node freezes the shared primal vector, runs local_iters exact 1-d
    dual solves on its own examples against a sigma_prime-damped private copy,
    and ships back its alpha and true v deltas; both are combined with the
    same gamma so the v/alpha invariant is preserved.
    """
    if obj.lam <= 0.0:
        raise ValueError("dual method requires lam > 0")
    ds = obj.dataset
    sigma_prime = cfg.sigma_prime
    if sigma_prime is None:
        sigma_prime = 1.0 if cfg.aggregation == "average" else float(part.num_nodes)
    gamma = 1.0 / part.num_nodes if cfg.aggregation == "average" else 1.0
    row_sq = _row_norms_sq(obj)
    dv_total = np.zeros_like(state.v)
    dalpha_total = np.zeros_like(state.alpha)
    for k in range(part.num_nodes):
        rows = part.node_examples(k)
        rng = node_rng(cfg.seed, round_index, k)
        samples = rows[rng.integers(0, rows.shape[0], size=cfg.local_iters)]
        v_local = state.v.copy()
        alpha_local = state.alpha.copy()
        rc = _kernels.cocoa_local(ds.indptr, ds.indices, ds.values, ds.labels,
                                  row_sq, samples, v_local, alpha_local,
                                  obj.lam, ds.n, sigma_prime, obj.num_bias)
        if rc >= 0:
            raise ValueError(f"non-finite dual vector on node {k} at step {rc}")
        dv_total += (v_local - state.v) / sigma_prime
        dalpha_total += alpha_local - state.alpha
    return DualState(state.alpha + gamma * dalpha_total, state.v + gamma * dv_total)


def dual_objective(obj: LogisticObjective, state: DualState) -> float:
    """Lower bound on the primal optimum induced by the dual variables."""
    u = obj.dataset.labels * state.alpha
    entropy = xlogy(u, u) + xlogy(1.0 - u, 1.0 - u)
    return float(-entropy.sum() / obj.dataset.n - 0.5 * obj.lam * (state.v @ state.v))


def duality_gap(obj: LogisticObjective, state: DualState) -> float:
    """Primal value at w = v minus the dual objective; optimality certificate."""
    return obj.loss_value(state.v) - dual_objective(obj, state)


def solve_optimum(obj: LogisticObjective, tol: float = 1e-10, seed: int = 0,
                  max_evals: float = 1e6) -> tuple[DenseModel, float]:
    """Solve to ||grad f(w)|| <= tol with a single-process reference method.

    Backtracking gradient descent to get into the basin, then full-batch
    variance-reduced epochs (the same kernel the round-based solver uses,
    configured as a single node) with a halve-on-increase stepsize guard.
    ``max_evals`` caps the budget in units of per-example gradient
    evaluations; exceeding it raises ConvergenceError.
    """
    if obj.lam <= 0.0:
        raise ValueError("reference solver requires lam > 0 (strong convexity)")
    ds = obj.dataset
    n = ds.n
    evals = 0.0

    w = np.zeros(obj.dim)
    f_w = obj.loss_value(w)
    g = obj.full_gradient(w)
    evals += n
    # warmup: descent steps until the gradient is moderate or the phase budget
    # is spent
    eta = 1.0
    for _ in range(50):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= max(tol, 1e-4) or evals > 0.2 * max_evals:
            break
        w, f_w, eta_used = _backtrack(obj, w, g, f_w, eta, 0.25, 0.5)
        eta = eta_used * 2.0
        g = obj.full_gradient(w)
        evals += 2 * n

    # stochastic phase: aggressive stepsize from the mean smoothness, with a
    # gradient-norm safeguard (occasional small increases are tolerated, clear
    # blowups halve the stepsize)
    h0 = 1.0 / (2.0 * (0.25 * float(_row_norms_sq(obj).mean()) + obj.lam))
    h = h0
    m = max(2 * n, 512)
    s_diag = np.ones(obj.dim)
    rng = np.random.default_rng((seed, 0xF5A9))
    gnorm = float(np.linalg.norm(g))
    w_best, g_best, gnorm_best = w.copy(), g.copy(), gnorm
    while gnorm > tol:
        if evals > max_evals:
            raise ConvergenceError(
                f"gradient norm {gnorm:.3e} > tol {tol:.3e} after {evals:.0f} evaluations"
            )
        if h < 1e-6 * h0:
            # stochastic phase stalled; grind out the rest with plain descent
            w, g, gnorm = w_best, g_best, gnorm_best
            f_w = obj.loss_value(w)
            while gnorm > tol:
                if evals > max_evals:
                    raise ConvergenceError(
                        f"gradient norm {gnorm:.3e} > tol {tol:.3e} after "
                        f"{evals:.0f} evaluations"
                    )
                w, f_w, eta_used = _backtrack(obj, w, g, f_w, eta, 0.25, 0.5)
                eta = eta_used * 2.0
                g = obj.full_gradient(w)
                evals += 2 * n
                gnorm = float(np.linalg.norm(g))
            break
        samples = rng.integers(0, n, size=m).astype(np.int64)
        w_try = w.copy()
        rc = _kernels.svrg_epoch(ds.indptr, ds.indices, ds.values, ds.labels,
                                 samples, w_try, w, g, s_diag, h, obj.lam,
                                 obj.num_bias)
        evals += 2 * m
        if rc < 0:
            g_try = obj.full_gradient(w_try)
            evals += n
            gnorm_try = float(np.linalg.norm(g_try))
        else:
            gnorm_try = float("inf")
        if gnorm_try < 1.5 * gnorm:
            w, g, gnorm = w_try, g_try, gnorm_try
            h = min(h * 1.25, h0)
            if gnorm < gnorm_best:
                w_best, g_best, gnorm_best = w.copy(), g.copy(), gnorm
        else:
            w, g, gnorm = w_best.copy(), g_best.copy(), gnorm_best
            h *= 0.5
    return w, obj.loss_value(w)
