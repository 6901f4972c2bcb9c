"""Pure NumPy kernels, the fallback backend.

Same call signatures and semantics as the compiled module
(``fedopt._kernels._core``); used when the extension is not built or when
``FEDOPT_BACKEND=python`` is set. Everything here is deterministic and
single-threaded.
"""

from __future__ import annotations

import math

import numpy as np


def _sigmoid(z: float) -> float:
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def _sigmoid_vec(z: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(z))
    return np.where(z >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))


def margins(indptr, indices, values, w, nb):
    """Per-row inner products x_i . w, plus the intercept w[-1] when nb=1."""
    n = indptr.shape[0] - 1
    prod = values * w[indices]
    # One padding zero keeps every reduceat start in bounds; empty rows are
    # fixed up afterwards (reduceat yields a[start] for them, not 0).
    prod = np.append(prod, 0.0)
    out = np.add.reduceat(prod, indptr[:-1])
    out[indptr[:-1] == indptr[1:]] = 0.0
    if nb:
        out += w[-1]
    return out


def loss_value(indptr, indices, values, labels, w, lam, nb):
    """(1/n) sum_i log(1 + exp(-y_i x_i.w)) + (lam/2) ||w||^2."""
    t = labels * margins(indptr, indices, values, w, nb)
    losses = np.log1p(np.exp(-np.abs(t))) + np.maximum(-t, 0.0)
    n = indptr.shape[0] - 1
    return float(losses.sum() / n + 0.5 * lam * (w @ w))


def full_gradient(indptr, indices, values, labels, w, lam, nb):
    """(1/n) sum_i (-y_i sigma(-y_i x_i.w)) x_i + lam w, over the full dimension."""
    n = indptr.shape[0] - 1
    m = margins(indptr, indices, values, w, nb)
    coefs = -labels * _sigmoid_vec(-labels * m)
    acc = np.zeros_like(w)
    np.add.at(acc, indices, np.repeat(coefs, np.diff(indptr)) * values)
    if nb:
        acc[-1] = coefs.sum()
    return acc / n + lam * w


def svrg_epoch(indptr, indices, values, labels, samples, w, w_tilde, g_tilde,
               s_diag, h, lam, nb):
    """Variance-reduced stochastic steps on ``w`` in place.

    For each sampled example i the step is
        w -= h * (s_diag * (c - c~) x_i + lam (w - w_tilde) + g_tilde)
    where c and c~ are the logistic coefficients of example i at w and at the
    snapshot w_tilde. ``s_diag`` must be aligned with ``w`` (one entry per
    model coordinate, bias entries included). Returns the index of the first
    step at which the iterate became non-finite, or -1.
    """
    D = w.shape[0]
    for t in range(samples.shape[0]):
        i = samples[t]
        lo, hi = indptr[i], indptr[i + 1]
        idx = indices[lo:hi]
        val = values[lo:hi]
        y = float(labels[i])
        mw = float(val @ w[idx])
        mt = float(val @ w_tilde[idx])
        if nb:
            mw += w[D - 1]
            mt += w_tilde[D - 1]
        dc = -y * _sigmoid(-y * mw) - (-y * _sigmoid(-y * mt))
        w -= h * (g_tilde + lam * (w - w_tilde))
        hdc = h * dc
        w[idx] -= hdc * (s_diag[idx] * val)
        if nb:
            w[D - 1] -= hdc * s_diag[D - 1]
        if not math.isfinite(float(w.sum())):
            return t
    return -1


def _solve_logit_prox(ymv: float, c: float, u0: float) -> float:
    """Root of g(u) = log(u/(1-u)) + ymv + c (u - u0) on (0, 1).

    g is strictly increasing, so the root is unique; safeguarded Newton with a
    bisection bracket. Roots beyond the 1e-12 feasibility guard are clamped.
    """
    lo, hi = 1e-12, 1.0 - 1e-12
    if math.log(lo) - math.log1p(-lo) + ymv + c * (lo - u0) >= 0.0:
        return lo
    if math.log(hi) - math.log1p(-hi) + ymv + c * (hi - u0) <= 0.0:
        return hi
    u = _sigmoid(-ymv)
    if u <= lo or u >= hi:
        u = 0.5 * (lo + hi)
    for _ in range(100):
        g = math.log(u) - math.log1p(-u) + ymv + c * (u - u0)
        if g > 0.0:
            hi = u
        else:
            lo = u
        gp = 1.0 / u + 1.0 / (1.0 - u) + c
        un = u - g / gp
        if not (lo < un < hi):
            un = 0.5 * (lo + hi)
        if abs(un - u) <= 1e-13 * max(1.0, abs(u)):
            return un
        u = un
    return u


def cocoa_local(indptr, indices, values, labels, row_sq, samples, v, alpha,
                lam, n_total, sigma_prime, nb):
    """Local dual coordinate-ascent steps against the local copy ``v``.

    Each step solves the one-dimensional conjugate subproblem for the sampled
    example exactly (safeguarded Newton) and applies the dual/primal update in
    place. ``v`` accumulates sigma_prime times the true primal delta, so that
    successive local steps see the damped subproblem margin; the caller must
    divide the shipped v delta by sigma_prime. Returns the first step at
    which v became non-finite, or -1.
    """
    D = v.shape[0]
    lamn = lam * n_total
    for t in range(samples.shape[0]):
        i = samples[t]
        lo, hi = indptr[i], indptr[i + 1]
        idx = indices[lo:hi]
        val = values[lo:hi]
        y = float(labels[i])
        mv = float(val @ v[idx])
        if nb:
            mv += v[D - 1]
        u0 = y * alpha[i]
        u = _solve_logit_prox(y * mv, sigma_prime * row_sq[i] / lamn, u0)
        delta = y * (u - u0)
        alpha[i] += delta
        dv = sigma_prime * delta / lamn
        v[idx] += dv * val
        if nb:
            v[D - 1] += dv
        if not math.isfinite(float(v.sum())):
            return t
    return -1
