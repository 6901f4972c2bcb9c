# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: the hot inner loops of the optimizers.

Mirrors fedopt._kernels._ref function by function; see that module for the
contract of each kernel.
"""

from libc.math cimport exp, fabs, isfinite, log, log1p
from libc.stdint cimport int64_t

import numpy as np


cdef inline double _sigmoid(double z) nogil:
    cdef double e
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


def margins(int64_t[::1] indptr, int64_t[::1] indices, double[::1] values,
            double[::1] w, int nb):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t D = w.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] mv = out
    cdef Py_ssize_t i
    cdef int64_t p
    cdef double acc
    cdef double bias = w[D - 1] if nb else 0.0
    for i in range(n):
        acc = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            acc += values[p] * w[indices[p]]
        if nb:
            acc += bias
        mv[i] = acc
    return out


def loss_value(int64_t[::1] indptr, int64_t[::1] indices, double[::1] values,
               int64_t[::1] labels, double[::1] w, double lam, int nb):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t D = w.shape[0]
    cdef Py_ssize_t i
    cdef int64_t p
    cdef double m, t, total = 0.0, sq = 0.0
    cdef double bias = w[D - 1] if nb else 0.0
    for i in range(n):
        m = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            m += values[p] * w[indices[p]]
        if nb:
            m += bias
        t = labels[i] * m
        if t >= 0.0:
            total += log1p(exp(-t))
        else:
            total += -t + log1p(exp(t))
    for i in range(D):
        sq += w[i] * w[i]
    return total / n + 0.5 * lam * sq


def full_gradient(int64_t[::1] indptr, int64_t[::1] indices, double[::1] values,
                  int64_t[::1] labels, double[::1] w, double lam, int nb):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t D = w.shape[0]
    out = np.zeros(D, dtype=np.float64)
    cdef double[::1] acc = out
    cdef Py_ssize_t i
    cdef int64_t p
    cdef double m, y, coef
    cdef double bias = w[D - 1] if nb else 0.0
    for i in range(n):
        m = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            m += values[p] * w[indices[p]]
        if nb:
            m += bias
        y = labels[i]
        coef = -y * _sigmoid(-y * m)
        for p in range(indptr[i], indptr[i + 1]):
            acc[indices[p]] += coef * values[p]
        if nb:
            acc[D - 1] += coef
    for i in range(D):
        acc[i] = acc[i] / n + lam * w[i]
    return out


def svrg_epoch(int64_t[::1] indptr, int64_t[::1] indices, double[::1] values,
               int64_t[::1] labels, int64_t[::1] samples,
               double[::1] w, double[::1] w_tilde, double[::1] g_tilde,
               double[::1] s_diag, double h, double lam, int nb):
    cdef Py_ssize_t D = w.shape[0]
    cdef Py_ssize_t m_steps = samples.shape[0]
    cdef Py_ssize_t t, j
    cdef int64_t i, p
    cdef double y, mw, mt, dc, hdc, acc
    for t in range(m_steps):
        i = samples[t]
        mw = 0.0
        mt = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            mw += values[p] * w[indices[p]]
            mt += values[p] * w_tilde[indices[p]]
        if nb:
            mw += w[D - 1]
            mt += w_tilde[D - 1]
        y = labels[i]
        dc = -y * _sigmoid(-y * mw) - (-y * _sigmoid(-y * mt))
        acc = 0.0
        for j in range(D):
            w[j] -= h * (g_tilde[j] + lam * (w[j] - w_tilde[j]))
            acc += w[j]
        hdc = h * dc
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            w[j] -= hdc * (s_diag[j] * values[p])
            acc += w[j]
        if nb:
            w[D - 1] -= hdc * s_diag[D - 1]
            acc += w[D - 1]
        if not isfinite(acc):
            return t
    return -1


cdef inline double _logit_gap(double u, double ymv, double c, double u0) nogil:
    return log(u) - log1p(-u) + ymv + c * (u - u0)


cdef double _solve_logit_prox(double ymv, double c, double u0) nogil:
    cdef double lo = 1e-12
    cdef double hi = 1.0 - 1e-12
    cdef double u, g, gp, un
    cdef int it
    if _logit_gap(lo, ymv, c, u0) >= 0.0:
        return lo
    if _logit_gap(hi, ymv, c, u0) <= 0.0:
        return hi
    u = _sigmoid(-ymv)
    if u <= lo or u >= hi:
        u = 0.5 * (lo + hi)
    for it in range(100):
        g = _logit_gap(u, ymv, c, u0)
        if g > 0.0:
            hi = u
        else:
            lo = u
        gp = 1.0 / u + 1.0 / (1.0 - u) + c
        un = u - g / gp
        if not (lo < un < hi):
            un = 0.5 * (lo + hi)
        if fabs(un - u) <= 1e-13 * (1.0 if fabs(u) < 1.0 else fabs(u)):
            return un
        u = un
    return u


def cocoa_local(int64_t[::1] indptr, int64_t[::1] indices, double[::1] values,
                int64_t[::1] labels, double[::1] row_sq, int64_t[::1] samples,
                double[::1] v, double[::1] alpha,
                double lam, int64_t n_total, double sigma_prime, int nb):
    cdef Py_ssize_t D = v.shape[0]
    cdef Py_ssize_t t
    cdef int64_t i, p
    cdef double lamn = lam * n_total
    cdef double y, mv, u0, u, delta, dv, acc
    for t in range(samples.shape[0]):
        i = samples[t]
        mv = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            mv += values[p] * v[indices[p]]
        if nb:
            mv += v[D - 1]
        y = labels[i]
        u0 = y * alpha[i]
        u = _solve_logit_prox(y * mv, sigma_prime * row_sq[i] / lamn, u0)
        delta = y * (u - u0)
        alpha[i] += delta
        dv = sigma_prime * delta / lamn
        acc = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            v[indices[p]] += dv * values[p]
            acc += v[indices[p]]
        if nb:
            v[D - 1] += dv
            acc += v[D - 1]
        if not isfinite(acc):
            return t
    return -1
