"""L2-regularized logistic regression over a sparse dataset.

The objective is f(w) = (1/n) sum_i log(1 + exp(-y_i x_i.w)) + (lam/2)||w||^2.
With ``use_bias`` an implicit always-1 feature is appended at index d, so the
effective model dimension is d + 1; the bias weight is regularized like any
other coordinate.
"""

from __future__ import annotations

import numpy as np

from fedopt import _kernels
from fedopt.data import DenseModel, SparseDataset


class LogisticObjective:
    """Loss, gradients, per-node values, and test error for one dataset.

    All methods are pure reads; an instance can be shared across workers.
    """

    def __init__(self, dataset: SparseDataset, lam: float | None = None,
                 use_bias: bool = False):
        if lam is None:
            lam = 1.0 / dataset.n
        if lam < 0.0:
            raise ValueError("lam must be nonnegative")
        self.dataset = dataset
        self.lam = float(lam)
        self.use_bias = bool(use_bias)

    @property
    def dim(self) -> int:
        """Effective model dimension: d, plus 1 when the bias is enabled."""
        return self.dataset.d + (1 if self.use_bias else 0)

    @property
    def num_bias(self) -> int:
        return 1 if self.use_bias else 0

    def _check_model(self, w: DenseModel) -> None:
        if w.shape != (self.dim,):
            raise ValueError(f"model has shape {w.shape}, expected ({self.dim},)")

    def margins(self, w: DenseModel, dataset: SparseDataset | None = None) -> np.ndarray:
        """Per-example inner products x_i . w (bias included when enabled)."""
        self._check_model(w)
        ds = self.dataset if dataset is None else dataset
        if ds.d != self.dataset.d:
            raise ValueError(f"dataset has d={ds.d}, expected {self.dataset.d}")
        return _kernels.margins(ds.indptr, ds.indices, ds.values, w, self.num_bias)

    def loss_value(self, w: DenseModel) -> float:
        self._check_model(w)
        ds = self.dataset
        return _kernels.loss_value(ds.indptr, ds.indices, ds.values, ds.labels,
                                   w, self.lam, self.num_bias)

    def full_gradient(self, w: DenseModel) -> np.ndarray:
        self._check_model(w)
        ds = self.dataset
        return _kernels.full_gradient(ds.indptr, ds.indices, ds.values, ds.labels,
                                      w, self.lam, self.num_bias)

    def stochastic_gradient(self, i: int, w: DenseModel) -> tuple[np.ndarray, np.ndarray]:
        """Data-part gradient of example i at w, as (indices, values).

        Support is exactly example i's nonzero features plus the bias
        coordinate when enabled; the regularizer term is not included.
        """
        self._check_model(w)
        ds = self.dataset
        if not 0 <= i < ds.n:
            raise IndexError(f"example index {i} out of range [0, {ds.n})")
        lo, hi = ds.indptr[i], ds.indptr[i + 1]
        idx = ds.indices[lo:hi]
        val = ds.values[lo:hi]
        y = float(ds.labels[i])
        margin = float(val @ w[idx])
        if self.use_bias:
            margin += float(w[-1])
        z = -y * margin
        if z >= 0.0:
            sig = 1.0 / (1.0 + np.exp(-z))
        else:
            e = np.exp(z)
            sig = e / (1.0 + e)
        coef = -y * float(sig)
        if self.use_bias:
            out_idx = np.append(idx, self.dataset.d)
            out_val = np.append(coef * val, coef)
        else:
            out_idx = idx.copy()
            out_val = coef * val
        return out_idx, out_val

    def local_value(self, part, k: int, w: DenseModel) -> float:
        """Mean loss over node k's examples plus the (global) regularizer.

        Weighting the data parts by n_k/n and summing over nodes recovers
        loss_value; the regularizer enters each node's value once so that the
        K=1 case equals loss_value too.
        """
        self._check_model(w)
        rows = part.node_examples(k)
        ds = self.dataset
        m = self.margins(w)[rows]
        t = ds.labels[rows] * m
        losses = np.log1p(np.exp(-np.abs(t))) + np.maximum(-t, 0.0)
        return float(losses.mean() + 0.5 * self.lam * (w @ w))

    def test_error(self, w: DenseModel, test: SparseDataset) -> float:
        """Fraction of misclassified examples; a zero margin predicts +1."""
        m = self.margins(w, test)
        predicted = np.where(m >= 0.0, 1, -1)
        return float(np.mean(predicted != test.labels))
