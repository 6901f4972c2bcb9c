"""Sparse dataset container and libsvm-format I/O.

Feature indices are 0-based in memory and 1-based on disk (libsvm
convention). Saved files carry a sidecar header line ``# d=<int> n=<int>``
so that trailing all-zero features survive a round trip.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# A model is a plain float64 vector of the objective's effective dimension.
DenseModel = np.ndarray


class DataFormatError(ValueError):
    """Malformed libsvm input; message carries the offending line number."""


@dataclass(frozen=True)
class SparseExample:
    """One row: strictly increasing feature ids, aligned nonzero values, ±1 label."""

    indices: np.ndarray
    values: np.ndarray
    label: int


class SparseDataset:
    """Row-sparse design matrix with ±1 labels, stored CSR-style.

    Immutable after construction; safe to share across workers.
    """

    __slots__ = ("indptr", "indices", "values", "labels", "num_features")

    def __init__(self, indptr, indices, values, labels, num_features, *, validate=True):
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        self.labels = np.ascontiguousarray(labels, dtype=np.int64)
        self.num_features = int(num_features)
        if validate:
            self._validate()

    def _validate(self) -> None:
        n = self.labels.shape[0]
        if n < 1:
            raise DataFormatError("no examples")
        if self.num_features < 1:
            raise DataFormatError("d must be >= 1")
        if self.indptr.shape[0] != n + 1 or self.indptr[0] != 0 or self.indptr[-1] != self.indices.shape[0]:
            raise DataFormatError("inconsistent CSR index pointer")
        if np.any(np.diff(self.indptr) < 0):
            raise DataFormatError("indptr must be nondecreasing")
        if self.indices.shape[0] != self.values.shape[0]:
            raise DataFormatError("indices/values length mismatch")
        if self.indices.size:
            if self.indices.min() < 0 or self.indices.max() >= self.num_features:
                raise DataFormatError("feature index out of range")
            starts = self.indptr[:-1]
            gaps = np.diff(self.indices)
            # a gap position is within-row unless the next entry starts a row
            row_interior = np.ones(max(self.indices.size - 1, 0), dtype=bool)
            for b in starts[(starts > 0) & (starts < self.indices.size)]:
                row_interior[b - 1] = False
            if np.any(gaps[row_interior] <= 0):
                raise DataFormatError("indices within an example must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise DataFormatError("non-finite feature value")
        if np.any(self.values == 0.0):
            raise DataFormatError("stored zero value")
        if not np.all(np.isin(self.labels, (-1, 1))):
            raise DataFormatError("labels must be -1 or +1")

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    @property
    def d(self) -> int:
        return self.num_features

    def __len__(self) -> int:
        return self.n

    def example(self, i: int) -> SparseExample:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return SparseExample(self.indices[lo:hi], self.values[lo:hi], int(self.labels[i]))

    def __iter__(self):
        return (self.example(i) for i in range(self.n))

    def row_sq_norms(self) -> np.ndarray:
        """Per-example squared euclidean norms (feature part only)."""
        sq = np.append(self.values * self.values, 0.0)
        out = np.add.reduceat(sq, self.indptr[:-1])
        out[self.indptr[:-1] == self.indptr[1:]] = 0.0
        return out

    @classmethod
    def from_examples(cls, examples, num_features=None) -> "SparseDataset":
        if not examples:
            raise ValueError("no examples")
        indptr = np.zeros(len(examples) + 1, dtype=np.int64)
        for i, ex in enumerate(examples):
            indptr[i + 1] = indptr[i] + len(ex.indices)
        indices = np.concatenate([np.asarray(ex.indices, dtype=np.int64) for ex in examples]) if indptr[-1] else np.zeros(0, dtype=np.int64)
        values = np.concatenate([np.asarray(ex.values, dtype=np.float64) for ex in examples]) if indptr[-1] else np.zeros(0, dtype=np.float64)
        labels = np.array([ex.label for ex in examples], dtype=np.int64)
        if num_features is None:
            num_features = int(indices.max()) + 1 if indices.size else 1
        return cls(indptr, indices, values, labels, num_features)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseDataset):
            return NotImplemented
        return (
            self.num_features == other.num_features
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.labels, other.labels)
        )


_LABEL_MAP = {"+1": 1, "1": 1, "-1": -1, "0": -1}


def load_libsvm(path, expected_d: int | None = None) -> SparseDataset:
    """Parse a libsvm text file into a SparseDataset.

    Effective dimension: ``expected_d`` if given, else the sidecar header's d,
    else 1 + the maximum index observed.
    """
    indptr = [0]
    indices: list[int] = []
    values: list[float] = []
    labels: list[int] = []
    sidecar_d = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if lineno == 1 and "d=" in line:
                    for tok in line[1:].split():
                        if tok.startswith("d="):
                            sidecar_d = int(tok[2:])
                continue
            parts = line.split()
            label = _LABEL_MAP.get(parts[0])
            if label is None:
                raise DataFormatError(f"line {lineno}: label {parts[0]!r} not in {{0, -1, +1, 1}}")
            row: list[tuple[int, float]] = []
            seen: set[int] = set()
            for tok in parts[1:]:
                try:
                    idx_s, val_s = tok.split(":", 1)
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError as exc:
                    raise DataFormatError(f"line {lineno}: bad feature token {tok!r}") from exc
                if idx < 1:
                    raise DataFormatError(f"line {lineno}: index {idx} not 1-based")
                if idx - 1 in seen:
                    raise DataFormatError(f"line {lineno}: duplicate index {idx}")
                if not np.isfinite(val):
                    raise DataFormatError(f"line {lineno}: non-finite value {val_s!r}")
                if expected_d is not None and idx - 1 >= expected_d:
                    raise DataFormatError(f"line {lineno}: index {idx} exceeds d={expected_d}")
                seen.add(idx - 1)
                if val != 0.0:
                    row.append((idx - 1, val))
            row.sort()
            for idx, val in row:
                indices.append(idx)
                values.append(val)
            indptr.append(len(indices))
            labels.append(label)
    if not labels:
        raise DataFormatError("no examples")
    if expected_d is not None:
        d = expected_d
    elif sidecar_d is not None:
        d = sidecar_d
    else:
        d = (max(indices) + 1) if indices else 1
    return SparseDataset(indptr, indices, values, labels, d)


def save_libsvm(dataset: SparseDataset, path) -> None:
    """Write libsvm text plus the ``# d=... n=...`` sidecar header.

    Values use %.17g so that a reload reproduces every float bit-exactly.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# d={dataset.d} n={dataset.n}\n")
        for i in range(dataset.n):
            lo, hi = dataset.indptr[i], dataset.indptr[i + 1]
            label = "+1" if dataset.labels[i] == 1 else "-1"
            feats = " ".join(
                f"{dataset.indices[p] + 1}:{format(dataset.values[p], '.17g')}"
                for p in range(lo, hi)
            )
            fh.write(f"{label} {feats}\n" if feats else f"{label}\n")


def sparse_dot(example: SparseExample, w: DenseModel) -> float:
    """sum_j values[j] * w[indices[j]]."""
    if example.indices.size and example.indices[-1] >= w.shape[0]:
        raise IndexError("feature index out of bounds for model")
    return float(example.values @ w[example.indices])


def axpy_sparse(alpha: float, example: SparseExample, w: DenseModel) -> None:
    """In place w[indices] += alpha * values; other coordinates untouched."""
    if example.indices.size and example.indices[-1] >= w.shape[0]:
        raise IndexError("feature index out of bounds for model")
    w[example.indices] += alpha * example.values


def zero_model(dim: int) -> DenseModel:
    return np.zeros(dim, dtype=np.float64)
