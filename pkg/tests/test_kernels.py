"""Backend equivalence: compiled kernels against the NumPy reference."""

from __future__ import annotations

import subprocess
import sys

import numpy as np
import pytest

from fedopt._kernels import BACKEND, _ref, available_backends

from .conftest import random_dataset

needs_compiled = pytest.mark.skipif(
    "cython" not in available_backends(),
    reason="compiled backend not built",
)


@pytest.fixture
def core():
    return available_backends().get("cython") or pytest.skip("compiled backend not built")


@pytest.fixture
def payload(rng):
    ds = random_dataset(rng, n=60, d=15)
    w = rng.normal(size=16)  # one bias coordinate
    return ds, w


def test_backend_name_is_known():
    assert BACKEND in ("cython", "python")
    assert "python" in available_backends()


@needs_compiled
class TestParity:
    NB = 1

    def test_margins(self, core, payload):
        ds, w = payload
        a = _ref.margins(ds.indptr, ds.indices, ds.values, w, self.NB)
        b = core.margins(ds.indptr, ds.indices, ds.values, w, self.NB)
        np.testing.assert_allclose(a, b, rtol=1e-15, atol=1e-15)

    def test_loss_value(self, core, payload):
        ds, w = payload
        a = _ref.loss_value(ds.indptr, ds.indices, ds.values, ds.labels, w, 0.03, self.NB)
        b = core.loss_value(ds.indptr, ds.indices, ds.values, ds.labels, w, 0.03, self.NB)
        assert a == pytest.approx(b, rel=1e-14)

    def test_full_gradient(self, core, payload):
        ds, w = payload
        a = _ref.full_gradient(ds.indptr, ds.indices, ds.values, ds.labels, w, 0.03, self.NB)
        b = core.full_gradient(ds.indptr, ds.indices, ds.values, ds.labels, w, 0.03, self.NB)
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-16)

    def test_svrg_epoch(self, core, payload, rng):
        ds, w0 = payload
        lam = 0.02
        w_tilde = w0.copy()
        g = _ref.full_gradient(ds.indptr, ds.indices, ds.values, ds.labels,
                               w_tilde, lam, self.NB)
        s_diag = np.abs(rng.normal(size=w0.size)) + 0.1
        samples = rng.integers(0, ds.n, size=300).astype(np.int64)
        wa = w0.copy()
        wb = w0.copy()
        ra = _ref.svrg_epoch(ds.indptr, ds.indices, ds.values, ds.labels, samples,
                             wa, w_tilde, g, s_diag, 0.05, lam, self.NB)
        rb = core.svrg_epoch(ds.indptr, ds.indices, ds.values, ds.labels, samples,
                             wb, w_tilde, g, s_diag, 0.05, lam, self.NB)
        assert ra == rb == -1
        np.testing.assert_allclose(wa, wb, rtol=1e-12, atol=1e-14)

    def test_cocoa_local(self, core, payload, rng):
        ds, _ = payload
        lam = 0.05
        row_sq = ds.row_sq_norms() + 1.0
        samples = rng.integers(0, ds.n, size=200).astype(np.int64)
        va, vb = np.zeros(16), np.zeros(16)
        aa, ab = np.zeros(ds.n), np.zeros(ds.n)
        ra = _ref.cocoa_local(ds.indptr, ds.indices, ds.values, ds.labels, row_sq,
                              samples, va, aa, lam, ds.n, 1.0, self.NB)
        rb = core.cocoa_local(ds.indptr, ds.indices, ds.values, ds.labels, row_sq,
                              samples, vb, ab, lam, ds.n, 1.0, self.NB)
        assert ra == rb == -1
        np.testing.assert_allclose(va, vb, rtol=1e-10, atol=1e-13)
        np.testing.assert_allclose(aa, ab, rtol=1e-10, atol=1e-13)


class TestBadStepDetection:
    def test_svrg_epoch_reports_step(self, rng):
        ds = random_dataset(rng, n=10, d=4)
        w = np.zeros(4)
        w_tilde = np.zeros(4)
        g = np.full(4, 1e200)
        s_diag = np.ones(4)
        samples = np.zeros(8, dtype=np.int64)
        with np.errstate(over="ignore", invalid="ignore"):
            rc = _ref.svrg_epoch(ds.indptr, ds.indices, ds.values, ds.labels,
                                 samples, w, w_tilde, g, s_diag, 1e200, 0.0, 0)
        assert rc >= 0

    @needs_compiled
    def test_compiled_agrees_on_bad_step(self, core, rng):
        ds = random_dataset(rng, n=10, d=4)
        g = np.full(4, 1e200)
        samples = np.zeros(8, dtype=np.int64)
        args = (ds.indptr, ds.indices, ds.values, ds.labels, samples)
        with np.errstate(over="ignore", invalid="ignore"):
            ra = _ref.svrg_epoch(*args, np.zeros(4), np.zeros(4), g, np.ones(4),
                                 1e200, 0.0, 0)
            rb = core.svrg_epoch(*args, np.zeros(4), np.zeros(4), g, np.ones(4),
                                 1e200, 0.0, 0)
        assert ra == rb


def test_env_var_forces_python_backend():
    code = (
        "import os; os.environ['FEDOPT_BACKEND'] = 'python'; "
        "from fedopt._kernels import BACKEND; print(BACKEND)"
    )
    out = subprocess.run([sys.executable, "-c", code], capture_output=True,
                         text=True, check=True)
    assert out.stdout.strip() == "python"
