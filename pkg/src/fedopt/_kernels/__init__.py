"""Numerical kernel backends.

The compiled Cython module is used when available; otherwise the pure NumPy
reference implementation. ``FEDOPT_BACKEND=python`` forces the fallback,
which is handy for the backend benchmark and for debugging.
"""

from __future__ import annotations

import os

from fedopt._kernels import _ref

if os.environ.get("FEDOPT_BACKEND") == "python":
    _impl = _ref
    BACKEND = "python"
else:
    try:
        from fedopt._kernels import _core as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _ref
        BACKEND = "python"

margins = _impl.margins
loss_value = _impl.loss_value
full_gradient = _impl.full_gradient
svrg_epoch = _impl.svrg_epoch
cocoa_local = _impl.cocoa_local


def available_backends() -> dict:
    """Importable backends by name; always contains 'python'."""
    backends = {"python": _ref}
    try:
        from fedopt._kernels import _core

        backends["cython"] = _core
    except ImportError:
        pass
    return backends
