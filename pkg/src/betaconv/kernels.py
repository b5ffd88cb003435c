"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``BETACONV_PURE_PYTHON`` is set to a non-empty value
other than ``0``, the numpy implementation is used.
"""

import os

import numpy as np

from . import _kernels_py

_force_py = os.environ.get("BETACONV_PURE_PYTHON", "") not in ("", "0")

try:
    if _force_py:
        raise ImportError("pure-Python backend requested")
    from . import _kernels as _impl

    BACKEND = "compiled"
except ImportError:
    _impl = _kernels_py
    BACKEND = "python"

betainc = _impl.betainc
gammainc = _impl.gammainc


def _arr(v):
    return np.ascontiguousarray(v, dtype=float)


def weyl_integral_hermite(xs, f, df, beta):
    return _impl.weyl_integral_hermite(_arr(xs), _arr(f), _arr(df), float(beta))


def weyl_stieltjes_hermite(xs, phi, dphi, beta):
    return _impl.weyl_stieltjes_hermite(_arr(xs), _arr(phi), _arr(dphi), float(beta))


__all__ = ["BACKEND", "betainc", "gammainc", "weyl_integral_hermite", "weyl_stieltjes_hermite"]
