"""Special functions: log-gamma, regularized incomplete beta and gamma."""

import math

import numpy as np

from . import kernels
from .errors import DomainError, ParameterError


def log_gamma(x: float) -> float:
    """Natural logarithm of the Euler gamma function for ``x > 0``."""
    if not x > 0:
        raise DomainError(f"log_gamma requires x > 0, got {x!r}")
    return math.lgamma(x)


def gamma_ratio(num, den) -> float:
    """``prod(Gamma(num)) / prod(Gamma(den))`` evaluated in log space.

    All arguments must be positive.
    """
    return math.exp(sum(log_gamma(a) for a in num) - sum(log_gamma(b) for b in den))


def log_beta(a: float, b: float) -> float:
    return log_gamma(a) + log_gamma(b) - log_gamma(a + b)


def _check_positive(**kw):
    for name, v in kw.items():
        if not (np.isfinite(v) and v > 0):
            raise ParameterError(f"{name} must be positive and finite, got {v!r}")


def betainc(a: float, b: float, x):
    """Regularized incomplete beta ``I_x(a, b)``; scalar in, scalar out."""
    _check_positive(a=a, b=b)
    out = kernels.betainc(float(a), float(b), np.asarray(x, dtype=float))
    return float(out) if np.ndim(x) == 0 else out


def gammainc(a: float, x):
    """Regularized lower incomplete gamma ``P(a, x)``."""
    _check_positive(a=a)
    out = kernels.gammainc(float(a), np.asarray(x, dtype=float))
    return float(out) if np.ndim(x) == 0 else out


def power(x, s):
    """The power weight ``p_s(x) = x**s`` for any real exponent ``s``."""
    return np.power(x, s)
