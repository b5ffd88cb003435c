"""Regular variation at zero: index estimation, product indices, beta
lower-tail constants and the lower tail of polar scalings."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Mapping, NamedTuple

import numpy as np

from .dist import BetaParams, ScalarDist, make_lognormal, make_reciprocal, make_rng, make_weibull, shard_seed
from .errors import BoundaryWarning, DomainError, InsufficientTailError, ParameterError
from .scaling import scaled_cdf_at, scaled_pdf_at
from .special import log_gamma

DEFAULT_WINDOW = (1e-4, 1e-2)
MIN_TAIL_POINTS = 50
GUMBEL_FAMILIES = ("lognormal", "weibull-type")


@dataclass(frozen=True)
class TailReport:
    index_hat: float
    window: tuple
    stderr: float
    diagnostic: float
    method: str = "regression"
    k: int | None = None

    def __post_init__(self):
        lo, hi = self.window
        if not lo < hi:
            raise DomainError(f"tail window must satisfy u_min < u_max, got {self.window}")
        if not (math.isfinite(self.index_hat) and self.index_hat >= 0):
            raise DomainError(f"index estimate {self.index_hat} is not a finite nonnegative number")

    def as_dict(self) -> dict:
        out = {
            "index_hat": self.index_hat,
            "stderr": self.stderr,
            "window": list(self.window),
            "diagnostic": self.diagnostic,
            "method": self.method,
        }
        if self.k is not None:
            out["k"] = self.k
        return out


def _window(window) -> tuple:
    lo, hi = (float(w) for w in window)
    if not (0 < lo < hi < 0.2):
        raise ParameterError(f"window quantiles must satisfy 0 < lower < upper < 0.2, got {window}")
    return lo, hi


def _regression_index(dist: ScalarDist, window) -> TailReport:
    lo, hi = _window(window)
    u_lo, u_hi = float(dist.quantile(lo)), float(dist.quantile(hi))
    if not 0 < u_lo < u_hi:
        raise InsufficientTailError(f"{dist.name} has no resolvable lower tail on quantiles {window}")
    u = np.geomspace(u_lo, u_hi, 64)
    lx, ly = np.log(u), np.log(np.asarray(dist.cdf(u), dtype=float))
    (slope, icept), cov = np.polyfit(lx, ly, 1, cov="unscaled")
    resid = ly - (slope * lx + icept)
    ss = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 1.0
    sigma2 = float(np.sum(resid**2)) / (u.size - 2)
    return TailReport(float(slope), (u_lo, u_hi), math.sqrt(sigma2 * cov[0, 0]), r2)


def hill_index(samples, k: int | None = None) -> TailReport:
    """Hill estimator of the index at zero from the ``k`` smallest points.

    Works on reciprocals: ``1/X`` has a Pareto-type upper tail with index
    ``gamma`` when ``X`` is regularly varying at 0 with index ``gamma``.
    The default ``k`` is ``n**0.6``.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise DomainError("tail index estimation needs positive finite samples")
    n = x.size
    k = int(n**0.6) if k is None else int(k)
    if k < MIN_TAIL_POINTS or k >= n:
        raise InsufficientTailError(f"{k} points in the lower tail of {n} samples; need at least {MIN_TAIL_POINTS}")
    low = np.partition(x, k)[: k + 1]
    low.sort()
    logs = np.log(low[k]) - np.log(low[:k])
    mean = float(logs.mean())
    if mean <= 0:
        raise InsufficientTailError("lower tail is degenerate (tied order statistics)")
    gamma = 1.0 / mean
    # the log-spacings of a pure power law are i.i.d. exponential
    ks = float(np.max(np.abs(np.arange(1, k + 1) / k - (1.0 - np.exp(-np.sort(logs) * gamma)))))
    return TailReport(gamma, (float(low[0]), float(low[k])), gamma / math.sqrt(k), ks, "hill", k)


def rv_index_at_zero(dist_or_samples, window=None) -> TailReport:
    """Index of regular variation at zero.

    A :class:`ScalarDist` is fitted by least squares of ``log F(u)`` on
    ``log u`` between the window quantiles (default ``(1e-4, 1e-2)``).
    Samples go to :func:`hill_index`; a window then fixes ``k`` as the number
    of points below its upper quantile, otherwise ``k = n**0.6``.
    """
    if isinstance(dist_or_samples, ScalarDist):
        return _regression_index(dist_or_samples, DEFAULT_WINDOW if window is None else window)
    x = np.asarray(dist_or_samples, dtype=float).ravel()
    if window is None:
        return hill_index(x)
    _, hi = _window(window)
    return hill_index(x, int(hi * x.size))


def product_index(gamma: float, alpha: float) -> float:
    """Index at zero of ``R * S`` for ``R`` in RV_gamma and ``S`` in RV_alpha."""
    if not (gamma > 0 and alpha > 0):
        raise ParameterError(f"indices must be positive, got gamma={gamma}, alpha={alpha}")
    if math.isclose(gamma, alpha, rel_tol=1e-12):
        warnings.warn(
            f"gamma = alpha = {gamma}: the product's slowly varying part is not the first-order one",
            BoundaryWarning,
            stacklevel=2,
        )
    return float(min(gamma, alpha))


def beta_lower_tail_constant(params) -> float:
    """``C`` in ``P(B(alpha, beta) < s) ~ C s**alpha`` as ``s -> 0``."""
    p = params if isinstance(params, BetaParams) else BetaParams(*map(float, params))
    return math.exp(log_gamma(p.alpha + p.beta) - log_gamma(p.alpha + 1.0) - log_gamma(p.beta))


def theorem1_ratio_constant(alpha: float, beta_k: float, beta_k1: float, gamma: float) -> float:
    """Limit of ``H_k(x) / H_{k+1}(x)`` as ``x -> 0`` for a base in RV_gamma.

    ``H_k`` is the base scaled by ``B(alpha + beta_k, beta - beta_k)``.
    """
    if not (alpha > 0 and gamma >= 0 and beta_k >= 0 and beta_k1 >= 0):
        raise ParameterError("need alpha > 0 and nonnegative beta_k, beta_k1, gamma")
    if gamma >= alpha + beta_k1:
        raise DomainError(f"gamma = {gamma} >= alpha + beta_k1 = {alpha + beta_k1}: the limit constant is undefined")
    return math.exp(
        log_gamma(alpha + beta_k1)
        + log_gamma(alpha + beta_k - gamma)
        - log_gamma(alpha + beta_k)
        - log_gamma(alpha + beta_k1 - gamma)
    )


@dataclass(frozen=True)
class TailRelation:
    ratio: float
    expected: float

    @property
    def deviation(self) -> float:
        return abs(self.ratio - self.expected)


def density_tail_relation_check(H: ScalarDist, params, gamma: float, x_small: float) -> TailRelation:
    """``x h_{alpha,beta}(x) / H_{alpha,beta}(x)`` at ``x_small``; tends to the
    product index ``min(gamma, alpha)``."""
    p = params if isinstance(params, BetaParams) else BetaParams(*map(float, params))
    if not x_small > 0:
        raise DomainError("x_small must be positive")
    ratio = x_small * scaled_pdf_at(H, p, x_small) / scaled_cdf_at(H, p, x_small)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryWarning)
        expected = product_index(gamma, p.alpha)
    return TailRelation(float(ratio), expected)


def gumbel_radial(family: str) -> ScalarDist:
    """``R = 1 / R*`` with ``R*`` in the Gumbel max-domain of attraction."""
    if family == "lognormal":
        return make_reciprocal(make_lognormal(0.0, 1.0))
    if family == "weibull-type":
        return make_reciprocal(make_weibull(2.0))
    raise ParameterError(f"unknown family {family!r}; expected one of {GUMBEL_FAMILIES}")


def gumbel_scaling_index_check(R_star_family: str, params, n: int, seed=None) -> TailReport:
    """Hill index of ``W = R * S`` with ``1/R`` in the Gumbel domain and
    ``S ~ B(alpha, beta)``; all moments of ``1/R`` are finite, so the index
    is ``alpha``."""
    p = params if isinstance(params, BetaParams) else BetaParams(*map(float, params))
    R = gumbel_radial(R_star_family)
    rng = make_rng(seed)
    r = R.sample(n, rng)
    s = rng.beta(p.alpha, p.beta, n)
    return hill_index(r * s)


@dataclass(frozen=True)
class LocalRegularVariation:
    """Local behaviour of ``G`` at ``rho`` and ``rho~ = sqrt(1 - rho**2)``:
    ``G(r + t) - G(r - t) = L_r(t) t**alpha_r`` for small ``t``."""

    alpha_rho: float
    alpha_rho_tilde: float
    L_rho: Callable[[float], float]
    L_rho_tilde: Callable[[float], float]
    c: float | None = None

    def __post_init__(self):
        if not (self.alpha_rho >= 0 and self.alpha_rho_tilde >= 0):
            raise ParameterError("local indices must be nonnegative")
        if self.alpha_rho == self.alpha_rho_tilde and self.c is None:
            raise ParameterError("equal local indices need the proportionality constant c with L_rho = c L_rho_tilde")

    @classmethod
    def from_density(cls, G: ScalarDist, rho: float) -> "LocalRegularVariation":
        """The continuous-density case: both indices 1 and ``L_r = 2 g(r)``."""
        if not G.has_density:
            raise ParameterError(f"{G.name} has no density")
        rt = math.sqrt(1.0 - rho * rho)
        g1, g2 = float(G.density(abs(rho))), float(G.density(rt))
        if not (g1 > 0 and g2 > 0):
            raise DomainError("the density must be positive at rho and rho~")
        return cls(1.0, 1.0, lambda t, v=2 * g1: v, lambda t, v=2 * g2: v, g1 / g2)


SIGN_PAIRS = ((1, 1), (1, -1), (-1, 1), (-1, -1))


def sign_pair_probabilities(q) -> dict:
    """``{(i, j): P(T1 = i, T2 = j)}`` from a mapping or a 4-sequence in the
    order (1,1), (1,-1), (-1,1), (-1,-1)."""
    if isinstance(q, Mapping):
        out = {k: float(q.get(k, 0.0)) for k in SIGN_PAIRS}
    else:
        vals = [float(v) for v in q]
        if len(vals) != 4:
            raise ParameterError("need four sign-pair probabilities")
        out = dict(zip(SIGN_PAIRS, vals))
    if any(v < 0 for v in out.values()) or abs(sum(out.values()) - 1.0) > 1e-12:
        raise ParameterError(f"sign-pair probabilities must be nonnegative and sum to 1, got {out}")
    return out


def independent_signs(q1: float, q2: float) -> dict:
    """Sign-pair probabilities for independent ``T1``, ``T2`` with
    ``P(T_i = 1) = q_i``."""
    return {(i, j): (q1 if i > 0 else 1 - q1) * (q2 if j > 0 else 1 - q2) for i, j in SIGN_PAIRS}


POLAR_VARIANTS = ("two-term", "density", "single-root")


def polar_scale_tail(G: ScalarDist, rho: float, q, lrv: LocalRegularVariation | None, u: float, variant: str = "two-term") -> float:
    """Small-``u`` asymptotics of ``P(|rho T1 S + rho~ T2 sqrt(1 - S**2)| <= u)``.

    ``two-term``: ``q_{1,-1} (rho u)**a~ L~(u) + q_{-1,1} (rho~ u)**a L(u)``.
    ``density``: ``2 P(T1 T2 = -1) (g(rho) rho~ + g(rho~) rho) u``.
    ``single-root``: ``(q_{1,-1} + q_{-1,1}) (rho u)**a~ L~(u)``. For
    ``rho > 0`` both opposite-sign cases reduce to ``|rho S - rho~ sqrt(1-S**2)|``,
    which vanishes only at ``S = rho~`` with slope ``1/rho``; this is the
    form that matches simulation.
    """
    if not 0 < rho < 1:
        raise ParameterError(f"rho must lie in (0, 1), got {rho}")
    if variant not in POLAR_VARIANTS:
        raise ParameterError(f"unknown variant {variant!r}; expected one of {POLAR_VARIANTS}")
    if not u > 0:
        raise DomainError("u must be positive")
    qq = sign_pair_probabilities(q)
    rt = math.sqrt(1.0 - rho * rho)
    opposite = qq[(1, -1)] + qq[(-1, 1)]
    if variant == "density":
        if not G.has_density:
            raise ParameterError(f"{G.name} has no density")
        return 2.0 * opposite * (float(G.density(rho)) * rt + float(G.density(rt)) * rho) * u
    if lrv is None:
        lrv = LocalRegularVariation.from_density(G, rho)
    near_rt = (rho * u) ** lrv.alpha_rho_tilde * lrv.L_rho_tilde(u)
    if variant == "single-root":
        return opposite * near_rt
    return qq[(1, -1)] * near_rt + qq[(-1, 1)] * (rt * u) ** lrv.alpha_rho * lrv.L_rho(u)


def polar_tail_monte_carlo(G: ScalarDist, rho: float, q1: float, q2: float, u: float, n: int, seed: int = 0, shard_size: int = 1_000_000) -> float:
    """Monte Carlo ``P(S_rho <= u)`` with independent signs, in shards seeded
    from ``(seed, shard index)`` and merged by summing counts."""
    if n <= 0:
        raise ParameterError("need a positive number of draws")
    rt = math.sqrt(1.0 - rho * rho)
    hits = 0
    for shard, start in enumerate(range(0, n, shard_size)):
        m = min(shard_size, n - start)
        rng = np.random.default_rng(shard_seed(seed, shard))
        s = G.sample(m, rng)
        t1 = np.where(rng.random(m) < q1, 1.0, -1.0)
        t2 = np.where(rng.random(m) < q2, 1.0, -1.0)
        hits += int(np.count_nonzero(np.abs(rho * t1 * s + rt * t2 * np.sqrt(1.0 - s * s)) <= u))
    return hits / n


class AggregationIndices(NamedTuple):
    gamma1: float
    gamma2: float


def aggregation_indices(gamma: float, alpha: float, lrv: LocalRegularVariation) -> AggregationIndices:
    """Indices at zero of ``|X|`` and ``|Y_rho|`` for a polar pair with
    ``R`` in RV_gamma and ``S`` in RV_alpha."""
    if not (gamma > 0 and alpha > 0):
        raise ParameterError("gamma and alpha must be positive")
    g1 = min(alpha, gamma)
    g2 = min(gamma, lrv.alpha_rho, lrv.alpha_rho_tilde)
    ties = []
    if math.isclose(alpha, gamma):
        ties.append(f"gamma = alpha = {gamma}")
    if math.isclose(g2, gamma) and min(lrv.alpha_rho, lrv.alpha_rho_tilde) == gamma:
        ties.append(f"gamma equals a local index ({gamma})")
    if ties:
        warnings.warn("boundary case: " + "; ".join(ties), BoundaryWarning, stacklevel=2)
    return AggregationIndices(float(g1), float(g2))
