"""Positive scalar distributions with exact evaluators and seeded samplers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.special import gammaincc

from .errors import DomainError, EmptySampleError, ParameterError
from .grid import GridFn
from .special import betainc, gammainc, log_beta, log_gamma

Array = np.ndarray


def make_rng(seed=None) -> np.random.Generator:
    """A generator from an int seed, a ``SeedSequence`` or a generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def shard_seed(master: int, shard: int) -> np.random.SeedSequence:
    """Deterministic per-shard stream derived from a master seed."""
    return np.random.SeedSequence(entropy=int(master), spawn_key=(int(shard),))


def _scalar_or_array(out, x):
    return float(out) if np.ndim(x) == 0 else out


@dataclass(frozen=True, eq=False)
class ScalarDist:
    """A distribution on ``[lower_endpoint, upper_endpoint]``.

    ``atoms`` lists point masses as ``(location, mass)`` pairs and
    ``breakpoints`` any further points where the CDF or density is not
    smooth; quadrature routines split their ranges there.
    """

    name: str
    cdf_fn: Callable[[Array], Array]
    quantile_fn: Callable[[Array], Array]
    sample_fn: Callable[[np.random.Generator, int], Array]
    lower_endpoint: float = 0.0
    upper_endpoint: float = math.inf
    density_fn: Callable[[Array], Array] | None = None
    atoms: tuple = ()
    breakpoints: tuple = ()
    params: Mapping = field(default_factory=dict)
    survival_fn: Callable[[Array], Array] | None = None

    @property
    def has_density(self) -> bool:
        return self.density_fn is not None

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.clip(self.cdf_fn(x), 0.0, 1.0)
        return _scalar_or_array(out, x)

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        if self.survival_fn is not None:
            return _scalar_or_array(np.clip(self.survival_fn(x), 0.0, 1.0), x)
        return _scalar_or_array(1.0 - np.asarray(self.cdf(x)), x)

    def density(self, x):
        if self.density_fn is None:
            raise ParameterError(f"{self.name} has no density")
        x = np.asarray(x, dtype=float)
        return _scalar_or_array(self.density_fn(x), x)

    def quantile(self, p):
        p = np.asarray(p, dtype=float)
        if np.any((p < 0) | (p > 1)):
            raise DomainError("quantile levels must lie in [0, 1]")
        return _scalar_or_array(self.quantile_fn(p), p)

    def sample(self, n: int, seed=None) -> Array:
        if n < 0:
            raise DomainError("sample size must be nonnegative")
        return np.asarray(self.sample_fn(make_rng(seed), int(n)), dtype=float)

    def support_points(self) -> tuple:
        return tuple(sorted({*self.breakpoints, *(a for a, _ in self.atoms)}))

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"ScalarDist({self.name}({args}))"


def bisect_quantile(cdf, p, lo: float, hi: float, max_iter: int = 4000) -> Array:
    """Vectorized bracketed inversion of a nondecreasing ``cdf``.

    ``hi`` may be infinite; the bracket is then expanded geometrically.
    Midpoints are geometric while the bracket spans more than a factor 4,
    so tiny quantiles converge in O(log) steps.
    """
    p = np.asarray(p, dtype=float)
    flat = p.ravel()
    lo_a = np.full(flat.shape, float(lo))
    if math.isinf(hi):
        hi_a = np.full(flat.shape, 1.0)
        for _ in range(2100):
            short = cdf(hi_a) < flat
            if not short.any():
                break
            hi_a = np.where(short, hi_a * 2.0, hi_a)
    else:
        hi_a = np.full(flat.shape, float(hi))
    for _ in range(max_iter):
        open_ = hi_a - lo_a > 4 * np.finfo(float).eps * np.abs(hi_a)
        if not open_.any():
            break
        geo = (lo_a > 0) & (hi_a > 4 * lo_a)
        mid = np.where(geo, np.sqrt(lo_a * hi_a), 0.5 * (lo_a + hi_a))
        mid = np.where((lo_a == 0) & (hi_a > 1e-300), hi_a / 16.0, mid)
        below = cdf(mid) < flat
        lo_a = np.where(open_ & below, mid, lo_a)
        hi_a = np.where(open_ & ~below, mid, hi_a)
    return hi_a.reshape(p.shape)


# -- beta ---------------------------------------------------------------


@dataclass(frozen=True)
class BetaParams:
    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float, np.floating, np.integer)) and np.isfinite(v) and v > 0):
                raise ParameterError(f"beta parameter {name} must be positive, got {v!r}")


def _as_beta_params(alpha, beta) -> BetaParams:
    if isinstance(alpha, BetaParams):
        return alpha
    return BetaParams(alpha, beta)


def make_beta(alpha, beta=None) -> ScalarDist:
    """Beta distribution B(alpha, beta) on (0, 1)."""
    bp = _as_beta_params(alpha, beta)
    a, b = float(bp.alpha), float(bp.beta)
    log_norm = -log_beta(a, b)

    def density(x):
        inside = (x > 0) & (x < 1)
        xc = np.where(inside, x, 0.5)
        with np.errstate(divide="ignore"):
            v = np.exp(log_norm + (a - 1) * np.log(xc) + (b - 1) * np.log1p(-xc))
        return np.where(inside, v, 0.0)

    def cdf(x):
        return betainc(a, b, np.asarray(x, dtype=float))

    return ScalarDist(
        name="beta",
        cdf_fn=cdf,
        quantile_fn=lambda p: bisect_quantile(cdf, p, 0.0, 1.0),
        sample_fn=lambda rng, n: rng.beta(a, b, n),
        upper_endpoint=1.0,
        density_fn=density,
        params={"alpha": a, "beta": b},
    )


# -- gamma --------------------------------------------------------------


def make_gamma(shape: float, rate: float = 1.0) -> ScalarDist:
    """Gamma distribution with density rate^shape x^(shape-1) e^(-rate x) / Gamma(shape)."""
    for name, v in (("shape", shape), ("rate", rate)):
        if not (np.isfinite(v) and v > 0):
            raise ParameterError(f"gamma {name} must be positive, got {v!r}")
    a, lam = float(shape), float(rate)
    log_norm = a * math.log(lam) - log_gamma(a)

    def density(x):
        pos = x > 0
        xc = np.where(pos, x, 1.0)
        v = np.exp(log_norm + (a - 1) * np.log(xc) - lam * xc)
        return np.where(pos, v, 0.0)

    def cdf(x):
        return gammainc(a, lam * np.asarray(x, dtype=float))

    return ScalarDist(
        name="gamma",
        cdf_fn=cdf,
        quantile_fn=lambda p: bisect_quantile(cdf, p, 0.0, math.inf),
        sample_fn=lambda rng, n: rng.gamma(a, 1.0 / lam, n),
        density_fn=density,
        params={"shape": a, "rate": lam},
        survival_fn=lambda x: gammaincc(a, lam * np.maximum(np.asarray(x, dtype=float), 0.0)),
    )


def make_exponential(rate: float = 1.0) -> ScalarDist:
    return make_gamma(1.0, rate)


# -- simple test laws ---------------------------------------------------


def make_uniform(upper: float = 1.0) -> ScalarDist:
    if not (np.isfinite(upper) and upper > 0):
        raise ParameterError("uniform upper endpoint must be positive")
    b = float(upper)
    return ScalarDist(
        name="uniform",
        cdf_fn=lambda x: np.clip(np.asarray(x, dtype=float) / b, 0.0, 1.0),
        quantile_fn=lambda p: b * p,
        sample_fn=lambda rng, n: b * rng.random(n),
        upper_endpoint=b,
        density_fn=lambda x: np.where((x > 0) & (x < b), 1.0 / b, 0.0),
        breakpoints=(b,),
        params={"upper": b},
    )


def make_point_mass(loc: float = 1.0) -> ScalarDist:
    """Unit mass at ``loc > 0``; has no density."""
    if not (np.isfinite(loc) and loc > 0):
        raise ParameterError("point mass location must be positive")
    c = float(loc)
    return ScalarDist(
        name="point-mass",
        cdf_fn=lambda x: np.where(np.asarray(x, dtype=float) >= c, 1.0, 0.0),
        quantile_fn=lambda p: np.where(p > 0, c, 0.0),
        sample_fn=lambda rng, n: np.full(n, c),
        lower_endpoint=c,
        upper_endpoint=c,
        atoms=((c, 1.0),),
        params={"loc": c},
    )


RV0_KINDS = ("pure-power", "power-with-log")


def make_rv0_family(gamma: float, kind: str = "pure-power") -> ScalarDist:
    """Laws on (0, 1] regularly varying at 0 with index ``gamma``.

    ``pure-power``: H(x) = x**gamma.
    ``power-with-log``: H(x) = x**gamma * (1 + 1/(1 - log x)) / 2, whose
    slowly varying factor tends to 1/2 as x -> 0.
    """
    if not (np.isfinite(gamma) and gamma > 0):
        raise ParameterError(f"index gamma must be positive, got {gamma!r}")
    if kind not in RV0_KINDS:
        raise ParameterError(f"unknown rv0 kind {kind!r}; expected one of {RV0_KINDS}")
    g = float(gamma)
    if kind == "pure-power":

        def cdf(x):
            x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
            return x**g

        def density(x):
            inside = (x > 0) & (x < 1)
            return np.where(inside, g * np.where(inside, x, 1.0) ** (g - 1), 0.0)

        def quantile(p):
            return np.asarray(p, dtype=float) ** (1.0 / g)

    else:

        def cdf(x):
            x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
            pos = x > 0
            xc = np.where(pos, x, 1.0)
            v = xc**g * (1.0 + 1.0 / (1.0 - np.log(xc))) / 2.0
            return np.where(pos, v, 0.0)

        def density(x):
            inside = (x > 0) & (x < 1)
            xc = np.where(inside, x, 0.5)
            lg = 1.0 - np.log(xc)
            v = 0.5 * (g * xc ** (g - 1) * (1.0 + 1.0 / lg) + xc ** (g - 1) / lg**2)
            return np.where(inside, v, 0.0)

        def quantile(p):
            return bisect_quantile(cdf, p, 0.0, 1.0)

    return ScalarDist(
        name=f"rv0-{kind}",
        cdf_fn=cdf,
        quantile_fn=quantile,
        sample_fn=lambda rng, n: quantile(rng.random(n)),
        upper_endpoint=1.0,
        density_fn=density,
        breakpoints=(1.0,),
        params={"gamma": g, "kind": kind},
    )


def make_lognormal(mu: float = 0.0, sigma: float = 1.0) -> ScalarDist:
    if not (np.isfinite(sigma) and sigma > 0):
        raise ParameterError("lognormal sigma must be positive")
    from scipy.special import ndtr, ndtri

    m, s = float(mu), float(sigma)

    def cdf(x):
        x = np.asarray(x, dtype=float)
        pos = x > 0
        return np.where(pos, ndtr((np.log(np.where(pos, x, 1.0)) - m) / s), 0.0)

    def density(x):
        pos = x > 0
        xc = np.where(pos, x, 1.0)
        z = (np.log(xc) - m) / s
        return np.where(pos, np.exp(-0.5 * z * z) / (xc * s * math.sqrt(2 * math.pi)), 0.0)

    return ScalarDist(
        name="lognormal",
        cdf_fn=cdf,
        quantile_fn=lambda p: np.exp(m + s * ndtri(p)),
        sample_fn=lambda rng, n: rng.lognormal(m, s, n),
        density_fn=density,
        params={"mu": m, "sigma": s},
    )


def make_weibull(shape: float, scale: float = 1.0) -> ScalarDist:
    if not (shape > 0 and scale > 0):
        raise ParameterError("Weibull parameters must be positive")
    k, lam = float(shape), float(scale)
    return ScalarDist(
        name="weibull",
        cdf_fn=lambda x: -np.expm1(-(np.maximum(np.asarray(x, dtype=float), 0.0) / lam) ** k),
        quantile_fn=lambda p: lam * (-np.log1p(-p)) ** (1.0 / k),
        sample_fn=lambda rng, n: lam * rng.weibull(k, n),
        density_fn=lambda x: np.where(
            x > 0, k / lam * (np.maximum(x, 1e-300) / lam) ** (k - 1) * np.exp(-(np.maximum(x, 0) / lam) ** k), 0.0
        ),
        params={"shape": k, "scale": lam},
    )


def make_reciprocal(base: ScalarDist) -> ScalarDist:
    """Law of 1/X for a continuous positive X ~ ``base``."""
    if base.atoms:
        raise ParameterError("reciprocal of a law with atoms is not supported")

    def cdf(x):
        x = np.asarray(x, dtype=float)
        pos = x > 0
        return np.where(pos, 1.0 - base.cdf(1.0 / np.where(pos, x, 1.0)), 0.0)

    density = None
    if base.has_density:

        def density(x):
            pos = x > 0
            xc = np.where(pos, x, 1.0)
            return np.where(pos, base.density(1.0 / xc) / xc**2, 0.0)

    upper = 1.0 / base.lower_endpoint if base.lower_endpoint > 0 else math.inf
    lower = 1.0 / base.upper_endpoint if math.isfinite(base.upper_endpoint) else 0.0
    return ScalarDist(
        name=f"reciprocal-{base.name}",
        cdf_fn=cdf,
        quantile_fn=lambda p: 1.0 / np.asarray(base.quantile(1.0 - np.asarray(p))),
        sample_fn=lambda rng, n: 1.0 / base.sample_fn(rng, n),
        lower_endpoint=lower,
        upper_endpoint=upper,
        density_fn=density,
        params={"base": base.name, **base.params},
    )


def from_gridfn(cdf_grid: GridFn, name: str = "grid") -> ScalarDist:
    """Wrap a tabulated CDF. No density: Stieltjes integrals against it use
    cell masses."""
    if not cdf_grid.is_cdf(tol=1e-9):
        raise ParameterError("grid does not describe a CDF")
    xs, ys = cdf_grid.xs, cdf_grid.ys

    def quantile(p):
        return bisect_quantile(cdf_grid, p, 0.0, float(xs[-1]))

    return ScalarDist(
        name=name,
        cdf_fn=cdf_grid,
        quantile_fn=quantile,
        sample_fn=lambda rng, n: quantile(rng.random(n)),
        upper_endpoint=float(xs[-1]) if ys[-1] >= 1 - 1e-12 else math.inf,
        params={"points": int(xs.size)},
    )


# -- empirical laws -----------------------------------------------------


def empirical_cdf(samples) -> GridFn:
    """Right-continuous empirical CDF as a step ``GridFn``."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise EmptySampleError("empirical_cdf needs at least one sample")
    if not np.all(np.isfinite(x)):
        raise DomainError("samples must be finite")
    uniq, counts = np.unique(x, return_counts=True)
    return GridFn(uniq, np.cumsum(counts) / x.size, interpolation="step")


def ks_distance(samples, cdf) -> float:
    """Kolmogorov-Smirnov sup distance between a sample and a CDF."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise EmptySampleError("KS distance needs at least one sample")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def ks_critical(n: int, level: float = 0.01) -> float:
    """Asymptotic one-sample KS critical value (1.63/sqrt(n) at 1%)."""
    c = {0.01: 1.63, 0.05: 1.36, 0.1: 1.22}[level]
    return c / math.sqrt(n)


# -- named families -----------------------------------------------------

FAMILIES = {
    "gamma": (make_gamma, {"shape": None, "rate": 1.0}),
    "exponential": (make_exponential, {"rate": 1.0}),
    "uniform": (make_uniform, {"upper": 1.0}),
    "point-mass": (make_point_mass, {"loc": 1.0}),
    "beta": (make_beta, {"alpha": None, "beta": None}),
    "rv0": (make_rv0_family, {"gamma": None, "kind": "pure-power"}),
    "lognormal": (make_lognormal, {"mu": 0.0, "sigma": 1.0}),
    "weibull": (make_weibull, {"shape": None, "scale": 1.0}),
}


def family_from_config(cfg: Mapping) -> ScalarDist:
    """Build a law from ``{"family": name, <parameters>}``.

    ``{"family": "reciprocal", "base": {...}}`` gives the law of ``1/X``.
    Unknown keys and missing required parameters are rejected.
    """
    if not isinstance(cfg, Mapping) or "family" not in cfg:
        raise ParameterError("a distribution needs a 'family' key")
    name = cfg["family"]
    rest = {k: v for k, v in cfg.items() if k != "family"}
    if name == "reciprocal":
        if set(rest) != {"base"}:
            raise ParameterError("reciprocal takes exactly one key, 'base'")
        return make_reciprocal(family_from_config(rest["base"]))
    if name not in FAMILIES:
        raise ParameterError(f"unknown family {name!r}; expected one of {sorted([*FAMILIES, 'reciprocal'])}")
    ctor, defaults = FAMILIES[name]
    unknown = set(rest) - set(defaults)
    if unknown:
        raise ParameterError(f"unknown parameter(s) for {name}: {sorted(unknown)}")
    kw = {**defaults, **rest}
    missing = [k for k, v in kw.items() if v is None]
    if missing:
        raise ParameterError(f"missing parameter(s) for {name}: {missing}")
    for k, v in kw.items():
        if k != "kind" and (isinstance(v, bool) or not isinstance(v, (int, float))):
            raise ParameterError(f"{name}.{k} must be a number, got {v!r}")
    return ctor(**kw)
