"""Monte Carlo for normalized componentwise minima of elliptical and polar
random vectors.

Replications run in shards; shard ``i`` draws from
``SeedSequence(entropy=seed, spawn_key=(i,))`` and results are concatenated
in shard order, so output does not depend on the worker count
(``BETACONV_THREADS``).
"""

from __future__ import annotations

import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .dist import ScalarDist, bisect_quantile, ks_distance, make_rng, shard_seed
from .errors import EmptySampleError, ParameterError, ResolutionError, SpecError
from .quadrature import integrate
from .special import betainc
from .tails import rv_index_at_zero

SHARD_REPS = 500
TABLE_POINTS = 2048
LATTICE = np.arange(1, 6) / 6.0


def worker_count() -> int:
    raw = os.environ.get("BETACONV_THREADS", "")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ParameterError(f"BETACONV_THREADS must be an integer, got {raw!r}") from None
    return min(8, os.cpu_count() or 1)


def _run_shards(fn, n_shards: int) -> list:
    workers = min(worker_count(), n_shards)
    if workers <= 1:
        return [fn(i) for i in range(n_shards)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n_shards)))


# -- laws ------------------------------------------------------------------


@dataclass(frozen=True)
class LimitLaw:
    """``G_gamma(x) = 1 - exp(-x**gamma)`` on ``x > 0``."""

    gamma: float

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise ParameterError(f"limit index must be positive, got {self.gamma}")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return -np.expm1(-np.maximum(x, 0.0) ** self.gamma)


@dataclass(frozen=True)
class NormalizingSequence:
    n: int
    a_n: float
    b_n: float | None = None


@dataclass(frozen=True, eq=False)
class EllipticalSpec:
    dim: int
    correlation: np.ndarray
    radial: ScalarDist
    factor: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        c = np.array(self.correlation, dtype=float)
        k = int(self.dim)
        if k < 2:
            raise SpecError(f"dimension must be at least 2, got {self.dim}")
        if c.shape != (k, k):
            raise SpecError(f"correlation must be {k}x{k}, got shape {c.shape}")
        if not np.allclose(c, c.T, rtol=0, atol=1e-12):
            raise SpecError("correlation matrix is not symmetric")
        if not np.allclose(np.diag(c), 1.0, rtol=0, atol=1e-12):
            raise SpecError("correlation matrix needs a unit diagonal")
        try:
            a = np.linalg.cholesky(c)
        except np.linalg.LinAlgError:
            raise SpecError("correlation matrix is not positive definite") from None
        c.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "correlation", c)
        object.__setattr__(self, "factor", a)

    @classmethod
    def equicorrelated(cls, dim: int, rho: float, radial: ScalarDist) -> "EllipticalSpec":
        c = np.full((dim, dim), float(rho))
        np.fill_diagonal(c, 1.0)
        return cls(dim, c, radial)


@dataclass(frozen=True)
class PolarSpec:
    rho: float
    q1: float
    q2: float
    radial: ScalarDist
    angular: ScalarDist

    def __post_init__(self):
        if not -1 < self.rho < 1:
            raise SpecError(f"rho must lie in (-1, 1), got {self.rho}")
        for name in ("q1", "q2"):
            q = getattr(self, name)
            if not 0 < q <= 1:
                raise SpecError(f"{name} must lie in (0, 1], got {q}")
        if float(self.angular.cdf(0.0)) != 0.0 or float(self.angular.cdf(1.0)) != 1.0:
            raise SpecError("the angular law must satisfy G(0) = 0 and G(1) = 1")

    @property
    def rho_tilde(self) -> float:
        return math.sqrt(1.0 - self.rho * self.rho)


def _product_cdf(R: ScalarDist, scale_cdf, t: float, kinks=()) -> float:
    """``P(R V <= t)`` for ``V`` on ``(0, 1]`` with CDF ``scale_cdf``, as
    ``int_0^1 F_V(t / R^{-1}(p)) dp``; ``kinks`` are points where ``F_V`` is
    not smooth."""
    if t <= 0:
        return 0.0
    if t >= R.upper_endpoint:
        return 1.0

    def f(p):
        r = np.asarray(R.quantile(p), dtype=float)
        with np.errstate(divide="ignore"):
            v = np.where(r > 0, t / np.where(r > 0, r, 1.0), np.inf)
        return np.where(v >= 1.0, 1.0, scale_cdf(np.minimum(v, 1.0)))

    brk = [float(R.cdf(t / v)) for v in (1.0, *kinks) if 0 < v <= 1]
    val, _ = integrate(f, 0.0, 1.0, points=sorted({b for b in brk if 0 < b < 1}), epsabs=1e-15, epsrel=1e-12)
    return min(1.0, max(0.0, val))


def _table_nodes(lo: float, hi: float) -> np.ndarray:
    # geometric near 0, uniform for interior kinks, clustered at hi for root-type edges
    m = TABLE_POINTS // 4
    span = hi - lo
    nodes = np.concatenate(
        [np.geomspace(lo, hi, 2 * m), np.linspace(lo, hi, m), hi - np.geomspace(span * 1e-12, span / 2, m)]
    )
    return np.unique(np.clip(nodes, lo, hi))


def product_law(R: ScalarDist, scale_cdf, scale_sampler, name: str, kinks=()) -> ScalarDist:
    """Law of ``R * V`` for an independent scale ``V`` in ``(0, 1]``.

    Small batches are evaluated by quadrature point by point; batches larger
    than ``TABLE_POINTS`` are interpolated (monotone cubic in ``log x``)
    from a quadrature table of about ``TABLE_POINTS`` nodes spanning the batch.
    """
    exact = np.vectorize(lambda t: _product_cdf(R, scale_cdf, float(t), kinks), otypes=[float])

    def cdf(x):
        x = np.asarray(x, dtype=float)
        pos = x[x > 0]
        if pos.size <= TABLE_POINTS:
            return exact(x)
        grid = _table_nodes(pos.min(), pos.max())
        table = PchipInterpolator(np.log(grid), exact(grid))
        with np.errstate(divide="ignore"):
            return np.where(x > 0, table(np.log(np.clip(x, grid[0], grid[-1]))), 0.0)

    def quantile(p):
        return bisect_quantile(cdf, p, 0.0, R.upper_endpoint)

    return ScalarDist(
        name=name,
        cdf_fn=cdf,
        quantile_fn=quantile,
        sample_fn=lambda rng, n: R.sample_fn(rng, n) * scale_sampler(rng, n),
        upper_endpoint=R.upper_endpoint,
        params={"radial": R.name},
    )


def elliptical_abs_marginal(spec: EllipticalSpec) -> ScalarDist:
    """``|X_i| = R sqrt(B)`` with ``B ~ B(1/2, (k-1)/2)``, the same for every
    coordinate of a unit-diagonal elliptical vector."""
    b = (spec.dim - 1) / 2.0
    return product_law(
        spec.radial,
        lambda v: betainc(0.5, b, np.asarray(v) ** 2),
        lambda rng, n: np.sqrt(rng.beta(0.5, b, n)),
        f"elliptical-abs-marginal-k{spec.dim}",
    )


def polar_scale_cdf(spec: PolarSpec):
    """CDF of ``|rho T1 S + rho~ T2 sqrt(1 - S**2)|``.

    With ``S = cos(phi)`` and ``rho = cos(theta)`` the expression is
    ``|cos(phi - theta)|`` for equal signs and ``|cos(phi + theta)|`` for
    opposite signs, so each event is a union of explicit ``phi``-intervals.
    """
    theta = math.acos(spec.rho)
    G = spec.angular
    p_same = spec.q1 * spec.q2 + (1 - spec.q1) * (1 - spec.q2)
    # cos(phi + shift) vanishes at phi = pi/2 - shift + m*pi; keep zeros whose
    # arc of half-width asin(v) <= pi/2 can meet [0, pi/2]
    arcs = [
        (w, c)
        for w, shift in ((p_same, -theta), (1.0 - p_same, theta))
        if w > 0
        for c in (math.pi / 2 - shift + m * math.pi for m in range(-2, 3))
        if -math.pi / 2 < c < math.pi
    ]
    weights = np.array([w for w, _ in arcs])[:, None]
    centers = np.array([c for _, c in arcs])[:, None]

    def cdf(v):
        v = np.asarray(v, dtype=float)
        a = np.arcsin(np.clip(v.ravel(), 0.0, 1.0))[None, :]
        lo, hi = np.maximum(0.0, centers - a), np.minimum(math.pi / 2, centers + a)
        hi = np.maximum(hi, lo)
        ends = np.asarray(G.cdf(np.cos(np.stack([lo, hi]))), dtype=float)
        out = (weights * (ends[0] - ends[1])).sum(axis=0).reshape(v.shape)
        out = np.where(v >= 1.0, 1.0, np.where(v <= 0, 0.0, out))
        return np.clip(out, 0.0, 1.0)

    return cdf


def polar_abs_laws(spec: PolarSpec) -> tuple[ScalarDist, ScalarDist]:
    """Laws of ``|X| = R S`` and ``|Y_rho|``."""
    rt = spec.rho_tilde

    def sample_sr(rng, n):
        s = spec.angular.sample_fn(rng, n)
        t1 = np.where(rng.random(n) < spec.q1, 1.0, -1.0)
        t2 = np.where(rng.random(n) < spec.q2, 1.0, -1.0)
        return np.abs(spec.rho * t1 * s + rt * t2 * np.sqrt(1.0 - s * s))

    x_law = product_law(spec.radial, spec.angular.cdf, spec.angular.sample_fn, "polar-abs-x")
    # the arcs of |cos(phi +- theta)| start clipping at v = |rho| and v = rho~
    kinks = (abs(spec.rho), rt)
    y_law = product_law(spec.radial, polar_scale_cdf(spec), sample_sr, "polar-abs-y", kinks)
    return x_law, y_law


# -- sampling --------------------------------------------------------------


def sample_unit_sphere(dim: int, n: int, seed=None) -> np.ndarray:
    """``n`` uniform points on the unit sphere in ``R**dim``, shape ``(n, dim)``."""
    if dim < 2 or n < 1:
        raise ParameterError(f"need dim >= 2 and n >= 1, got dim={dim}, n={n}")
    z = make_rng(seed).standard_normal((n, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def _elliptical(spec: EllipticalSpec, shape: tuple, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((*shape, spec.dim))
    u = z / np.linalg.norm(z, axis=-1, keepdims=True)
    r = spec.radial.sample_fn(rng, int(np.prod(shape))).reshape(shape)
    return r[..., None] * (u @ spec.factor.T)


def sample_elliptical(spec: EllipticalSpec, n: int, seed=None) -> np.ndarray:
    """``n`` draws of ``R A U``, shape ``(n, dim)``."""
    if n < 1:
        raise ParameterError("need n >= 1")
    return _elliptical(spec, (n,), make_rng(seed))


def _polar(spec: PolarSpec, shape: tuple, rng: np.random.Generator) -> np.ndarray:
    m = int(np.prod(shape))
    t1 = np.where(rng.random(m) < spec.q1, 1.0, -1.0)
    t2 = np.where(rng.random(m) < spec.q2, 1.0, -1.0)
    r = spec.radial.sample_fn(rng, m)
    s = spec.angular.sample_fn(rng, m)
    x = t1 * r * s
    y = spec.rho * x + spec.rho_tilde * t2 * r * np.sqrt(1.0 - s * s)
    return np.stack([x, y], axis=-1).reshape(*shape, 2)


def sample_polar(spec: PolarSpec, n: int, seed=None) -> np.ndarray:
    """``n`` draws of ``(T1 R S, rho T1 R S + rho~ T2 R sqrt(1 - S**2))``."""
    if n < 1:
        raise ParameterError("need n >= 1")
    return _polar(spec, (n,), make_rng(seed))


def small_u_bound(rho: float) -> float:
    """Largest ``e`` with ``|X_1| < e`` and ``|X_2| < e`` impossible on the
    ellipse ``R A U`` for ``R = 1``: the half-width of the largest square
    inside it, reached along the minor axis."""
    if not -1 < rho < 1:
        raise ParameterError("rho must lie in (-1, 1)")
    return math.sqrt((1.0 - abs(rho)) / 2.0)


# -- normalization ---------------------------------------------------------


def solve_normalizing(dist_abs, n: int) -> NormalizingSequence:
    """``a_n = 1 / Q^{-1}(1/n)`` with ``Q`` the CDF of ``|X_11|``.

    ``dist_abs`` is a :class:`ScalarDist` or a sample; samples use linear
    interpolation between order statistics.
    """
    if n < 1:
        raise ParameterError(f"n must be at least 1, got {n}")
    p = 1.0 / n
    if isinstance(dist_abs, ScalarDist):
        if p >= 1.0 and math.isfinite(dist_abs.upper_endpoint):
            t = dist_abs.upper_endpoint
        else:
            t = float(bisect_quantile(dist_abs.cdf, p, 0.0, dist_abs.upper_endpoint))
    else:
        x = np.sort(np.asarray(dist_abs, dtype=float).ravel())
        if x.size == 0:
            raise EmptySampleError("no samples to normalize")
        if p < 1.0 / x.size:
            raise ResolutionError(f"quantile 1/{n} is below the resolution 1/{x.size} of the sample")
        t = float(np.interp(p * x.size, np.arange(1, x.size + 1), x))
    if not (math.isfinite(t) and t > 0):
        raise ResolutionError(f"Q^-1(1/{n}) = {t} is not a positive finite number")
    return NormalizingSequence(int(n), 1.0 / t)


# -- experiments -----------------------------------------------------------


def lattice_deviation(u: np.ndarray, v: np.ndarray) -> float:
    """Max over the 5x5 lattice ``{1..5}/6`` of ``|C_n(s, t) - s t|`` with
    ``C_n`` the empirical copula of the pairs."""
    m = u.size
    ru = (np.argsort(np.argsort(u, kind="stable"), kind="stable") + 1) / (m + 1)
    rv = (np.argsort(np.argsort(v, kind="stable"), kind="stable") + 1) / (m + 1)
    below_u = ru[:, None] <= LATTICE[None, :]
    below_v = rv[:, None] <= LATTICE[None, :]
    c = below_u.T.astype(float) @ below_v.astype(float) / m
    return float(np.max(np.abs(c - np.outer(LATTICE, LATTICE))))


@dataclass
class MinimaReport:
    experiment: str
    n: int
    reps: int
    seed: int
    gamma_star: float
    normalizers: list
    ks: list
    ks_critical: float
    lattice: dict
    minima: np.ndarray = field(repr=False)

    @property
    def lattice_max(self) -> float:
        return max(self.lattice.values())

    def as_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "n": self.n,
            "reps": self.reps,
            "seed": self.seed,
            "gamma_star": self.gamma_star,
            "normalizers": self.normalizers,
            "ks": self.ks,
            "ks_critical_1pct": self.ks_critical,
            "lattice_deviation": self.lattice,
            "lattice_deviation_max": self.lattice_max,
            "seed_scheme": "SeedSequence(entropy=seed, spawn_key=(shard,))",
            "shards": _n_shards(self.reps),
            "reps_per_shard": SHARD_REPS,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"

    def minima_csv(self) -> str:
        buf = io.StringIO()
        buf.write("rep,coord,value\n")
        for rep, row in enumerate(self.minima):
            for coord, value in enumerate(row):
                buf.write(f"{rep},{coord},{value:.17g}\n")
        return buf.getvalue()


def _n_shards(reps: int) -> int:
    return -(-reps // SHARD_REPS)


def _radial_index(R: ScalarDist, gamma: float | None) -> float:
    if gamma is not None:
        return float(gamma)
    if R.name.startswith("rv0") and "gamma" in R.params:
        return float(R.params["gamma"])
    return rv_index_at_zero(R).index_hat


def _gate(gamma: float, allow_large_gamma: bool) -> float:
    if not gamma > 0:
        raise ParameterError(f"radial index must be positive, got {gamma}")
    if gamma > 1 and not allow_large_gamma:
        raise ParameterError(f"radial index {gamma} > 1; pass allow_large_gamma to run with limit index 1")
    return min(gamma, 1.0)


def _sharded_minima(draw, reps: int, n: int, seed: int) -> np.ndarray:
    def shard(i):
        m = min(SHARD_REPS, reps - i * SHARD_REPS)
        rng = np.random.default_rng(shard_seed(seed, i))
        return np.abs(draw((m, n), rng)).min(axis=1)

    return np.concatenate(_run_shards(shard, _n_shards(reps)))


def _report(name, n, reps, seed, gamma_star, normalizers, minima) -> MinimaReport:
    scaled = minima * np.asarray(normalizers)[None, :]
    law = LimitLaw(gamma_star)
    ks = [ks_distance(scaled[:, j], law.cdf) for j in range(scaled.shape[1])]
    k = scaled.shape[1]
    lattice = {f"{i},{j}": lattice_deviation(scaled[:, i], scaled[:, j]) for i in range(k) for j in range(i + 1, k)}
    return MinimaReport(
        name, n, reps, int(seed), gamma_star, [float(a) for a in normalizers], ks, 1.63 / math.sqrt(reps), lattice, scaled
    )


def minima_experiment(
    spec: EllipticalSpec, n: int, reps: int, seed: int = 0, *, gamma: float | None = None, allow_large_gamma: bool = False
) -> MinimaReport:
    """Rescaled componentwise minima of ``reps`` blocks of ``n`` elliptical
    vectors, compared with ``G_{min(gamma, 1)}`` and with independence."""
    if reps < 1:
        raise EmptySampleError("minima experiment needs at least one replication")
    if n < 1:
        raise ParameterError("block size n must be at least 1")
    gamma_star = _gate(_radial_index(spec.radial, gamma), allow_large_gamma)
    a_n = solve_normalizing(elliptical_abs_marginal(spec), n).a_n
    minima = _sharded_minima(lambda shape, rng: _elliptical(spec, shape, rng), reps, n, seed)
    return _report("elliptical-minima", n, reps, seed, gamma_star, [a_n] * spec.dim, minima)


def polar_minima_experiment(
    spec: PolarSpec, n: int, reps: int, seed: int = 0, *, gamma: float | None = None, allow_large_gamma: bool = False
) -> MinimaReport:
    """Joint rescaled minima of ``|X|`` and ``|Y_rho|`` for the polar pair."""
    if not spec.angular.has_density:
        raise SpecError(
            "polar-minima needs an angular law with a continuous positive density; "
            f"{spec.angular.name} has none"
        )
    if reps < 1:
        raise EmptySampleError("minima experiment needs at least one replication")
    if n < 1:
        raise ParameterError("block size n must be at least 1")
    gamma_star = _gate(_radial_index(spec.radial, gamma), allow_large_gamma)
    x_law, y_law = polar_abs_laws(spec)
    a_n = solve_normalizing(x_law, n).a_n
    b_n = solve_normalizing(y_law, n).a_n
    minima = _sharded_minima(lambda shape, rng: _polar(spec, shape, rng), reps, n, seed)
    return _report("polar-minima", n, reps, seed, gamma_star, [a_n, b_n], minima)
