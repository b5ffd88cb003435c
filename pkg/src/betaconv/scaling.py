"""Beta-product scaling ``W = R * S`` with ``S ~ B(alpha, beta)`` and its
inversion routes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from . import kernels
from .dist import BetaParams, ScalarDist, ks_critical, ks_distance, make_beta, make_rng
from .errors import (
    ConsistencyError,
    DomainError,
    EmptySampleError,
    ParameterError,
    RecoveryInstabilityError,
    ScheduleError,
)
from .grid import GridFn, GridSpec
from .quadrature import integrate
from .special import betainc, log_beta, log_gamma
from .weyl import PowerWeight, grid_derivative, weyl_integral, weyl_stieltjes

ROUTE_TOL = 1e-7
MONOTONE_TOL = 1e-6
# survival values below this are treated as roundoff near a finite endpoint
SURVIVAL_FLOOR = 1e-6
_ONE_TOL = 1e-14
_TOP_REFINE = 40
_EPSREL = 1e-12


@dataclass(frozen=True)
class RecoverySchedule:
    """Descending levels ``beta_0 = beta > beta_1 > ... > beta_{k+1} = 0``.

    Every step ``beta_{i-1} - beta_i`` lies in ``(0, 1)``.
    """

    betas: tuple

    def __post_init__(self):
        b = tuple(float(v) for v in self.betas)
        object.__setattr__(self, "betas", b)
        if len(b) < 2:
            raise ScheduleError("a schedule needs at least the target level and 0")
        if b[-1] != 0.0:
            raise ScheduleError(f"schedule must end at exactly 0, ends at {b[-1]}")
        if not b[0] > 0:
            raise ScheduleError("schedule must start at a positive level")
        for i in range(1, len(b)):
            step = b[i - 1] - b[i]
            if not 0.0 < step < 1.0:
                raise ScheduleError(
                    f"step {i} from {b[i - 1]} to {b[i]} has size {step}; every step must lie in (0, 1)"
                )

    @classmethod
    def default(cls, beta: float) -> "RecoverySchedule":
        """``k = ceil(beta)`` intermediate levels with equal steps ``beta/(k+1)``."""
        if not beta > 0:
            raise ScheduleError("target level must be positive")
        k = math.ceil(beta)
        return cls(tuple(beta * (1.0 - i / (k + 1)) for i in range(k + 1)) + (0.0,))

    @property
    def beta(self) -> float:
        return self.betas[0]

    @property
    def k(self) -> int:
        return len(self.betas) - 2

    @property
    def deltas(self) -> tuple:
        b = self.betas
        return tuple(1.0 + b[i] - b[i - 1] for i in range(1, len(b)))


@dataclass(frozen=True)
class ScaledPair:
    base: ScalarDist
    scaled_cdf: GridFn
    scaled_pdf: GridFn
    params: BetaParams


def default_grid(H: ScalarDist, points: int = 512) -> GridSpec:
    """Log-spaced grid for the scaled law of ``H``.

    Finite upper endpoints get a grid reaching 1.5 times past them with
    nodes clustered at the endpoint.
    """
    w = H.upper_endpoint
    median = float(H.quantile(0.5))
    lo = 1e-6 * (median if median > 0 else 1.0)
    if math.isfinite(w):
        return GridSpec(min(lo, 1e-6 * w), 1.5 * w, points, cluster_at=w)
    return GridSpec(lo, float(H.quantile(1.0 - 1e-6)), points)


def _params(params, beta=None) -> BetaParams:
    if isinstance(params, BetaParams):
        return params
    if beta is None:
        alpha, beta = params
        return BetaParams(float(alpha), float(beta))
    return BetaParams(float(params), float(beta))


def _nodes(grid) -> np.ndarray:
    if isinstance(grid, GridSpec):
        return grid.nodes()
    xs = np.asarray(grid, dtype=float)
    if xs.ndim != 1 or np.any(xs <= 0) or np.any(np.diff(xs) <= 0):
        raise DomainError("evaluation points must be positive and increasing")
    return xs


def _endpoint_map(e: float):
    """``(inv, power)`` with ``t = v**inv`` turning ``t**(e - 1) dt`` into
    ``inv * v**power dv``, smooth in ``v``; ``None`` for (near) integer ``e``."""
    frac = e - math.floor(e)
    if e < 1.0 or frac >= 0.05:
        inv = 1.0 / frac
        return inv, math.floor(e) * inv
    return None


def beta_mixture(f, alpha: float, beta: float, points=()) -> float:
    """``E f(S)`` for ``S ~ B(alpha, beta)``.

    The density's endpoint factors ``s**(alpha-1)`` on ``[0, 1/2]`` and
    ``(1-s)**(beta-1)`` on ``[1/2, 1]`` are absorbed by power maps, which
    leaves smooth integrands for any non-integer exponent.
    ``points`` are discontinuities of ``f`` in ``(0, 1)``.
    """
    lb = log_beta(alpha, beta)

    def half(g, e, other, pts):
        # int_0^{1/2} g(t) t**(e-1) other(t) dt
        m = _endpoint_map(e)
        if m is None:
            fn = lambda t: g(t) * t ** (e - 1.0) * other(t)
            val, _ = integrate(fn, 0.0, 0.5, points=pts, epsabs=0.0, epsrel=_EPSREL)
            return val
        inv, power = m
        fn = lambda v: g(v**inv) * v**power * other(v**inv)
        val, _ = integrate(fn, 0.0, 0.5 ** (1.0 / inv), points=[p ** (1.0 / inv) for p in pts],
                           epsabs=0.0, epsrel=_EPSREL)
        return inv * val

    def quiet(fn):
        def wrapped(t):
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                return fn(t)
        return wrapped

    lp = [p for p in points if 0.0 < p <= 0.5]
    rp = [1.0 - p for p in points if 0.5 <= p < 1.0]
    a = half(quiet(f), alpha, quiet(lambda s: (1.0 - s) ** (beta - 1.0)), lp)
    b = half(quiet(lambda t: f(1.0 - t)), beta, quiet(lambda t: (1.0 - t) ** (alpha - 1.0)), rp)
    return math.exp(-lb) * (a + b)


# -- forward ----------------------------------------------------------------


def _weyl_cdf(H: ScalarDist, p: BetaParams, x: float) -> float:
    a, b = p.alpha, p.beta
    if x >= H.upper_endpoint:
        return 1.0
    w = H.upper_endpoint
    logc = log_gamma(a + b) - log_gamma(a)

    def h(y):
        return y ** (-a - b) * H.cdf(y)

    pts = [q for q in H.support_points() if q > x]
    if math.isfinite(w):
        # beyond omega the integrand is y**(-a-b); that part is closed form
        inner = weyl_integral(h, b, x, w, points=pts)
        tail = x ** (-a) * math.exp(log_beta(a, b) - log_gamma(b)) * betainc(a, b, x / w)
        return math.exp(logc) * x**a * (inner + tail)
    return math.exp(logc) * x**a * weyl_integral(h, b, x, points=pts)


def _mixture_cdf(H: ScalarDist, p: BetaParams, x: float) -> float:
    pts = [x / q for q in H.support_points() if q > x]
    with np.errstate(divide="ignore"):
        return beta_mixture(lambda s: H.cdf(x / s), p.alpha, p.beta, pts)


def _weyl_pdf(H: ScalarDist, p: BetaParams, x: float) -> float:
    a, b = p.alpha, p.beta
    if x >= H.upper_endpoint:
        return 0.0
    logc = log_gamma(a + b) - log_gamma(a)
    return math.exp(logc) * x ** (a - 1.0) * weyl_stieltjes(H, b, PowerWeight(1.0 - a - b), x)


def _mixture_pdf(H: ScalarDist, p: BetaParams, x: float) -> float:
    b_pdf = make_beta(p)
    total = sum(m * b_pdf.density(x / loc) / loc for loc, m in H.atoms if x < loc)
    if H.has_density:
        pts = [x / q for q in H.support_points() if q > x]

        def f(s):
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(s > 0, H.density(x / s) / s, 0.0)

        total += beta_mixture(f, p.alpha, p.beta, pts)
    elif not H.atoms:
        raise ParameterError("mixture density route needs a density or atoms")
    return total


def _cdf_routes(H: ScalarDist, p: BetaParams, x: float) -> tuple[float, float]:
    if not x > 0:
        return 0.0, 0.0
    return _weyl_cdf(H, p, float(x)), _mixture_cdf(H, p, float(x))


def _pdf_routes(H: ScalarDist, p: BetaParams, x: float) -> tuple[float, float | None]:
    if not x > 0:
        raise DomainError("scaled density is evaluated at x > 0")
    v = _weyl_pdf(H, p, float(x))
    m = _mixture_pdf(H, p, float(x)) if (H.has_density or H.atoms) else None
    return v, m


def _cdf_gap(v: float, m: float) -> float:
    return abs(v - m)


def _pdf_gap(v: float, m: float | None) -> float:
    return 0.0 if m is None else abs(v - m) / max(1.0, abs(m))


def scaled_cdf_at(H: ScalarDist, params, x: float, *, check: bool = True) -> float:
    """``H_{alpha,beta}(x)`` from the fractional-integral representation,
    cross-checked against direct mixture quadrature."""
    p = _params(params)
    if not check:
        return _weyl_cdf(H, p, float(x)) if x > 0 else 0.0
    v, m = _cdf_routes(H, p, x)
    if _cdf_gap(v, m) > ROUTE_TOL:
        raise ConsistencyError(f"scaled CDF routes disagree at x={x}: fractional-integral {v!r} vs mixture {m!r}")
    return v


def scaled_pdf_at(H: ScalarDist, params, x: float, *, check: bool = True) -> float:
    p = _params(params)
    if not check:
        if not x > 0:
            raise DomainError("scaled density is evaluated at x > 0")
        return _weyl_pdf(H, p, float(x))
    v, m = _pdf_routes(H, p, x)
    if _pdf_gap(v, m) > ROUTE_TOL:
        raise ConsistencyError(f"scaled density routes disagree at x={x}: fractional-integral {v!r} vs mixture {m!r}")
    return v


def _forward(H: ScalarDist, params, grid, routes, gap, what: str):
    if float(H.cdf(0.0)) != 0.0:
        raise DomainError("base distribution must put no mass at 0")
    xs = _nodes(grid if grid is not None else default_grid(H))
    p = _params(params)
    pairs = [routes(H, p, x) for x in xs]
    gaps = np.array([gap(v, m) for v, m in pairs])
    worst = int(np.argmax(gaps))
    if gaps[worst] > ROUTE_TOL:
        raise ConsistencyError(
            f"scaled {what} routes disagree at x={xs[worst]}: fractional-integral {pairs[worst][0]!r} "
            f"vs mixture {pairs[worst][1]!r}"
        )
    return xs, np.array([v for v, _ in pairs]), float(gaps[worst])


def forward_cdf(H: ScalarDist, params, grid=None, *, with_residual: bool = False):
    """CDF of ``W = R * S`` on a grid, by two independent routes that must
    agree within ``1e-7`` (otherwise :class:`ConsistencyError`).

    With ``with_residual`` the largest route disagreement is returned too.
    """
    xs, ys, resid = _forward(H, params, grid, _cdf_routes, _cdf_gap, "CDF")
    out = GridFn(xs, np.clip(ys, 0.0, 1.0))
    return (out, resid) if with_residual else out


def forward_pdf(H: ScalarDist, params, grid=None, *, with_residual: bool = False):
    """Density of ``W = R * S`` on a grid, cross-checked like :func:`forward_cdf`
    (relative to ``max(1, |h|)``; laws without density or atoms get the
    fractional-integral route only)."""
    xs, ys, resid = _forward(H, params, grid, _pdf_routes, _pdf_gap, "density")
    out = GridFn(xs, ys, interpolation="linear")
    return (out, resid) if with_residual else out


def scale(H: ScalarDist, params, grid=None) -> ScaledPair:
    p = _params(params)
    g = grid if grid is not None else default_grid(H)
    return ScaledPair(H, forward_cdf(H, p, g), forward_pdf(H, p, g), p)


# -- inversion --------------------------------------------------------------


def _check_monotone(ys: np.ndarray, what: str) -> np.ndarray:
    drop = float(np.max(-np.diff(ys), initial=0.0))
    if drop > MONOTONE_TOL:
        raise RecoveryInstabilityError(
            f"{what} decreases by {drop:.3g} (tolerance {MONOTONE_TOL:g}); inversion is unstable on this grid"
        )
    return np.maximum.accumulate(ys)


def _flat_top(H: np.ndarray) -> int:
    """Index of the first node of the trailing run where ``H == 1``
    (``len(H)`` if there is none)."""
    n = H.size
    below = np.flatnonzero(H < 1.0 - _ONE_TOL)
    if below.size == 0:
        return 0
    return n if below[-1] == n - 1 else int(below[-1]) + 1


def _node_slopes(xs: np.ndarray, H: np.ndarray, top: int) -> np.ndarray:
    """Slopes of a CDF at its nodes from an interpolating cubic spline.

    Below a finite upper endpoint ``c = xs[top]`` the spline is taken in
    ``log(y / (c - y))``, where power-law approach to the endpoint is smooth;
    otherwise in ``log y``. The flat part has slope 0, as does the last node
    of an unbounded grid (matching the constant tail model).
    """
    n = xs.size
    d = np.zeros(n)
    if top < 4:
        return d
    x, h = xs[:top], H[:top]
    if top < n:
        c = xs[top]
        u = np.log(x) - np.log(c - x)
        dudy = 1.0 / x + 1.0 / (c - x)
    else:
        u = np.log(x)
        dudy = 1.0 / x
    d[:top] = CubicSpline(u, h).derivative()(u) * dudy
    if top == n:
        d[-1] = 0.0
    return d


def _extend_to_top(xs: np.ndarray, H: np.ndarray, top: int):
    """Refine the approach to a finite upper endpoint.

    Values with ``1 - H`` below the survival floor carry no information, so
    from the last node above it the survival is continued as the power law
    through that node and its left neighbour, on a geometric sub-grid
    running into the endpoint. Returns the augmented grid and values.
    """
    c = xs[top]
    surv = 1.0 - H
    r = top - 1
    while r > 2 and surv[r] < SURVIVAL_FLOOR:
        r -= 1
    y1, y2 = xs[r], xs[r - 1]
    s1, s2 = surv[r], surv[r - 1]
    g = math.log(s2 / s1) / math.log((c - y2) / (c - y1)) if s2 > s1 > 0 else 1.0
    g = min(max(g, 0.05), 4.0)
    ext = c - (c - y1) * 0.5 ** np.arange(1, _TOP_REFINE + 1)
    X = np.unique(np.concatenate([xs, ext[(ext > y1) & (ext < c)]]))
    HX = np.interp(X, xs, H)
    mid = (X > y1) & (X < c)
    HX[mid] = 1.0 - s1 * ((c - X[mid]) / (c - y1)) ** g
    return X, HX


def _bracket(xs, F, dF, a: float, d: float) -> np.ndarray:
    """``(1/Gamma(d)) int_x^inf (y-x)**(d-1) d[-y**(-a) F(y)]`` at the nodes.

    Exact for the cubic Hermite interpolant of ``phi = y**(-a) F`` on the
    grid; beyond the last node ``F`` is held at its final value, which
    integrates in closed form.
    """
    phi = xs ** (-a) * F
    dphi = -a * xs ** (-a - 1.0) * F + xs ** (-a) * dF
    grid_part = -kernels.weyl_stieltjes_hermite(xs, phi, dphi, d)
    s = a + 1.0 - d
    tail = a * F[-1] * xs ** (d - a - 1.0) * math.exp(log_beta(s, d)) * kernels.betainc(s, d, xs / xs[-1])
    return (grid_part + tail) * math.exp(-log_gamma(d))


def _unscale_step(xs: np.ndarray, Hi: np.ndarray, alpha: float, b_now: float, b_prev: float) -> np.ndarray:
    """One fractional step from level ``b_now`` up to ``b_prev``.

    With ``a = alpha + b_now`` and ``d = 1 + b_now - b_prev`` this is
    ``Gamma(a)/Gamma(alpha + b_prev) * x**(alpha + b_prev) * bracket``. The
    operator maps the constant 1 to 1; its discretization error on 1 is
    subtracted in proportion to ``H_i`` so that ``1 - H`` keeps relative
    accuracy near the top of the support.
    """
    a = alpha + b_now
    d = 1.0 + b_now - b_prev
    top = _flat_top(Hi)
    if 3 <= top < xs.size:
        X, HX = _extend_to_top(xs, Hi, top)
        pick = np.searchsorted(X, xs)
    else:
        X, HX, pick = xs, Hi, slice(None)
    dH = _node_slopes(X, HX, _flat_top(HX))
    scale = math.exp(log_gamma(a) - log_gamma(alpha + b_prev)) * X ** (alpha + b_prev)
    raw = scale * _bracket(X, HX, dH, a, d)
    one = scale * _bracket(X, np.ones_like(HX), np.zeros_like(HX), a, d)
    out = (raw - HX * (one - 1.0))[pick]
    out[top:] = 1.0
    return out


def recover_iterative(scaled: GridFn, params, schedule: RecoverySchedule | None = None) -> GridFn:
    """Recover the base CDF ``H`` from ``H_{alpha,beta}`` on its grid.

    Walks the schedule from level ``beta`` down to 0. Each intermediate is
    clipped to ``[0, 1]``, checked for monotonicity within ``1e-6`` and then
    made nondecreasing by a running maximum.
    """
    p = _params(params)
    sched = schedule if schedule is not None else RecoverySchedule.default(p.beta)
    if not isinstance(sched, RecoverySchedule):
        sched = RecoverySchedule(tuple(sched))
    if abs(sched.beta - p.beta) > 1e-12 * max(1.0, p.beta):
        raise ScheduleError(f"schedule starts at {sched.beta}, expected beta = {p.beta}")
    if not scaled.is_cdf(tol=MONOTONE_TOL):
        raise ParameterError("scaled input is not a CDF grid")
    xs = scaled.xs
    if xs[0] <= 0:
        raise DomainError("recovery grid must lie in (0, inf)")
    H = np.asarray(scaled.ys, dtype=float)
    b = sched.betas
    for i in range(len(b) - 1, 0, -1):
        # H_i is the law scaled by B(alpha + b[i], beta - b[i])
        H = _check_monotone(
            np.clip(_unscale_step(xs, H, p.alpha, b[i], b[i - 1]), 0.0, 1.0), f"level {b[i - 1]:g}"
        )
    return GridFn(xs, H, interpolation=scaled.interpolation, extrapolation=scaled.extrapolation)


def _normalization(h: GridFn) -> float:
    return h.integral()


def recover_derivative(scaled_pdf: GridFn, params, n: int, delta: float = 0.0) -> GridFn:
    """Recover the base density from ``h_{alpha, n - delta}`` by differentiation.

    ``h = (-1)**n * Gamma(alpha)/Gamma(alpha+n-delta) * x**(alpha+n-delta-1)
    * I_delta D^n (x**(1-alpha) h_{alpha,n-delta})``. The fractional integral
    is applied before the derivatives (the operators commute for densities
    vanishing at the right edge of the grid), so only one differentiation
    pass touches the data. ``delta > 0`` needs ``0 < alpha <= delta``; any
    ``alpha > 0`` is accepted with ``delta = 0``.

    The density is taken as zero beyond the last grid node.
    """
    p = _params(params)
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise ParameterError(f"n must be an integer >= 1, got {n!r}")
    if not (0.0 <= delta < 1.0):
        raise ParameterError(f"delta must lie in [0, 1), got {delta}")
    if abs(p.beta - (n - delta)) > 1e-12 * max(1.0, n):
        raise ParameterError(f"beta = {p.beta} does not equal n - delta = {n - delta}")
    if delta > 0 and p.alpha > delta:
        raise ParameterError(f"the fractional route needs alpha <= delta, got alpha={p.alpha}, delta={delta}")
    xs = scaled_pdf.xs
    if xs[0] <= 0:
        raise DomainError("density grid must lie in (0, inf)")
    g = xs ** (1.0 - p.alpha) * np.asarray(scaled_pdf.ys, dtype=float)
    if delta > 0:
        dg = PchipInterpolator(xs, g).derivative()(xs)
        g = kernels.weyl_integral_hermite(xs, g, dg, delta) * math.exp(-log_gamma(delta))
    dn = grid_derivative(GridFn(xs, g, interpolation="linear"), n).ys
    c = (-1.0) ** n * math.exp(log_gamma(p.alpha) - log_gamma(p.alpha + n - delta))
    h = GridFn(xs, c * xs ** (p.alpha + n - delta - 1.0) * dn, interpolation="linear")
    mass = _normalization(h)
    if not (0.95 <= mass <= 1.05):
        raise RecoveryInstabilityError(f"recovered density integrates to {mass:.4g}, outside [0.95, 1.05]")
    return h


def recover_integer_step(H_i: GridFn, h_i: GridFn, alpha: float, beta_i: float) -> GridFn:
    """One unit step ``H_{i-1} = H_i - x h_i / (alpha + beta_i)``.

    ``beta_i`` is the level of the input: ``H_i`` is the base law scaled by
    ``B(alpha + beta_i, beta - beta_i)``. The output is not clamped.
    """
    if not (alpha > 0 and beta_i >= 0):
        raise ParameterError(f"need alpha > 0 and beta_i >= 0, got {alpha}, {beta_i}")
    if H_i.xs.shape != h_i.xs.shape or np.any(H_i.xs != h_i.xs):
        raise DomainError("H_i and h_i must share a grid")
    xs = H_i.xs
    out = np.asarray(H_i.ys, dtype=float) - xs * np.asarray(h_i.ys, dtype=float) / (alpha + beta_i)
    return H_i.with_values(_check_monotone(out, f"level {beta_i + 1:g}"))


def recover_density_step(h_i: GridFn, alpha: float, beta_i: float) -> GridFn:
    """Density form of :func:`recover_integer_step`:
    ``h_{i-1} = ((alpha + beta_i - 1) h_i - x h_i') / (alpha + beta_i)``."""
    if not (alpha > 0 and beta_i >= 0):
        raise ParameterError(f"need alpha > 0 and beta_i >= 0, got {alpha}, {beta_i}")
    xs = h_i.xs
    dh = grid_derivative(h_i, 1).ys
    ys = ((alpha + beta_i - 1.0) * np.asarray(h_i.ys) - xs * dh) / (alpha + beta_i)
    return GridFn(xs, ys, interpolation="linear")


@dataclass(frozen=True)
class KSReport:
    statistic: float
    critical: float
    n: int

    @property
    def passed(self) -> bool:
        return self.statistic <= self.critical

    def as_dict(self) -> dict:
        return {"ks": self.statistic, "critical": self.critical, "n": self.n, "passed": self.passed}


def beta_compose_check(alpha: float, beta: float, gamma: float, n_samples: int, seed=None) -> KSReport:
    """KS distance of ``B(alpha, beta) * B(alpha + beta, gamma)`` samples to the
    ``B(alpha, beta + gamma)`` CDF, against the 1% critical value."""
    for name, v in (("alpha", alpha), ("beta", beta), ("gamma", gamma)):
        if not (math.isfinite(v) and v > 0):
            raise ParameterError(f"{name} must be positive, got {v}")
    if n_samples <= 0:
        raise EmptySampleError("beta_compose_check needs at least one sample")
    rng = make_rng(seed)
    w = rng.beta(alpha, beta, n_samples) * rng.beta(alpha + beta, gamma, n_samples)
    stat = ks_distance(w, lambda x: betainc(alpha, beta + gamma, x))
    return KSReport(stat, ks_critical(n_samples), int(n_samples))
