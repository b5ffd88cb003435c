"""Built-in identity suite: operator identities, the beta composition law
and a recovery round trip, each reported with its residual."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .dist import make_exponential, make_gamma, make_uniform
from .errors import ParameterError
from .scaling import beta_compose_check, default_grid, forward_cdf, recover_iterative, scaled_pdf_at
from .weyl import PowerWeight, nfold_derivative, weyl_integral, weyl_stieltjes, williamson_transform


@dataclass(frozen=True)
class Check:
    group: str
    name: str
    residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.residual) and self.residual <= self.tol)

    def as_dict(self) -> dict:
        return {"group": self.group, "name": self.name, "residual": self.residual, "tol": self.tol, "passed": self.passed}


def _exp(y):
    return np.exp(-np.asarray(y, dtype=float))


def _semigroup() -> Iterable[tuple]:
    def h(y):
        y = np.asarray(y, dtype=float)
        return y * np.exp(-y)

    xs = np.array([0.1, 1.0, 5.0])
    for b, c in ((0.5, 0.5), (1.0, 1.5), (0.3, 2.0)):
        inner = lambda y, c=c: np.asarray(weyl_integral(h, c, np.asarray(y)))
        composed = weyl_integral(inner, b, xs)
        direct = weyl_integral(h, b + c, xs)
        yield f"I_{b:g} I_{c:g} = I_{b + c:g}", float(np.max(np.abs(composed - direct))), 1e-6


def _continuity() -> Iterable[tuple]:
    yield "I_1e-4 exp(-y) at 1", abs(weyl_integral(_exp, 1e-4, 1.0) - math.exp(-1.0)), 1e-3


def _commutation() -> Iterable[tuple]:
    lhs = nfold_derivative(lambda y: np.asarray(weyl_integral(_exp, 1.5, np.asarray(y))), 1, 1.0)
    rhs = weyl_integral(lambda y: -_exp(y), 1.5, 1.0)
    yield "D I_1.5 = I_1.5 D at 1", abs(lhs - rhs), 1e-5


def survival_identity_residual(H, beta: float, x: float, weight_exponent: float | None = None) -> float:
    """``|J_{beta+1, p_s} H(x) - x I_beta(p_{-1-beta} (1 - H))(x)|``.

    The identity holds for ``s = -beta`` (the default): both sides equal the
    Williamson transform of order ``beta`` divided by ``Gamma(beta + 1)``.
    """
    s = -beta if weight_exponent is None else weight_exponent
    lhs = weyl_stieltjes(H, beta + 1.0, PowerWeight(s), x)
    rhs = x * weyl_integral(lambda y: np.asarray(y) ** (-1.0 - beta) * H.survival(y), beta, x)
    return abs(lhs - rhs)


def _survival_identity() -> Iterable[tuple]:
    H = make_exponential(1.0)
    for b in (0.5, 1.0):
        for x in (0.1, 0.5, 1.0):
            yield f"beta={b:g} x={x:g}", survival_identity_residual(H, b, x), 1e-7


def _williamson() -> Iterable[tuple]:
    for H in (make_exponential(1.0), make_uniform()):
        for b in (0.5, 1.0, 2.0):
            for x in (0.25, 0.5):
                lhs = williamson_transform(H, b, x)
                rhs = math.gamma(b + 1.0) * weyl_stieltjes(H, b + 1.0, PowerWeight(-b), x)
                yield f"{H.name} beta={b:g} x={x:g}", abs(lhs - rhs), 1e-8


def _k_monotone() -> Iterable[tuple]:
    H = make_gamma(2.0, 1.0)
    xs = np.geomspace(0.05, 5.0, 20)
    for k in (2, 3, 4):
        f = lambda y, k=k: np.array([scaled_pdf_at(H, (1.0, float(k)), float(t)) for t in np.ravel(y)])
        worst = float(np.max(-f(xs)))
        for j in range(1, max(k - 1, 2)):  # nonincreasing always, then alternating up to k - 2
            dj = nfold_derivative(f, j, xs)
            worst = max(worst, float(np.max(-((-1) ** j) * dj)))
        yield f"h_(1,{k}) sign pattern up to order {max(k - 2, 1)}", max(worst, 0.0), 1e-8


def _composition() -> Iterable[tuple]:
    for params in ((1.0, 1.0, 1.0), (0.5, 1.5, 2.0)):
        rep = beta_compose_check(*params, 100_000, seed=0)
        yield f"B{params[:2]} B({params[0] + params[1]:g},{params[2]:g}) KS", rep.statistic, rep.critical


def _round_trip() -> Iterable[tuple]:
    H = make_gamma(2.0, 1.0)
    grid = default_grid(H)
    rec = recover_iterative(forward_cdf(H, (1.0, 1.0), grid), (1.0, 1.0))
    yield "gamma(2,1) alpha=1 beta=1", float(np.max(np.abs(rec.ys - H.cdf(rec.xs)))), 1e-2


GROUPS: dict[str, Callable[[], Iterable[tuple]]] = {
    "semigroup": _semigroup,
    "continuity": _continuity,
    "commutation": _commutation,
    "survival-identity": _survival_identity,
    "williamson": _williamson,
    "k-monotone": _k_monotone,
    "composition": _composition,
    "round-trip": _round_trip,
}


def run_suite(only: Iterable[str] | None = None, tol: float | None = None) -> list[Check]:
    """Run the selected groups (all by default). ``tol`` can only loosen:
    each check uses ``max(stated tolerance, tol)``."""
    names = list(GROUPS) if not only else list(only)
    unknown = [n for n in names if n not in GROUPS]
    if unknown:
        raise ParameterError(f"unknown check group(s) {unknown}; expected some of {list(GROUPS)}")
    if tol is not None and not (tol >= 0 and math.isfinite(tol)):
        raise ParameterError(f"tolerance override must be a finite nonnegative number, got {tol}")
    out = []
    for group in names:
        for name, residual, stated in GROUPS[group]():
            out.append(Check(group, name, float(residual), stated if tol is None else max(stated, tol)))
    return out


def report_json(checks: list[Check]) -> str:
    body = {"passed": all(c.passed for c in checks), "checks": [c.as_dict() for c in checks]}
    return json.dumps(body, indent=2, sort_keys=True) + "\n"
