import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

import betaconv.scaling as scaling
from betaconv.dist import make_beta, make_exponential, make_gamma, make_point_mass, make_rv0_family, make_uniform
from betaconv.errors import (
    ConsistencyError,
    DomainError,
    EmptySampleError,
    ParameterError,
    RecoveryInstabilityError,
    ScheduleError,
)
from betaconv.grid import GridFn, GridSpec
from betaconv.scaling import (
    RecoverySchedule,
    beta_compose_check,
    beta_mixture,
    default_grid,
    forward_cdf,
    forward_pdf,
    recover_density_step,
    recover_derivative,
    recover_integer_step,
    recover_iterative,
    scale,
    scaled_cdf_at,
    scaled_pdf_at,
)

# Frozen oracle values, mpmath mixture quadrature at 30 digits.
GAMMA2_HALF_HALF_CDF_AT_1 = 0.635147044239417514
GAMMA2_HALF_HALF_PDF_AT_1 = 0.311330623065446026
# Uniform base, (alpha, beta) = (2, 3), at x = 0.3: exact rationals.
UNIFORM_2_3_CDF_AT_0_3 = 0.7599
UNIFORM_2_3_PDF_AT_0_3 = 1.372


# -- forward ------------------------------------------------------------------


def test_gamma_beta_identity_example():
    F = forward_cdf(make_gamma(2.0), (1.0, 1.0), [1.0])
    assert F.ys[0] == pytest.approx(1 - math.exp(-1), rel=1e-10)


def test_point_mass_gives_the_beta_law():
    xs = np.array([0.1, 0.4, 0.8, 0.99])
    F = forward_cdf(make_point_mass(1.0), (2.0, 3.0), xs)
    assert F.ys == pytest.approx(make_beta(2, 3).cdf(xs), abs=1e-12)


def test_uniform_product_closed_form():
    F = forward_cdf(make_uniform(), (1.0, 1.0), [0.5])
    assert F.ys[0] == pytest.approx(0.5 - 0.5 * math.log(0.5), rel=1e-10)
    rng = np.random.default_rng(2)
    w = rng.random(1_000_000) * rng.random(1_000_000)
    assert np.mean(w <= 0.5) == pytest.approx(F.ys[0], abs=3e-3)


def test_uniform_product_density():
    f = forward_pdf(make_uniform(), (1.0, 1.0), [0.5])
    assert f.ys[0] == pytest.approx(math.log(2.0), rel=1e-10)


def test_exponential_density_at_zero():
    f = forward_pdf(make_gamma(2.0), (1.0, 1.0), [1e-8])
    assert f.ys[0] == pytest.approx(1.0, rel=1e-7)


def test_point_mass_density():
    assert scaled_pdf_at(make_point_mass(1.0), (2.0, 3.0), 0.5) == pytest.approx(1.5, rel=1e-12)


def test_frozen_gamma_values():
    H = make_gamma(2.0)
    assert scaled_cdf_at(H, (0.5, 0.5), 1.0) == pytest.approx(GAMMA2_HALF_HALF_CDF_AT_1, rel=1e-9)
    assert scaled_pdf_at(H, (0.5, 0.5), 1.0) == pytest.approx(GAMMA2_HALF_HALF_PDF_AT_1, rel=1e-9)


def test_frozen_uniform_values():
    H = make_uniform()
    assert scaled_cdf_at(H, (2.0, 3.0), 0.3) == pytest.approx(UNIFORM_2_3_CDF_AT_0_3, rel=1e-10)
    assert scaled_pdf_at(H, (2.0, 3.0), 0.3) == pytest.approx(UNIFORM_2_3_PDF_AT_0_3, rel=1e-10)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(0.2, 4.0), b=st.floats(0.2, 4.0), x=st.floats(0.01, 8.0))
def test_gamma_beta_identity_property(a, b, x):
    assert scaled_cdf_at(make_gamma(a + b), (a, b), x) == pytest.approx(special.gammainc(a, x), abs=1e-9)


@pytest.mark.parametrize(
    "H", [make_gamma(2.0), make_uniform(), make_exponential(1.0), make_rv0_family(0.5)], ids=lambda H: H.name
)
@pytest.mark.parametrize("params", [(1.0, 1.0), (0.5, 2.5), (3.0, 0.7)])
def test_stochastic_domination(H, params):
    F, resid = forward_cdf(H, params, default_grid(H, 64), with_residual=True)
    assert resid <= 1e-7
    assert np.all(F.ys >= np.asarray(H.cdf(F.xs)) - 1e-12)
    assert np.all(np.diff(F.ys) >= -1e-12) and 0.0 <= F.ys[0] <= F.ys[-1] <= 1.0


def test_density_integrates_to_cdf():
    from scipy import integrate

    H, params = make_gamma(2.0), (0.5, 1.5)
    mass, _ = integrate.quad(lambda x: scaled_pdf_at(H, params, x), 0.5, 3.0, epsabs=0, epsrel=1e-11)
    assert scaled_cdf_at(H, params, 3.0) - scaled_cdf_at(H, params, 0.5) == pytest.approx(mass, abs=1e-9)


def test_routes_disagreeing_raise(monkeypatch):
    monkeypatch.setattr(scaling, "_mixture_cdf", lambda H, p, x: scaling._weyl_cdf(H, p, x) + 1e-5)
    with pytest.raises(ConsistencyError):
        forward_cdf(make_gamma(2.0), (1.0, 1.0), [0.5, 1.0])
    with pytest.raises(ConsistencyError):
        scaled_cdf_at(make_gamma(2.0), (1.0, 1.0), 1.0)


def test_base_with_mass_at_zero_is_rejected():
    from betaconv.dist import ScalarDist

    bad = ScalarDist("bad", lambda x: np.where(np.asarray(x) >= 0, 0.5 + 0.5 * np.minimum(x, 1), 0.0),
                     lambda p: p, lambda rng, n: rng.random(n), upper_endpoint=1.0)
    with pytest.raises(DomainError):
        forward_cdf(bad, (1.0, 1.0), [0.5])


def test_scale_bundles_both_grids():
    pair = scale(make_uniform(), (1.0, 1.0), [0.25, 0.5])
    assert pair.scaled_cdf.ys == pytest.approx([0.25 - 0.25 * math.log(0.25), 0.5 - 0.5 * math.log(0.5)])
    assert pair.scaled_pdf.ys == pytest.approx([math.log(4.0), math.log(2.0)])


@pytest.mark.parametrize("a,b", [(0.3, 0.3), (1.0, 1.0), (2.0, 5.0), (0.7, 2.5)])
def test_beta_mixture_moments(a, b):
    # E S = a/(a+b), E S^2 = a(a+1)/((a+b)(a+b+1))
    assert beta_mixture(lambda s: s, a, b) == pytest.approx(a / (a + b), rel=1e-11)
    assert beta_mixture(lambda s: s * s, a, b) == pytest.approx(a * (a + 1) / ((a + b) * (a + b + 1)), rel=1e-11)


# -- schedules ----------------------------------------------------------------


@given(beta=st.floats(0.01, 30.0))
def test_default_schedule_is_valid(beta):
    s = RecoverySchedule.default(beta)
    assert s.betas[0] == beta and s.betas[-1] == 0.0
    assert s.k == math.ceil(beta)
    steps = -np.diff(s.betas)
    assert np.all((steps > 0) & (steps < 1))
    assert np.allclose(steps, steps[0])
    assert all(0 < d < 1 for d in s.deltas)


@pytest.mark.parametrize("betas", [(1.0,), (1.0, 0.0), (2.0, 0.5, 0.0), (0.5, 0.1), (0.0, 0.0), (0.5, 0.6, 0.0)])
def test_bad_schedules(betas):
    with pytest.raises(ScheduleError):
        RecoverySchedule(betas)


def test_schedule_must_start_at_beta():
    F = forward_cdf(make_exponential(1.0), (1.0, 1.0), np.geomspace(1e-3, 10, 64))
    with pytest.raises(ScheduleError):
        recover_iterative(F, (1.0, 1.0), RecoverySchedule((0.8, 0.4, 0.0)))


# -- iterative recovery ----------------------------------------------------------


def test_point_mass_recovered_as_step():
    H = make_point_mass(1.0)
    grid = GridSpec(1e-6, 1.5, 1024, cluster_at=1.0)
    rec = recover_iterative(forward_cdf(H, (1.0, 0.5), grid), (1.0, 0.5), RecoverySchedule((0.5, 0.0)))
    assert rec(0.9) <= 0.02
    assert rec(1.01) >= 0.98


def test_exponential_inverts_to_gamma():
    grid = default_grid(make_gamma(2.0))
    xs = grid.nodes()
    scaled = GridFn(xs, -np.expm1(-xs))
    rec = recover_iterative(scaled, (1.0, 1.0), RecoverySchedule((1.0, 0.5, 0.0)))
    assert np.max(np.abs(rec.ys - make_gamma(2.0).cdf(xs))) <= 1e-2


def _sup_outside_step(rec, H):
    err = np.abs(rec.ys - np.asarray(H.cdf(rec.xs)))
    if H.atoms:
        i = int(np.searchsorted(rec.xs, H.atoms[0][0]))
        err[max(i - 2, 0) : i + 3] = 0.0
    return float(np.max(err))


@pytest.mark.parametrize("H", [make_gamma(2.0), make_uniform(), make_point_mass(1.0)], ids=lambda H: H.name)
@pytest.mark.parametrize("params", [(1.0, 1.0), (1.0, 2.0), (0.5, 0.5)])
def test_round_trip(H, params):
    grid = default_grid(H)
    rec = recover_iterative(forward_cdf(H, params, grid), params)
    assert rec.is_cdf()
    assert _sup_outside_step(rec, H) <= 1e-2


def test_recovery_rejects_non_cdf():
    xs = np.linspace(0.1, 1, 10)
    with pytest.raises(ParameterError):
        recover_iterative(GridFn(xs, 1 - xs), (1.0, 1.0))


def test_recovery_flags_instability():
    # a jagged "CDF" whose unscaling is far from monotone
    xs = np.geomspace(1e-3, 5.0, 200)
    ys = np.clip(np.round(xs * 3) / 3 / 5.0, 0, 1)
    with pytest.raises(RecoveryInstabilityError):
        recover_iterative(GridFn(xs, ys, interpolation="linear"), (1.0, 0.5))


# -- derivative route -------------------------------------------------------------


def test_derivative_route_exponential():
    xs = np.geomspace(1e-4, 40.0, 2000)
    h = recover_derivative(GridFn(xs, np.exp(-xs), interpolation="linear"), (1.0, 1.0), n=1)
    assert h(1.0) == pytest.approx(math.exp(-1), rel=1e-4)
    assert 0.99 <= h.integral() <= 1.01


def test_derivative_route_uniform():
    xs = np.geomspace(1e-6, 1.0, 2000)[:-1]
    h = recover_derivative(GridFn(xs, -np.log(xs), interpolation="linear"), (1.0, 1.0), n=1)
    inner = (xs > 1e-4) & (xs < 0.99)
    assert np.max(np.abs(h.ys[inner] - 1.0)) <= 1e-6


def test_fractional_derivative_route_point_mass():
    B = make_beta(0.5, 0.5)
    xs = GridSpec(1e-6, 1.0 - 1e-9, 4000, cluster_at=1.0).nodes()
    xs = xs[xs < 1.0]
    h = recover_derivative(GridFn(xs, B.density(xs), interpolation="linear"), (0.5, 0.5), n=1, delta=0.5)
    assert h.integral(0.95, xs[-1]) >= 0.9


def test_derivative_route_validation():
    xs = np.geomspace(1e-3, 10.0, 200)
    f = GridFn(xs, np.exp(-xs), interpolation="linear")
    with pytest.raises(ParameterError):
        recover_derivative(f, (1.0, 1.5), n=1)  # beta != n - delta
    with pytest.raises(ParameterError):
        recover_derivative(f, (1.0, 0.5), n=1, delta=0.5)  # alpha > delta
    with pytest.raises(ParameterError):
        recover_derivative(f, (1.0, 1.0), n=0)


def test_derivative_route_normalization_guard():
    xs = np.geomspace(1e-3, 10.0, 400)
    f = GridFn(xs, 3.0 * np.exp(-xs), interpolation="linear")
    with pytest.raises(RecoveryInstabilityError):
        recover_derivative(f, (1.0, 1.0), n=1)


# -- integer recursion ---------------------------------------------------------------


def test_integer_step_uniform_deflator():
    xs = np.geomspace(1e-8, 1 - 1e-8, 500)
    H = recover_integer_step(GridFn(xs, xs - xs * np.log(xs)), GridFn(xs, -np.log(xs)), 1.0, 0.0)
    assert np.max(np.abs(H.ys - xs)) <= 1e-10


def test_integer_step_one_level_up():
    xs = np.linspace(0.01, 0.99, 99)
    H = recover_integer_step(GridFn(xs, xs), GridFn(xs, np.ones_like(xs)), 1.0, 1.0)
    assert H.ys == pytest.approx(xs / 2)


def test_integer_step_zero_density_is_identity():
    xs = np.linspace(0.1, 1.0, 10)
    H = GridFn(xs, xs**2)
    assert np.array_equal(recover_integer_step(H, GridFn(xs, np.zeros_like(xs)), 1.0, 0.5).ys, H.ys)


def test_integer_step_validation():
    xs = np.linspace(0.1, 1.0, 10)
    with pytest.raises(RecoveryInstabilityError):
        recover_integer_step(GridFn(xs, xs), GridFn(xs, 5 * xs**3), 1.0, 0.0)
    with pytest.raises(DomainError):
        recover_integer_step(GridFn(xs, xs), GridFn(xs * 2, xs), 1.0, 0.0)
    with pytest.raises(ParameterError):
        recover_integer_step(GridFn(xs, xs), GridFn(xs, xs), 0.0, 0.0)


def test_density_recursion_and_direct_route_agree():
    # Gamma(3,1) scaled by B(1,2) is Exp(1); two unit steps back vs D^2 directly
    xs = np.geomspace(1e-3, 30.0, 3000)
    h12 = GridFn(xs, np.exp(-xs), interpolation="linear")
    h11 = recover_density_step(h12, 1.0, 0.0)
    h = recover_density_step(h11, 1.0, 1.0)
    direct = recover_derivative(h12, (1.0, 2.0), n=2)
    inner = (xs >= 0.1) & (xs <= 5.0)
    assert np.max(np.abs(h.ys[inner] - direct.ys[inner])) <= 1e-3
    assert np.max(np.abs(h.ys[inner] - make_gamma(3.0).density(xs[inner]))) <= 1e-3


def test_density_recursion_matches_forward_intermediate():
    # one step from h_{1,2} (level 0) lands on Gamma(3) scaled by B(2, 1)
    xs = np.geomspace(1e-2, 10.0, 1500)
    h11 = recover_density_step(GridFn(xs, np.exp(-xs), interpolation="linear"), 1.0, 0.0)
    fwd = forward_pdf(make_gamma(3.0), (2.0, 1.0), xs[::50])
    assert np.max(np.abs(h11(fwd.xs) - fwd.ys)) <= 1e-3


# -- beta composition ------------------------------------------------------------------


@pytest.mark.parametrize("abg", [(1, 1, 1), (0.5, 1.5, 2)])
def test_beta_composition(abg):
    rep = beta_compose_check(*abg, 100_000, seed=4)
    assert rep.statistic <= 0.0086
    assert rep.as_dict()["n"] == 100_000


def test_beta_composition_validation():
    with pytest.raises(EmptySampleError):
        beta_compose_check(1, 1, 1, 0, seed=0)
    with pytest.raises(ParameterError):
        beta_compose_check(1, -1, 1, 10, seed=0)


def test_beta_composition_is_seeded():
    assert beta_compose_check(1, 2, 3, 5000, seed=8).statistic == beta_compose_check(1, 2, 3, 5000, seed=8).statistic
