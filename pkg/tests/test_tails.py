import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from betaconv.dist import make_beta, make_gamma, make_point_mass, make_rv0_family, make_uniform
from betaconv.errors import BoundaryWarning, DomainError, InsufficientTailError, ParameterError
from betaconv.scaling import scaled_cdf_at
from betaconv.tails import (
    LocalRegularVariation,
    TailReport,
    aggregation_indices,
    beta_lower_tail_constant,
    density_tail_relation_check,
    gumbel_scaling_index_check,
    hill_index,
    independent_signs,
    polar_scale_tail,
    polar_tail_monte_carlo,
    product_index,
    rv_index_at_zero,
    sign_pair_probabilities,
    theorem1_ratio_constant,
)

positive = st.floats(0.1, 5.0)


# -- index estimation -------------------------------------------------------------


@pytest.mark.parametrize("window", [None, (1e-3, 0.1), (1e-6, 1e-5)])
def test_pure_power_index_is_exact(window):
    rep = rv_index_at_zero(make_rv0_family(2.0), window)
    assert rep.index_hat == pytest.approx(2.0, abs=1e-6)
    assert rep.diagnostic == pytest.approx(1.0)


def test_beta_samples_index():
    x = make_beta(0.5, 0.5).sample(1_000_000, seed=11)
    assert rv_index_at_zero(x, (1e-4, 1e-2)).index_hat == pytest.approx(0.5, abs=0.05)


def test_gamma_samples_index():
    x = make_gamma(2.0).sample(1_000_000, seed=12)
    rep = rv_index_at_zero(x)
    assert rep.index_hat == pytest.approx(2.0, abs=0.15)
    assert rep.method == "hill" and rep.k == int(1_000_000**0.6)


def test_gamma_analytic_index_approaches_two():
    # local slope of the Gamma(2) CDF is 2 - 2u/3 + ...
    wide = rv_index_at_zero(make_gamma(2.0)).index_hat
    deep = rv_index_at_zero(make_gamma(2.0), (1e-8, 1e-6)).index_hat
    assert wide == pytest.approx(2.0, abs=0.05)
    assert deep == pytest.approx(2.0, abs=1e-3)


def test_estimation_errors():
    with pytest.raises(InsufficientTailError):
        rv_index_at_zero(np.random.default_rng(0).random(1000), (1e-3, 1e-2))
    with pytest.raises(InsufficientTailError):
        hill_index(np.random.default_rng(0).random(100))
    with pytest.raises(DomainError):
        hill_index(np.array([1.0, -1.0] * 1000))
    with pytest.raises(ParameterError):
        rv_index_at_zero(make_uniform(), (0.01, 0.5))
    with pytest.raises(ParameterError):
        rv_index_at_zero(make_uniform(), (0.01, 0.001))


def test_tail_report_invariants():
    with pytest.raises(DomainError):
        TailReport(1.0, (0.2, 0.1), 0.0, 1.0)
    with pytest.raises(DomainError):
        TailReport(float("nan"), (0.1, 0.2), 0.0, 1.0)
    d = TailReport(1.0, (0.1, 0.2), 0.01, 0.9).as_dict()
    assert set(d) >= {"index_hat", "stderr", "window", "diagnostic"}


@settings(max_examples=20, deadline=None)
@given(gamma=st.floats(0.3, 4.0), seed=st.integers(0, 2**32 - 1))
def test_hill_on_pure_power_samples(gamma, seed):
    x = make_rv0_family(gamma).sample(200_000, seed=seed)
    rep = hill_index(x)
    # k = n**0.6 ~ 1517 points: relative sd about 2.6%
    assert abs(rep.index_hat / gamma - 1.0) <= 0.12


# -- product index -------------------------------------------------------------------


def test_product_index_examples():
    assert product_index(2.0, 0.5) == 0.5
    assert product_index(0.5, 2.0) == 0.5
    with pytest.warns(BoundaryWarning):
        assert product_index(1.0, 1.0) == 1.0
    with pytest.raises(ParameterError):
        product_index(0.0, 1.0)


@given(g=positive, a=positive)
def test_product_index_symmetric(g, a):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryWarning)
        assert product_index(g, a) == product_index(a, g) == min(g, a)


@pytest.mark.parametrize("gamma,alpha", [(0.5, 3.0), (2.0, 1.0)])
def test_empirical_product_law(gamma, alpha):
    rng = np.random.default_rng(5)
    w = make_rv0_family(gamma).sample(1_000_000, rng) * rng.beta(alpha, 1.0, 1_000_000)
    assert hill_index(w).index_hat == pytest.approx(min(gamma, alpha), abs=0.1)


# -- beta lower tail -----------------------------------------------------------------


def test_beta_lower_tail_constant_examples():
    assert beta_lower_tail_constant((1, 1)) == pytest.approx(1.0, rel=1e-14)
    assert beta_lower_tail_constant((0.5, 0.5)) == pytest.approx(2 / math.pi, rel=1e-14)
    assert beta_lower_tail_constant((2, 3)) == pytest.approx(6.0, rel=1e-14)


def test_beta_lower_tail_numeric():
    c = beta_lower_tail_constant((0.5, 0.5))
    assert float(make_beta(0.5, 0.5).cdf(1e-6)) / (c * 1e-3) == pytest.approx(1.0, rel=1e-3)
    for ab in [(0.5, 0.5), (1, 2), (2, 3)]:
        s = 1e-4
        ratio = float(make_beta(*ab).cdf(s)) / (beta_lower_tail_constant(ab) * s ** ab[0])
        assert abs(ratio - 1.0) <= 0.01


@given(a=positive, b=positive)
def test_beta_lower_tail_is_the_limit(a, b):
    s = 1e-7
    # next-order term is a (1 - b) s / (a + 1)
    ratio = special.betainc(a, b, s) / (beta_lower_tail_constant((a, b)) * s**a)
    assert abs(ratio - 1.0) <= 5 * s * abs(1 - b) + 1e-10


# -- limit constants -------------------------------------------------------------------


def test_ratio_constant_examples():
    assert theorem1_ratio_constant(1.0, 1.0, 0.0, 1e-8) == pytest.approx(1.0, abs=1e-6)
    assert theorem1_ratio_constant(1.0, 1.0, 0.0, 0.5) == pytest.approx(0.5, rel=1e-14)
    with pytest.raises(DomainError):
        theorem1_ratio_constant(1.0, 1.0, 0.0, 1.0)
    with pytest.raises(ParameterError):
        theorem1_ratio_constant(0.0, 1.0, 0.0, 0.5)


def test_ratio_constant_cross_check():
    H = make_rv0_family(0.5)
    x = 1e-4
    measured = float(H.cdf(x)) / scaled_cdf_at(H, (1.0, 1.0), x)
    assert measured == pytest.approx(theorem1_ratio_constant(1.0, 1.0, 0.0, 0.5), rel=0.02)


def test_density_relation_examples():
    H = make_rv0_family(0.5)
    rel = density_tail_relation_check(H, (1.0, 1.0), 0.5, 1e-4)
    assert rel.ratio == pytest.approx(0.5, abs=0.02) and rel.expected == 0.5
    far = density_tail_relation_check(H, (1.0, 1.0), 0.5, 1e-2)
    assert far.deviation > rel.deviation
    pm = density_tail_relation_check(make_point_mass(1.0), (2.0, 1.0), 3.0, 1e-4)
    assert pm.ratio == pytest.approx(2.0, abs=0.02)
    with pytest.raises(DomainError):
        density_tail_relation_check(H, (1.0, 1.0), 0.5, 0.0)


# -- Gumbel radial case ---------------------------------------------------------------------


def test_gumbel_case_index():
    assert gumbel_scaling_index_check("lognormal", (1.0, 1.0), 1_000_000, seed=3).index_hat == pytest.approx(1.0, abs=0.1)
    assert gumbel_scaling_index_check("lognormal", (0.5, 2.0), 1_000_000, seed=3).index_hat == pytest.approx(0.5, abs=0.07)


def test_gumbel_case_errors():
    with pytest.raises(InsufficientTailError):
        gumbel_scaling_index_check("lognormal", (1.0, 1.0), 10, seed=0)
    with pytest.raises(ParameterError):
        gumbel_scaling_index_check("pareto", (1.0, 1.0), 10_000, seed=0)


def test_gumbel_weibull_type():
    assert gumbel_scaling_index_check("weibull-type", (2.0, 1.0), 1_000_000, seed=1).index_hat == pytest.approx(2.0, abs=0.15)


# -- polar scaling --------------------------------------------------------------------


def test_sign_pairs():
    q = independent_signs(0.5, 0.5)
    assert sign_pair_probabilities(q) == {k: 0.25 for k in q}
    assert sign_pair_probabilities([0.1, 0.2, 0.3, 0.4])[(-1, 1)] == 0.3
    with pytest.raises(ParameterError):
        sign_pair_probabilities([0.5, 0.5])
    with pytest.raises(ParameterError):
        sign_pair_probabilities([0.5, 0.5, 0.5, -0.5])


def test_polar_density_form_example():
    v = polar_scale_tail(make_uniform(), 0.6, independent_signs(0.5, 0.5), None, 1e-3, variant="density")
    assert v == pytest.approx(1.4e-3, rel=1e-12)


def test_polar_same_signs_vanish():
    q = {(1, 1): 0.5, (-1, -1): 0.5}
    for variant in ("two-term", "density", "single-root"):
        assert polar_scale_tail(make_uniform(), 0.6, q, None, 1e-3, variant=variant) == 0.0


@pytest.mark.parametrize("variant", ["two-term", "density", "single-root"])
def test_polar_homogeneity(variant):
    G, q = make_uniform(), independent_signs(0.3, 0.8)
    u = 1e-3
    assert polar_scale_tail(G, 0.6, q, None, 2 * u, variant=variant) == pytest.approx(
        2 * polar_scale_tail(G, 0.6, q, None, u, variant=variant), rel=1e-12
    )


def test_polar_single_root_matches_simulation():
    G, u = make_uniform(), 1e-3
    mc = polar_tail_monte_carlo(G, 0.6, 0.5, 0.5, u, 4_000_000, seed=9)
    exact = polar_scale_tail(G, 0.6, independent_signs(0.5, 0.5), None, u, variant="single-root")
    assert mc == pytest.approx(exact, rel=0.05)


def test_polar_monte_carlo_is_shard_invariant():
    G = make_uniform()
    a = polar_tail_monte_carlo(G, 0.6, 0.5, 0.5, 0.01, 300_000, seed=2, shard_size=100_000)
    b = polar_tail_monte_carlo(G, 0.6, 0.5, 0.5, 0.01, 300_000, seed=2, shard_size=100_000)
    assert a == b
    with pytest.raises(ParameterError):
        polar_tail_monte_carlo(G, 0.6, 0.5, 0.5, 0.01, 0)


def test_polar_validation():
    q = independent_signs(0.5, 0.5)
    with pytest.raises(ParameterError):
        polar_scale_tail(make_uniform(), 1.0, q, None, 1e-3)
    with pytest.raises(ParameterError):
        polar_scale_tail(make_uniform(), 0.6, q, None, 1e-3, variant="three-term")
    with pytest.raises(DomainError):
        polar_scale_tail(make_uniform(), 0.6, q, None, 0.0)


# -- local regular variation and aggregation ------------------------------------------


def test_lrv_equal_indices_need_c():
    with pytest.raises(ParameterError):
        LocalRegularVariation(1.0, 1.0, lambda t: 1.0, lambda t: 1.0)
    lrv = LocalRegularVariation.from_density(make_uniform(), 0.6)
    assert lrv.c == 1.0 and lrv.L_rho(1e-3) == 2.0


def test_aggregation_examples():
    lrv = LocalRegularVariation.from_density(make_uniform(), 0.6)
    assert aggregation_indices(2.0, 1.0, lrv) == (1.0, 1.0)
    assert aggregation_indices(0.5, 3.0, lrv) == (0.5, 0.5)
    with pytest.warns(BoundaryWarning):
        assert aggregation_indices(1.0, 1.0, lrv).gamma1 == 1.0
    with pytest.raises(ParameterError):
        aggregation_indices(-1.0, 1.0, lrv)
