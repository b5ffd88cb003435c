import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from betaconv import _kernels_py, kernels

try:
    from betaconv import _kernels as _compiled
except ImportError:
    _compiled = None

BACKENDS = [pytest.param(_kernels_py, id="python")]
if _compiled is not None:
    BACKENDS.append(pytest.param(_compiled, id="compiled"))
needs_compiled = pytest.mark.skipif(_compiled is None, reason="compiled extension not built")


def _arr(v):
    return np.ascontiguousarray(v, dtype=float)


def cubic(y):
    return 1.0 - 0.5 * y + 0.3 * y**2 - 0.05 * y**3


def dcubic(y):
    return -0.5 + 0.6 * y - 0.15 * y**2


def _singular_integral(f, x, upper, beta):
    """int_x^upper (y - x)**(beta - 1) f(y) dy; QAWS handles the endpoint power."""
    val, _ = integrate.quad(f, x, upper, weight="alg", wvar=(beta - 1.0, 0.0), epsabs=0, epsrel=1e-13)
    return val


@pytest.mark.parametrize("impl", BACKENDS)
@pytest.mark.parametrize("beta", [0.3, 1.0, 1.5, 2.7])
def test_hermite_sweep_is_exact_on_cubics(impl, beta):
    xs = np.sort(np.concatenate([[0.0, 3.0], np.random.default_rng(1).uniform(0, 3, 14)]))
    got = impl.weyl_integral_hermite(_arr(xs), _arr(cubic(xs)), _arr(dcubic(xs)), beta)
    for i in (0, 5, 12):
        want = _singular_integral(cubic, xs[i], 3.0, beta)
        assert got[i] == pytest.approx(want, rel=1e-11)
    assert got[-1] == 0.0


@pytest.mark.parametrize("impl", BACKENDS)
def test_stieltjes_sweep_matches_density_sweep(impl):
    # d(phi) = phi' dy, and a cubic phi has a quadratic phi', reproduced exactly
    xs = np.linspace(0.0, 2.0, 9)
    phi = cubic(xs)
    a = impl.weyl_stieltjes_hermite(_arr(xs), _arr(phi), _arr(dcubic(xs)), 1.7)
    b = impl.weyl_integral_hermite(_arr(xs), _arr(dcubic(xs)), _arr(0.6 - 0.3 * xs), 1.7)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-15)


@needs_compiled
@settings(max_examples=50, deadline=None)
@given(
    a=st.floats(0.01, 50.0),
    b=st.floats(0.01, 50.0),
    xs=st.lists(st.floats(0.0, 1.0), min_size=1, max_size=20),
)
def test_betainc_backends_agree(a, b, xs):
    x = _arr(xs)
    # the exp(lgamma ...) prefactor rounds differently in libm and numpy
    assert _compiled.betainc(a, b, x) == pytest.approx(_kernels_py.betainc(a, b, x), rel=1e-12, abs=1e-300)


@needs_compiled
@settings(max_examples=50, deadline=None)
@given(a=st.floats(0.01, 200.0), xs=st.lists(st.floats(0.0, 1e18), min_size=1, max_size=20))
def test_gammainc_backends_agree(a, xs):
    x = _arr(xs)
    # exp of a prefactor near -700 amplifies argument rounding by ~700 eps
    assert _compiled.gammainc(a, x) == pytest.approx(_kernels_py.gammainc(a, x), rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("impl", BACKENDS)
def test_special_functions_against_scipy(impl):
    x = np.array([0.0, 1e-12, 0.01, 0.3, 0.5, 0.99, 1.0])
    for a, b in ((0.5, 0.5), (2.0, 3.0), (30.0, 0.2)):
        assert impl.betainc(a, b, x) == pytest.approx(special.betainc(a, b, x), rel=1e-12, abs=1e-300)
    g = np.array([0.0, 1e-10, 0.5, 3.0, 40.0, 1e15, 1e300])
    for a in (0.1, 1.0, 7.5, 150.0):
        assert impl.gammainc(a, g) == pytest.approx(special.gammainc(a, g), rel=1e-12, abs=1e-300)


@needs_compiled
@settings(max_examples=25, deadline=None)
@given(
    beta=st.floats(0.05, 4.0),
    seed=st.integers(0, 2**32 - 1),
)
def test_hermite_backends_agree(beta, seed):
    rng = np.random.default_rng(seed)
    xs = np.sort(rng.uniform(0, 5, 30))
    xs = np.unique(xs)
    f, df = rng.normal(size=xs.size), rng.normal(size=xs.size)
    for name in ("weyl_integral_hermite", "weyl_stieltjes_hermite"):
        c = getattr(_compiled, name)(_arr(xs), _arr(f), _arr(df), beta)
        p = getattr(_kernels_py, name)(_arr(xs), _arr(f), _arr(df), beta)
        scale = np.max(np.abs(p)) + 1.0
        assert np.max(np.abs(c - p)) <= 1e-12 * scale


def _backend_in_subprocess(env_value):
    env = {**os.environ, "BETACONV_PURE_PYTHON": env_value}
    out = subprocess.run(
        [sys.executable, "-c", "from betaconv import kernels; print(kernels.BACKEND)"],
        capture_output=True, text=True, env=env, check=True,
    )
    return out.stdout.strip()


def test_pure_python_can_be_forced():
    assert _backend_in_subprocess("1") == "python"


@needs_compiled
def test_compiled_is_the_default():
    assert _backend_in_subprocess("") == "compiled"
    assert _backend_in_subprocess("0") == "compiled"


def test_dispatch_wraps_the_selected_backend():
    xs = np.linspace(0.0, 1.0, 5)
    want = (_compiled if kernels.BACKEND == "compiled" else _kernels_py).weyl_integral_hermite(
        _arr(xs), _arr(xs), _arr(np.ones(5)), 1.2
    )
    assert np.array_equal(kernels.weyl_integral_hermite(list(xs), xs, np.ones(5), 1.2), want)
