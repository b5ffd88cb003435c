"""Pure-Python implementations of the routines in ``_kernels.pyx``.

Vectorized over the evaluation points with numpy; the continued fractions
run in lock-step with a convergence mask.
"""

from math import lgamma

import numpy as np

EPS = 1e-16
TINY = 1e-300
MAXIT = 10000


def _guard(v):
    return np.where(np.abs(v) < TINY, TINY, v)


def _betacf(a, b, x):
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = np.ones_like(x)
    d = 1.0 / _guard(1.0 - qab * x / qap)
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for m in range(1, MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 / _guard(1.0 + aa * d)
        c = _guard(1.0 + aa / c)
        h = np.where(active, h * d * c, h)
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 / _guard(1.0 + aa * d)
        c = _guard(1.0 + aa / c)
        de = d * c
        h = np.where(active, h * de, h)
        active &= np.abs(de - 1.0) >= EPS
        if not active.any():
            break
    return h


def betainc(a, b, x):
    x = np.asarray(x, dtype=float)
    flat = np.ravel(x)
    out = np.where(flat <= 0.0, 0.0, 1.0)
    inner = (flat > 0.0) & (flat < 1.0)
    if inner.any():
        xi = flat[inner]
        lbeta = lgamma(a) + lgamma(b) - lgamma(a + b)
        front = np.exp(a * np.log(xi) + b * np.log1p(-xi) - lbeta)
        direct = xi < (a + 1.0) / (a + b + 2.0)
        res = np.empty_like(xi)
        if direct.any():
            res[direct] = front[direct] * _betacf(a, b, xi[direct]) / a
        if (~direct).any():
            res[~direct] = 1.0 - front[~direct] * _betacf(b, a, 1.0 - xi[~direct]) / b
        out[inner] = res
    return out.reshape(x.shape)


def gammainc(a, x):
    x = np.asarray(x, dtype=float)
    flat = np.ravel(x)
    out = np.where(flat <= 0.0, 0.0, 1.0)
    inner = (flat > 0.0) & np.isfinite(flat)
    if not inner.any():
        return out.reshape(x.shape)
    xi = flat[inner]
    res = np.empty_like(xi)
    lg = lgamma(a)
    ser = xi < a + 1.0
    # prefactor underflows; the fraction stalls once b + 2 == b
    negligible = ~ser & (-xi + a * np.log(xi) - lg < -745.0)
    res[negligible] = 1.0
    ser_or_done = ser | negligible
    if ser.any():
        xs = xi[ser]
        ap = a
        term = np.full_like(xs, 1.0 / a)
        s = term.copy()
        active = np.ones(xs.shape, dtype=bool)
        for _ in range(MAXIT):
            ap += 1.0
            term = np.where(active, term * xs / ap, 0.0)
            s = s + term
            active &= np.abs(term) >= np.abs(s) * EPS
            if not active.any():
                break
        res[ser] = s * np.exp(-xs + a * np.log(xs) - lg)
    if (~ser_or_done).any():
        xs = xi[~ser_or_done]
        b = xs + 1.0 - a
        c = np.full_like(xs, 1.0 / TINY)
        d = 1.0 / b
        h = d.copy()
        active = np.ones(xs.shape, dtype=bool)
        for n in range(1, MAXIT + 1):
            an = -n * (n - a)
            b = b + 2.0
            d = 1.0 / _guard(an * d + b)
            c = _guard(b + an / c)
            de = d * c
            h = np.where(active, h * de, h)
            active &= np.abs(de - 1.0) >= EPS
            if not active.any():
                break
        res[~ser_or_done] = 1.0 - np.exp(-xs + a * np.log(xs) - lg) * h
    out[inner] = res
    return out.reshape(x.shape)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
GLS = 0.5 * (_GL_X + 1.0)
GLW = 0.5 * _GL_W


def _cells(r, beta, q0, q1, q2, q3):
    out = np.empty(r.size)
    near = r < 1.0
    rn = r[near]
    t = [((1.0 + rn) ** (beta + i) - rn ** (beta + i)) / (beta + i) for i in range(4)]
    out[near] = (
        q0[near] * t[0]
        + q1[near] * (t[1] - rn * t[0])
        + q2[near] * (t[2] - 2.0 * rn * t[1] + rn * rn * t[0])
        + q3[near] * (t[3] - 3.0 * rn * t[2] + 3.0 * rn * rn * t[1] - rn**3 * t[0])
    )
    far = ~near
    s = GLS[None, :]
    rf = r[far][:, None]
    poly = q0[far][:, None] + s * (q1[far][:, None] + s * (q2[far][:, None] + s * q3[far][:, None]))
    out[far] = ((rf + s) ** (beta - 1.0) * poly) @ GLW
    return out


def _hermite_sweep(xs, beta, q0, q1, q2, q3, scale):
    n = xs.size
    out = np.zeros(n)
    w = np.diff(xs)
    for m in range(n - 1):
        r = (xs[m:-1] - xs[m]) / w[m:]
        out[m] = np.sum(scale[m:] * _cells(r, beta, q0[m:], q1[m:], q2[m:], q3[m:]))
    return out



def weyl_integral_hermite(xs, f, df, beta):
    xs, f, df = (np.asarray(v, dtype=float) for v in (xs, f, df))
    w = np.diff(xs)
    p0, p1 = f[:-1], f[1:]
    m0, m1 = w * df[:-1], w * df[1:]
    return _hermite_sweep(
        xs, beta, p0, m0, 3.0 * (p1 - p0) - 2.0 * m0 - m1, 2.0 * (p0 - p1) + m0 + m1, w**beta
    )


def weyl_stieltjes_hermite(xs, phi, dphi, beta):
    xs, phi, dphi = (np.asarray(v, dtype=float) for v in (xs, phi, dphi))
    w = np.diff(xs)
    dp = np.diff(phi)
    m0, m1 = w * dphi[:-1], w * dphi[1:]
    return _hermite_sweep(
        xs, beta, m0, 6.0 * dp - 4.0 * m0 - 2.0 * m1, 3.0 * (m0 + m1) - 6.0 * dp, np.zeros_like(w), w ** (beta - 1.0)
    )
