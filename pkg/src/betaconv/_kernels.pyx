# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. ``_kernels_py`` is the pure-Python twin; both must
agree to rounding (see tests/test_kernels.py)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, lgamma, fabs, pow, expm1, log1p, INFINITY

cnp.import_array()

cdef double EPS = 1e-16
cdef double TINY = 1e-300
cdef int MAXIT = 10000


cdef double _betacf(double a, double b, double x) nogil:
    cdef double qab = a + b, qap = a + 1.0, qam = a - 1.0
    cdef double c = 1.0, d = 1.0 - qab * x / qap, h, aa, de
    cdef int m, m2
    if fabs(d) < TINY:
        d = TINY
    d = 1.0 / d
    h = d
    for m in range(1, MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if fabs(d) < TINY:
            d = TINY
        c = 1.0 + aa / c
        if fabs(c) < TINY:
            c = TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if fabs(d) < TINY:
            d = TINY
        c = 1.0 + aa / c
        if fabs(c) < TINY:
            c = TINY
        d = 1.0 / d
        de = d * c
        h *= de
        if fabs(de - 1.0) < EPS:
            break
    return h


cdef double _betainc(double a, double b, double x) nogil:
    cdef double lbeta, front
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    lbeta = lgamma(a) + lgamma(b) - lgamma(a + b)
    if x < (a + 1.0) / (a + b + 2.0):
        front = exp(a * log(x) + b * log1p(-x) - lbeta)
        return front * _betacf(a, b, x) / a
    front = exp(b * log1p(-x) + a * log(x) - lbeta)
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


cdef double _gammainc(double a, double x) nogil:
    cdef double ap, s, term, b, c, d, h, an, de
    cdef int n
    if x <= 0.0:
        return 0.0
    if x == INFINITY:
        return 1.0
    if x < a + 1.0:
        ap = a
        s = 1.0 / a
        term = s
        for n in range(MAXIT):
            ap += 1.0
            term *= x / ap
            s += term
            if fabs(term) < fabs(s) * EPS:
                break
        return s * exp(-x + a * log(x) - lgamma(a))
    if -x + a * log(x) - lgamma(a) < -745.0:
        # prefactor underflows; the fraction stalls once b + 2 == b
        return 1.0
    b = x + 1.0 - a
    c = 1.0 / TINY
    d = 1.0 / b
    h = d
    for n in range(1, MAXIT + 1):
        an = -n * (n - a)
        b += 2.0
        d = an * d + b
        if fabs(d) < TINY:
            d = TINY
        c = b + an / c
        if fabs(c) < TINY:
            c = TINY
        d = 1.0 / d
        de = d * c
        h *= de
        if fabs(de - 1.0) < EPS:
            break
    return 1.0 - exp(-x + a * log(x) - lgamma(a)) * h


def betainc(double a, double b, x):
    cdef cnp.ndarray[double, ndim=1] xs = np.ascontiguousarray(np.ravel(x), dtype=np.float64)
    cdef Py_ssize_t i, n = xs.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = _betainc(a, b, xs[i])
    return out.reshape(np.shape(x))


def gammainc(double a, x):
    cdef cnp.ndarray[double, ndim=1] xs = np.ascontiguousarray(np.ravel(x), dtype=np.float64)
    cdef Py_ssize_t i, n = xs.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = _gammainc(a, xs[i])
    return out.reshape(np.shape(x))


# 8-point Gauss-Legendre rule on [0, 1]
cdef double GLS[8]
cdef double GLW[8]
_gl_x, _gl_w = np.polynomial.legendre.leggauss(8)
for _i in range(8):
    GLS[_i] = 0.5 * (_gl_x[_i] + 1.0)
    GLW[_i] = 0.5 * _gl_w[_i]


cdef inline double _cell(double r, double beta, double q0, double q1, double q2, double q3) nogil:
    # int_0^1 (r + s)^(beta-1) (q0 + q1 s + q2 s^2 + q3 s^3) ds
    cdef double t0, t1, t2, t3, s, acc
    cdef int i
    if r < 1.0:
        t0 = (pow(1.0 + r, beta) - pow(r, beta)) / beta
        t1 = (pow(1.0 + r, beta + 1.0) - pow(r, beta + 1.0)) / (beta + 1.0)
        t2 = (pow(1.0 + r, beta + 2.0) - pow(r, beta + 2.0)) / (beta + 2.0)
        t3 = (pow(1.0 + r, beta + 3.0) - pow(r, beta + 3.0)) / (beta + 3.0)
        return (q0 * t0 + q1 * (t1 - r * t0) + q2 * (t2 - 2.0 * r * t1 + r * r * t0)
                + q3 * (t3 - 3.0 * r * t2 + 3.0 * r * r * t1 - r * r * r * t0))
    acc = 0.0
    for i in range(8):
        s = GLS[i]
        acc += GLW[i] * pow(r + s, beta - 1.0) * (q0 + s * (q1 + s * (q2 + s * q3)))
    return acc


def weyl_integral_hermite(const double[::1] xs, const double[::1] f, const double[::1] df, double beta):
    """out[m] = int_{xs[m]}^{xs[-1]} (y - xs[m])^(beta-1) f(y) dy for the
    cubic Hermite interpolant of values ``f`` and slopes ``df``."""
    cdef Py_ssize_t n = xs.shape[0], m, j
    out = np.zeros(n)
    cdef double[::1] o = out
    cdef double acc, w, p0, p1, m0, m1
    with nogil:
        for m in range(n):
            acc = 0.0
            for j in range(m, n - 1):
                w = xs[j + 1] - xs[j]
                p0 = f[j]
                p1 = f[j + 1]
                m0 = w * df[j]
                m1 = w * df[j + 1]
                acc += pow(w, beta) * _cell(
                    (xs[j] - xs[m]) / w, beta,
                    p0, m0, 3.0 * (p1 - p0) - 2.0 * m0 - m1, 2.0 * (p0 - p1) + m0 + m1)
            o[m] = acc
    return out


def weyl_stieltjes_hermite(const double[::1] xs, const double[::1] phi, const double[::1] dphi, double beta):
    """out[m] = int_{xs[m]}^{xs[-1]} (y - xs[m])^(beta-1) dphi(y) for the
    cubic Hermite interpolant of ``phi`` with slopes ``dphi``."""
    cdef Py_ssize_t n = xs.shape[0], m, j
    out = np.zeros(n)
    cdef double[::1] o = out
    cdef double acc, w, dp, m0, m1
    with nogil:
        for m in range(n):
            acc = 0.0
            for j in range(m, n - 1):
                w = xs[j + 1] - xs[j]
                dp = phi[j + 1] - phi[j]
                m0 = w * dphi[j]
                m1 = w * dphi[j + 1]
                acc += pow(w, beta - 1.0) * _cell(
                    (xs[j] - xs[m]) / w, beta,
                    m0, 6.0 * dp - 4.0 * m0 - 2.0 * m1, 3.0 * (m0 + m1) - 6.0 * dp, 0.0)
            o[m] = acc
    return out
