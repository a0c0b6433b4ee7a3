# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Matern correlation kernel, compiled implementation.

Same evaluation strategy as ``_matern_py`` (closed half-integer forms,
ascending series below ``max(2*nu, 8)``, large-argument expansion above);
see that module for the accuracy notes.
"""

from libc.math cimport (M_PI, exp, fabs, floor, lgamma, log, pow, sin, sqrt,
                        tgamma)

import numpy as np

BACKEND_NAME = "compiled"

cdef double _HALF_TOL = 1e-12
cdef double _INT_TOL = 1e-6
cdef double _EXP_UNDERFLOW = -745.0


cdef inline double _round(double x) nogil:
    return floor(x + 0.5)


cdef double _corr_half_sum(double z, double nu) nogil:
    cdef int m = <int>_round(nu - 0.5)
    cdef double t = 1.0
    cdef double s = 1.0
    cdef double expo
    cdef int k
    for k in range(1, m + 1):
        t *= (m + k) * (m - k + 1.0) / (2.0 * k * z)
        s += t
    expo = ((1.0 - nu) * log(2.0) - lgamma(nu) + nu * log(z)
            + 0.5 * log(M_PI / (2.0 * z)) - z)
    if expo < _EXP_UNDERFLOW:
        return 0.0
    return exp(expo) * s


cdef double _corr_series(double z, double nu) nogil:
    cdef double pref = M_PI / (tgamma(nu) * sin(M_PI * nu) * pow(2.0, nu))
    cdef double q = 0.25 * z * z
    cdef double t1 = pow(2.0, nu) / tgamma(1.0 - nu)
    cdef double g1 = t1
    cdef double lt2 = 2.0 * nu * log(z) - nu * log(2.0) - lgamma(1.0 + nu)
    cdef double t2 = exp(lt2) if lt2 > _EXP_UNDERFLOW else 0.0
    cdef double g2 = t2
    cdef int k
    for k in range(1, 400):
        t1 *= q / (k * (k - nu))
        t2 *= q / (k * (k + nu))
        g1 += t1
        g2 += t2
        if fabs(t1) + fabs(t2) <= 1e-17 * (fabs(g1) + fabs(g2)):
            break
    return pref * (g1 - g2)


cdef double _corr_asym(double z, double nu) nogil:
    cdef double mu = 4.0 * nu * nu
    cdef double s = 1.0
    cdef double t = 1.0
    cdef double prev = 1.0
    cdef double expo
    cdef int k
    for k in range(1, 80):
        t *= (mu - (2.0 * k - 1.0) * (2.0 * k - 1.0)) / (8.0 * k * z)
        if fabs(t) >= prev:
            break
        s += t
        prev = fabs(t)
        if fabs(t) <= 1e-17 * fabs(s):
            break
    expo = ((1.0 - nu) * log(2.0) - lgamma(nu) + nu * log(z)
            + 0.5 * log(M_PI / (2.0 * z)) - z)
    if expo < _EXP_UNDERFLOW:
        return 0.0
    return exp(expo) * s


cdef double _corr(double z, double nu) nogil:
    cdef double half, switch, nu_eff
    cdef bint near_int
    if z == 0.0:
        return 1.0
    if fabs(nu - 0.5) < _HALF_TOL:
        return exp(-z)
    if fabs(nu - 1.5) < _HALF_TOL:
        return (1.0 + z) * exp(-z)
    if fabs(nu - 2.5) < _HALF_TOL:
        return (1.0 + z + z * z / 3.0) * exp(-z)
    half = nu - floor(nu)
    if fabs(half - 0.5) < _HALF_TOL:
        return _corr_half_sum(z, nu)
    near_int = fabs(nu - _round(nu)) < _INT_TOL
    switch = 2.0 * nu
    if near_int:
        if switch < 4.0:
            switch = 4.0
    else:
        if switch < 8.0:
            switch = 8.0
    if z < switch:
        nu_eff = _round(nu) + _INT_TOL if near_int else nu
        return _corr_series(z, nu_eff)
    return _corr_asym(z, nu)


def matern_scalar(double h, double nu, double phi):
    """Matern correlation at distance ``h`` for smoothness ``nu``, range ``phi``."""
    if nu <= 0.0 or phi <= 0.0:
        raise ValueError("nu and phi must be positive")
    if h < 0.0:
        raise ValueError("distance must be nonnegative")
    return _corr(sqrt(8.0 * nu) * h / phi, nu)


def matern_many(h, double nu, double phi):
    """Vectorized Matern correlation over a 1-D array of distances."""
    if nu <= 0.0 or phi <= 0.0:
        raise ValueError("nu and phi must be positive")
    arr = np.ascontiguousarray(h, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError("expected a 1-D array of distances")
    if arr.size and arr.min() < 0.0:
        raise ValueError("distances must be nonnegative")
    out = np.empty_like(arr)
    cdef double[::1] hv = arr
    cdef double[::1] ov = out
    cdef double c = sqrt(8.0 * nu) / phi
    cdef Py_ssize_t i, n = hv.shape[0]
    with nogil:
        for i in range(n):
            ov[i] = _corr(c * hv[i], nu)
    return out
