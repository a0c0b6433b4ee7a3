"""Matern correlation kernel, pure-Python reference implementation.

Mirrors the compiled extension ``_matern_c``; ``pcvcm.kernels`` selects
between the two at import time. Both follow the same evaluation strategy,
so results agree to the kernel's intrinsic accuracy (half-integer orders
are essentially bit-equal; general orders agree to ~1e-7 in the worst
cancellation region near the series switch):

* ``nu`` in {0.5, 1.5, 2.5}: exact closed forms, fully vectorized.
* other half-integer ``nu``: finite large-argument sum (exact).
* general ``nu``: ascending power series below the switch argument
  ``max(2*nu, 8)`` and the large-argument expansion above it. Orders
  within 1e-6 of an integer are nudged off the pole of the reflection
  formula; accuracy there degrades to ~1e-5, elsewhere ~1e-8 or better.
"""

import math

import numpy as np

BACKEND_NAME = "python"

_HALF_TOL = 1e-12
_INT_TOL = 1e-6
_EXP_UNDERFLOW = -745.0


def _is_simple_half(nu):
    return any(abs(nu - v) < _HALF_TOL for v in (0.5, 1.5, 2.5))


def _closed_half(z, nu):
    # vectorized; exact for nu in {0.5, 1.5, 2.5}
    if abs(nu - 0.5) < _HALF_TOL:
        return np.exp(-z)
    if abs(nu - 1.5) < _HALF_TOL:
        return (1.0 + z) * np.exp(-z)
    return (1.0 + z + z * z / 3.0) * np.exp(-z)


def _corr_half_sum(z, nu):
    # nu = m + 1/2: K_nu has a terminating large-argument sum, so the
    # correlation is exact for any half-integer order.
    m = int(round(nu - 0.5))
    t = 1.0
    s = 1.0
    for k in range(1, m + 1):
        t *= (m + k) * (m - k + 1) / (2.0 * k * z)
        s += t
    expo = ((1.0 - nu) * math.log(2.0) - math.lgamma(nu) + nu * math.log(z)
            + 0.5 * math.log(math.pi / (2.0 * z)) - z)
    if expo < _EXP_UNDERFLOW:
        return 0.0
    return math.exp(expo) * s


def _corr_series(z, nu):
    # scaled ascending series: corr = pref * (g1 - g2) with
    # g1 = z^nu I_{-nu}(z), g2 = z^nu I_{nu}(z); corr -> 1 as z -> 0.
    pref = math.pi / (math.gamma(nu) * math.sin(math.pi * nu) * 2.0 ** nu)
    q = 0.25 * z * z
    t1 = 2.0 ** nu / math.gamma(1.0 - nu)
    g1 = t1
    lt2 = 2.0 * nu * math.log(z) - nu * math.log(2.0) - math.lgamma(1.0 + nu)
    t2 = math.exp(lt2) if lt2 > _EXP_UNDERFLOW else 0.0
    g2 = t2
    for k in range(1, 400):
        t1 *= q / (k * (k - nu))
        t2 *= q / (k * (k + nu))
        g1 += t1
        g2 += t2
        if abs(t1) + abs(t2) <= 1e-17 * (abs(g1) + abs(g2)):
            break
    return pref * (g1 - g2)


def _corr_asym(z, nu):
    # large-argument expansion; divergent, truncated at the smallest term
    mu = 4.0 * nu * nu
    s = 1.0
    t = 1.0
    prev = 1.0
    for k in range(1, 80):
        t *= (mu - (2.0 * k - 1.0) ** 2) / (8.0 * k * z)
        if abs(t) >= prev:
            break
        s += t
        prev = abs(t)
        if abs(t) <= 1e-17 * abs(s):
            break
    expo = ((1.0 - nu) * math.log(2.0) - math.lgamma(nu) + nu * math.log(z)
            + 0.5 * math.log(math.pi / (2.0 * z)) - z)
    if expo < _EXP_UNDERFLOW:
        return 0.0
    return math.exp(expo) * s


def _corr_general(z, nu):
    if z == 0.0:
        return 1.0
    half = nu - math.floor(nu)
    if abs(half - 0.5) < _HALF_TOL:
        return _corr_half_sum(z, nu)
    near_int = abs(nu - round(nu)) < _INT_TOL
    switch = max(2.0 * nu, 4.0 if near_int else 8.0)
    if z < switch:
        nu_eff = round(nu) + _INT_TOL if near_int else nu
        return _corr_series(z, nu_eff)
    return _corr_asym(z, nu)


def matern_scalar(h, nu, phi):
    """Matern correlation at distance ``h`` for smoothness ``nu``, range ``phi``."""
    if nu <= 0.0 or phi <= 0.0:
        raise ValueError("nu and phi must be positive")
    if h < 0.0:
        raise ValueError("distance must be nonnegative")
    z = math.sqrt(8.0 * nu) * h / phi
    if _is_simple_half(nu):
        return float(_closed_half(z, nu))
    return _corr_general(z, nu)


def matern_many(h, nu, phi):
    """Vectorized Matern correlation over a 1-D array of distances."""
    if nu <= 0.0 or phi <= 0.0:
        raise ValueError("nu and phi must be positive")
    h = np.ascontiguousarray(h, dtype=np.float64)
    if h.ndim != 1:
        raise ValueError("expected a 1-D array of distances")
    if h.size and h.min() < 0.0:
        raise ValueError("distances must be nonnegative")
    z = (math.sqrt(8.0 * nu) / phi) * h
    if _is_simple_half(nu):
        return _closed_half(z, nu)
    out = np.empty_like(z)
    for i in range(z.shape[0]):
        out[i] = _corr_general(z[i], nu)
    return out
