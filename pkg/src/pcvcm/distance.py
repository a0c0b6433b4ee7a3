"""Kullback-Leibler distances between flexible and base model pairs.

The distance between a flexible Gaussian model and its simpler base model
is ``d = sqrt(2 * KLD(flexible || base))``. For the correlation families
the base model (perfect correlation) is singular, so the distance is only
defined through a limit and carries a divergent constant ``c``; every
closed form here reports the distance in c-units and flags that via
``DistanceResult.constant_factored``. Nothing downstream ever needs ``c``:
the prior rate absorbs it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .gmrf import RANK_EPS, _check_symmetric


@dataclass(frozen=True)
class DistanceResult:
    """A model-to-base distance with its provenance.

    ``constant_factored`` records that the divergent limiting constant has
    been divided out, i.e. the value is in c-units.
    """

    value: float
    constant_factored: bool
    family: str


def kld_mvn(sigma0, sigma1):
    """KLD from N(0, sigma1) to N(0, sigma0): the flexible-vs-base divergence.

    Evaluates ``(tr(sigma0^-1 sigma1) - n - log(|sigma1|/|sigma0|)) / 2``
    for symmetric positive definite covariances of equal dimension.
    """
    sigma0 = _check_symmetric(sigma0)
    sigma1 = _check_symmetric(sigma1)
    if sigma0.shape != sigma1.shape:
        raise ValueError("covariance dimensions do not match")
    n = sigma0.shape[0]
    chol0 = _spd_cholesky(sigma0, "sigma0")
    chol1 = _spd_cholesky(sigma1, "sigma1")
    trace = float(np.trace(sla.cho_solve((chol0, True), sigma1, check_finite=False)))
    logdet0 = 2.0 * float(np.sum(np.log(np.diag(chol0))))
    logdet1 = 2.0 * float(np.sum(np.log(np.diag(chol1))))
    return 0.5 * (trace - n - (logdet1 - logdet0))


def kld_exchangeable_closed(n, rho0, rho):
    """Closed-form exchangeable KLD between correlations ``rho0`` (base) and ``rho``."""
    if n < 2:
        raise ValueError("need n >= 2")
    if not (0.0 <= rho <= rho0 < 1.0):
        raise ValueError(
            f"parameter ordering violated: need 0 <= rho <= rho0 < 1, "
            f"got rho={rho}, rho0={rho0}")
    trace = n * (1.0 + (n - 2.0) * rho0 - (n - 1.0) * rho * rho0) / (
        (1.0 - rho0) * ((n - 1.0) * rho0 + 1.0))
    log_num = math.log1p((n - 1.0) * rho) + (n - 1.0) * math.log1p(-rho)
    log_den = math.log1p((n - 1.0) * rho0) + (n - 1.0) * math.log1p(-rho0)
    return 0.5 * (trace - n - (log_num - log_den))


def kld_intrinsic(structure, tau0, tau):
    """Numeric KLD between two intrinsic fields sharing a structure matrix.

    Both densities are proper on the span of the nonzero eigenvectors of
    the structure matrix, so the divergence is computed there: the two
    covariances are diagonal in that basis and the generic Gaussian
    formula applies directly.
    """
    if tau0 <= 0.0 or tau <= 0.0:
        raise ValueError("precisions must be positive")
    matrix = structure.matrix if hasattr(structure, "matrix") else np.asarray(structure)
    eigvals = np.linalg.eigvalsh(_check_symmetric(matrix))
    keep = eigvals > matrix.shape[0] * RANK_EPS * max(eigvals[-1], 0.0)
    lam = eigvals[keep]
    if lam.size == 0:
        raise ValueError("structure matrix has no positive eigenvalues")
    return kld_mvn(np.diag(1.0 / (tau0 * lam)), np.diag(1.0 / (tau * lam)))


def distance_exchangeable(rho):
    """Distance to the perfectly correlated base model, in c-units: sqrt(1 - rho)."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"need 0 <= rho <= 1, got {rho}")
    return DistanceResult(math.sqrt(1.0 - rho), True, "exchangeable")


def distance_ar1(rho):
    """AR1 distance to the no-change base model, in c-units: sqrt(1 - rho).

    Ranges over [0, sqrt(2)] as the correlation runs from 1 down to -1.
    """
    if not -1.0 <= rho <= 1.0:
        raise ValueError(f"need |rho| <= 1, got {rho}")
    return DistanceResult(math.sqrt(1.0 - rho), True, "ar1")


def distance_precision(tau, n_eff):
    """Distance of a precision-``tau`` field to the infinite-precision base.

    The unfactored limit is ``sqrt(n_eff * tau0 / tau)`` with ``n_eff`` the
    structure rank and ``tau0`` the diverging base precision; divided by
    the constant ``sqrt(n_eff * tau0)`` this is ``1/sqrt(tau)``.
    """
    if tau <= 0.0:
        raise ValueError(f"precision must be positive, got {tau}")
    if n_eff <= 0:
        raise ValueError(f"effective rank must be positive, got {n_eff}")
    return DistanceResult(1.0 / math.sqrt(tau), True, "precision")


def _spd_cholesky(matrix, name):
    try:
        return sla.cholesky(matrix, lower=True, check_finite=False)
    except sla.LinAlgError as exc:
        raise ValueError(f"{name} is not positive definite") from exc
