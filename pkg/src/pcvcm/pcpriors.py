"""Shrinkage priors defined through the distance to a base model.

Each prior family is an exponential distribution on the distance from the
flexible model to its base model, pushed back to the parameter scale:

* ``ExchCorrPrior``      -- exchangeable correlation, base at rho = 1,
  distance sqrt(1 - rho) truncated to [0, 1].
* ``Ar1CorrPrior``       -- AR1 lag-one correlation, base at rho = 1,
  distance sqrt(1 - rho) truncated to [0, sqrt(2)].
* ``Gumbel2PrecisionPrior`` -- precision of a (possibly intrinsic) Gaussian
  field, base at tau = infinity; 1/sqrt(tau) is exponential, making tau a
  type-2 Gumbel.
* ``MaternJointPrior``   -- joint (range, precision) prior for a Matern
  field, base at phi = infinity, tau = infinity; factorizes into a range
  marginal (1/phi exponential) and the Gumbel precision marginal.

``UniformCorrPrior`` and ``Ar1ReferencePrior`` are comparison priors for
the AR1 correlation; on the distance scale they place their mass at
maximum distance from the base model instead.

All densities are evaluated in log space. At a singular support endpoint
(rho = 1, or rho = -1 for the arcsine reference prior) the density value
is the limiting one: +inf where the density diverges. Samplers take an
explicit seed or ``numpy.random.Generator``; there is no global state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_SQRT2 = math.sqrt(2.0)


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _eval(fn, x):
    scalar = np.isscalar(x) or np.asarray(x).ndim == 0
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    out = np.asarray(fn(arr))
    if scalar:
        return float(out[0])
    return out


@dataclass(frozen=True)
class TruncatedExponential:
    """Exponential distribution on [0, upper]; ``upper=inf`` is untruncated.

    This is the distance-scale form shared by every prior family here: the
    density is maximal at zero and decays at constant rate, so the ratio
    ``pdf(d + delta) / pdf(d)`` depends on ``delta`` only.
    """

    rate: float
    upper: float = math.inf

    def __post_init__(self):
        if self.rate <= 0.0:
            raise ValueError(f"rate must be positive, got {self.rate}")
        if self.upper <= 0.0:
            raise ValueError(f"upper bound must be positive, got {self.upper}")

    def _log_norm(self):
        # log(1 - exp(-rate * upper)); zero for the untruncated case
        if math.isinf(self.upper):
            return 0.0
        return math.log(-math.expm1(-self.rate * self.upper))

    def logpdf(self, d):
        def fn(arr):
            out = np.full(arr.shape, -np.inf)
            inside = (arr >= 0.0) & (arr <= self.upper)
            out[inside] = (math.log(self.rate) - self.rate * arr[inside]
                           - self._log_norm())
            return out
        return _eval(fn, d)

    def pdf(self, d):
        return _eval(lambda arr: np.exp(np.asarray(self.logpdf(arr))), d)

    def cdf(self, d):
        def fn(arr):
            clipped = np.clip(arr, 0.0, self.upper)
            return -np.expm1(-self.rate * clipped) / math.exp(self._log_norm())
        return _eval(fn, d)

    def quantile(self, p):
        def fn(arr):
            if np.any((arr <= 0.0) | (arr >= 1.0)):
                raise ValueError("quantile level must lie strictly in (0, 1)")
            scale = math.exp(self._log_norm())
            return -np.log1p(-arr * scale) / self.rate
        return _eval(fn, p)

    def sample(self, count, seed):
        if count < 1:
            raise ValueError("count must be >= 1")
        u = _rng(seed).random(count)
        scale = math.exp(self._log_norm())
        return -np.log1p(-u * scale) / self.rate


class _CorrPcPrior:
    """Shared machinery for the correlation-parameter priors."""

    lower: float
    d_max: float
    family: str

    def distance_density(self):
        """The distance-scale form: truncated exponential on [0, d_max]."""
        return TruncatedExponential(self.theta, self.d_max)

    def _check_domain(self, arr):
        if np.any((arr < self.lower) | (arr > 1.0)):
            raise ValueError(
                f"{self.family} correlation must lie in [{self.lower}, 1]")

    def logpdf(self, rho):
        def fn(arr):
            self._check_domain(arr)
            s = np.sqrt(1.0 - arr)
            with np.errstate(divide="ignore"):
                return (math.log(self.theta) - self.theta * s
                        - np.log(2.0 * s) - self._log_norm())
        return _eval(fn, rho)

    def pdf(self, rho):
        return _eval(lambda arr: np.exp(np.asarray(self.logpdf(arr))), rho)

    def cdf(self, rho):
        def fn(arr):
            self._check_domain(arr)
            s = np.sqrt(1.0 - arr)
            top = np.exp(-self.theta * s) - math.exp(-self.theta * self.d_max)
            return top / math.exp(self._log_norm())
        return _eval(fn, rho)

    def quantile(self, p):
        def fn(arr):
            d = self.distance_density().quantile(1.0 - arr)
            return 1.0 - np.asarray(d) ** 2
        return _eval(fn, p)

    def sample(self, count, seed):
        return 1.0 - self.distance_density().sample(count, seed) ** 2

    def _log_norm(self):
        return math.log(-math.expm1(-self.theta * self.d_max))


@dataclass(frozen=True)
class ExchCorrPrior(_CorrPcPrior):
    """Shrinkage prior for an exchangeable correlation on [0, 1)."""

    theta: float
    lower = 0.0
    d_max = 1.0
    family = "exchangeable"

    def __post_init__(self):
        if self.theta <= 0.0:
            raise ValueError(f"theta must be positive, got {self.theta}")


@dataclass(frozen=True)
class Ar1CorrPrior(_CorrPcPrior):
    """Shrinkage prior for an AR1 lag-one correlation on (-1, 1)."""

    theta: float
    lower = -1.0
    d_max = _SQRT2
    family = "ar1"

    def __post_init__(self):
        if self.theta <= 0.0:
            raise ValueError(f"theta must be positive, got {self.theta}")


@dataclass(frozen=True)
class Gumbel2PrecisionPrior:
    """Type-2 Gumbel prior for a precision: 1/sqrt(tau) is exponential(theta)."""

    theta: float
    family = "precision"

    def __post_init__(self):
        if self.theta <= 0.0:
            raise ValueError(f"theta must be positive, got {self.theta}")

    def distance_density(self):
        return TruncatedExponential(self.theta)

    def logpdf(self, tau):
        def fn(arr):
            if np.any(arr <= 0.0):
                raise ValueError("precision must be positive")
            return (math.log(self.theta / 2.0) - 1.5 * np.log(arr)
                    - self.theta / np.sqrt(arr))
        return _eval(fn, tau)

    def pdf(self, tau):
        return _eval(lambda arr: np.exp(np.asarray(self.logpdf(arr))), tau)

    def cdf(self, tau):
        def fn(arr):
            if np.any(arr <= 0.0):
                raise ValueError("precision must be positive")
            return np.exp(-self.theta / np.sqrt(arr))
        return _eval(fn, tau)

    def quantile(self, p):
        def fn(arr):
            if np.any((arr <= 0.0) | (arr >= 1.0)):
                raise ValueError("quantile level must lie strictly in (0, 1)")
            return (self.theta / np.log(arr)) ** 2
        return _eval(fn, p)

    def sample(self, count, seed):
        return self.distance_density().sample(count, seed) ** -2


@dataclass(frozen=True)
class MaternRangePrior:
    """Range-parameter marginal of the Matern prior: 1/phi is exponential."""

    lam: float
    family = "matern-range"

    def __post_init__(self):
        if self.lam <= 0.0:
            raise ValueError(f"lambda must be positive, got {self.lam}")

    def distance_density(self):
        return TruncatedExponential(self.lam)

    def logpdf(self, phi):
        def fn(arr):
            if np.any(arr <= 0.0):
                raise ValueError("range must be positive")
            return math.log(self.lam) - 2.0 * np.log(arr) - self.lam / arr
        return _eval(fn, phi)

    def pdf(self, phi):
        return _eval(lambda arr: np.exp(np.asarray(self.logpdf(arr))), phi)

    def cdf(self, phi):
        def fn(arr):
            if np.any(arr <= 0.0):
                raise ValueError("range must be positive")
            return np.exp(-self.lam / arr)
        return _eval(fn, phi)

    def quantile(self, p):
        def fn(arr):
            if np.any((arr <= 0.0) | (arr >= 1.0)):
                raise ValueError("quantile level must lie strictly in (0, 1)")
            return -self.lam / np.log(arr)
        return _eval(fn, p)

    def sample(self, count, seed):
        return 1.0 / self.distance_density().sample(count, seed)


@dataclass(frozen=True)
class MaternJointPrior:
    """Joint (precision, range) prior; the two components are independent."""

    lambda_phi: float
    lambda_tau: float
    family = "matern"

    def __post_init__(self):
        if self.lambda_phi <= 0.0 or self.lambda_tau <= 0.0:
            raise ValueError("rates must be positive")

    @property
    def range_prior(self):
        return MaternRangePrior(self.lambda_phi)

    @property
    def precision_prior(self):
        return Gumbel2PrecisionPrior(self.lambda_tau)

    def logpdf(self, tau, phi):
        lp_tau = np.asarray(self.precision_prior.logpdf(tau))
        lp_phi = np.asarray(self.range_prior.logpdf(phi))
        out = lp_tau + lp_phi
        return float(out) if out.ndim == 0 else out

    def pdf(self, tau, phi):
        # literal product of the marginals: factorization holds exactly
        out = (np.asarray(self.precision_prior.pdf(tau))
               * np.asarray(self.range_prior.pdf(phi)))
        return float(out) if out.ndim == 0 else out

    def distance_density(self):
        """Component distance forms: (range component, precision component)."""
        return (self.range_prior.distance_density(),
                self.precision_prior.distance_density())

    def sample(self, count, seed):
        """Independent draws; returns arrays ``(tau, phi)``."""
        rng = _rng(seed)
        tau = self.precision_prior.sample(count, rng)
        phi = self.range_prior.sample(count, rng)
        return tau, phi


class _CorrComparisonPrior:
    """Shared support handling for the AR1 comparison priors."""

    family: str

    @staticmethod
    def _check_domain(arr):
        if np.any((arr < -1.0) | (arr > 1.0)):
            raise ValueError("correlation must lie in [-1, 1]")


@dataclass(frozen=True)
class UniformCorrPrior(_CorrComparisonPrior):
    """Uniform prior on (-1, 1) for the AR1 correlation."""

    family = "uniform"

    def pdf(self, rho):
        def fn(arr):
            self._check_domain(arr)
            return np.full(arr.shape, 0.5)
        return _eval(fn, rho)

    def logpdf(self, rho):
        return _eval(lambda arr: np.log(np.asarray(self.pdf(arr))), rho)

    def cdf(self, rho):
        def fn(arr):
            self._check_domain(arr)
            return (arr + 1.0) / 2.0
        return _eval(fn, rho)

    def sample(self, count, seed):
        return _rng(seed).uniform(-1.0, 1.0, count)

    def distance_density(self):
        return UniformCorrDistance()


@dataclass(frozen=True)
class Ar1ReferencePrior(_CorrComparisonPrior):
    """Arcsine prior 1/(pi sqrt(1 - rho^2)), the stationary-AR1 reference form."""

    family = "reference"

    def pdf(self, rho):
        def fn(arr):
            self._check_domain(arr)
            with np.errstate(divide="ignore"):
                return 1.0 / (math.pi * np.sqrt(1.0 - arr ** 2))
        return _eval(fn, rho)

    def logpdf(self, rho):
        return _eval(lambda arr: np.log(np.asarray(self.pdf(arr))), rho)

    def cdf(self, rho):
        def fn(arr):
            self._check_domain(arr)
            return np.arcsin(arr) / math.pi + 0.5
        return _eval(fn, rho)

    def sample(self, count, seed):
        u = _rng(seed).random(count)
        return np.sin(math.pi * (u - 0.5))

    def distance_density(self):
        return ArcsineCorrDistance()


@dataclass(frozen=True)
class UniformCorrDistance:
    """Distance-scale form of the uniform correlation prior: pdf(d) = d.

    Zero at d = 0: the uniform prior puts no density at the base model
    once mapped to the distance scale, the signature of an overfitting
    prior.
    """

    upper = _SQRT2

    def pdf(self, d):
        def fn(arr):
            out = np.zeros(arr.shape)
            inside = (arr > 0.0) & (arr < self.upper)
            out[inside] = arr[inside]
            return out
        return _eval(fn, d)

    def cdf(self, d):
        return _eval(lambda arr: np.clip(arr, 0.0, self.upper) ** 2 / 2.0, d)


@dataclass(frozen=True)
class ArcsineCorrDistance:
    """Distance-scale form of the arcsine reference prior.

    The density on the open interval (0, sqrt(2)) is
    ``2 / (pi sqrt(2 - d^2))``, diverging at maximum distance. The
    endpoints map to the excluded correlations rho = +/-1, which carry no
    prior mass, and are reported as zero; the interior right-limit at
    d -> 0+ is sqrt(2)/pi.
    """

    upper = _SQRT2

    def pdf(self, d):
        def fn(arr):
            out = np.zeros(arr.shape)
            inside = (arr > 0.0) & (arr < self.upper)
            out[inside] = 2.0 / (math.pi * np.sqrt(2.0 - arr[inside] ** 2))
            return out
        return _eval(fn, d)

    def cdf(self, d):
        def fn(arr):
            clipped = np.clip(arr, 0.0, self.upper)
            rho = np.clip(1.0 - clipped ** 2, -1.0, 1.0)
            return 0.5 - np.arcsin(rho) / math.pi
        return _eval(fn, d)


def exch_density(rho, theta):
    """Exchangeable-correlation prior density at ``rho`` for rate ``theta``."""
    return ExchCorrPrior(theta).pdf(rho)


def ar1_density(rho, theta):
    """AR1-correlation prior density at ``rho`` for rate ``theta``."""
    return Ar1CorrPrior(theta).pdf(rho)


def gumbel2_density(tau, theta):
    """Type-2 Gumbel precision prior density at ``tau``."""
    return Gumbel2PrecisionPrior(theta).pdf(tau)


def gumbel2_cdf(tau, theta):
    """Type-2 Gumbel CDF: ``P(precision <= tau) = exp(-theta / sqrt(tau))``."""
    return Gumbel2PrecisionPrior(theta).cdf(tau)


def matern_joint_density(tau, phi, lambda_tau, lambda_phi):
    """Joint Matern (precision, range) prior density; product of the marginals."""
    return MaternJointPrior(lambda_phi=lambda_phi, lambda_tau=lambda_tau).pdf(tau, phi)


def uniform_density(rho):
    """Uniform comparison prior on (-1, 1)."""
    return UniformCorrPrior().pdf(rho)


def ar1_reference_density(rho):
    """Arcsine reference comparison prior for the AR1 correlation."""
    return Ar1ReferencePrior().pdf(rho)


def sample(prior, count, seed):
    """Draw ``count`` values from any prior; deterministic given ``seed``."""
    return prior.sample(count, seed)


def quantile(prior, p):
    """Inverse CDF of a one-parameter prior."""
    return prior.quantile(p)


def to_distance_scale(prior):
    """Density of a prior mapped to the distance-from-base-model scale.

    Shrinkage priors return their (truncated) exponential; comparison
    priors return the change-of-variable pushforward under
    ``d = sqrt(1 - rho)``. The joint Matern prior returns the pair of
    component exponentials.
    """
    return prior.distance_density()
