"""Turn user probability statements (U, a) into prior rate parameters.

Each prior family is scaled by one tail statement:

* exchangeable:  P(rho > U) = a,   feasible only when a > sqrt(1 - U)
* AR1:           P(rho > U) = a,   feasible only when a > sqrt((1 - U) / 2)
* precision:     P(1/sqrt(tau) > U) = a,  closed form theta = -log(a) / U
* Matern:        P(phi < U_phi) = a_phi and P(1/sqrt(tau) > U_tau) = a_tau,
                 closed forms lambda_phi = -log(a_phi) * U_phi and
                 lambda_tau = -log(a_tau) / U_tau

The correlation statements require a numeric solve of a ratio that is
continuous and monotone in theta, so a bracketing root-finder is exact up
to floating tolerance. Infeasible statements (including the boundary case)
raise ``FeasibilityError``: below the bound the requested tail mass is
less than what any rate can deliver, because the distance truncation
forces P(rho > U) -> sqrt-ratio as theta -> 0.

Note the direction of the range statement: small ranges are penalized,
so the Matern U is an upper bound on phi (P(phi < U) = a), opposite to the
correlation statements. ``solved.direction`` records the statement solved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

_SQRT2 = math.sqrt(2.0)

# below this solved rate the prior is effectively degenerate at the
# feasibility boundary; flagged so callers can warn
NEAR_INFEASIBLE_THETA = 1e-6


class FeasibilityError(ValueError):
    """The (U, a) statement cannot be met by any rate parameter."""


def _check_prob(a):
    if not 0.0 < a < 1.0:
        raise ValueError(f"tail probability must lie in (0, 1), got {a}")


@dataclass(frozen=True)
class SolvedRate:
    """A solved scaling statement.

    ``rates`` maps rate names to values ('theta', or 'lambda_phi' /
    'lambda_tau'). ``residual`` is the achieved |statement - a| (zero for
    closed forms), ``iterations`` the root-finder effort.
    """

    family: str
    rates: dict
    residual: float
    iterations: int
    direction: str
    near_infeasible: bool = False

    @property
    def theta(self):
        return self.rates["theta"]


def solve_exchangeable(U, a):
    """Rate for the exchangeable-correlation statement P(rho > U) = a."""
    if not 0.0 < U < 1.0:
        raise ValueError(f"threshold U must lie in (0, 1), got {U}")
    _check_prob(a)
    bound = math.sqrt(1.0 - U)
    if a <= bound:
        raise FeasibilityError("infeasible: a <= sqrt(1-U)")
    theta, residual, iterations = _solve_tail_ratio(math.sqrt(1.0 - U), 1.0, a)
    return SolvedRate("exchangeable", {"theta": theta}, residual, iterations,
                      direction="P(rho > U) = a",
                      near_infeasible=theta < NEAR_INFEASIBLE_THETA)


def solve_ar1(U, a):
    """Rate for the AR1-correlation statement P(rho > U) = a."""
    if not -1.0 < U < 1.0:
        raise ValueError(f"threshold U must lie in (-1, 1), got {U}")
    _check_prob(a)
    bound = math.sqrt((1.0 - U) / 2.0)
    if a <= bound:
        raise FeasibilityError("infeasible: a <= sqrt((1-U)/2)")
    theta, residual, iterations = _solve_tail_ratio(math.sqrt(1.0 - U), _SQRT2, a)
    return SolvedRate("ar1", {"theta": theta}, residual, iterations,
                      direction="P(rho > U) = a",
                      near_infeasible=theta < NEAR_INFEASIBLE_THETA)


def solve_precision(U, a):
    """Rate for the marginal-standard-deviation bound P(1/sqrt(tau) > U) = a."""
    if U <= 0.0:
        raise ValueError(f"threshold U must be positive, got {U}")
    _check_prob(a)
    theta = -math.log(a) / U
    return SolvedRate("precision", {"theta": theta}, 0.0, 0,
                      direction="P(1/sqrt(tau) > U) = a")


def solve_matern(U_phi, a_phi, U_tau, a_tau):
    """Rates for the joint Matern statements, both in closed form."""
    if U_phi <= 0.0 or U_tau <= 0.0:
        raise ValueError("thresholds must be positive")
    _check_prob(a_phi)
    _check_prob(a_tau)
    lam_phi = -math.log(a_phi) * U_phi
    lam_tau = -math.log(a_tau) / U_tau
    return SolvedRate("matern", {"lambda_phi": lam_phi, "lambda_tau": lam_tau},
                      0.0, 0,
                      direction="P(phi < U_phi) = a_phi, P(1/sqrt(tau) > U_tau) = a_tau")


def rule_of_thumb_check(U, a=0.01, samples=10 ** 6, seed=0):
    """Monte Carlo estimate of the marginal-sd multiplier of the precision prior.

    Draws the precision from its prior (rate from the (U, a) statement),
    then a unit-structure Gaussian effect given each draw, and returns the
    estimated marginal standard deviation divided by U. At a = 0.01 the
    multiplier is about 0.31 and does not depend on U.
    """
    if U <= 0.0:
        raise ValueError(f"threshold U must be positive, got {U}")
    _check_prob(a)
    if samples < 1:
        raise ValueError("need at least one sample")
    theta = solve_precision(U, a).theta
    rng = np.random.default_rng(seed)
    sd_draws = rng.exponential(1.0 / theta, samples)  # 1/sqrt(tau) is exponential
    effects = rng.standard_normal(samples) * sd_draws
    return float(np.std(effects)) / U


def _solve_tail_ratio(s_u, s_max, a):
    """Solve (1 - exp(-theta s_u)) / (1 - exp(-theta s_max)) = a for theta.

    The ratio increases from s_u / s_max (theta -> 0) to 1 (theta -> inf),
    so once a bracket straddles ``a`` the root is unique. The bracket is
    expanded geometrically upward from [1e-8, 1] until it crosses.
    """
    def ratio(theta):
        return math.expm1(-theta * s_u) / math.expm1(-theta * s_max) - a

    lo, hi = 1e-8, 1.0
    expansions = 0
    while ratio(hi) < 0.0:
        hi *= 2.0
        expansions += 1
        if expansions > 200:
            raise RuntimeError("failed to bracket the scaling equation")
    if ratio(lo) > 0.0:
        # root below the initial bracket; only reachable just above the
        # feasibility boundary
        lo = 1e-300
    theta, info = brentq(ratio, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                         maxiter=200, full_output=True)
    residual = abs(ratio(theta))
    return theta, residual, info.iterations + expansions
