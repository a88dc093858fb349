""" Special functions and distribution approximations used by the decision rules and error analysis.

The Marcum Q-function is evaluated through its non-central chi-squared representation: a
Poisson-weighted sum of regularised incomplete gamma functions. The sum is truncated far enough
into the Poisson tail that the neglected mass is below 1e-16, so the absolute error is dominated
by the incomplete gamma evaluations themselves.
"""
import logging
import math

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import special, stats

from mcloc.errors import DegenerateInputError, DomainError, InvalidParameterError

logger = logging.getLogger(__name__)

# Number of Poisson standard deviations (plus a fixed margin) kept in the Marcum series
_TAIL_SIGMAS = 10.0
_TAIL_MARGIN = 40


class RatioGaussApprox(BaseModel):
    """ Normal approximation of the ratio of two independent Gaussian variables.

    Attributes:
        mean_z (float): Mean of the approximating normal, mu1 / mu2.
        sigma_z (float): Standard deviation of the approximating normal.
        valid (bool): True when the coefficient-of-variation preconditions hold for ``lam``.
        lam (float): The constant bounding the coefficients of variation.
    """
    model_config = ConfigDict(frozen=True)

    mean_z: float
    sigma_z: float
    valid: bool
    lam: float = 1.0

    def interval(self) -> tuple[float, float]:
        """ Interval on which the approximation is guaranteed """
        half_width = self.sigma_z / self.lam
        return self.mean_z - half_width, self.mean_z + half_width

    def cdf(self, z):
        """ Distribution function of the approximating normal """
        return stats.norm.cdf(z, loc=self.mean_z, scale=self.sigma_z)


def _check_non_negative(name: str, value: float):
    if not value >= 0:
        raise DomainError(f"{name} must be non-negative, got {value}")


def bessel_i(order: float, x: float, scaled: bool = False) -> float:
    """ Modified Bessel function of the first kind.

    Half-integer orders are supported, since the Marcum Q order K/2 is a half-integer for odd K.

    Args:
        order: Non-negative order.
        x: Non-negative argument.
        scaled: If True return ``exp(-x) * I_order(x)``, which does not overflow for large x.

    Returns:
        I_order(x), or its exponentially scaled form.

    Raises:
        DomainError: If x or order is negative.
    """
    _check_non_negative("order", order)
    _check_non_negative("x", x)
    if scaled:
        return float(special.ive(order, x))
    return float(special.iv(order, x))


def _poisson_weights(half_nc: float) -> tuple[np.ndarray, np.ndarray]:
    """ Poisson(half_nc) weights over the indices that carry all but ~1e-16 of the mass """
    upper = int(math.ceil(half_nc + _TAIL_SIGMAS * math.sqrt(half_nc) + _TAIL_MARGIN))
    j = np.arange(upper + 1)
    return j, stats.poisson.pmf(j, half_nc)


def _marcum_terms(m: float, a: float, b: float, upper_tail: bool) -> float:
    if m < 0.5:
        raise InvalidParameterError(f"Marcum Q order must be at least 0.5, got {m}")
    _check_non_negative("a", a)
    _check_non_negative("b", b)
    x = 0.5 * b * b
    gamma_fn = special.gammaincc if upper_tail else special.gammainc
    half_nc = 0.5 * a * a
    if half_nc == 0.0:
        value = float(gamma_fn(m, x))
    else:
        j, weights = _poisson_weights(half_nc)
        value = float(np.sum(weights * gamma_fn(m + j, x)))
    return min(max(value, 0.0), 1.0)


def marcum_q(m: float, a: float, b: float) -> float:
    """ Generalised Marcum Q-function Q_m(a, b).

    Args:
        m: Order, at least 0.5.
        a: Non-negative non-centrality argument.
        b: Non-negative threshold argument.

    Returns:
        Q_m(a, b) in [0, 1].

    Raises:
        DomainError: If a or b is negative.
        InvalidParameterError: If m < 0.5.
    """
    return _marcum_terms(m, a, b, upper_tail=True)


def marcum_q_complement(m: float, a: float, b: float) -> float:
    """ 1 - Q_m(a, b), summed directly so that small values keep their relative accuracy """
    return _marcum_terms(m, a, b, upper_tail=False)


def noncentral_chi2_cdf(k: int, lam: float, x: float) -> float:
    """ P[Z < x] for Z non-central chi-squared with k degrees of freedom and non-centrality lam.

    Args:
        k: Degrees of freedom, a positive integer.
        lam: Non-centrality, the sum of squared standardised means.
        x: Evaluation point.

    Returns:
        1 - Q_{k/2}(sqrt(lam), sqrt(x)).
    """
    if int(k) != k or k < 1:
        raise InvalidParameterError(f"degrees of freedom must be a positive integer, got {k}")
    _check_non_negative("lam", lam)
    _check_non_negative("x", x)
    return marcum_q_complement(k / 2, math.sqrt(lam), math.sqrt(x))


def noncentral_chi2_sf(k: int, lam: float, x: float) -> float:
    """ P[Z > x], the complement of noncentral_chi2_cdf """
    if int(k) != k or k < 1:
        raise InvalidParameterError(f"degrees of freedom must be a positive integer, got {k}")
    _check_non_negative("lam", lam)
    _check_non_negative("x", x)
    return marcum_q(k / 2, math.sqrt(lam), math.sqrt(x))


def gaussian_q(x):
    """ Tail probability of the standard normal, Q(x) = P[N(0, 1) > x]. Accepts arrays. """
    result = stats.norm.sf(x)
    return float(result) if np.ndim(result) == 0 else result


def ratio_gaussian_approx(mu1: float, sigma1: float, mu2: float, sigma2: float,
                          lam: float = 1.0) -> RatioGaussApprox:
    """ Normal approximation of V1 / V2 for independent V_i ~ N(mu_i, sigma_i^2).

    The approximation is guaranteed only on ``RatioGaussApprox.interval()`` and only when
    ``valid`` is True; callers that use it outside that interval are making an approximation.

    Args:
        mu1: Mean of the numerator, positive.
        sigma1: Standard deviation of the numerator.
        mu2: Mean of the denominator, positive.
        sigma2: Standard deviation of the denominator.
        lam: Bound on the coefficients of variation, in (0, 1].

    Returns:
        RatioGaussApprox with mean mu1/mu2 and sigma (mu1/mu2) * sqrt(cv1^2 + cv2^2).

    Raises:
        DegenerateInputError: If mu1 or mu2 is not positive.
        InvalidParameterError: If lam is outside (0, 1].
    """
    if mu2 <= 0 or mu1 <= 0:
        raise DegenerateInputError(f"ratio means must be positive, got mu1={mu1}, mu2={mu2}")
    if not 0 < lam <= 1:
        raise InvalidParameterError(f"lam must lie in (0, 1], got {lam}")
    cv1 = sigma1 / mu1
    cv2 = sigma2 / mu2
    mean_z = mu1 / mu2
    sigma_z = mean_z * math.sqrt(cv1 ** 2 + cv2 ** 2)
    valid = bool(0 < cv1 < lam and 0 < cv2 <= math.sqrt(max(lam ** 2 - cv1 ** 2, 0.0)))
    return RatioGaussApprox(mean_z=mean_z, sigma_z=sigma_z, valid=valid, lam=lam)
