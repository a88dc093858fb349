""" Closed-form localization error probabilities.

Radial scheme: S_i / m(x) is non-central chi-squared with K degrees of freedom and non-centrality
K m(x), so the probability that FC i decides the right radius is a difference of two Marcum
Q-functions. Grid scheme: each ratio statistic is approximated by a normal variable and the cell
probability is a product of two differences of Gaussian Q-functions.

Error probabilities are assembled from miss probabilities rather than as 1 - P[correct], so very
small values keep their relative accuracy.
"""
import logging
import math
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from mcloc.clustering import GridScheme, RadialScheme
from mcloc.detection import grid_axis_means, grid_thresholds, radial_thresholds, ratio_variance
from mcloc.errors import InvalidParameterError, ThresholdError
from mcloc.medium import MeanFn
from mcloc.numerics import gaussian_q, marcum_q, marcum_q_complement, ratio_gaussian_approx
from mcloc.options import ClusterPrior

logger = logging.getLogger(__name__)

# Smallest sqrt(K m(d2)) for which the normal ratio approximation is considered applicable
APPLICABILITY_SNR = 10.0
Z_95 = 1.96


def confidence_half_width(p_hat: float, trials: int) -> float:
    """ Half-width of the 95% normal confidence interval of an empirical probability """
    if trials < 1:
        raise InvalidParameterError(f"trials must be at least 1, got {trials}")
    return Z_95 * math.sqrt(p_hat * (1 - p_hat) / trials)


class ErrorReport(BaseModel):
    """ Analytic and empirical localization error probabilities of one configuration.

    Attributes:
        config (dict[str, Any]): Descriptor of the configuration the report belongs to.
        analytic_pe (float | None): Closed-form error probability.
        per_cluster (dict[str, float]): Analytic correct-decision probability of each cluster.
        empirical_pe (float | None): Monte Carlo error rate.
        trials (int): Number of Monte Carlo trials.
        half_width (float | None): 95% confidence half-width of ``empirical_pe``.
        empirical_per_cluster (dict[str, float]): Empirical correct-decision rate of each cluster.
        flagged_trials (int): Trials decided through a fallback (snapping, floor, ML fallback).
        min_snr (float | None): Smallest sqrt(K m(d2)) over the IPs (grid scheme).
        ratio_approx_valid (bool | None): True if every IP meets the ratio-approximation
            preconditions (grid scheme).
        warnings (list[str]): Applicability warnings raised while building the report.
    """
    model_config = ConfigDict(frozen=True)

    config: dict[str, Any] = Field(default_factory=dict)
    analytic_pe: float | None = Field(default=None, ge=0, le=1)
    per_cluster: dict[str, float] = Field(default_factory=dict)
    empirical_pe: float | None = Field(default=None, ge=0, le=1)
    trials: int = Field(default=0, ge=0)
    half_width: float | None = Field(default=None, ge=0)
    empirical_per_cluster: dict[str, float] = Field(default_factory=dict)
    flagged_trials: int = Field(default=0, ge=0)
    min_snr: float | None = None
    ratio_approx_valid: bool | None = None
    warnings: list[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_probabilities(self):
        for label, value in {**self.per_cluster, **self.empirical_per_cluster}.items():
            if not 0 <= value <= 1:
                raise ValueError(f"probability for cluster {label} outside [0, 1]: {value}")
        if self.empirical_pe is not None and self.trials < 1:
            raise ValueError("an empirical error rate needs at least one trial")
        return self

    @property
    def applicable(self) -> bool:
        return not self.warnings

    def merge(self, empirical: "ErrorReport") -> "ErrorReport":
        """ Combine this analytic report with the empirical part of another report """
        return self.model_copy(update={
            "empirical_pe": empirical.empirical_pe,
            "trials": empirical.trials,
            "half_width": empirical.half_width,
            "empirical_per_cluster": empirical.empirical_per_cluster,
            "flagged_trials": empirical.flagged_trials,
            "warnings": self.warnings + [w for w in empirical.warnings if w not in self.warnings],
        })


def radial_miss_probabilities(scheme: RadialScheme, K: int, mean_fn: MeanFn) -> np.ndarray:
    """ P[FC decides a radius other than r_j | d = r_j] for every radius of the scheme.

    The decision for r_j is t_j < S <= t_{j-1} with t the threshold ladder, t_{-1} = infinity and
    t_{n-1} = 0. Deciding too large a radius has probability 1 - Q_{K/2}(sqrt(K m), sqrt(t_j / m)),
    too small a radius Q_{K/2}(sqrt(K m), sqrt(t_{j-1} / m)).
    """
    ladder = radial_thresholds(scheme.radii, K, mean_fn)
    misses = []
    for j, radius in enumerate(scheme.radii):
        mean = float(mean_fn(radius))
        if mean <= 0:
            raise InvalidParameterError(f"mean count at r={radius:g} must be positive")
        noncentrality = math.sqrt(K * mean)
        too_far = 0.0
        if j < len(ladder):
            too_far = marcum_q_complement(K / 2, noncentrality, math.sqrt(ladder[j] / mean))
        too_near = 0.0
        if j > 0:
            too_near = marcum_q(K / 2, noncentrality, math.sqrt(ladder[j - 1] / mean))
        misses.append(min(too_far + too_near, 1.0))
    return np.asarray(misses)


def _radial_prior(scheme: RadialScheme, prior: ClusterPrior) -> np.ndarray:
    match prior:
        case ClusterPrior.UNIFORM:
            return np.full(scheme.n_p, 1 / scheme.n_p)
        case ClusterPrior.AREA:
            return np.asarray(scheme.area_weights)
        case _:
            raise InvalidParameterError(f"unknown cluster prior {prior!r}")


def pe_radial(scheme: RadialScheme, K: int, mean_fn: MeanFn,
              prior: ClusterPrior = ClusterPrior.UNIFORM,
              config: dict[str, Any] | None = None) -> ErrorReport:
    """ Analytic error probability of the threshold-ladder decision on the radial scheme.

    Given the cluster, the two FC decisions are independent, so a cluster is missed with
    probability e1 + e2 - e1 e2.

    Args:
        scheme: The radial scheme.
        K: Samples per FC.
        mean_fn: m(d) for the ideal channel or E[m_G(d)] for the noisy channel.
        prior: Uniform 1/N_p over Psi, or the clusters' area shares.
        config: Descriptor stored in the report.

    Returns:
        ErrorReport with the analytic P_e and per-cluster correct probabilities.

    Raises:
        InvalidParameterError: If the scheme has fewer than two radii and more than one cluster.
    """
    descriptor = {"scheme": "radial", "L": scheme.L, "K": K, "prior": prior.value, **(config or {})}
    if scheme.n_p == 1:
        label = scheme.label(scheme.psi[0])
        return ErrorReport(config=descriptor, analytic_pe=0.0, per_cluster={label: 1.0})
    if len(scheme.radii) < 2:
        raise InvalidParameterError("the radial error probability needs at least two radii")

    misses = radial_miss_probabilities(scheme, K, mean_fn)
    pairs = np.asarray(scheme.psi)
    e1 = misses[pairs[:, 0]]
    e2 = misses[pairs[:, 1]]
    cluster_error = e1 + e2 - e1 * e2
    weights = _radial_prior(scheme, prior)
    pe = float(np.clip(np.sum(weights * cluster_error), 0.0, 1.0))
    per_cluster = {scheme.label(pair): float(1 - err)
                   for pair, err in zip(scheme.psi, cluster_error)}
    logger.debug("Radial P_e for L=%d, K=%d: %.6g", scheme.L, K, pe)
    return ErrorReport(config=descriptor, analytic_pe=pe, per_cluster=per_cluster)


def _axis_miss(mu: np.ndarray, sigma: np.ndarray, gammas: np.ndarray) -> np.ndarray:
    """ P[statistic leaves its cell] per cell of one axis; gamma(0) = 0 and gamma(L) = inf """
    lower = np.concatenate([[0.0], gammas])
    upper = np.concatenate([gammas, [np.inf]])
    below = np.asarray(gaussian_q((mu - lower) / sigma))
    above = np.asarray(gaussian_q((upper - mu) / sigma))
    return np.minimum(below + above, 1.0)


def _ratio_applicability(m1: float, m2: float, K: int, lam: float) -> bool:
    sigma1 = math.sqrt(m1 / K)
    sigma2 = math.sqrt(m2 / K)
    return ratio_gaussian_approx(m1, sigma1, m2, sigma2, lam).valid


def pe_grid(scheme: GridScheme, K: int, mean_fn: MeanFn, lam: float = 1.0,
            config: dict[str, Any] | None = None) -> ErrorReport:
    """ Analytic error probability of the ratio-statistic decision on the grid scheme.

    Each IP uses its true m(d2) to build both the thresholds and the ratio variances. The report
    carries the smallest sqrt(K m(d2)) over the IPs and a warning when it is below 10 or when an IP
    breaks the ratio-approximation preconditions; the result is still returned.

    Args:
        scheme: The grid scheme.
        K: Samples per FC.
        mean_fn: m(d) for the ideal channel or E[m_G(d)] for the noisy channel.
        lam: Constant of the ratio-approximation preconditions, in (0, 1].
        config: Descriptor stored in the report.

    Returns:
        ErrorReport with the analytic P_e, per-cluster correct probabilities and applicability.

    Raises:
        ThresholdError: If a threshold does not exist for the true model.
    """
    descriptor = {"scheme": "grid", "L": scheme.L, "K": K, **(config or {})}
    mu = grid_axis_means(scheme, mean_fn)
    ips = scheme.ip_coordinates
    d1 = np.hypot(scheme.w - ips[..., 0], ips[..., 1])
    d2 = np.hypot(ips[..., 0], ips[..., 1])
    m1 = np.asarray(mean_fn(d1))
    m2 = np.asarray(mean_fn(d2))

    errors = np.empty((scheme.L, scheme.L))
    valid = True
    for ix in range(scheme.L):
        for iy in range(scheme.L):
            gammas = grid_thresholds(mu, K, m2[ix, iy])[0]
            if np.any(np.isnan(gammas)):
                raise ThresholdError(f"no grid threshold for IP ({ix + 1}, {iy + 1})")
            sigma = np.sqrt(ratio_variance(mu, K, m2[ix, iy]))
            misses = _axis_miss(mu, sigma, gammas)
            miss_x, miss_y = misses[ix], misses[iy]
            errors[ix, iy] = miss_x + miss_y - miss_x * miss_y
            valid = _ratio_applicability(float(m1[ix, iy]), float(m2[ix, iy]), K, lam) and valid

    pe = float(np.clip(errors.mean(), 0.0, 1.0))
    min_snr = float(np.sqrt(K * m2).min())
    warnings = []
    if min_snr < APPLICABILITY_SNR:
        warnings.append(f"sqrt(K m(d2)) = {min_snr:.3g} is below {APPLICABILITY_SNR:g}")
    if not valid:
        warnings.append(f"ratio approximation preconditions fail for lambda = {lam:g}")
    for message in warnings:
        logger.warning("Grid P_e (L=%d): %s", scheme.L, message)
    per_cluster = {scheme.label(cell): float(1 - errors[cell[0] - 1, cell[1] - 1])
                   for cell in scheme.clusters()}
    return ErrorReport(config=descriptor, analytic_pe=pe, per_cluster=per_cluster, min_snr=min_snr,
                       ratio_approx_valid=valid, warnings=warnings)


def pe_noisy(scheme: RadialScheme | GridScheme, K: int, mean_fn: MeanFn,
             prior: ClusterPrior = ClusterPrior.UNIFORM, lam: float = 1.0,
             config: dict[str, Any] | None = None) -> ErrorReport:
    """ Analytic error probability over the noisy FC to gateway channel.

    Uses the mean-value approximation: the gateway counts are treated as observations with mean
    E[m_G(d)] = alpha mu_tilde m(d), so ``mean_fn`` should come from
    ``mean_function(..., channel="noisy")``. With alpha mu_tilde = 1 the result equals the
    ideal-channel report.
    """
    descriptor = {"channel": "noisy", **(config or {})}
    match scheme:
        case RadialScheme():
            return pe_radial(scheme, K, mean_fn, prior=prior, config=descriptor)
        case GridScheme():
            return pe_grid(scheme, K, mean_fn, lam=lam, config=descriptor)
        case _:
            raise InvalidParameterError(f"unknown cluster scheme {type(scheme).__name__}")
