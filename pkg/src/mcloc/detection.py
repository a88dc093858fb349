""" Decision rules run at the gateway.

Collaborative sensors (radial scheme): each FC's sum of squared samples is compared with a ladder
of thresholds tau, one per pair of neighbouring radii, and the two per-FC radius decisions form the
cluster. Non-collaborative sensors (grid scheme): the ratios z12 = V1/V2 and z32 = V3/V2 of the FC
averages are compared with the LLR thresholds gamma of each axis.

Every rule comes in a batch form working on arrays of shape (n_trials, n_fc, K), used by the
simulator, and a single-observation form returning a DecisionOutcome.
"""
import logging
import math
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from mcloc.clustering import GridScheme, RadialScheme
from mcloc.errors import DegenerateInputError, InvalidParameterError, ThresholdError
from mcloc.medium import MeanFn
from mcloc.options import DegeneratePolicy

logger = logging.getLogger(__name__)

# Averages below this are raised to it before ratios are formed (DegeneratePolicy.FLOOR)
COUNT_FLOOR = 0.5


class ObservationSet(BaseModel):
    """ Counts collected for one decision.

    Attributes:
        counts (np.ndarray): Array of shape (n_fc, K); row i holds the K samples of FC i+1.
        kind (str): "Y" for FC molecule samples or "W" for gateway marker samples.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    counts: np.ndarray
    kind: Literal["Y", "W"] = "Y"

    @field_validator("counts", mode="before")
    @classmethod
    def as_count_matrix(cls, value):
        counts = np.array(value, dtype=float)
        if counts.ndim != 2 or counts.shape[0] not in (2, 3) or counts.shape[1] < 1:
            raise ValueError(f"counts must have shape (2 or 3, K), got {counts.shape}")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        return counts

    @property
    def n_fc(self) -> int:
        return self.counts.shape[0]

    @property
    def K(self) -> int:
        return self.counts.shape[1]


class DecisionOutcome(BaseModel):
    """ A gateway decision.

    Attributes:
        scheme (str): "radial" or "grid".
        cluster (tuple[int, int]): (j1, j2) radius indices or (i_x, i_y) cell indices.
        radii (tuple[float, float] | None): Decided distances (d1, d2) for the radial scheme.
        statistics (dict[str, float]): The statistics the decision was based on.
        flagged (bool): True if a fallback or snapping was needed.
    """
    model_config = ConfigDict(frozen=True)

    scheme: Literal["radial", "grid"]
    cluster: tuple[int, int]
    radii: tuple[float, float] | None = None
    statistics: dict[str, float]
    flagged: bool = False


def _check_shape(counts: np.ndarray, n_fc: int, K: int):
    if counts.ndim != 3 or counts.shape[1] != n_fc or counts.shape[2] != K:
        raise InvalidParameterError(
            f"expected counts of shape (n, {n_fc}, {K}), got {counts.shape}")


# -- radial scheme ----------------------------------------------------------------------------

def _tau(m1, m2, K: int):
    return K * m1 * m2 * (1 + np.log(m1 / m2) / (m1 - m2))


def tau_threshold(r1: float, r2: float, K: int, mean_fn: MeanFn) -> float:
    """ Threshold between radii r1 and r2 on the sum of squared samples.

    Returns:
        K m(r1) m(r2) (1 + ln(m(r1)/m(r2)) / (m(r1) - m(r2))), symmetric in (r1, r2).

    Raises:
        DegenerateInputError: If the radii, or their mean counts, are equal.
    """
    m1 = float(mean_fn(r1))
    m2 = float(mean_fn(r2))
    if r1 == r2 or m1 == m2:
        raise DegenerateInputError(f"tau needs distinct radii and means, got r={r1}, {r2}")
    return float(_tau(m1, m2, K))


def radial_thresholds(radii, K: int, mean_fn: MeanFn) -> np.ndarray:
    """ Ladder tau(r_j, r_{j+1}) for j = 0..n-2, strictly decreasing along the ladder.

    Raises:
        ThresholdError: If the ladder is not strictly decreasing (mean_fn not decreasing).
    """
    means = np.asarray([float(mean_fn(r)) for r in radii])
    if len(means) < 2:
        return np.empty(0)
    ladder = _tau(means[:-1], means[1:], K)
    if np.any(np.diff(ladder) >= 0) or not np.all(np.isfinite(ladder)):
        raise ThresholdError("radial threshold ladder is not strictly decreasing")
    return ladder


def radius_decisions(sum_squares, ladder: np.ndarray) -> np.ndarray:
    """ Radius index j with ladder[j] < S <= ladder[j-1], clamped to the ends of the ladder """
    ascending = np.asarray(ladder)[::-1]
    return len(ascending) - np.searchsorted(ascending, np.asarray(sum_squares), side="left")


def snap_to_psi(pairs: np.ndarray, scheme: RadialScheme) -> tuple[np.ndarray, np.ndarray]:
    """ Map (j1, j2) radius-index pairs to Psi, snapping infeasible pairs to the nearest member.

    Distance is Euclidean in (d1, d2); ties go to smaller radii through the ordering of Psi.

    Returns:
        (index into scheme.psi, snapped flag) arrays of shape (n,).
    """
    if scheme.n_p == 0:
        raise DegenerateInputError("radial scheme has an empty Psi")
    index = scheme.index_table()[pairs[:, 0], pairs[:, 1]]
    snapped = index < 0
    if np.any(snapped):
        radii = np.asarray(scheme.radii)
        decided = radii[pairs[snapped]]
        gaps = np.sum((decided[:, np.newaxis, :] - scheme.psi_radii()) ** 2, axis=-1)
        index[snapped] = np.argmin(gaps, axis=1)
    return index, snapped


def decide_radial_batch(counts, scheme: RadialScheme, K: int, mean_fn: MeanFn):
    """ Threshold-ladder decisions for a batch of two-FC observations.

    Args:
        counts: Array of shape (n, 2, K).
        scheme: The radial scheme.
        K: Samples per FC.
        mean_fn: Hypothesis mean m(d), or E[m_G(d)] for the noisy channel.

    Returns:
        (index into scheme.psi, snapped flag, per-FC sum of squares) arrays.
    """
    counts = np.asarray(counts, dtype=float)
    _check_shape(counts, 2, K)
    sum_squares = np.sum(counts ** 2, axis=-1)
    pairs = radius_decisions(sum_squares, radial_thresholds(scheme.radii, K, mean_fn))
    index, snapped = snap_to_psi(pairs, scheme)
    return index, snapped, sum_squares


def exact_ml_radial_batch(counts, scheme: RadialScheme, K: int, mean_fn: MeanFn):
    """ Reduced ML decisions, argmin_j K ln m(r_j) + sum_k (y_k - m(r_j))^2 / m(r_j), per FC.

    Returns:
        (index into scheme.psi, snapped flag, per-FC sum of squares) arrays.
    """
    counts = np.asarray(counts, dtype=float)
    _check_shape(counts, 2, K)
    means = np.asarray([float(mean_fn(r)) for r in scheme.radii])
    residual = counts[..., np.newaxis] - means
    cost = K * np.log(means) + np.sum(residual ** 2, axis=2) / means
    pairs = np.argmin(cost, axis=-1)
    index, snapped = snap_to_psi(pairs, scheme)
    return index, snapped, np.sum(counts ** 2, axis=-1)


def _radial_outcome(result, scheme: RadialScheme) -> DecisionOutcome:
    index, snapped, sum_squares = result
    j1, j2 = scheme.psi[int(index[0])]
    return DecisionOutcome(
        scheme="radial",
        cluster=(j1, j2),
        radii=(scheme.radii[j1], scheme.radii[j2]),
        statistics={"sum_squares_1": float(sum_squares[0, 0]),
                    "sum_squares_2": float(sum_squares[0, 1])},
        flagged=bool(snapped[0]),
    )


def decide_radial(obs: ObservationSet, scheme: RadialScheme, K: int,
                  mean_fn: MeanFn) -> DecisionOutcome:
    """ Sub-optimal threshold-ladder decision on one observation from FC1 and FC2 """
    if obs.n_fc != 2:
        raise InvalidParameterError("the radial scheme needs observations from exactly 2 FCs")
    return _radial_outcome(decide_radial_batch(obs.counts[np.newaxis], scheme, K, mean_fn), scheme)


def exact_ml_radial(obs: ObservationSet, scheme: RadialScheme, K: int,
                    mean_fn: MeanFn) -> DecisionOutcome:
    """ Reduced ML decision on one observation from FC1 and FC2 """
    if obs.n_fc != 2:
        raise InvalidParameterError("the radial scheme needs observations from exactly 2 FCs")
    batch = exact_ml_radial_batch(obs.counts[np.newaxis], scheme, K, mean_fn)
    return _radial_outcome(batch, scheme)


# -- grid scheme ------------------------------------------------------------------------------

def estimate_mean(samples) -> float | np.ndarray:
    """ MSE-minimising estimate of an FC's mean count: the average of its K samples """
    values = np.asarray(samples, dtype=float)
    if values.shape[-1] < 1:
        raise InvalidParameterError("at least one sample is needed")
    result = values.mean(axis=-1)
    return float(result) if result.ndim == 0 else result


def grid_axis_means(scheme: GridScheme, mean_fn: MeanFn) -> np.ndarray:
    """ mu_{Z|i} = m(d1) / m(d2) at the IP abscissae, i = 1..L; strictly increasing.

    The ratio depends on s_x only, so the IPs are evaluated on the row s_y = w/2.
    """
    s = scheme.axis_points
    half = scheme.w / 2
    numerator = np.asarray(mean_fn(np.hypot(scheme.w - s, half)))
    return numerator / np.asarray(mean_fn(np.hypot(s, half)))


def ratio_variance(mu_z, K: int, m2):
    """ sigma^2_{Z} = mu_Z (1 + mu_Z) / (K m(d2)) """
    return mu_z * (1 + mu_z) / (K * m2)


def llr(z, mu_lo, mu_hi, var_lo, var_hi):
    """ Log-likelihood ratio ln(P[z | lower cell] / P[z | upper cell]) of two normal hypotheses """
    return (0.5 * np.log(var_hi / var_lo) + (z - mu_hi) ** 2 / (2 * var_hi)
            - (z - mu_lo) ** 2 / (2 * var_lo))


def _llr_coefficients(mu_lo, mu_hi, var_lo, var_hi):
    a = 0.5 * (1 / var_hi - 1 / var_lo)
    b = mu_lo / var_lo - mu_hi / var_hi
    c = 0.5 * (np.log(var_hi / var_lo) + mu_hi ** 2 / var_hi - mu_lo ** 2 / var_lo)
    return a, b, c


def gamma_roots(mu_lo, mu_hi, var_lo, var_hi) -> np.ndarray:
    """ Vectorised gamma: the LLR root strictly inside (mu_lo, mu_hi), NaN where there is none """
    mu_lo, mu_hi, var_lo, var_hi = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (mu_lo, mu_hi, var_lo, var_hi)))
    a, b, c = _llr_coefficients(mu_lo, mu_hi, var_lo, var_hi)
    disc = b * b - 4 * a * c
    with np.errstate(divide="ignore", invalid="ignore"):
        sqrt_disc = np.sqrt(np.where(disc >= 0, disc, np.nan))
        q = -0.5 * (b + np.copysign(sqrt_disc, b))
        root_a = q / a
        root_b = c / q
        linear = -c / b
    quadratic = a != 0
    root_a = np.where(quadratic, root_a, linear)
    root_b = np.where(quadratic, root_b, np.nan)
    low = np.fmin(root_a, root_b)
    high = np.fmax(root_a, root_b)
    low_ok = (low > mu_lo) & (low < mu_hi)
    high_ok = (high > mu_lo) & (high < mu_hi)
    return np.where(low_ok, low, np.where(high_ok, high, np.nan))


def gamma_threshold(mu_lo: float, mu_hi: float, var_lo: float, var_hi: float) -> float:
    """ Threshold gamma between neighbouring grid cells on one axis.

    Solves Lambda(z) = a z^2 + b z + c = 0 and keeps the root that separates the two hypothesis
    means. Equal variances give a = 0 and the linear threshold -c / b.

    Args:
        mu_lo: Ratio mean of the lower cell.
        mu_hi: Ratio mean of the upper cell, greater than mu_lo.
        var_lo: Ratio variance of the lower cell.
        var_hi: Ratio variance of the upper cell.

    Returns:
        gamma with mu_lo < gamma < mu_hi.

    Raises:
        InvalidParameterError: If variances are not positive or means are not increasing.
        ThresholdError: If a > 0 or no root separates the means.
    """
    if var_lo <= 0 or var_hi <= 0:
        raise InvalidParameterError("ratio variances must be positive")
    if not mu_lo < mu_hi:
        raise InvalidParameterError(f"means must be increasing, got {mu_lo}, {mu_hi}")
    a, _, _ = _llr_coefficients(mu_lo, mu_hi, var_lo, var_hi)
    if a > 0:
        raise ThresholdError("LLR quadratic opens upwards; variances are not increasing")
    root = float(gamma_roots(mu_lo, mu_hi, var_lo, var_hi))
    if math.isnan(root):
        raise ThresholdError(f"no LLR root separates the means {mu_lo:g} and {mu_hi:g}")
    a, b, c = _llr_coefficients(mu_lo, mu_hi, var_lo, var_hi)
    scale = abs(a) * root * root + abs(b) * root + abs(c) + 1.0
    if abs(llr(root, mu_lo, mu_hi, var_lo, var_hi)) > 1e-9 * scale:
        raise ThresholdError(f"LLR does not vanish at the selected root {root:g}")
    return root


def grid_thresholds(mu: np.ndarray, K: int, m2) -> np.ndarray:
    """ gamma(1)..gamma(L-1) for each FC2 mean in ``m2``.

    Args:
        mu: Axis means mu_{Z|i}, shape (L,).
        K: Samples per FC.
        m2: FC2 mean count(s), shape (n,) or scalar.

    Returns:
        Array of shape (n, L-1), NaN where a threshold does not exist.
    """
    m2 = np.atleast_1d(np.asarray(m2, dtype=float))[:, np.newaxis]
    variance = ratio_variance(mu, K, m2)
    return gamma_roots(mu[:-1], mu[1:], variance[:, :-1], variance[:, 1:])


def _ml_axis(z: np.ndarray, mu: np.ndarray, variance: np.ndarray) -> np.ndarray:
    loglik = -0.5 * np.log(variance) - (z[:, np.newaxis] - mu) ** 2 / (2 * variance)
    return np.argmax(loglik, axis=1) + 1


def _decide_axis(z: np.ndarray, mu: np.ndarray, K: int, m2: np.ndarray):
    gammas = grid_thresholds(mu, K, m2)
    cells = 1 + np.sum(gammas < z[:, np.newaxis], axis=1)
    missing = np.any(np.isnan(gammas), axis=1)
    if np.any(missing):
        variance = ratio_variance(mu, K, m2[missing, np.newaxis])
        cells[missing] = _ml_axis(z[missing], mu, variance)
    return cells, missing


def _decide_by_magnitude(averages: np.ndarray, scheme: GridScheme, mean_fn: MeanFn) -> np.ndarray:
    ips = scheme.ip_coordinates.reshape(-1, 2)
    fc1 = np.hypot(scheme.w - ips[:, 0], ips[:, 1])
    fc3 = np.hypot(ips[:, 0], scheme.w - ips[:, 1])
    expected = np.stack([np.asarray(mean_fn(fc1)), np.asarray(mean_fn(fc3))], axis=1)
    gaps = np.sum((averages[:, np.newaxis, :] - expected) ** 2, axis=-1)
    best = np.argmin(gaps, axis=1)
    return np.stack([best // scheme.L + 1, best % scheme.L + 1], axis=1)


def decide_grid_batch(counts, scheme: GridScheme, K: int, mean_fn: MeanFn,
                      policy: DegeneratePolicy = DegeneratePolicy.FLOOR):
    """ Ratio-statistic decisions for a batch of three-FC observations.

    Thresholds are rebuilt per trial because sigma^2_Z uses the FC2 average as the estimate of
    m(d2). A trial whose thresholds do not exist is decided by the ML rule the thresholds stand for,
    argmax_i N(z; mu_i, sigma_i^2), and flagged.

    Args:
        counts: Array of shape (n, 3, K).
        scheme: The grid scheme.
        K: Samples per FC.
        mean_fn: Hypothesis mean; only the ratios m(d1)/m(d2) matter, except for the MAGNITUDE
            fallback which compares FC1 and FC3 averages with it directly.
        policy: Handling of non-positive FC2 averages.

    Returns:
        (cells of shape (n, 2) holding (i_x, i_y), flagged, z of shape (n, 2)) arrays.

    Raises:
        DegenerateInputError: Under DegeneratePolicy.RAISE when an FC2 average is not positive.
    """
    counts = np.asarray(counts, dtype=float)
    _check_shape(counts, 3, K)
    averages = estimate_mean(counts)
    degenerate = averages[:, 1] <= 0
    flagged = np.zeros(len(counts), dtype=bool)

    match policy:
        case DegeneratePolicy.FLOOR:
            floored = averages < COUNT_FLOOR
            flagged |= np.any(floored, axis=1)
            averages = np.maximum(averages, COUNT_FLOOR)
            degenerate = np.zeros_like(degenerate)
        case DegeneratePolicy.RAISE:
            if np.any(degenerate):
                raise DegenerateInputError("FC2 average is not positive; ratio undefined")
        case DegeneratePolicy.MAGNITUDE:
            flagged |= degenerate

    mu = grid_axis_means(scheme, mean_fn)
    cells = np.ones((len(counts), 2), dtype=np.int64)
    z = np.full((len(counts), 2), np.nan)
    regular = ~degenerate
    if np.any(regular):
        v = averages[regular]
        m2 = v[:, 1]
        z[regular, 0] = v[:, 0] / m2
        z[regular, 1] = v[:, 2] / m2
        cells_x, missing_x = _decide_axis(z[regular, 0], mu, K, m2)
        cells_y, missing_y = _decide_axis(z[regular, 1], mu, K, m2)
        cells[regular] = np.stack([cells_x, cells_y], axis=1)
        flagged[regular] |= missing_x | missing_y
    if np.any(degenerate):
        cells[degenerate] = _decide_by_magnitude(averages[degenerate][:, [0, 2]], scheme, mean_fn)

    n_flagged = int(flagged.sum())
    if n_flagged:
        logger.warning("%d of %d grid decisions used a fallback", n_flagged, len(counts))
    return cells, flagged, z


def decide_grid(obs: ObservationSet, scheme: GridScheme, K: int, mean_fn: MeanFn,
                policy: DegeneratePolicy = DegeneratePolicy.FLOOR) -> DecisionOutcome:
    """ Ratio-statistic decision on one observation from FC1, FC2 and FC3 """
    if obs.n_fc != 3:
        raise InvalidParameterError("the grid scheme needs observations from exactly 3 FCs")
    cells, flagged, z = decide_grid_batch(obs.counts[np.newaxis], scheme, K, mean_fn, policy)
    return DecisionOutcome(
        scheme="grid",
        cluster=(int(cells[0, 0]), int(cells[0, 1])),
        statistics={"z12": float(z[0, 0]), "z32": float(z[0, 1]),
                    "m2_hat": float(estimate_mean(obs.counts[1]))},
        flagged=bool(flagged[0]),
    )
