""" Monte Carlo engine: samples counts under the true stochastic model, decides, and scores.

Each trial draws from its own generator seeded with (master seed, trial index), so the aggregate
results depend only on the TrialPlan and not on how trials are split between joblib workers.
"""
import logging
import math

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field
from scipy import stats

from mcloc.analysis import ErrorReport, confidence_half_width
from mcloc.clustering import GridScheme, RadialScheme, build_scheme, locate_cluster
from mcloc.detection import decide_grid_batch, decide_radial_batch, exact_ml_radial_batch
from mcloc.errors import InvalidParameterError
from mcloc.medium import (Arena, DiffusionParams, MeanFn, gateway_gain, hit_probability,
                          mean_count, mean_function, observation_time)
from mcloc.options import (AbnormalityPrior, Channel, DecisionRule, DegeneratePolicy,
                           ReleaseMode, SamplingModel, Strategy)
from mcloc.sensors import SensorParams, walk_until_release

logger = logging.getLogger(__name__)

# SamplingModel.AUTO switches from binomial to Gaussian draws above this mean count
AUTO_GAUSSIAN_MEAN = 100.0
OUTSIDE_LABEL = "outside"


class TrialPlan(BaseModel):
    """ Everything a Monte Carlo run depends on.

    Attributes:
        arena (Arena): The observing area.
        diffusion (DiffusionParams): Channel parameters; ``released`` is the nominal N_th M.
        L (int): Cluster resolution.
        strategy (Strategy): Collaborative (radial scheme) or non-collaborative (grid scheme).
        channel (Channel): Ideal or noisy FC to gateway link.
        trials (int): Number of trials.
        seed (int): Master seed.
        sampling (SamplingModel): Count distribution.
        abnormality_prior (AbnormalityPrior): Abnormality at a random IP or uniform in the area.
        release_mode (ReleaseMode): Release N_th M molecules directly or simulate the sensor walk.
        decision_rule (DecisionRule): Radial rule, threshold ladder or exact ML.
        degenerate_policy (DegeneratePolicy): Grid handling of non-positive FC2 averages.
        sensors (SensorParams | None): Walk parameters, required for ReleaseMode.WALK.
        condition_to_quorum (bool): Redraw non-collaborative walks until N_r = N_th.
        zero_noise (bool): Replace every count by its mean.
        gateway_gain (float | None): Override of alpha mu_tilde; 1.0 gives exact compensation.
        resolution (int): Raster resolution used to build the radial scheme.
        n_jobs (int): joblib workers.
        chunk_size (int): Trials per joblib task.
    """
    model_config = ConfigDict(frozen=True)

    arena: Arena
    diffusion: DiffusionParams
    L: int = Field(ge=2)
    strategy: Strategy = Strategy.COLLABORATIVE
    channel: Channel = Channel.IDEAL
    trials: int = Field(ge=1)
    seed: int = Field(default=0, ge=0)
    sampling: SamplingModel = SamplingModel.AUTO
    abnormality_prior: AbnormalityPrior = AbnormalityPrior.IPS
    release_mode: ReleaseMode = ReleaseMode.DIRECT
    decision_rule: DecisionRule = DecisionRule.LADDER
    degenerate_policy: DegeneratePolicy = DegeneratePolicy.FLOOR
    sensors: SensorParams | None = None
    condition_to_quorum: bool = True
    zero_noise: bool = False
    gateway_gain: float | None = Field(default=None, gt=0)
    resolution: int = Field(default=1000, ge=10)
    n_jobs: int = 1
    chunk_size: int = Field(default=2000, ge=1)

    def describe(self) -> dict:
        """ Flat parameter echo used in reports and CSV rows """
        return {
            "strategy": self.strategy.value,
            "channel": self.channel.value,
            "L": self.L,
            "K": self.diffusion.K,
            "released": self.diffusion.released,
            "alpha": self.diffusion.alpha,
            "d_fg": self.arena.d_fg,
            "trials": self.trials,
            "seed": self.seed,
            "sampling": self.sampling.value,
            "abnormality_prior": self.abnormality_prior.value,
            "release_mode": self.release_mode.value,
            "decision_rule": self.decision_rule.value,
        }


class TrialResult(BaseModel):
    """ Output of run_trials.

    Attributes:
        report (ErrorReport): Empirical part of the error report.
        confusion (pd.DataFrame): Trial counts by true cluster (rows) and decision (columns).
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    report: ErrorReport
    confusion: pd.DataFrame


class GatewayHistogram(BaseModel):
    """ Gateway marker counts against the mean-value approximation.

    Attributes:
        centers (np.ndarray): Bin centres.
        empirical_density (np.ndarray): Normalised histogram of the simulated counts.
        approx_density (np.ndarray): N(m_G, m_G) density at the bin centres.
        empirical_moments (tuple[float, float]): Sample mean and raw second moment.
        approx_moments (tuple[float, float]): m_G and m_G + m_G^2.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    centers: np.ndarray
    empirical_density: np.ndarray
    approx_density: np.ndarray
    empirical_moments: tuple[float, float]
    approx_moments: tuple[float, float]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "bin_center": self.centers,
            "empirical_density": self.empirical_density,
            "approx_density": self.approx_density,
        })


def _rounded_normal(mean, variance, size, rng: np.random.Generator) -> np.ndarray:
    return np.maximum(np.rint(rng.normal(mean, np.sqrt(variance), size=size)), 0.0)


def _draw_counts(n, p, mean, variance, model: SamplingModel, size,
                 rng: np.random.Generator) -> np.ndarray:
    match model:
        case SamplingModel.BINOMIAL:
            return rng.binomial(n, p, size=size).astype(float)
        case SamplingModel.GAUSSIAN:
            return _rounded_normal(mean, variance, size, rng)
        case SamplingModel.AUTO:
            gaussian = np.broadcast_to(mean > AUTO_GAUSSIAN_MEAN, size)
            counts = np.zeros(size)
            if np.any(gaussian):
                counts[gaussian] = _rounded_normal(np.broadcast_to(mean, size)[gaussian],
                                                   np.broadcast_to(variance, size)[gaussian],
                                                   None, rng)
            if not np.all(gaussian):
                exact = ~gaussian
                counts[exact] = rng.binomial(np.broadcast_to(n, size)[exact],
                                             np.broadcast_to(p, size)[exact])
            return counts
        case _:
            raise InvalidParameterError(f"unknown sampling model {model!r}")


def sample_fc_counts(d, arena: Arena, params: DiffusionParams, released: float | None = None,
                     model: SamplingModel = SamplingModel.AUTO,
                     rng: np.random.Generator | None = None) -> np.ndarray:
    """ Draw the K molecule counts an FC at distance d observes.

    Args:
        d: Distance, or array of distances, between abnormality and FC.
        arena: The observing area.
        params: Diffusion parameters.
        released: Molecules of each type released; defaults to ``params.released``.
        model: Binomial(released, mu), rounded N(m, m), or AUTO.
        rng: Random generator.

    Returns:
        Array of shape ``np.shape(d) + (K,)``.

    Raises:
        InvalidParameterError: If ``released`` is negative.
    """
    rng = np.random.default_rng() if rng is None else rng
    n_released = params.released if released is None else released
    if n_released < 0:
        raise InvalidParameterError(f"released molecules must be non-negative, got {n_released}")
    dist = np.asarray(d, dtype=float)
    prob = hit_probability(dist, observation_time(arena, params), params.V_F, params.D, arena.dims)
    prob = np.asarray(prob)[..., np.newaxis]
    mean = n_released * prob
    size = dist.shape + (params.K,)
    return _draw_counts(int(round(n_released)), prob, mean, mean, model, size, rng)


def sample_gateway_counts(y, arena: Arena, params: DiffusionParams,
                          rng: np.random.Generator | None = None,
                          model: SamplingModel = SamplingModel.AUTO,
                          gain: float | None = None) -> np.ndarray:
    """ Draw gateway marker counts W ~ Binomial(alpha y, mu_tilde) for FC counts y.

    This is the doubly stochastic channel itself: every W depends on the realised y, not on its
    mean.

    Args:
        y: FC counts, any shape, non-negative.
        arena: The observing area.
        params: Diffusion parameters.
        rng: Random generator.
        model: Count distribution.
        gain: Override of alpha mu_tilde; the marker probability becomes gain / alpha.

    Returns:
        Array with the shape of ``y``.

    Raises:
        InvalidParameterError: If a count is negative or the marker probability exceeds 1.
    """
    rng = np.random.default_rng() if rng is None else rng
    counts = np.asarray(y, dtype=float)
    if np.any(counts < 0):
        raise InvalidParameterError("FC counts must be non-negative")
    chain_gain = gateway_gain(arena, params) if gain is None else gain
    prob = chain_gain / params.alpha
    if not 0 < prob <= 1:
        raise InvalidParameterError(f"marker probability {prob:g} is outside (0, 1]")
    n_markers = np.rint(params.alpha * counts).astype(np.int64)
    mean = n_markers * prob
    return _draw_counts(n_markers, prob, mean, mean * (1 - prob), model, counts.shape, rng)


def gateway_histogram(d1: float, arena: Arena, params: DiffusionParams, samples: int,
                      seed: int = 0, bins: int = 60, released: float | None = None,
                      model: SamplingModel = SamplingModel.AUTO,
                      gain: float | None = None) -> GatewayHistogram:
    """ Histogram of gateway marker counts from FC1 against the mean-value approximation.

    Args:
        d1: Abnormality to FC1 distance.
        arena: The observing area.
        params: Diffusion parameters.
        samples: Number of (Y, W) pairs to draw.
        seed: Seed of the generator.
        bins: Histogram bins.
        released: Molecules of each type released; defaults to ``params.released``.
        model: Count distribution for both links.
        gain: Override of alpha mu_tilde.

    Returns:
        GatewayHistogram with densities and the first two raw moments of both distributions.
    """
    if samples < 2:
        raise InvalidParameterError(f"at least 2 samples are needed, got {samples}")
    rng = np.random.default_rng(seed)
    y = sample_fc_counts(np.full(samples, d1), arena, params, released, model, rng)[:, 0]
    w = sample_gateway_counts(y, arena, params, rng, model, gain)
    chain_gain = gateway_gain(arena, params) if gain is None else gain
    m_g = chain_gain * mean_count(d1, arena, params, released)

    density, edges = np.histogram(w, bins=bins, density=True)
    centers = 0.5 * (edges[:-1] + edges[1:])
    approx = stats.norm.pdf(centers, loc=m_g, scale=math.sqrt(m_g))
    return GatewayHistogram(
        centers=centers,
        empirical_density=density,
        approx_density=approx,
        empirical_moments=(float(w.mean()), float(np.mean(w ** 2))),
        approx_moments=(float(m_g), float(m_g + m_g ** 2)),
    )


def _check_plan(plan: TrialPlan):
    if plan.release_mode is ReleaseMode.WALK and plan.sensors is None:
        raise InvalidParameterError("walk release mode needs sensor parameters")
    if (plan.decision_rule is DecisionRule.EXACT_ML
            and plan.strategy is not Strategy.COLLABORATIVE):
        raise InvalidParameterError("the exact ML rule applies to the radial scheme only")


def _place_abnormality(plan: TrialPlan, scheme: RadialScheme | GridScheme,
                       rng: np.random.Generator):
    """ Returns (true cluster index, FC distances, location) for one trial """
    n_fc = plan.strategy.n_fc
    if plan.abnormality_prior is AbnormalityPrior.UNIFORM:
        location = tuple(rng.uniform(0.0, plan.arena.w, size=2))
        cell = locate_cluster(scheme, location)
        distances = plan.arena.fc_distances(location, n_fc)
        if isinstance(scheme, GridScheme):
            return (cell[0] - 1) * scheme.L + cell[1] - 1, distances, location
        n_r = len(scheme.radii)
        truth = -1
        if cell[0] < n_r and cell[1] < n_r:
            truth = int(scheme.index_table()[cell])
        return truth, distances, location

    if isinstance(scheme, GridScheme):
        flat = int(rng.integers(scheme.L * scheme.L))
        location = scheme.ip(flat // scheme.L + 1, flat % scheme.L + 1)
        return flat, plan.arena.fc_distances(location, n_fc), location
    index = int(rng.integers(scheme.n_p))
    j1, j2 = scheme.psi[index]
    return index, np.array([scheme.radii[j1], scheme.radii[j2]]), scheme.ip_points[index]


def _released_molecules(plan: TrialPlan, location, trial: int) -> float:
    if plan.release_mode is ReleaseMode.DIRECT:
        return plan.diffusion.released
    event = walk_until_release(plan.sensors, plan.arena, location, plan.strategy,
                               rng_seed=[plan.seed, trial, 1],
                               condition_to_quorum=plan.condition_to_quorum)
    return event.n_released * plan.sensors.M


def _observe(plan: TrialPlan, distances, released: float, rng: np.random.Generator) -> np.ndarray:
    arena, params = plan.arena, plan.diffusion
    noisy = plan.channel is Channel.NOISY
    chain_gain = gateway_gain(arena, params) if plan.gateway_gain is None else plan.gateway_gain
    if plan.zero_noise:
        means = np.asarray(mean_count(distances, arena, params, released), dtype=float)
        y = np.repeat(means[:, np.newaxis], params.K, axis=1)
        return chain_gain * y if noisy else y
    y = sample_fc_counts(distances, arena, params, released, plan.sampling, rng)
    if noisy:
        return sample_gateway_counts(y, arena, params, rng, plan.sampling, plan.gateway_gain)
    return y


def _decide(plan: TrialPlan, scheme, counts: np.ndarray, mean_fn: MeanFn):
    K = plan.diffusion.K
    if isinstance(scheme, GridScheme):
        cells, flagged, _ = decide_grid_batch(counts, scheme, K, mean_fn, plan.degenerate_policy)
        return (cells[:, 0] - 1) * scheme.L + cells[:, 1] - 1, flagged
    if plan.decision_rule is DecisionRule.EXACT_ML:
        index, snapped, _ = exact_ml_radial_batch(counts, scheme, K, mean_fn)
    else:
        index, snapped, _ = decide_radial_batch(counts, scheme, K, mean_fn)
    return index, snapped


def _simulate_chunk(plan: TrialPlan, scheme, mean_fn: MeanFn, start: int, stop: int):
    n = stop - start
    truth = np.empty(n, dtype=np.int64)
    counts = np.empty((n, plan.strategy.n_fc, plan.diffusion.K))
    for row, trial in enumerate(range(start, stop)):
        rng = np.random.default_rng([plan.seed, trial])
        truth[row], distances, location = _place_abnormality(plan, scheme, rng)
        released = _released_molecules(plan, location, trial)
        counts[row] = _observe(plan, distances, released, rng)
    decided, flagged = _decide(plan, scheme, counts, mean_fn)
    return truth, decided, flagged


def _cluster_labels(scheme, indices: np.ndarray) -> list[str]:
    if isinstance(scheme, GridScheme):
        return [scheme.label((i // scheme.L + 1, i % scheme.L + 1)) for i in indices]
    return [scheme.label(scheme.psi[i]) if i >= 0 else OUTSIDE_LABEL for i in indices]


def decision_mean_function(plan: TrialPlan) -> MeanFn:
    """ Hypothesis mean the gateway uses for the plan's channel """
    if plan.channel is Channel.NOISY:
        return mean_function(plan.arena, plan.diffusion, "noisy", gain=plan.gateway_gain)
    return mean_function(plan.arena, plan.diffusion, "ideal")


def run_trials(plan: TrialPlan, scheme: RadialScheme | GridScheme | None = None) -> TrialResult:
    """ Run the plan's trials and score each decision against the true cluster.

    Args:
        plan: The trial plan.
        scheme: Prebuilt cluster scheme matching the plan; built from the plan if omitted.

    Returns:
        TrialResult with the empirical ErrorReport and the confusion matrix.

    Raises:
        InvalidParameterError: If the plan's options are inconsistent.
    """
    _check_plan(plan)
    if scheme is None:
        scheme = build_scheme(plan.arena, plan.L, plan.strategy, plan.resolution)
    elif isinstance(scheme, RadialScheme) != (plan.strategy is Strategy.COLLABORATIVE):
        raise InvalidParameterError(
            f"{type(scheme).__name__} does not match {plan.strategy.value} sensors")
    mean_fn = decision_mean_function(plan)

    bounds = range(0, plan.trials, plan.chunk_size)
    logger.info("Running %d trials (%s, %s, L=%d) in %d chunk(s)", plan.trials,
                plan.strategy.value, plan.channel.value, plan.L, len(bounds))
    chunks = Parallel(n_jobs=plan.n_jobs)(
        delayed(_simulate_chunk)(plan, scheme, mean_fn, start,
                                 min(start + plan.chunk_size, plan.trials))
        for start in bounds)
    truth = np.concatenate([c[0] for c in chunks])
    decided = np.concatenate([c[1] for c in chunks])
    flagged = np.concatenate([c[2] for c in chunks])

    correct = decided == truth
    pe = float(1 - correct.mean())
    frame = pd.DataFrame({
        "true": _cluster_labels(scheme, truth),
        "decided": _cluster_labels(scheme, decided),
        "correct": correct,
    })
    confusion = pd.crosstab(frame["true"], frame["decided"])
    per_cluster = {str(k): float(v) for k, v in frame.groupby("true")["correct"].mean().items()}
    n_flagged = int(flagged.sum())
    report = ErrorReport(
        config=plan.describe(),
        empirical_pe=pe,
        trials=plan.trials,
        half_width=confidence_half_width(pe, plan.trials),
        empirical_per_cluster=per_cluster,
        flagged_trials=n_flagged,
    )
    logger.info("Empirical P_e = %.4g +/- %.2g (%d flagged)", pe, report.half_width, n_flagged)
    return TrialResult(report=report, confusion=confusion)
