""" Scenario configuration: defaults, `key = value` files and the value objects built from them.

The shipped defaults live in ``mcloc/data/defaults.cfg``. A run starts from them, applies the
keys of an optional user file, then CLI overrides. Later sources win.
"""
import logging
from importlib import resources
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from mcloc import data
from mcloc.clustering import GridScheme, RadialScheme, build_scheme
from mcloc.errors import ConfigError
from mcloc.medium import Arena, DiffusionParams, MeanFn, mean_function, observation_time
from mcloc.options import (AbnormalityPrior, Channel, ClusterPrior, DecisionRule,
                           DegeneratePolicy, ReleaseMode, SamplingModel, Strategy)
from mcloc.sensors import SensorParams
from mcloc.sim import TrialPlan

logger = logging.getLogger(__name__)

DEFAULTS_FILE = "defaults.cfg"
_NONE_VALUES = {"", "none", "null"}


class ScenarioConfig(BaseModel):
    """ Full parameterisation of an experiment.

    Attributes:
        N (int): Spatial dimensions, fixed at 2.
        D (float): Diffusion coefficient of sensor molecules (m^2/s).
        w (float): Side of the observing area (m).
        K (int): Samples (molecule types) per FC.
        released (float): Molecules of each type released, N_th M.
        V_F (float): FC receiver volume.
        D2 (float): Diffusion coefficient of FC markers (m^2/s).
        V_G (float): Gateway receiver volume.
        alpha (int): FC amplification factor.
        dfg_multiple (float): FC to gateway distance as a multiple of w.
        L (int): Cluster resolution.
        strategy (Strategy): Collaborative or non-collaborative sensors.
        channel (Channel): Ideal or noisy FC to gateway link.
        trials (int): Monte Carlo trials per configuration.
        seed (int): Master seed.
        fair_comparison (bool): Condition non-collaborative walks to N_r = N_th.
        ratio_lambda (float): Constant of the ratio-approximation preconditions.
        resolution (int): Raster resolution of the radial scheme.
        gateway_gain (float | None): Override of alpha mu_tilde.
        zero_noise (bool): Replace simulated counts by their means.
        n_jobs (int): joblib workers.
        n_sensors (int): Injected sensors N_s.
        n_th (int): Quorum threshold N_th.
        D_s, slot, dt, capture_radius, t_th (float | None): Walk parameters; None derives the
            default from the channel (D_s = D, slot = 2 T_obs, dt = slot / 100,
            capture_radius = w / 200, t_th = 50 slot).
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    N: int = Field(default=2, ge=2, le=2)
    D: float = Field(default=1e-9, gt=0)
    w: float = Field(default=1e-2, gt=0)
    K: int = Field(default=2, ge=1)
    released: float = Field(default=1e6, gt=0)
    V_F: float = Field(default=1.11e-7, gt=0)
    D2: float = Field(default=1e-10, gt=0)
    V_G: float = Field(default=1.78e-6, gt=0)
    alpha: int = Field(default=1000, ge=1)
    dfg_multiple: float = Field(default=5.0, gt=0)

    L: int = Field(default=3, ge=2)
    strategy: Strategy = Strategy.COLLABORATIVE
    channel: Channel = Channel.IDEAL
    trials: int = Field(default=10000, ge=1)
    seed: int = Field(default=0, ge=0)
    sampling: SamplingModel = SamplingModel.AUTO
    abnormality_prior: AbnormalityPrior = AbnormalityPrior.IPS
    release_mode: ReleaseMode = ReleaseMode.DIRECT
    decision_rule: DecisionRule = DecisionRule.LADDER
    degenerate_policy: DegeneratePolicy = DegeneratePolicy.FLOOR
    cluster_prior: ClusterPrior = ClusterPrior.UNIFORM
    fair_comparison: bool = True
    ratio_lambda: float = Field(default=1.0, gt=0, le=1)
    resolution: int = Field(default=1000, ge=10)
    gateway_gain: float | None = Field(default=None, gt=0)
    zero_noise: bool = False
    n_jobs: int = 1

    n_sensors: int = Field(default=50, ge=1)
    n_th: int = Field(default=10, ge=1)
    D_s: float | None = Field(default=None, gt=0)
    slot: float | None = Field(default=None, gt=0)
    dt: float | None = Field(default=None, gt=0)
    capture_radius: float | None = Field(default=None, gt=0)
    t_th: float | None = Field(default=None, gt=0)

    def arena(self) -> Arena:
        return Arena(w=self.w, d_fg=self.dfg_multiple * self.w, dims=self.N)

    def diffusion_params(self) -> DiffusionParams:
        return DiffusionParams(D=self.D, D2=self.D2, V_F=self.V_F, V_G=self.V_G, K=self.K,
                               released=self.released, alpha=self.alpha)

    def sensor_params(self) -> SensorParams:
        """ Walk parameters with the unset ones derived from the channel """
        slot = self.slot or 2 * observation_time(self.arena(), self.diffusion_params())
        dt = self.dt or slot / 100
        try:
            return SensorParams(
                n_sensors=self.n_sensors,
                D_s=self.D_s or self.D,
                dt=dt,
                capture_radius=self.capture_radius or self.w / 200,
                slot=slot,
                n_th=self.n_th,
                t_th=self.t_th or 50 * slot,
                M=self.released / self.n_th,
            )
        except ValidationError as e:
            raise ConfigError(f"invalid sensor parameters: {e}") from e

    def scheme(self) -> RadialScheme | GridScheme:
        return build_scheme(self.arena(), self.L, self.strategy, self.resolution)

    def mean_fn(self) -> MeanFn:
        """ Hypothesis mean of the configured channel """
        gain = self.gateway_gain if self.channel is Channel.NOISY else None
        return mean_function(self.arena(), self.diffusion_params(), self.channel.value, gain=gain)

    def trial_plan(self) -> TrialPlan:
        sensors = self.sensor_params() if self.release_mode is ReleaseMode.WALK else None
        return TrialPlan(
            arena=self.arena(),
            diffusion=self.diffusion_params(),
            L=self.L,
            strategy=self.strategy,
            channel=self.channel,
            trials=self.trials,
            seed=self.seed,
            sampling=self.sampling,
            abnormality_prior=self.abnormality_prior,
            release_mode=self.release_mode,
            decision_rule=self.decision_rule,
            degenerate_policy=self.degenerate_policy,
            sensors=sensors,
            condition_to_quorum=self.fair_comparison,
            zero_noise=self.zero_noise,
            gateway_gain=self.gateway_gain,
            resolution=self.resolution,
            n_jobs=self.n_jobs,
        )

    def with_overrides(self, **overrides) -> "ScenarioConfig":
        """ Validated copy with some fields replaced """
        return build_config({**self.model_dump(), **overrides})


def build_config(values: dict[str, Any]) -> ScenarioConfig:
    """ Validate a mapping of field values.

    Raises:
        ConfigError: If a key is unknown or a value is invalid.
    """
    try:
        return ScenarioConfig.model_validate(values)
    except ValidationError as e:
        raise ConfigError(f"invalid scenario configuration: {e}") from e


def parse_config_text(text: str, source: str = "<string>") -> dict[str, Any]:
    """ Parse flat `key = value` lines; `#` starts a comment and `none` means unset.

    Raises:
        ConfigError: If a line has no `=` or an empty key, or a key repeats.
    """
    values: dict[str, Any] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{number}: expected `key = value`, got {raw!r}")
        if key in values:
            raise ConfigError(f"{source}:{number}: duplicate key {key!r}")
        values[key] = None if value.lower() in _NONE_VALUES else value
    return values


def read_config_file(path: str | Path) -> dict[str, Any]:
    """ Read a config file into raw values.

    Raises:
        ConfigError: If the file cannot be read or parsed.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    return parse_config_text(text, str(path))


def default_values() -> dict[str, Any]:
    """ Raw values of the shipped defaults file """
    defaults = resources.files(data).joinpath(DEFAULTS_FILE)
    return parse_config_text(defaults.read_text(encoding="utf-8"), DEFAULTS_FILE)


def load_config(path: str | Path | None = None,
                overrides: dict[str, Any] | None = None) -> ScenarioConfig:
    """ Defaults, then the optional config file, then overrides.

    Args:
        path: Optional user config file.
        overrides: Field values that take precedence over both files; None values are ignored.

    Returns:
        The validated ScenarioConfig.

    Raises:
        ConfigError: On unreadable files, malformed lines, unknown keys or invalid values.
    """
    values = default_values()
    if path is not None:
        values.update(read_config_file(path))
        logger.debug("Loaded config file %s", path)
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return build_config(values)
