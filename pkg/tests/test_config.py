import pytest

from mcloc.clustering import GridScheme, RadialScheme
from mcloc.config import build_config, load_config, parse_config_text, read_config_file
from mcloc.errors import ConfigError
from mcloc.options import Channel, ReleaseMode, Strategy


def test_defaults_are_the_reference_scenario():
    """
    GIVEN no config file and no overrides
    WHEN the configuration is loaded
    THEN it holds the reference system parameters
    """
    # Act
    config = load_config()
    # Assert
    assert config.N == 2
    assert config.D == pytest.approx(1e-9)
    assert config.w == pytest.approx(1e-2)
    assert config.K == 2
    assert config.released == pytest.approx(1e6)
    assert config.V_F == pytest.approx(1.11e-7)
    assert config.D2 == pytest.approx(1e-10)
    assert config.V_G == pytest.approx(1.78e-6)
    assert config.alpha == 1000
    assert config.arena().d_fg == pytest.approx(5e-2)
    assert config.strategy is Strategy.COLLABORATIVE
    assert config.channel is Channel.IDEAL
    assert config.D_s is None


def test_derived_sensor_parameters():
    params = load_config().sensor_params()
    assert params.slot == pytest.approx(25000)
    assert params.dt == pytest.approx(250)
    assert params.capture_radius == pytest.approx(5e-5)
    assert params.t_th == pytest.approx(1.25e6)
    assert params.D_s == pytest.approx(1e-9)
    assert params.M == pytest.approx(1e5)


def test_parse_config_text_comments_and_none():
    text = "a = 1  # trailing comment\n\n# full-line comment\nb = none\nc = NULL\nd = x\n"
    assert parse_config_text(text) == {"a": "1", "b": None, "c": None, "d": "x"}


@pytest.mark.parametrize("text", ["trials 10", "= 3", "L = 2\nL = 3"])
def test_parse_config_text_rejects_malformed_lines(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_unknown_key_is_rejected():
    with pytest.raises(ConfigError):
        load_config(overrides={"colour": "red"})


@pytest.mark.parametrize("overrides", [{"trials": 0}, {"L": 1}, {"N": 3}, {"strategy": "solo"},
                                       {"ratio_lambda": 1.5}])
def test_invalid_values_are_rejected(overrides):
    with pytest.raises(ConfigError):
        load_config(overrides=overrides)


def test_file_then_overrides(tmp_path):
    """
    GIVEN a config file setting L and trials, and an override of L
    WHEN the configuration is loaded
    THEN the override wins for L and the file wins for trials
    """
    # Arrange
    path = tmp_path / "run.cfg"
    path.write_text("L = 5\ntrials = 50\nstrategy = noncollab\n", encoding="utf-8")
    # Act
    config = load_config(path, overrides={"L": 4, "seed": None})
    # Assert
    assert config.L == 4
    assert config.trials == 50
    assert config.seed == 0
    assert config.strategy is Strategy.NONCOLLABORATIVE


def test_missing_file_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError):
        read_config_file(tmp_path / "missing.cfg")


def test_with_overrides_validates():
    config = load_config()
    assert config.with_overrides(L=6).L == 6
    with pytest.raises(ConfigError):
        config.with_overrides(L=1)


def test_build_config_from_typed_values():
    config = build_config({"strategy": Strategy.NONCOLLABORATIVE, "L": 2})
    assert isinstance(config.scheme(), GridScheme)


def test_scheme_follows_strategy():
    config = load_config(overrides={"resolution": 100})
    assert isinstance(config.scheme(), RadialScheme)


def test_noisy_mean_with_unit_gain_is_ideal():
    config = load_config()
    noisy = config.with_overrides(channel="noisy", gateway_gain=1.0)
    assert noisy.mean_fn()(4e-3) == config.mean_fn()(4e-3)


def test_trial_plan_walk_and_fairness():
    """
    GIVEN walk release with the fair comparison switched off
    WHEN the trial plan is built
    THEN it carries sensor parameters and does not condition walks to the quorum
    """
    config = load_config(overrides={"release_mode": "walk", "fair_comparison": "false"})
    plan = config.trial_plan()
    assert plan.release_mode is ReleaseMode.WALK
    assert plan.sensors is not None
    assert plan.condition_to_quorum is False
    assert load_config().trial_plan().sensors is None
