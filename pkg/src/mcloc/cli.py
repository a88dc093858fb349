""" Experiment runner: figure presets and config-driven custom runs, written as CSV.

Usage:
    mcloc --preset fig3 --out results --trials 20000 --seed 7
    mcloc --preset custom --config my.cfg --strategy noncollab --L 4 --confusion

Every run writes ``<preset>.csv`` and a ``<preset>.manifest.json`` with the resolved configuration.
Files of a failed run are removed.
"""
import argparse
import itertools
import json
import logging
import sys
from pathlib import Path
from typing import Any

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

import mcloc
from mcloc.analysis import ErrorReport, pe_grid, pe_noisy, pe_radial
from mcloc.clustering import RadialScheme
from mcloc.config import ScenarioConfig, load_config
from mcloc.errors import ConfigError, InvalidParameterError, LocalizationError
from mcloc.options import Channel, Strategy
from mcloc.sim import TrialResult, gateway_histogram, run_trials

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# Abnormality to FC1 distance of the gateway histogram preset
HISTOGRAM_D1 = 8.3e-4

# Config fields copied into every sweep row so that a row reproduces its run on its own
PARAMETER_ECHO = [
    "N", "w", "D", "D2", "V_F", "V_G", "ratio_lambda", "degenerate_policy", "gateway_gain",
    "zero_noise", "fair_comparison", "n_sensors", "n_th", "D_s", "slot", "dt", "capture_radius",
    "t_th",
]
SWEEP_COLUMNS = [
    "preset", "strategy", "channel", "L", "resolution", "raster_resolution", "K", "released",
    "total_molecules", "alpha", "dfg_multiple", "seed", "sampling", "abnormality_prior",
    "release_mode", "decision_rule", "cluster_prior", *PARAMETER_ECHO, "analytic_pe",
    "empirical_pe", "half_width", "trials", "flagged_trials", "min_snr", "warnings",
]
HISTOGRAM_COLUMNS = [
    "preset", "alpha", "d1", "dfg_multiple", "released", "samples", "seed", "bin_center",
    "empirical_density", "approx_density", "empirical_mean", "approx_mean",
    "empirical_second_moment", "approx_second_moment",
]


class ExperimentPreset(BaseModel):
    """ A named experiment: the cartesian product of ``grid`` applied on top of ``fixed``.

    Attributes:
        name (str): Preset name used on the command line and for output files.
        description (str): One-line summary.
        fixed (dict[str, Any]): Config values every point shares.
        grid (dict[str, tuple]): Swept config fields and their values, outermost first.
    """
    model_config = ConfigDict(frozen=True)

    name: str
    description: str
    fixed: dict[str, Any] = Field(default_factory=dict)
    grid: dict[str, tuple] = Field(default_factory=dict)

    def points(self, config: ScenarioConfig) -> list[ScenarioConfig]:
        keys = list(self.grid)
        return [config.with_overrides(**self.fixed, **dict(zip(keys, combo)))
                for combo in itertools.product(*self.grid.values())]


_STRATEGIES = (Strategy.COLLABORATIVE.value, Strategy.NONCOLLABORATIVE.value)

PRESETS = {
    "fig3": ExperimentPreset(
        name="fig3",
        description="P_e versus resolution (w/L)^-2, ideal channel",
        fixed={"channel": Channel.IDEAL.value},
        grid={"released": (1e6, 2e6, 3e6), "strategy": _STRATEGIES, "L": (2, 3, 4, 5, 6, 7, 8)},
    ),
    "fig4": ExperimentPreset(
        name="fig4",
        description="P_e versus total released molecules K N_th M, ideal channel",
        fixed={"channel": Channel.IDEAL.value},
        grid={"L": (3, 4, 5), "strategy": _STRATEGIES,
              "released": (5e5, 1e6, 2e6, 3e6, 5e6)},
    ),
    "fig5": ExperimentPreset(
        name="fig5",
        description="P_e versus amplification factor, noisy channel, N_th M = 1e8",
        fixed={"channel": Channel.NOISY.value, "released": 1e8},
        grid={"dfg_multiple": (3.0, 5.0, 7.0), "strategy": _STRATEGIES,
              "alpha": (100, 300, 1000, 3000, 10000)},
    ),
    "fig6": ExperimentPreset(
        name="fig6",
        description="Gateway marker histogram against the mean-value approximation",
        fixed={"channel": Channel.NOISY.value, "dfg_multiple": 5.0},
        grid={"alpha": (1000, 10000)},
    ),
    "custom": ExperimentPreset(
        name="custom",
        description="Single configuration from the config file and overrides",
    ),
}


def analytic_report(config: ScenarioConfig, scheme) -> ErrorReport:
    """ Closed-form report for one configuration """
    mean_fn = config.mean_fn()
    descriptor = {"strategy": config.strategy.value}
    if config.channel is Channel.NOISY:
        return pe_noisy(scheme, config.K, mean_fn, prior=config.cluster_prior,
                        lam=config.ratio_lambda, config=descriptor)
    if isinstance(scheme, RadialScheme):
        return pe_radial(scheme, config.K, mean_fn, prior=config.cluster_prior, config=descriptor)
    return pe_grid(scheme, config.K, mean_fn, lam=config.ratio_lambda, config=descriptor)


def evaluate_point(config: ScenarioConfig, preset: str) -> tuple[dict[str, Any], TrialResult]:
    """ Analytic and empirical P_e of one configuration as a CSV row """
    scheme = config.scheme()
    result = run_trials(config.trial_plan(), scheme)
    report = analytic_report(config, scheme).merge(result.report)
    echo = config.model_dump(mode="json", include=set(PARAMETER_ECHO))
    row = {
        "preset": preset,
        "strategy": config.strategy.value,
        "channel": config.channel.value,
        "L": config.L,
        "resolution": (config.L / config.w) ** 2,
        "raster_resolution": config.resolution,
        "K": config.K,
        "released": config.released,
        "total_molecules": config.K * config.released,
        "alpha": config.alpha,
        "dfg_multiple": config.dfg_multiple,
        "seed": config.seed,
        "sampling": config.sampling.value,
        "abnormality_prior": config.abnormality_prior.value,
        "release_mode": config.release_mode.value,
        "decision_rule": config.decision_rule.value,
        "cluster_prior": config.cluster_prior.value,
        **{field: echo[field] for field in PARAMETER_ECHO},
        "analytic_pe": report.analytic_pe,
        "empirical_pe": report.empirical_pe,
        "half_width": report.half_width,
        "trials": report.trials,
        "flagged_trials": report.flagged_trials,
        "min_snr": report.min_snr,
        "warnings": "; ".join(report.warnings),
    }
    return row, result


def histogram_rows(config: ScenarioConfig, preset: str) -> pd.DataFrame:
    """ Gateway histogram of one configuration as CSV rows """
    histogram = gateway_histogram(HISTOGRAM_D1, config.arena(), config.diffusion_params(),
                                  samples=config.trials, seed=config.seed,
                                  gain=config.gateway_gain)
    frame = histogram.to_frame()
    frame.insert(0, "preset", preset)
    frame.insert(1, "alpha", config.alpha)
    frame.insert(2, "d1", HISTOGRAM_D1)
    frame.insert(3, "dfg_multiple", config.dfg_multiple)
    frame.insert(4, "released", config.released)
    frame.insert(5, "samples", config.trials)
    frame.insert(6, "seed", config.seed)
    frame["empirical_mean"], frame["empirical_second_moment"] = histogram.empirical_moments
    frame["approx_mean"], frame["approx_second_moment"] = histogram.approx_moments
    return frame[HISTOGRAM_COLUMNS]


def _write_csv(frame: pd.DataFrame, path: Path, written: list[Path], index: bool = False):
    written.append(path)
    frame.to_csv(path, index=index, lineterminator="\n", float_format="%.10g", encoding="utf-8")


def _write_manifest(path: Path, written: list[Path], preset: ExperimentPreset,
                    config: ScenarioConfig, columns: list[str], n_rows: int):
    manifest = {
        "package": "mcloc",
        "version": mcloc.__version__,
        "preset": preset.name,
        "description": preset.description,
        "seed": config.seed,
        "trials": config.trials,
        "fixed": preset.fixed,
        "grid": {key: list(values) for key, values in preset.grid.items()},
        "config": config.model_dump(mode="json"),
        "columns": columns,
        "rows": n_rows,
        "artifacts": [p.name for p in written],
    }
    written.append(path)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _remove(paths: list[Path]):
    for path in paths:
        path.unlink(missing_ok=True)
        logger.info("Removed partial output %s", path)


def run(preset_name: str, config_path: str | Path | None = None, out_dir: str | Path = ".",
        overrides: dict[str, Any] | None = None, confusion: bool = False) -> int:
    """ Run a preset and write its CSV and manifest into ``out_dir``.

    Args:
        preset_name: fig3, fig4, fig5, fig6 or custom.
        config_path: Optional `key = value` config file.
        out_dir: Output directory, created if missing.
        overrides: Config values from the command line.
        confusion: For the custom preset, also write the confusion matrix.

    Returns:
        0 on success, 2 for invalid configuration or parameters, 1 for other failures.
    """
    written: list[Path] = []
    status = EXIT_FAILURE
    try:
        if preset_name not in PRESETS:
            raise ConfigError(f"unknown preset {preset_name!r}; choose from {sorted(PRESETS)}")
        preset = PRESETS[preset_name]
        config = load_config(config_path, overrides)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        points = preset.points(config)
        logger.info("Preset %s: %d configuration(s), %d trials each", preset.name, len(points),
                    config.trials)

        if preset.name == "fig6":
            frame = pd.concat([histogram_rows(p, preset.name) for p in points], ignore_index=True)
            columns = HISTOGRAM_COLUMNS
        else:
            rows = []
            for point in points:
                row, result = evaluate_point(point, preset.name)
                rows.append(row)
            frame = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
            columns = SWEEP_COLUMNS
            if confusion and preset.name == "custom":
                _write_csv(result.confusion, out / f"{preset.name}.confusion.csv", written,
                           index=True)
            elif confusion:
                logger.warning("--confusion applies to the custom preset only; ignored")

        _write_csv(frame, out / f"{preset.name}.csv", written)
        _write_manifest(out / f"{preset.name}.manifest.json", written, preset, config, columns,
                        len(frame))
    except (ConfigError, InvalidParameterError) as e:
        logger.error("Invalid configuration: %s", e)
        status = EXIT_USAGE
        _remove(written)
    except (LocalizationError, OSError) as e:
        logger.error("Run failed: %s", e)
        status = EXIT_FAILURE
        _remove(written)
    else:
        status = EXIT_OK
        logger.info("Wrote %s", ", ".join(str(p) for p in written))
    finally:
        logger.debug("Preset %s finished with status %d", preset_name, status)
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcloc",
        description="Diffusion-based abnormality localization: analytic and simulated P_e.")
    parser.add_argument("--preset", default="custom", help=f"one of {', '.join(PRESETS)}")
    parser.add_argument("--config", help="`key = value` config file")
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--trials", type=int, help="Monte Carlo trials per configuration")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--strategy", choices=[s.value for s in Strategy])
    parser.add_argument("--channel", choices=[c.value for c in Channel])
    parser.add_argument("--L", type=int, dest="L", help="cluster resolution")
    parser.add_argument("--alpha", type=int, help="FC amplification factor")
    parser.add_argument("--dfg", type=float, help="FC to gateway distance as a multiple of w")
    parser.add_argument("--jobs", type=int, help="joblib workers")
    parser.add_argument("--confusion", action="store_true",
                        help="also write the confusion matrix (custom preset)")
    parser.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {
        "trials": args.trials,
        "seed": args.seed,
        "strategy": args.strategy,
        "channel": args.channel,
        "L": args.L,
        "alpha": args.alpha,
        "dfg_multiple": args.dfg,
        "n_jobs": args.jobs,
    }
    return run(args.preset, args.config, args.out, overrides, args.confusion)


if __name__ == "__main__":
    sys.exit(main())
