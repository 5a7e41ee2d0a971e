"""Command-line front end.

Subcommands ``sweep-snr``, ``sweep-iterations``, ``sweep-sources`` run a
Monte Carlo sweep and write CSV or JSON; ``debug-scenario`` runs a single
realization and dumps every intermediate estimate as JSON.

Exit codes: 0 ok, 2 configuration or output error, 3 numerical failure,
4 no proposed-method run converged.
"""

import argparse
import io
import json
import sys
from pathlib import Path

import numpy as np

from .calibration import ao_calibrate
from .config import COMMANDS, PARAMS, build_run_config, read_config_file
from .exceptions import ConfigError, NumericalFailureError
from .harness import (
    draw_realization,
    pair_errors,
    run_baseline_music,
    run_sweep,
    trial_rng,
)
from .subspace import angle_grid, sample_covariance

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_NOT_CONVERGED = 0, 2, 3, 4
CSV_COLUMNS = ("method", "rmse_deg", "success_rate", "n_trials", "n_trimmed")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="madoa",
        description="Self-calibrating DOA estimation for movable-antenna arrays.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    helps = {
        "sweep-snr": "RMSE and success rate versus SNR",
        "sweep-iterations": "RMSE versus AO iteration count",
        "sweep-sources": "success rate versus number of sources",
        "debug-scenario": "one realization with the full iteration history",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", help="flat key = value file; flags override it")
        for key in PARAMS:
            p.add_argument(f"--{key}", dest=key, default=argparse.SUPPRESS, metavar="VALUE")
    return parser


def parse_config(argv=None):
    """Parse command-line arguments (and an optional config file) into a RunConfig."""
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    path = args.pop("config", None)
    file_values = read_config_file(path) if path else {}
    return build_run_config(command, file_values, args)


def _fmt_value(variable, value):
    return f"{value:g}" if variable == "snr_db" else str(int(value))


def format_csv(result, metadata):
    buf = io.StringIO()
    buf.write(f"# madoa {metadata['version']}\n")
    buf.write(f"# command: {metadata['command']}\n")
    buf.write(f"# parameters: {json.dumps(metadata['parameters'], sort_keys=True)}\n")
    buf.write(",".join((result.variable,) + CSV_COLUMNS) + "\n")
    for p in result.points:
        rmse = "" if p.rmse_deg is None else f"{p.rmse_deg:.6f}"
        buf.write(
            f"{_fmt_value(result.variable, p.value)},{p.method},{rmse},"
            f"{p.success_rate:.4f},{p.n_trials},{p.n_trimmed}\n"
        )
    return buf.getvalue()


def _clean(obj):
    """Make numpy scalars/arrays and non-finite floats JSON friendly."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if np.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def format_json(payload):
    return json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n"


def sweep_payload(result, metadata):
    return {
        "metadata": metadata,
        "experiment": result.experiment,
        "variable": result.variable,
        "grid": list(result.grid),
        "trim": result.trim,
        "threshold_deg": result.threshold_deg,
        "points": result.summary(),
    }


def debug_scenario(config):
    """Single realization: truth, estimates of every method and the AO history."""
    exp = config.experiment
    real = draw_realization(exp, exp.n_sources, exp.snr_db, trial_rng(config.seed, 0))
    geom, scen = real.geometry, real.scenario
    R = sample_covariance(real.snapshots())
    state = ao_calibrate(R, geom.nominal_x, scen.n_sources, geom.n_calibrated, exp.ao,
                         geom.wavelength, nominal_y=geom.nominal_y)
    grid = angle_grid(exp.ao.grid_points, exp.ao.angle_bounds)
    baselines = {}
    for mode in ("all", "calibrated"):
        peaks = run_baseline_music(R, geom, scen.n_sources, mode, grid)
        baselines[f"music-{mode}"] = None if peaks is None else np.rad2deg(peaks.angles)
    payload = {
        "metadata": config.metadata(),
        "nominal_x": geom.nominal_x,
        "n_calibrated": geom.n_calibrated,
        "theta_true_deg": np.rad2deg(scen.theta),
        "theta_estimated_deg": np.rad2deg(state.theta),
        "theta_error_deg": np.rad2deg(pair_errors(state.theta, scen.theta)),
        "ape_true": geom.ape,
        "ape_estimated": state.ape,
        "iterations": state.iteration,
        "converged": state.converged,
        "history": [
            {
                "iteration": rec.iteration,
                "theta_deg": np.rad2deg(rec.theta),
                "change_rad2": rec.change,
                "degraded": rec.degraded,
            }
            for rec in state.history
        ],
        "baselines_deg": baselines,
    }
    return payload, state


def _write(path, text):
    path = Path(path)
    path.write_text(text)


def run(config, stdout=None):
    """Execute ``config``; returns the process exit code."""
    stdout = sys.stdout if stdout is None else stdout
    out = config.out or f"{config.command}.{config.format}"
    try:
        if config.kind == "debug":
            payload, state = debug_scenario(config)
            text = format_json(payload)
            err = np.max(payload["theta_error_deg"])
            print(f"seed={config.seed} iterations={state.iteration} converged={state.converged} "
                  f"max_error_deg={err:.4f}", file=stdout)
            not_converged = not state.converged
        else:
            result = run_sweep(config.kind, config.experiment, config.seed)
            if config.format == "csv":
                text = format_csv(result, config.metadata())
            else:
                text = format_json(sweep_payload(result, config.metadata()))
            for p in result.points:
                rmse = "n/a" if p.rmse_deg is None else f"{p.rmse_deg:.4f}"
                print(f"{result.variable}={_fmt_value(result.variable, p.value)} {p.method:<16} "
                      f"rmse_deg={rmse} success={p.success_rate:.3f}", file=stdout)
            not_converged = result.none_converged
    except NumericalFailureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    try:
        _write(out, text)
    except OSError as exc:
        print(f"cannot write {out}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_NOT_CONVERGED if not_converged else EXIT_OK


def main(argv=None):
    try:
        config = parse_config(argv)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
