"""Run configuration: defaults, config-file ingestion and validation.

A config file is a flat list of ``key = value`` lines whose keys mirror the
command-line flag names (``snr-grid = 0, 5, 10``). Lines starting with
``#`` or ``;`` are comments. Command-line flags override file values.

With ``length-unit = meters`` the lengths you supply (``h``, ``sigma-x``,
``sigma-y``, ``min-spacing``) are divided by ``wavelength``; defaults are
already in wavelengths.
"""

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibration import MODES, AOConfig
from .exceptions import ConfigError, InvalidArgumentError
from .geometry import LAYOUTS, GeometryConfig
from .harness import METHODS, ExperimentConfig

COMMANDS = {
    "sweep-snr": "snr",
    "sweep-iterations": "iterations",
    "sweep-sources": "sources",
    "debug-scenario": "debug",
}
FORMATS = ("csv", "json")
LENGTH_UNITS = ("wavelengths", "meters")


def _str_list(text):
    text = text.strip().strip("[]")
    return [t for t in (p.strip().strip("'\"") for p in text.replace(",", " ").split()) if t]


def _float_list(text):
    return [float(t) for t in _str_list(text)]


# name -> (parser, default); ``None`` defaults are filled per command
PARAMS = {
    "seed": (int, 0),
    "trials": (int, 200),
    "methods": (_str_list, None),
    "format": (str, None),
    "out": (str, None),
    "m": (int, 12),
    "mc": (int, 7),
    "t": (int, 100),
    "h": (float, 12.0),
    "wavelength": (float, 1.0),
    "length-unit": (str, "wavelengths"),
    "sigma-x": (float, 0.5),
    "sigma-y": (float, 0.5),
    "layout": (str, "random"),
    "min-spacing": (float, 0.5),
    "snr-grid": (_float_list, [0.0, 5.0, 10.0, 15.0, 20.0]),
    "snr": (float, None),
    "k": (int, 3),
    "k-min": (int, 2),
    "k-max": (int, 7),
    "iterations": (int, 40),
    "grid-points": (int, 1800),
    "epsilon": (float, 1e-6),
    "delta": (float, None),
    "max-iters": (int, 100),
    "mode": (str, "literal"),
    "trim": (float, 0.05),
    "threshold": (float, 0.5),
    "min-separation": (float, 2.0),
    "n-jobs": (int, 1),
}

COMMAND_DEFAULTS = {
    "snr": {"snr": 10.0, "methods": list(METHODS), "format": "csv"},
    "iterations": {"snr": 10.0, "methods": ["proposed-xy"], "format": "csv"},
    "sources": {"snr": 15.0, "methods": list(METHODS), "format": "csv"},
    "debug": {"snr": 10.0, "methods": list(METHODS), "format": "json"},
}


def normalize_key(key):
    return key.strip().lower().replace("_", "-")


def read_config_file(path):
    """Raw ``{key: text}`` pairs from a flat config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError("config", f"cannot parse {path}: {exc}") from exc
    return {normalize_key(k): v for k, v in parser["run"].items()}


def coerce(raw):
    """Parse raw text values into typed values, rejecting unknown keys."""
    values = {}
    for key, text in raw.items():
        key = normalize_key(key)
        if key not in PARAMS:
            raise ConfigError(key, "unknown key")
        parse, _ = PARAMS[key]
        if not isinstance(text, str):
            values[key] = text
            continue
        try:
            values[key] = parse(text)
        except ValueError as exc:
            raise ConfigError(key, f"cannot parse {text!r}") from exc
    return values


@dataclass(frozen=True)
class RunConfig:
    command: str
    experiment: ExperimentConfig
    seed: int = 0
    out: str = None
    format: str = "csv"
    effective: dict = field(default_factory=dict)

    @property
    def kind(self):
        return COMMANDS[self.command]

    def metadata(self):
        """Effective parameters echoed into every output file."""
        from . import __version__

        return {"command": self.command, "version": __version__, "parameters": self.effective}


def build_run_config(command, file_values=None, flag_values=None):
    """Merge defaults, file values and flag values (in increasing precedence)."""
    if command not in COMMANDS:
        raise ConfigError("command", f"must be one of {tuple(COMMANDS)}, got {command!r}")
    kind = COMMANDS[command]
    values = {k: default for k, (_, default) in PARAMS.items()}
    values.update(COMMAND_DEFAULTS[kind])
    user = {**coerce(file_values or {}), **coerce(flag_values or {})}
    values.update(user)
    return _validate(command, values, given=set(user))


def _check(cond, key, message):
    if not cond:
        raise ConfigError(key, message)


def _validate(command, v, given=()):
    kind = COMMANDS[command]
    _check(v["seed"] >= 0, "seed", f"must be a non-negative integer, got {v['seed']}")
    _check(v["seed"] < 2**64, "seed", "must fit in 64 bits")
    _check(v["trials"] >= 1, "trials", f"must be at least 1, got {v['trials']}")
    _check(v["format"] in FORMATS, "format", f"must be one of {FORMATS}, got {v['format']!r}")
    if kind == "debug":
        _check(v["format"] == "json", "format", "debug-scenario writes JSON only")
    _check(v["length-unit"] in LENGTH_UNITS, "length-unit",
           f"must be one of {LENGTH_UNITS}, got {v['length-unit']!r}")
    _check(v["wavelength"] > 0, "wavelength", f"must be positive, got {v['wavelength']}")
    _check(v["layout"] in LAYOUTS, "layout", f"must be one of {LAYOUTS}, got {v['layout']!r}")
    _check(v["mode"] in MODES, "mode", f"must be one of {MODES}, got {v['mode']!r}")
    bad = [m for m in v["methods"] if m not in METHODS]
    _check(not bad, "methods", f"unknown method(s) {bad}; choose from {METHODS}")
    _check(len(v["methods"]) > 0, "methods", "at least one method is required")
    _check(v["t"] >= 1, "t", f"need at least one snapshot, got {v['t']}")
    _check(v["m"] >= 2, "m", f"need at least 2 antennas, got {v['m']}")
    _check(1 <= v["mc"] < v["m"], "mc", f"need 1 <= mc < m, got mc={v['mc']}, m={v['m']}")
    if kind in ("snr", "iterations", "debug"):
        _check(2 <= v["k"] < v["m"], "k", f"need 2 <= k < m, got k={v['k']}, m={v['m']}")
    if kind == "sources":
        _check(v["k-min"] >= 2, "k-min", f"must be at least 2, got {v['k-min']}")
        _check(v["k-max"] < v["m"], "k-max", f"must be smaller than m={v['m']}, got {v['k-max']}")
        _check(v["k-min"] <= v["k-max"], "k-max", "must not be below k-min")
    _check(len(v["snr-grid"]) > 0, "snr-grid", "must not be empty")
    _check(all(np.isfinite(v["snr-grid"])), "snr-grid", "must be finite")
    _check(np.isfinite(v["snr"]), "snr", "must be finite")
    _check(v["iterations"] >= 1, "iterations", f"must be at least 1, got {v['iterations']}")
    _check(v["grid-points"] >= 3, "grid-points", f"must be at least 3, got {v['grid-points']}")
    _check(v["epsilon"] > 0, "epsilon", f"must be positive, got {v['epsilon']}")
    _check(v["delta"] is None or v["delta"] > 0, "delta", f"must be positive, got {v['delta']}")
    _check(v["max-iters"] >= 1, "max-iters", f"must be at least 1, got {v['max-iters']}")
    _check(0 <= v["trim"] < 1, "trim", f"must lie in [0, 1), got {v['trim']}")
    _check(v["threshold"] > 0, "threshold", f"must be positive, got {v['threshold']}")
    _check(v["min-separation"] >= 0, "min-separation", "must be non-negative")
    _check(v["n-jobs"] != 0, "n-jobs", "must be non-zero")

    # lengths are stored in wavelengths; only user-supplied ones can be in meters
    meters = v["length-unit"] == "meters"
    length = {k: v[k] / v["wavelength"] if meters and k in given else v[k]
              for k in ("h", "sigma-x", "sigma-y", "min-spacing")}
    geometry = GeometryConfig(
        n_antennas=v["m"], n_calibrated=v["mc"], region=length["h"], wavelength=1.0,
        sigma_x=length["sigma-x"], sigma_y=length["sigma-y"], layout=v["layout"],
        min_spacing=length["min-spacing"],
    ).validate()
    try:
        ao = AOConfig(epsilon=v["epsilon"], delta=v["delta"], max_iter=v["max-iters"],
                      grid_points=v["grid-points"], mode=v["mode"])
    except InvalidArgumentError as exc:
        raise ConfigError("ao", str(exc)) from exc

    experiment = ExperimentConfig(
        geometry=geometry, ao=ao, n_snapshots=v["t"], n_sources=v["k"], snr_db=v["snr"],
        snr_grid=tuple(v["snr-grid"]), k_min=v["k-min"], k_max=v["k-max"],
        iterations=v["iterations"], trials=v["trials"], trim=v["trim"],
        threshold_deg=v["threshold"], min_separation_deg=v["min-separation"],
        methods=tuple(v["methods"]), n_jobs=v["n-jobs"],
    )
    effective = {k: val for k, val in sorted(v.items()) if k not in ("out", "n-jobs")}
    return RunConfig(command=command, experiment=experiment, seed=v["seed"], out=v["out"],
                     format=v["format"], effective=effective)
