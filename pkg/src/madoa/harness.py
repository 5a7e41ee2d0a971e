"""Monte Carlo experiments: baselines, error metrics and parameter sweeps.

Every trial draws one geometry, one set of directions and one set of
unit-variance signal/noise samples from a generator seeded with
``(master_seed, trial_index)``. All methods in a trial see that same
realization; the ``proposed-x`` / ``proposed-y`` variants only zero one
error axis before forming their snapshots.
"""

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import linear_sum_assignment

from .calibration import AOConfig, ao_calibrate
from .exceptions import InvalidArgumentError, NumericalFailureError
from .geometry import (
    DEFAULT_ANGLE_BOUNDS,
    GeometryConfig,
    build_geometry,
    draw_scenario,
    draw_unit_signals,
    form_snapshots,
    snr_to_noise_power,
)
from .subspace import angle_grid, music, sample_covariance

METHODS = ("proposed-xy", "proposed-x", "proposed-y", "music-all", "music-calibrated")
PROPOSED = {"proposed-xy": "xy", "proposed-x": "x", "proposed-y": "y"}
EXPERIMENTS = ("snr", "iterations", "sources")
SWEEP_VARIABLE = {"snr": "snr_db", "iterations": "iteration", "sources": "k"}


# --- metrics -----------------------------------------------------------------

def pair_errors(estimates, truth):
    """Absolute errors after matching estimates to true angles.

    Uses the assignment minimizing the total absolute error; the result is
    ordered like ``truth``.
    """
    estimates = np.asarray(estimates, dtype=float)
    truth = np.asarray(truth, dtype=float)
    cost = np.abs(np.subtract.outer(truth, estimates))
    rows, cols = linear_sum_assignment(cost)
    errors = np.empty(truth.shape[0])
    errors[rows] = cost[rows, cols]
    return errors


def n_trimmed(n_trials, trim):
    """Trials dropped by :func:`trimmed_rmse`; at least one trial is always kept."""
    # guard against 0.05 * N landing a hair above an integer
    return min(int(math.ceil(trim * n_trials - 1e-9)), n_trials - 1)


def trimmed_rmse(errors, trim=0.05):
    """RMSE over the trials left after dropping the worst ``ceil(trim * N)``.

    The drop count is capped at ``N - 1``.

    ``errors`` has shape (N, K); trials are ranked by their total squared error.
    """
    errors = np.asarray(errors, dtype=float)
    if errors.ndim == 1:
        errors = errors[:, None]
    if errors.size == 0:
        raise InvalidArgumentError("trimmed_rmse needs at least one trial")
    if not 0 <= trim < 1:
        raise InvalidArgumentError(f"trim fraction must lie in [0, 1), got {trim}")
    sq = errors**2
    per_trial = sq.sum(axis=1)
    keep = np.argsort(per_trial, kind="stable")[: errors.shape[0] - n_trimmed(errors.shape[0], trim)]
    return float(np.sqrt(sq[keep].mean()))


def success_rate(errors, threshold=np.deg2rad(0.5)):
    """Fraction of (trial, source) errors not exceeding ``threshold``."""
    if not threshold > 0:
        raise InvalidArgumentError(f"threshold must be positive, got {threshold}")
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        raise InvalidArgumentError("success_rate needs at least one error")
    return float(np.mean(errors <= threshold))


def oracle_constrained_qp(Q_bar, W):
    """Solve ``min v^H Q_bar v  s.t.  W^H v = 1`` through the full KKT system.

    Independent of the substitution used by
    :func:`madoa.calibration.solve_error_steering`; meant as a test oracle.
    """
    M, Mc = W.shape
    kkt = np.zeros((M + Mc, M + Mc), dtype=complex)
    kkt[:M, :M] = 2 * Q_bar
    kkt[:M, M:] = W
    kkt[M:, :M] = W.conj().T
    rhs = np.concatenate([np.zeros(M), np.ones(Mc)])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"singular KKT system: {exc}") from exc
    return sol[:M]


# --- baselines ---------------------------------------------------------------

def run_baseline_music(R, geometry, n_sources, mode="all", grid=None):
    """Conventional MUSIC ignoring position errors.

    ``mode="all"`` uses every antenna at its nominal position;
    ``mode="calibrated"`` keeps only the error-free antennas. Returns ``None``
    when the calibrated subarray is too small (``K >= M_c``).
    """
    Mc = geometry.n_calibrated
    if mode == "all":
        return music(R, n_sources, geometry.nominal_x, geometry.nominal_y, grid, geometry.wavelength)
    if mode == "calibrated":
        if n_sources >= Mc:
            return None
        return music(R[:Mc, :Mc], n_sources, geometry.nominal_x[:Mc], geometry.nominal_y[:Mc],
                     grid, geometry.wavelength)
    raise InvalidArgumentError(f"baseline mode must be 'all' or 'calibrated', got {mode!r}")


# --- experiments -------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    """Simulation constants; defaults follow the reference setup at desk scale."""

    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    ao: AOConfig = field(default_factory=AOConfig)
    n_snapshots: int = 100
    n_sources: int = 3
    snr_db: float = 10.0
    snr_grid: tuple = (0.0, 5.0, 10.0, 15.0, 20.0)
    k_min: int = 2
    k_max: int = 7
    iterations: int = 40
    trials: int = 200
    trim: float = 0.05
    threshold_deg: float = 0.5
    min_separation_deg: float = 2.0
    angle_bounds: tuple = DEFAULT_ANGLE_BOUNDS
    methods: tuple = METHODS
    n_jobs: int = 1

    def grid(self, experiment):
        if experiment == "snr":
            return tuple(float(s) for s in self.snr_grid)
        if experiment == "iterations":
            return tuple(range(1, self.iterations + 1))
        if experiment == "sources":
            return tuple(range(self.k_min, self.k_max + 1))
        raise InvalidArgumentError(f"unknown experiment {experiment!r}")


@dataclass
class TrialMetrics:
    trial: int
    value: float
    method: str
    errors: np.ndarray
    ape_error: np.ndarray = None
    iterations: int = 0
    converged: bool = False
    degraded: bool = False
    feasible: bool = True
    iteration_errors: np.ndarray = None


@dataclass(frozen=True)
class Realization:
    geometry: object
    scenario: object
    signals: np.ndarray
    noise: np.ndarray

    def variant(self, axes):
        g = self.geometry
        if axes == "x":
            g = g.with_ape(ape_y=np.zeros(g.n_antennas))
        elif axes == "y":
            g = g.with_ape(ape_x=np.zeros(g.n_antennas))
        return g

    def snapshots(self, axes="xy"):
        return form_snapshots(self.variant(axes), self.scenario, self.signals, self.noise)


def draw_realization(config, n_sources, snr_db, rng):
    geometry = build_geometry(config.geometry, rng)
    scenario = draw_scenario(
        n_sources, rng, snr_db=snr_db, n_snapshots=config.n_snapshots,
        angle_bounds=config.angle_bounds, min_separation=np.deg2rad(config.min_separation_deg),
    )
    S, N = draw_unit_signals(n_sources, geometry.n_antennas, config.n_snapshots, rng)
    return Realization(geometry, scenario, S, N)


def trial_rng(master_seed, trial):
    return np.random.default_rng([int(master_seed), int(trial)])


def evaluate_methods(realization, config, methods, track_iterations=0):
    """Run every method on one realization; returns ``{method: TrialMetrics}`` without ids."""
    geom, scen = realization.geometry, realization.scenario
    K = scen.n_sources
    grid = angle_grid(config.ao.grid_points, config.ao.angle_bounds)
    covariances = {}

    def cov(axes):
        if axes not in covariances:
            covariances[axes] = sample_covariance(realization.snapshots(axes))
        return covariances[axes]

    out = {}
    for method in methods:
        if method in PROPOSED:
            axes = PROPOSED[method]
            truth = realization.variant(axes)
            state = ao_calibrate(cov(axes), geom.nominal_x, K, geom.n_calibrated, config.ao,
                                 geom.wavelength, nominal_y=geom.nominal_y)
            m = TrialMetrics(
                trial=-1, value=np.nan, method=method,
                errors=pair_errors(state.theta, scen.theta),
                ape_error=np.linalg.norm(state.ape - truth.ape, axis=1),
                iterations=state.iteration, converged=state.converged, degraded=state.degraded,
            )
            if track_iterations:
                hist = state.history
                m.iteration_errors = np.array([
                    pair_errors(hist[min(l, len(hist)) - 1].theta, scen.theta)
                    for l in range(1, track_iterations + 1)
                ])
        elif method in ("music-all", "music-calibrated"):
            peaks = run_baseline_music(cov("xy"), geom, K, method.split("-")[1], grid)
            if peaks is None:
                m = TrialMetrics(trial=-1, value=np.nan, method=method,
                                 errors=np.full(K, np.inf), feasible=False)
            else:
                m = TrialMetrics(trial=-1, value=np.nan, method=method,
                                 errors=pair_errors(peaks.angles, scen.theta),
                                 degraded=peaks.degraded)
        else:
            raise InvalidArgumentError(f"unknown method {method!r}")
        out[method] = m
    return out


def _run_trial(experiment, config, master_seed, trial):
    rng = trial_rng(master_seed, trial)
    results = []
    if experiment == "snr":
        # one realization, rescaled noise per SNR point
        grid = config.grid("snr")
        base = draw_realization(config, config.n_sources, grid[0], rng)
        for snr in grid:
            real = Realization(base.geometry, _with_snr(base.scenario, snr), base.signals, base.noise)
            for method, m in evaluate_methods(real, config, config.methods).items():
                m.trial, m.value = trial, snr
                results.append(m)
    elif experiment == "iterations":
        real = draw_realization(config, config.n_sources, config.snr_db, rng)
        for method, m in evaluate_methods(real, config, config.methods,
                                          track_iterations=config.iterations).items():
            m.trial = trial
            results.append(m)
    elif experiment == "sources":
        state = rng.bit_generator.state
        for K in config.grid("sources"):
            # identical geometry draw for every K
            rng.bit_generator.state = state
            real = draw_realization(config, K, config.snr_db, rng)
            for method, m in evaluate_methods(real, config, config.methods).items():
                m.trial, m.value = trial, K
                results.append(m)
    else:
        raise InvalidArgumentError(f"unknown experiment {experiment!r}")
    return results


def _with_snr(scenario, snr_db):
    return replace(scenario, noise_power=snr_to_noise_power(snr_db, float(scenario.source_powers[0])))


@dataclass
class SweepPoint:
    value: float
    method: str
    rmse_rad: float
    rmse_deg: float
    success_rate: float
    n_trials: int
    n_trimmed: int
    median_iterations: float = None
    converged_fraction: float = None
    median_max_error_deg: float = None


@dataclass
class SweepResult:
    experiment: str
    variable: str
    grid: tuple
    points: list
    trim: float
    threshold_deg: float
    n_trials: int
    trials: list = field(default_factory=list, repr=False)

    def point(self, value, method):
        for p in self.points:
            if p.value == value and p.method == method:
                return p
        raise KeyError((value, method))

    def trials_for(self, value, method):
        return [t for t in self.trials if t.method == method and t.value == value]

    @property
    def none_converged(self):
        proposed = [t for t in self.trials if t.method in PROPOSED]
        return bool(proposed) and not any(t.converged for t in proposed)

    def summary(self):
        return [asdict(p) for p in self.points]


def _aggregate(value, method, errors, trials, config):
    N = errors.shape[0]
    feasible = all(t.feasible for t in trials)
    threshold = np.deg2rad(config.threshold_deg)
    rmse = trimmed_rmse(errors, config.trim) if feasible else None
    point = SweepPoint(
        value=value, method=method,
        rmse_rad=rmse, rmse_deg=None if rmse is None else float(np.rad2deg(rmse)),
        success_rate=success_rate(errors, threshold) if feasible else 0.0,
        n_trials=N, n_trimmed=n_trimmed(N, config.trim) if feasible else 0,
    )
    if feasible:
        point.median_max_error_deg = float(np.rad2deg(np.median(errors.max(axis=1))))
    if method in PROPOSED:
        point.median_iterations = float(np.median([t.iterations for t in trials]))
        point.converged_fraction = float(np.mean([t.converged for t in trials]))
    return point


def run_sweep(experiment, config=None, master_seed=0):
    """Run one of the ``snr`` / ``iterations`` / ``sources`` experiments.

    The result is a deterministic function of ``(experiment, config, master_seed)``
    regardless of ``n_jobs``.
    """
    config = ExperimentConfig() if config is None else config
    if experiment not in EXPERIMENTS:
        raise InvalidArgumentError(f"experiment must be one of {EXPERIMENTS}, got {experiment!r}")
    if config.trials < 1:
        raise InvalidArgumentError("need at least one trial")
    jobs = Parallel(n_jobs=config.n_jobs)(
        delayed(_run_trial)(experiment, config, master_seed, t) for t in range(config.trials)
    )
    trials = [m for batch in jobs for m in batch]

    grid = config.grid(experiment)
    points = []
    if experiment == "iterations":
        for l in grid:
            for method in config.methods:
                sel = [t for t in trials if t.method == method]
                if method in PROPOSED:
                    errors = np.array([t.iteration_errors[l - 1] for t in sel])
                else:
                    errors = np.array([t.errors for t in sel])
                points.append(_aggregate(l, method, errors, sel, config))
    else:
        for value in grid:
            for method in config.methods:
                sel = [t for t in trials if t.method == method and t.value == value]
                points.append(_aggregate(value, method, np.array([t.errors for t in sel]), sel, config))
    return SweepResult(
        experiment=experiment, variable=SWEEP_VARIABLE[experiment], grid=grid, points=points,
        trim=config.trim, threshold_deg=config.threshold_deg, n_trials=config.trials, trials=trials,
    )
