"""Alternating-optimization self-calibration of DOA and antenna position errors.

Each iteration runs two stages on a fixed noise subspace ``E_N``:

1. DOA update: MUSIC peak search with the steering vectors built from the
   current position estimate.
2. Position-error update: for every source direction, the error part of the
   steering vector minimizes ``v^H Qbar v`` subject to ``v_m = 1`` on the
   calibrated antennas, which has a closed form via Lagrange multipliers.
   The per-antenna phases of the solutions are then mapped to ``(dx, dy)``
   by least squares across the source directions.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .exceptions import (
    DegenerateGeometryError,
    InvalidArgumentError,
    NumericalFailureError,
    UnsupportedConfigurationError,
)
from .geometry import DEFAULT_ANGLE_BOUNDS, steering_matrix
from .subspace import DEFAULT_GRID_POINTS, angle_grid, decompose, find_peaks
from .validation import check_vector

EPSILON_FLOOR = 1e-12
MODES = ("literal", "variant")


def constraint_matrix(n_antennas, n_calibrated):
    """``W = [I; 0]`` selecting the calibrated antennas."""
    if not 1 <= n_calibrated <= n_antennas:
        raise InvalidArgumentError(
            f"need 1 <= n_calibrated <= {n_antennas}, got {n_calibrated}"
        )
    return np.eye(n_antennas, n_calibrated)


def build_q(steering, noise):
    """``diag(a)^H E_N E_N^H diag(a)`` for a steering vector ``a``.

    With ``noise`` of shape (M, M-K) the result has rank M-K.
    """
    steering = np.asarray(steering)
    projector = noise @ noise.conj().T
    Q = steering.conj()[:, None] * projector * steering[None, :]
    return 0.5 * (Q + Q.conj().T)


def regularize(Q, epsilon=1e-6):
    """Diagonal loading ``Q + eps_abs I`` with ``eps_abs = epsilon * trace(Q) / M``.

    ``eps_abs`` never drops below ``EPSILON_FLOOR``, so a zero ``Q`` still
    yields an invertible matrix.
    """
    if not epsilon > 0:
        raise InvalidArgumentError(f"epsilon must be positive, got {epsilon}")
    M = Q.shape[0]
    eps_abs = max(epsilon * np.trace(Q).real / M, EPSILON_FLOOR)
    return Q + eps_abs * np.eye(M)


def solve_error_steering(Q_bar, W):
    """Minimizer of ``v^H Q_bar v`` subject to ``W^H v = 1``.

    Closed form ``v = -1/2 Q_bar^{-1} W mu`` with
    ``mu = -2 (W^H Q_bar^{-1} W)^{-1} 1``, realized with Hermitian solves.
    ``W`` may also be given as the number of calibrated antennas.
    """
    M = Q_bar.shape[0]
    if np.ndim(W) == 0:
        W = constraint_matrix(M, int(W))
    ones = np.ones(W.shape[1])
    try:
        X = scipy.linalg.solve(Q_bar, W, assume_a="her")
        S = W.conj().T @ X
        mu = -2.0 * scipy.linalg.solve(0.5 * (S + S.conj().T), ones, assume_a="her")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailureError(f"constrained solve failed: {exc}") from exc
    v = -0.5 * (X @ mu)
    if not np.all(np.isfinite(v)):
        raise NumericalFailureError("constrained solve produced non-finite values (epsilon too small?)")
    return v


def direction_matrix(angles):
    """Rows ``[cos theta_k, sin theta_k]``; shape (K, 2)."""
    angles = np.asarray(angles, dtype=float)
    return np.column_stack([np.cos(angles), np.sin(angles)])


def extract_antenna_error(error_steering, angles, n_calibrated, wavelength=1.0):
    """Least-squares position errors from the phases of the error steering vectors.

    Parameters
    ----------
    error_steering : ndarray of shape (M, K)
        Column ``k`` is the estimated error steering vector for ``angles[k]``.
    angles : array-like of shape (K,)
    n_calibrated : int
        Leading antennas whose error is pinned to zero (never solved).

    Returns
    -------
    ape : ndarray of shape (M, 2)
        Estimated ``(dx, dy)`` per antenna.
    residual : ndarray of shape (M,)
        Norm of the phase least-squares residual per antenna, in radians.
    """
    error_steering = np.asarray(error_steering)
    angles = np.asarray(angles, dtype=float)
    if error_steering.ndim == 1:
        error_steering = error_steering[:, None]
    K = angles.shape[0]
    if K < 2:
        raise UnsupportedConfigurationError(
            "recovering both position axes needs at least two sources"
        )
    if error_steering.shape[1] != K:
        raise InvalidArgumentError("one error steering vector is needed per angle")
    D = direction_matrix(angles)
    s = np.linalg.svd(D, compute_uv=False)
    if s[-1] <= 1e-12 * s[0]:
        raise DegenerateGeometryError("source directions do not span two dimensions")

    phases = np.angle(error_steering).T  # (K, M), principal branch
    solution, *_ = np.linalg.lstsq(D, phases, rcond=None)
    residual = np.linalg.norm(D @ solution - phases, axis=0)
    ape = (wavelength / (2 * np.pi)) * solution.T
    ape[:n_calibrated] = 0.0
    residual[:n_calibrated] = 0.0
    return ape, residual


@dataclass(frozen=True)
class AOConfig:
    """Settings of the alternating optimization.

    ``delta`` is the stopping threshold on the squared change of the sorted
    DOA vector between iterations, in radians squared; ``None`` means
    ``K * (1e-4 deg)^2``. The iteration contracts linearly and often slowly,
    so a coarser threshold stops well short of the fixed point.
    """

    epsilon: float = 1e-6
    delta: float = None
    max_iter: int = 100
    grid_points: int = DEFAULT_GRID_POINTS
    angle_bounds: tuple = DEFAULT_ANGLE_BOUNDS
    mode: str = "literal"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidArgumentError(f"epsilon must be positive, got {self.epsilon}")
        if self.delta is not None and not self.delta > 0:
            raise InvalidArgumentError(f"delta must be positive, got {self.delta}")
        if self.max_iter < 1:
            raise InvalidArgumentError(f"max_iter must be at least 1, got {self.max_iter}")
        if self.grid_points < 3:
            raise InvalidArgumentError(f"grid needs at least 3 points, got {self.grid_points}")
        if self.mode not in MODES:
            raise InvalidArgumentError(f"mode must be one of {MODES}, got {self.mode!r}")

    def threshold(self, n_sources):
        if self.delta is not None:
            return self.delta
        return n_sources * np.deg2rad(1e-4) ** 2


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    theta: np.ndarray
    change: float
    ape: np.ndarray
    degraded: bool


@dataclass
class CalibrationState:
    nominal_x: np.ndarray
    nominal_y: np.ndarray
    n_calibrated: int
    iteration: int = 0
    theta: np.ndarray = None
    ape: np.ndarray = None
    history: list = field(default_factory=list)
    converged: bool = False

    @property
    def positions(self):
        """Estimated actual positions, shape (M, 2)."""
        return np.column_stack([self.nominal_x, self.nominal_y]) + self.ape

    @property
    def degraded(self):
        return bool(self.history) and self.history[-1].degraded


def ao_calibrate(R, nominal_x, n_sources, n_calibrated, config=None, wavelength=1.0,
                 nominal_y=None):
    """Jointly estimate source directions and antenna position errors.

    Parameters
    ----------
    R : ndarray of shape (M, M)
        Covariance of the received snapshots; its noise subspace is computed
        once and reused in every iteration.
    nominal_x : array-like of shape (M,)
        Nominal antenna positions along the array axis.
    n_sources : int
        Number of sources ``K``, with ``2 <= K < M``.
    n_calibrated : int
        Number of leading antennas known to sit at their nominal position.
    config : AOConfig, optional

    Returns
    -------
    CalibrationState
        Final estimates with the full per-iteration history. Hitting
        ``max_iter`` is reported through ``converged=False``.
    """
    config = AOConfig() if config is None else config
    nominal_x = check_vector(nominal_x, "nominal_x")
    M = nominal_x.shape[0]
    nominal_y = np.zeros(M) if nominal_y is None else check_vector(nominal_y, "nominal_y", M)
    if n_sources < 2:
        raise UnsupportedConfigurationError(
            "self-calibration of both position axes needs at least two sources"
        )
    if n_sources >= M:
        raise InvalidArgumentError(f"need fewer sources than antennas, got K={n_sources}, M={M}")
    if not 1 <= n_calibrated < M:
        raise InvalidArgumentError(f"need 1 <= n_calibrated < {M}, got {n_calibrated}")
    if R.shape != (M, M):
        raise InvalidArgumentError(f"covariance must be {M}x{M}, got {R.shape}")

    noise = decompose(R, n_sources).noise
    grid = angle_grid(config.grid_points, config.angle_bounds)
    W = constraint_matrix(M, n_calibrated)
    delta = config.threshold(n_sources)

    state = CalibrationState(nominal_x=nominal_x, nominal_y=nominal_y, n_calibrated=n_calibrated,
                             ape=np.zeros((M, 2)))
    previous = None
    for l in range(1, config.max_iter + 1):
        x_hat, y_hat = state.positions.T
        peaks = find_peaks(noise, x_hat, y_hat, grid, n_sources, wavelength)
        theta = peaks.angles

        if config.mode == "literal":
            A = steering_matrix(nominal_x, nominal_y, theta, wavelength)
        else:
            A = steering_matrix(x_hat, y_hat, theta, wavelength)
        error_steering = np.column_stack([
            solve_error_steering(regularize(build_q(A[:, k], noise), config.epsilon), W)
            for k in range(n_sources)
        ])
        ape, _ = extract_antenna_error(error_steering, theta, n_calibrated, wavelength)
        if config.mode == "variant":
            ape = state.ape + ape
            ape[:n_calibrated] = 0.0

        change = np.inf if previous is None else float(np.sum((theta - previous) ** 2))
        state.iteration = l
        state.theta = theta
        state.ape = ape
        state.history.append(IterationRecord(l, theta, change, ape, peaks.degraded))
        if change <= delta:
            state.converged = True
            break
        previous = theta
    return state
