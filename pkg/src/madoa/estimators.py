"""scikit-learn compatible estimators.

Snapshots follow the scikit-learn layout: ``X`` has shape
``(n_snapshots, n_antennas)``, i.e. it is the transpose of the
antennas-by-snapshots matrix used by the lower-level functions.
"""

import numbers

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_scalar
from sklearn.utils.validation import check_is_fitted

from .calibration import MODES, AOConfig, ao_calibrate
from .exceptions import InvalidArgumentError
from .geometry import DEFAULT_ANGLE_BOUNDS
from .subspace import (
    DEFAULT_GRID_POINTS,
    angle_grid,
    decompose,
    find_peaks,
    pseudospectrum,
    sample_covariance,
)
from .validation import check_covariance, check_snapshots


def _split_positions(positions, name):
    if positions is None:
        raise InvalidArgumentError(f"{name} must be given")
    p = np.asarray(positions, dtype=float)
    if p.ndim == 1:
        return p, np.zeros_like(p)
    if p.ndim == 2 and p.shape[1] == 2:
        return p[:, 0].copy(), p[:, 1].copy()
    raise InvalidArgumentError(f"{name} must have shape (M,) or (M, 2), got {p.shape}")


def _covariance_from_X(X, n_antennas):
    X = np.asarray(X)
    if X.ndim != 2:
        raise InvalidArgumentError(f"X must be 2-D (n_snapshots, n_antennas), got shape {X.shape}")
    return sample_covariance(check_snapshots(X.T, n_antennas))


class MUSIC(BaseEstimator):
    """MUSIC direction finding for an array with known element positions.

    Parameters
    ----------
    n_sources : int
        Number of sources to locate.
    positions : array-like of shape (M,) or (M, 2)
        Element coordinates in wavelengths (``x`` only, or ``(x, y)``).
    grid_points : int
        Size of the search grid spanning ``angle_bounds``.
    angle_bounds : tuple of float
        Search interval in radians.
    wavelength : float
        Wavelength in the unit of ``positions``.

    Attributes
    ----------
    doa_ : ndarray of shape (n_sources,)
        Estimated directions in radians, ascending.
    spectrum_ : Pseudospectrum
    degraded_ : bool
        True when fewer than ``n_sources`` spectral peaks were found.
    eigenvalues_ : ndarray of shape (M,)
    """

    def __init__(self, n_sources=1, positions=None, grid_points=DEFAULT_GRID_POINTS,
                 angle_bounds=DEFAULT_ANGLE_BOUNDS, wavelength=1.0):
        self.n_sources = n_sources
        self.positions = positions
        self.grid_points = grid_points
        self.angle_bounds = angle_bounds
        self.wavelength = wavelength

    def fit(self, X, y=None):
        x, _ = _split_positions(self.positions, "positions")
        return self.fit_covariance(_covariance_from_X(X, x.shape[0]))

    def fit_covariance(self, R):
        x, y = _split_positions(self.positions, "positions")
        M = x.shape[0]
        check_scalar(self.n_sources, "n_sources", numbers.Integral, min_val=1, max_val=M - 1)
        check_scalar(self.grid_points, "grid_points", numbers.Integral, min_val=3)
        R = check_covariance(R)
        if R.shape[0] != M:
            raise InvalidArgumentError(f"covariance is {R.shape[0]}x{R.shape[0]} but M={M}")
        sub = decompose(R, self.n_sources)
        grid = angle_grid(self.grid_points, self.angle_bounds)
        self.spectrum_ = pseudospectrum(sub.noise, x, y, grid, self.wavelength)
        self.doa_, self.degraded_ = find_peaks(sub.noise, x, y, grid, self.n_sources, self.wavelength)
        self.eigenvalues_ = sub.eigenvalues
        return self


class SelfCalibratingMUSIC(BaseEstimator):
    """Joint DOA and antenna-position-error estimation for a movable-antenna array.

    Parameters
    ----------
    n_sources : int
        Number of sources, at least 2.
    nominal_positions : array-like of shape (M,) or (M, 2)
        Nominal element coordinates in wavelengths.
    n_calibrated : int
        The first ``n_calibrated`` elements are assumed error free.
    epsilon : float
        Relative diagonal loading of the constrained quadratic.
    delta : float or None
        Convergence threshold on the squared DOA change (rad^2).
    max_iter : int
    grid_points : int
    angle_bounds : tuple of float
    mode : {"literal", "variant"}
        ``literal`` builds the quadratic from the nominal positions and
        re-estimates the full error each iteration; ``variant`` builds it
        from the current estimate and accumulates a residual correction.
    wavelength : float

    Attributes
    ----------
    doa_ : ndarray of shape (n_sources,)
    position_errors_ : ndarray of shape (M, 2)
    positions_ : ndarray of shape (M, 2)
    n_iter_ : int
    converged_ : bool
    history_ : list of IterationRecord
    noise_subspace_ : ndarray of shape (M, M - n_sources)
    """

    def __init__(self, n_sources=2, nominal_positions=None, n_calibrated=1, epsilon=1e-6,
                 delta=None, max_iter=100, grid_points=DEFAULT_GRID_POINTS,
                 angle_bounds=DEFAULT_ANGLE_BOUNDS, mode="literal", wavelength=1.0):
        self.n_sources = n_sources
        self.nominal_positions = nominal_positions
        self.n_calibrated = n_calibrated
        self.epsilon = epsilon
        self.delta = delta
        self.max_iter = max_iter
        self.grid_points = grid_points
        self.angle_bounds = angle_bounds
        self.mode = mode
        self.wavelength = wavelength

    def _config(self):
        check_scalar(self.epsilon, "epsilon", numbers.Real, min_val=0, include_boundaries="neither")
        check_scalar(self.max_iter, "max_iter", numbers.Integral, min_val=1)
        check_scalar(self.grid_points, "grid_points", numbers.Integral, min_val=3)
        if self.mode not in MODES:
            raise InvalidArgumentError(f"mode must be one of {MODES}, got {self.mode!r}")
        return AOConfig(epsilon=self.epsilon, delta=self.delta, max_iter=self.max_iter,
                        grid_points=self.grid_points, angle_bounds=tuple(self.angle_bounds),
                        mode=self.mode)

    def fit(self, X, y=None):
        x, _ = _split_positions(self.nominal_positions, "nominal_positions")
        return self.fit_covariance(_covariance_from_X(X, x.shape[0]))

    def fit_covariance(self, R):
        x, y = _split_positions(self.nominal_positions, "nominal_positions")
        M = x.shape[0]
        check_scalar(self.n_sources, "n_sources", numbers.Integral, min_val=2, max_val=M - 1)
        check_scalar(self.n_calibrated, "n_calibrated", numbers.Integral, min_val=1, max_val=M - 1)
        R = check_covariance(R)
        state = ao_calibrate(R, x, self.n_sources, self.n_calibrated,
                             self._config(), self.wavelength, nominal_y=y)
        self.state_ = state
        self.noise_subspace_ = decompose(R, self.n_sources).noise
        self.doa_ = state.theta
        self.position_errors_ = state.ape
        self.positions_ = state.positions
        self.n_iter_ = state.iteration
        self.converged_ = state.converged
        self.history_ = state.history
        return self

    def pseudospectrum(self, grid=None):
        """MUSIC spectrum of the fitted data evaluated at the calibrated positions."""
        check_is_fitted(self, "state_")
        grid = angle_grid(self.grid_points, self.angle_bounds) if grid is None else grid
        x, y = self.positions_.T
        return pseudospectrum(self.noise_subspace_, x, y, grid, self.wavelength)
