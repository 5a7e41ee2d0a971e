"""Covariance estimation, signal/noise subspaces and the MUSIC pseudospectrum."""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import InvalidArgumentError, NumericalFailureError
from .geometry import DEFAULT_ANGLE_BOUNDS, steering_matrix
from .validation import check_covariance, check_snapshots

DEFAULT_GRID_POINTS = 1800


def sample_covariance(Z):
    """``(1/T) Z Z^H`` made exactly Hermitian."""
    Z = getattr(Z, "Z", Z)
    Z = check_snapshots(Z)
    R = Z @ Z.conj().T / Z.shape[1]
    return 0.5 * (R + R.conj().T)


def exact_covariance(geometry, scenario):
    """Infinite-snapshot covariance ``A R_S A^H + noise_power * I`` at the actual positions."""
    A = steering_matrix(geometry.actual_x, geometry.actual_y, scenario.theta, geometry.wavelength)
    R = (A * scenario.source_powers) @ A.conj().T
    R = R + scenario.noise_power * np.eye(geometry.n_antennas)
    return 0.5 * (R + R.conj().T)


@dataclass(frozen=True)
class SubspaceDecomposition:
    eigenvalues: np.ndarray
    signal: np.ndarray
    noise: np.ndarray

    @property
    def n_sources(self):
        return self.signal.shape[1]


def decompose(R, n_sources):
    """Split ``R`` into the eigenvectors of its ``n_sources`` largest eigenvalues and the rest.

    Eigenvalues are returned in descending order.
    """
    R = check_covariance(R, atol=1e-8)
    M = R.shape[0]
    if not 0 <= n_sources < M:
        raise InvalidArgumentError(
            f"need 0 <= n_sources < {M} to leave a noise subspace, got {n_sources}"
        )
    try:
        w, V = np.linalg.eigh(R)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"eigendecomposition failed: {exc}") from exc
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(V))):
        raise NumericalFailureError("eigendecomposition produced non-finite values")
    w, V = w[::-1], V[:, ::-1]
    return SubspaceDecomposition(
        eigenvalues=w, signal=V[:, :n_sources], noise=V[:, n_sources:]
    )


def angle_grid(n_points=DEFAULT_GRID_POINTS, bounds=DEFAULT_ANGLE_BOUNDS):
    if n_points < 2:
        raise InvalidArgumentError(f"grid needs at least 2 points, got {n_points}")
    lo, hi = bounds
    if not lo < hi:
        raise InvalidArgumentError(f"grid bounds must be increasing, got {bounds}")
    return np.linspace(lo, hi, n_points)


@dataclass(frozen=True)
class Pseudospectrum:
    grid: np.ndarray
    values: np.ndarray

    @property
    def null_spectrum(self):
        """The MUSIC denominator ``a^H E_N E_N^H a`` on the grid (after flooring)."""
        return 1.0 / self.values


def music_denominator(noise, x, y, angles, wavelength=1.0):
    """``||E_N^H a(angle)||^2`` for each angle, without any flooring."""
    A = steering_matrix(x, y, angles, wavelength)
    proj = noise.conj().T @ A
    return np.einsum("ij,ij->j", proj.conj(), proj).real


def pseudospectrum(noise, x, y, grid=None, wavelength=1.0):
    """MUSIC pseudospectrum ``1 / (a^H E_N E_N^H a)`` over ``grid``.

    The denominator is floored at ``1e-18 * M`` so exact orthogonality
    does not produce infinities.
    """
    noise = np.asarray(noise)
    if noise.ndim != 2 or noise.shape[1] == 0:
        raise InvalidArgumentError("noise subspace must have at least one column")
    grid = angle_grid() if grid is None else np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise InvalidArgumentError("grid must be strictly increasing with at least 2 points")
    M = noise.shape[0]
    den = music_denominator(noise, x, y, grid, wavelength)
    return Pseudospectrum(grid=grid, values=1.0 / np.maximum(den, 1e-18 * M))


class Peaks(NamedTuple):
    angles: np.ndarray
    degraded: bool


def _refine(grid, null, i):
    # the MUSIC denominator is locally quadratic around a source, so the
    # vertex of a parabola through it is accurate where one fitted to the
    # spectrum itself is not
    a, b, c = null[i - 1], null[i], null[i + 1]
    curv = a - 2 * b + c
    if curv <= 0:
        return grid[i]
    offset = np.clip(0.5 * (a - c) / curv, -0.5, 0.5)
    if offset < 0:
        return grid[i] + offset * (grid[i] - grid[i - 1])
    return grid[i] + offset * (grid[i + 1] - grid[i])


def local_maxima(values):
    """Interior indices strictly above the left neighbour and not below the right one."""
    v = values
    i = np.arange(1, v.size - 1)
    return i[(v[i] > v[i - 1]) & (v[i] >= v[i + 1])]


def _select(spectrum, n_sources):
    grid, values = spectrum.grid, spectrum.values
    if n_sources < 1:
        raise InvalidArgumentError(f"need at least one source, got {n_sources}")
    if n_sources > grid.size:
        raise InvalidArgumentError("more sources requested than grid points")
    peaks = local_maxima(values)
    peaks = peaks[np.argsort(-values[peaks], kind="stable")][:n_sources]
    null = 1.0 / values
    found = np.array([_refine(grid, null, i) for i in peaks], dtype=float)
    fill = np.empty(0)
    if len(peaks) < n_sources:
        order = np.argsort(-values, kind="stable")
        fill = grid[order[~np.isin(order, peaks)][: n_sources - len(peaks)]]
    return found, fill


def pick_peaks(spectrum, n_sources):
    """The ``n_sources`` highest local maxima, refined and sorted ascending.

    Ties in height go to the smaller angle. When fewer local maxima exist,
    the remaining slots are filled with the largest unused grid values and
    the result is flagged as degraded.
    """
    found, fill = _select(spectrum, n_sources)
    return Peaks(angles=np.sort(np.concatenate([found, fill])), degraded=fill.size > 0)


def polish(noise, x, y, angles, step, wavelength=1.0, rounds=3):
    """Sharpen peak estimates by repeated parabolic fits to the exact denominator.

    Each round fits a parabola through three denominator evaluations spaced
    ``h`` apart around the current estimate, then shrinks ``h`` tenfold.
    The starting ``h`` is a quarter of ``step``; moves are clipped to ``h``.
    """
    t = np.array(angles, dtype=float)
    if t.size == 0:
        return t
    h = 0.25 * step
    for _ in range(rounds):
        pts = np.concatenate([t - h, t, t + h])
        a, b, c = music_denominator(noise, x, y, pts, wavelength).reshape(3, -1)
        curv = a - 2 * b + c
        with np.errstate(divide="ignore", invalid="ignore"):
            offset = np.where(curv > 0, 0.5 * (a - c) / curv, 0.0)
        t = t + h * np.clip(offset, -1.0, 1.0)
        h *= 0.1
    return t


def find_peaks(noise, x, y, grid=None, n_sources=1, wavelength=1.0):
    """Grid search for the ``n_sources`` MUSIC peaks followed by :func:`polish`.

    Only genuine local maxima are polished; degraded fill-in values stay on
    the grid.
    """
    spectrum = pseudospectrum(noise, x, y, grid, wavelength)
    found, fill = _select(spectrum, n_sources)
    step = float(np.min(np.diff(spectrum.grid)))
    found = polish(noise, x, y, found, step, wavelength)
    return Peaks(angles=np.sort(np.concatenate([found, fill])), degraded=fill.size > 0)


def music(R, n_sources, x, y, grid=None, wavelength=1.0):
    """Plain MUSIC on covariance ``R`` with steering built from ``(x, y)``."""
    noise = decompose(R, n_sources).noise
    return find_peaks(noise, x, y, grid, n_sources, wavelength)
