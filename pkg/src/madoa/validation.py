"""Input validation helpers.

scikit-learn's ``check_array`` rejects complex input, so snapshot and
covariance checks live here.
"""

import numbers

import numpy as np

from .exceptions import InvalidArgumentError


def check_angle(theta, name="theta"):
    if not isinstance(theta, numbers.Real) and np.ndim(theta) != 0:
        raise InvalidArgumentError(f"{name} must be a real scalar, got {theta!r}")
    theta = float(theta)
    if not np.isfinite(theta):
        raise InvalidArgumentError(f"{name} must be finite, got {theta}")
    return theta


def check_angles(angles, name="angles"):
    angles = np.asarray(angles, dtype=float)
    if angles.ndim == 0:
        angles = angles.reshape(1)
    if angles.ndim != 1:
        raise InvalidArgumentError(f"{name} must be one-dimensional, got shape {angles.shape}")
    if not np.all(np.isfinite(angles)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return angles


def check_vector(x, name, length=None, dtype=float):
    x = np.asarray(x, dtype=dtype)
    if x.ndim != 1:
        raise InvalidArgumentError(f"{name} must be one-dimensional, got shape {x.shape}")
    if length is not None and x.shape[0] != length:
        raise InvalidArgumentError(f"{name} must have length {length}, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return x


def check_snapshots(Z, n_antennas=None):
    """Validate an antennas-by-snapshots matrix and return it as complex128."""
    Z = np.asarray(Z)
    if Z.ndim != 2:
        raise InvalidArgumentError(f"snapshot matrix must be 2-D, got shape {Z.shape}")
    if Z.shape[1] < 1:
        raise InvalidArgumentError("snapshot matrix needs at least one snapshot")
    if n_antennas is not None and Z.shape[0] != n_antennas:
        raise InvalidArgumentError(
            f"snapshot matrix has {Z.shape[0]} rows but the array has {n_antennas} antennas"
        )
    Z = Z.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(Z)):
        raise InvalidArgumentError("snapshot matrix contains non-finite values")
    return Z


def check_covariance(R, atol=1e-10):
    """Validate a square Hermitian matrix; returns its exactly-Hermitian part."""
    R = np.asarray(R)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise InvalidArgumentError(f"covariance must be square, got shape {R.shape}")
    R = R.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(R)):
        raise InvalidArgumentError("covariance contains non-finite values")
    scale = max(np.linalg.norm(R), 1.0)
    if np.linalg.norm(R - R.conj().T) > atol * scale:
        raise InvalidArgumentError("covariance is not Hermitian")
    return 0.5 * (R + R.conj().T)


def check_source_count(n_sources, n_antennas, minimum=1):
    if not isinstance(n_sources, numbers.Integral) or isinstance(n_sources, bool):
        raise InvalidArgumentError(f"source count must be an integer, got {n_sources!r}")
    if n_sources < minimum:
        raise InvalidArgumentError(f"source count must be >= {minimum}, got {n_sources}")
    if n_sources >= n_antennas:
        raise InvalidArgumentError(
            f"source count {n_sources} must be smaller than the antenna count {n_antennas}"
        )
    return int(n_sources)
