"""Array geometry, antenna position errors and the narrowband snapshot model.

All lengths are expressed in units of the carrier wavelength unless a
different ``wavelength`` is given explicitly; the phase of antenna ``m`` for
a plane wave from ``theta`` is ``2*pi/wavelength * (x_m cos theta + y_m sin theta)``.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import ConfigError, InvalidArgumentError
from .validation import check_angle, check_angles, check_vector

DEFAULT_ANGLE_BOUNDS = (np.pi / 6, 5 * np.pi / 6)
POSITION_CHOICES = ("nominal", "actual", "error-only")
LAYOUTS = ("random", "uniform")


def steering_matrix(x, y, angles, wavelength=1.0):
    """Array response for every angle in ``angles``.

    Parameters
    ----------
    x, y : array-like of shape (M,)
        Antenna coordinates.
    angles : float or array-like of shape (G,)
        Directions in radians.
    wavelength : float
        Carrier wavelength in the same unit as ``x`` and ``y``.

    Returns
    -------
    ndarray of shape (M, G), complex
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    angles = check_angles(angles)
    phase = (2 * np.pi / wavelength) * (
        np.multiply.outer(x, np.cos(angles)) + np.multiply.outer(y, np.sin(angles))
    )
    return np.exp(1j * phase)


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ArrayGeometry:
    """Nominal movable-antenna layout plus the (unknown to the receiver) position errors.

    The first ``n_calibrated`` antennas carry no position error. Actual
    positions are derived on access so they can never disagree with the
    nominal layout and the errors.
    """

    nominal_x: np.ndarray
    ape_x: np.ndarray
    ape_y: np.ndarray
    n_calibrated: int
    region: float = 12.0
    wavelength: float = 1.0
    nominal_y: np.ndarray = field(default=None)

    def __post_init__(self):
        nominal_x = check_vector(self.nominal_x, "nominal_x")
        M = nominal_x.shape[0]
        nominal_y = np.zeros(M) if self.nominal_y is None else self.nominal_y
        object.__setattr__(self, "nominal_x", _frozen(nominal_x))
        object.__setattr__(self, "nominal_y", _frozen(check_vector(nominal_y, "nominal_y", M)))
        object.__setattr__(self, "ape_x", _frozen(check_vector(self.ape_x, "ape_x", M)))
        object.__setattr__(self, "ape_y", _frozen(check_vector(self.ape_y, "ape_y", M)))

        if not self.wavelength > 0:
            raise InvalidArgumentError(f"wavelength must be positive, got {self.wavelength}")
        if not self.region > 0:
            raise InvalidArgumentError(f"region length must be positive, got {self.region}")
        if not 1 <= self.n_calibrated < M:
            raise InvalidArgumentError(
                f"need 1 <= n_calibrated < {M} antennas, got n_calibrated={self.n_calibrated}"
            )
        tol = 1e-12 * self.region
        if np.any(nominal_x < -tol) or np.any(nominal_x > self.region + tol):
            raise InvalidArgumentError("nominal positions must lie inside [0, region]")
        Mc = self.n_calibrated
        if np.any(self.ape_x[:Mc] != 0) or np.any(self.ape_y[:Mc] != 0):
            raise InvalidArgumentError("calibrated antennas must have zero position error")
        if np.any(np.abs(self.ape_x) >= self.wavelength) or np.any(
            np.abs(self.ape_y) >= self.wavelength
        ):
            raise InvalidArgumentError("position errors must be smaller than one wavelength")

    @property
    def n_antennas(self):
        return self.nominal_x.shape[0]

    @property
    def actual_x(self):
        return self.nominal_x + self.ape_x

    @property
    def actual_y(self):
        return self.nominal_y + self.ape_y

    @property
    def ape(self):
        """Position errors as an (M, 2) array of (dx, dy)."""
        return np.column_stack([self.ape_x, self.ape_y])

    def positions(self, choice="actual"):
        """Return the ``(x, y)`` coordinate pair for ``choice``."""
        if choice == "nominal":
            return self.nominal_x, self.nominal_y
        if choice == "actual":
            return self.actual_x, self.actual_y
        if choice == "error-only":
            return self.ape_x, self.ape_y
        raise InvalidArgumentError(
            f"positions choice must be one of {POSITION_CHOICES}, got {choice!r}"
        )

    def with_ape(self, ape_x=None, ape_y=None):
        """Copy with replaced position errors (``None`` keeps the current axis)."""
        return replace(
            self,
            ape_x=self.ape_x if ape_x is None else ape_x,
            ape_y=self.ape_y if ape_y is None else ape_y,
        )


def steering_vector(geometry, theta, positions="actual"):
    """Steering vector of ``geometry`` for a single direction ``theta``.

    ``positions="error-only"`` gives the response of the position errors
    alone, so the actual response is the elementwise product of the nominal
    and error-only responses.
    """
    theta = check_angle(theta)
    x, y = geometry.positions(positions)
    return steering_matrix(x, y, theta, geometry.wavelength)[:, 0]


@dataclass(frozen=True)
class GeometryConfig:
    n_antennas: int = 12
    n_calibrated: int = 7
    region: float = 12.0
    wavelength: float = 1.0
    sigma_x: float = 0.5
    sigma_y: float = 0.5
    layout: str = "random"
    min_spacing: float = 0.5

    def validate(self):
        if self.n_antennas < 2:
            raise ConfigError("m", f"need at least 2 antennas, got {self.n_antennas}")
        if not 1 <= self.n_calibrated < self.n_antennas:
            raise ConfigError(
                "mc", f"need 1 <= mc < m, got mc={self.n_calibrated}, m={self.n_antennas}"
            )
        if not self.region > 0:
            raise ConfigError("h", f"movable region must be positive, got {self.region}")
        if not self.wavelength > 0:
            raise ConfigError("wavelength", f"must be positive, got {self.wavelength}")
        # |error| <= sigma/2 must stay below one wavelength
        for key, sigma in (("sigma-x", self.sigma_x), ("sigma-y", self.sigma_y)):
            if not 0 <= sigma < 2 * self.wavelength:
                raise ConfigError(key, f"must lie in [0, 2*wavelength), got {sigma}")
        if self.layout not in LAYOUTS:
            raise ConfigError("layout", f"must be one of {LAYOUTS}, got {self.layout!r}")
        if self.min_spacing < 0:
            raise ConfigError("min-spacing", f"must be non-negative, got {self.min_spacing}")
        if self.layout == "random" and (self.n_antennas - 1) * self.min_spacing > self.region:
            raise ConfigError("min-spacing", "too large to fit all antennas in the region")
        return self


def nominal_layout(config, rng, max_tries=100_000):
    """Draw the nominal x-coordinates for ``config``.

    ``uniform`` spaces the antennas evenly over ``[0, region]``. ``random``
    draws i.i.d. uniform positions, rejecting layouts with two antennas
    closer than ``min_spacing``; positions keep their draw order so the
    calibrated subset is spread over the region rather than packed at one end.
    """
    M, H = config.n_antennas, config.region
    if config.layout == "uniform":
        return np.arange(M) * (H / (M - 1))
    for _ in range(max_tries):
        x = rng.uniform(0.0, H, M)
        if np.min(np.diff(np.sort(x))) >= config.min_spacing:
            return x
    raise ConfigError("min-spacing", f"no valid layout found in {max_tries} draws")


def build_geometry(config, rng):
    """Nominal layout plus uniformly distributed position errors.

    Errors are ``sigma * U(-0.5, 0.5)`` per axis and zeroed on the first
    ``n_calibrated`` antennas. Both axes are always drawn so the random
    stream does not depend on which sigmas are zero.
    """
    config.validate()
    rng = np.random.default_rng(rng)
    x = nominal_layout(config, rng)
    zeta_x = rng.uniform(-0.5, 0.5, config.n_antennas)
    zeta_y = rng.uniform(-0.5, 0.5, config.n_antennas)
    ape_x = config.sigma_x * zeta_x
    ape_y = config.sigma_y * zeta_y
    ape_x[: config.n_calibrated] = 0.0
    ape_y[: config.n_calibrated] = 0.0
    return ArrayGeometry(
        nominal_x=x,
        ape_x=ape_x,
        ape_y=ape_y,
        n_calibrated=config.n_calibrated,
        region=config.region,
        wavelength=config.wavelength,
    )


@dataclass(frozen=True)
class Scenario:
    """Source directions and powers, noise level and snapshot count."""

    theta: np.ndarray
    source_powers: np.ndarray
    noise_power: float
    n_snapshots: int
    angle_bounds: tuple = DEFAULT_ANGLE_BOUNDS

    def __post_init__(self):
        theta = check_angles(self.theta, "theta")
        powers = np.broadcast_to(np.asarray(self.source_powers, dtype=float), theta.shape)
        object.__setattr__(self, "theta", _frozen(theta))
        object.__setattr__(self, "source_powers", _frozen(powers))
        lo, hi = self.angle_bounds
        if not lo < hi:
            raise InvalidArgumentError(f"angle bounds must be increasing, got {self.angle_bounds}")
        if theta.size and (np.any(np.diff(theta) <= 0) or theta[0] <= lo or theta[-1] >= hi):
            raise InvalidArgumentError("theta must be strictly increasing and inside the bounds")
        if np.any(self.source_powers <= 0):
            raise InvalidArgumentError("source powers must be strictly positive")
        if not self.noise_power >= 0:
            raise InvalidArgumentError(f"noise power must be non-negative, got {self.noise_power}")
        if self.n_snapshots < 1:
            raise InvalidArgumentError(f"need at least one snapshot, got {self.n_snapshots}")

    @property
    def n_sources(self):
        return self.theta.shape[0]


def snr_to_noise_power(snr_db, source_power=1.0):
    """Noise power giving ``snr_db = 10 log10(source_power / noise_power)``."""
    return source_power * 10.0 ** (-snr_db / 10.0)


def draw_directions(n_sources, rng, angle_bounds=DEFAULT_ANGLE_BOUNDS, min_separation=0.0,
                    max_tries=100_000):
    """Sorted i.i.d. uniform directions with pairwise spacing of at least ``min_separation``."""
    lo, hi = angle_bounds
    for _ in range(max_tries):
        theta = np.sort(rng.uniform(lo, hi, n_sources))
        if n_sources < 2 or np.min(np.diff(theta)) >= min_separation:
            if theta.size == 0 or (theta[0] > lo and theta[-1] < hi):
                return theta
    raise ConfigError("min-separation", f"no valid direction draw in {max_tries} tries")


def draw_scenario(n_sources, rng, snr_db=10.0, n_snapshots=100,
                  angle_bounds=DEFAULT_ANGLE_BOUNDS, min_separation=np.deg2rad(2.0),
                  source_power=1.0):
    theta = draw_directions(n_sources, rng, angle_bounds, min_separation)
    return Scenario(
        theta=theta,
        source_powers=np.full(n_sources, source_power),
        noise_power=snr_to_noise_power(snr_db, source_power),
        n_snapshots=n_snapshots,
        angle_bounds=angle_bounds,
    )


@dataclass(frozen=True)
class SnapshotMatrix:
    Z: np.ndarray
    seed: object = None

    @property
    def shape(self):
        return self.Z.shape


def draw_unit_signals(n_sources, n_antennas, n_snapshots, rng):
    """Unit-variance circular complex Gaussian source and noise samples."""

    def cn(shape):
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)

    return cn((n_sources, n_snapshots)), cn((n_antennas, n_snapshots))


def form_snapshots(geometry, scenario, unit_signals, unit_noise):
    """``Z = A(theta, P) S + N`` from pre-drawn unit-variance samples."""
    if scenario.n_sources >= geometry.n_antennas:
        raise InvalidArgumentError("need fewer sources than antennas")
    A = steering_matrix(geometry.actual_x, geometry.actual_y, scenario.theta, geometry.wavelength)
    S = np.sqrt(scenario.source_powers)[:, None] * unit_signals
    return A @ S + np.sqrt(scenario.noise_power) * unit_noise


def synthesize_snapshots(geometry, scenario, rng):
    """Received snapshots for ``scenario`` impinging on the actual array.

    ``rng`` may be a seed or a ``numpy.random.Generator``; a seed is recorded
    on the result.
    """
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = np.random.default_rng(rng)
    S, N = draw_unit_signals(
        scenario.n_sources, geometry.n_antennas, scenario.n_snapshots, rng
    )
    return SnapshotMatrix(Z=form_snapshots(geometry, scenario, S, N), seed=seed)
