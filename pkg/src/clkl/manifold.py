"""Array geometry and near-field steering vectors for a centred ULA.

A uniform linear array of M elements at half-wavelength spacing observes a
source at polar coordinates (theta, r) measured from the array centre, with
theta the angle from the array axis.  Three steering-vector constructors are
provided:

* exact spherical-wave phase (per-element true distance),
* its second-order Taylor (Fresnel) approximation, a linear+quadratic chirp
  in the centred element index, and
* the same chirp parameterised by inverse range u = 1/r, which extends
  continuously to the far-field atom at u = 0.

The chirp parameterisation splits the geometry into a spatial frequency
omega(theta) (linear phase slope per element) and a curvature
kappa(theta, r) = c(theta)/r (quadratic coefficient), which is what the
estimator learns.  Regime boundaries: Rayleigh distance 2*D^2/lambda and the
effective beamfocused Rayleigh distance r_RD*cos(theta)^2/10 inside which
polar-domain sparsity holds.

All angles are radians internally; degrees appear only at CLI/CSV
boundaries.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s


@dataclass(frozen=True)
class ArrayConfig:
    """ULA geometry: carrier, element count and spacing, derived lengths."""

    carrier_hz: float = 28e9
    n_elements: int = 64
    spacing_m: float | None = None  # defaults to half wavelength

    def __post_init__(self):
        if self.n_elements < 2:
            raise ValueError(f"need at least 2 elements, got {self.n_elements}")
        if self.carrier_hz <= 0:
            raise ValueError("carrier frequency must be positive")
        if self.spacing_m is None:
            object.__setattr__(self, "spacing_m", self.wavelength_m / 2.0)
        elif self.spacing_m <= 0:
            raise ValueError("element spacing must be positive")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def aperture_m(self) -> float:
        return (self.n_elements - 1) * self.spacing_m

    @property
    def rayleigh_distance_m(self) -> float:
        """Far-field boundary 2*D^2/lambda."""
        return 2.0 * self.aperture_m**2 / self.wavelength_m

    @cached_property
    def centred_index(self) -> np.ndarray:
        """Cached m - (M-1)/2 vector; shared by every module."""
        idx = centred_index(self.n_elements)
        idx.setflags(write=False)
        return idx

    @cached_property
    def centred_index_sq(self) -> np.ndarray:
        sq = self.centred_index**2
        sq.setflags(write=False)
        return sq


@dataclass(frozen=True)
class PathParam:
    """One propagation path: angle (rad), range (m), power (linear)."""

    theta_rad: float
    range_m: float
    power: float

    def __post_init__(self):
        if self.range_m <= 0:
            raise ValueError(f"path range must be positive, got {self.range_m}")
        if self.power < 0:
            raise ValueError(f"path power must be nonnegative, got {self.power}")


@dataclass(frozen=True)
class CurvatureCoords:
    """Chirp-domain coordinates of a path: omega, kappa and kappa = c/r constant."""

    omega: float  # rad per element index
    kappa: float  # rad per element index squared
    chirp_const: float  # c = pi*d^2*sin(theta)^2/lambda, so kappa = c/r


def centred_index(n_elements: int) -> np.ndarray:
    """Element indices centred on the array midpoint: m - (M-1)/2."""
    return np.arange(n_elements, dtype=float) - (n_elements - 1) / 2.0


def spatial_frequency(cfg: ArrayConfig, theta_rad: float) -> float:
    """Linear phase slope omega = (2*pi*d/lambda)*cos(theta)."""
    return 2.0 * np.pi * cfg.spacing_m / cfg.wavelength_m * np.cos(theta_rad)


def chirp_constant(cfg: ArrayConfig, theta_rad) -> float | np.ndarray:
    """Curvature prefactor c(theta) = pi*d^2*sin(theta)^2/lambda (kappa = c/r)."""
    return np.pi * cfg.spacing_m**2 * np.sin(theta_rad) ** 2 / cfg.wavelength_m


def curvature(cfg: ArrayConfig, theta_rad: float, range_m: float) -> float:
    """Quadratic phase coefficient kappa(theta, r) = c(theta)/r."""
    if range_m <= 0:
        raise ValueError(f"range must be positive, got {range_m}")
    return chirp_constant(cfg, theta_rad) / range_m


def curvature_coords(cfg: ArrayConfig, theta_rad: float, range_m: float) -> CurvatureCoords:
    c = chirp_constant(cfg, theta_rad)
    return CurvatureCoords(
        omega=spatial_frequency(cfg, theta_rad),
        kappa=curvature(cfg, theta_rad, range_m),
        chirp_const=c,
    )


def chirp_vector(m_bar: np.ndarray, omega, kappa) -> np.ndarray:
    """Unit-modulus chirp exp(j*(omega*m - kappa*m^2)) over centred indices.

    Broadcasts over trailing axes of omega/kappa, so a grid of atoms can be
    built in one call (m_bar must then be a column (M, 1) view).
    """
    return np.exp(1j * (omega * m_bar - kappa * m_bar**2))


def steering_usw(cfg: ArrayConfig, theta_rad: float, range_m: float) -> np.ndarray:
    """Exact spherical-wave steering vector, phase-referenced to the array centre.

    Entry m is exp(-j*(2*pi/lambda)*(||p - s_m|| - r)) with source position
    p = [r*cos(theta), r*sin(theta)] and element position s_m = [m_bar*d, 0].
    Subtracting r keeps the global-phase convention aligned with the chirp
    forms, so the constructors can be compared entry-wise.
    """
    if range_m <= 0:
        raise ValueError(f"range must be positive, got {range_m}")
    m_bar = cfg.centred_index
    px = range_m * np.cos(theta_rad)
    py = range_m * np.sin(theta_rad)
    dist = np.hypot(px - m_bar * cfg.spacing_m, py)
    return np.exp(-1j * 2.0 * np.pi / cfg.wavelength_m * (dist - range_m))


def steering_fresnel(cfg: ArrayConfig, theta_rad: float, range_m: float) -> np.ndarray:
    """Second-order (chirp) approximation exp(j*omega*m - j*kappa*m^2)."""
    if range_m <= 0:
        raise ValueError(f"range must be positive, got {range_m}")
    return chirp_vector(
        cfg.centred_index,
        spatial_frequency(cfg, theta_rad),
        curvature(cfg, theta_rad, range_m),
    )


def steering_chirp(cfg: ArrayConfig, theta_rad: float, u_inv_m: float) -> np.ndarray:
    """Chirp atom in inverse range u = 1/r; u = 0 is the far-field atom."""
    if u_inv_m < 0:
        raise ValueError(f"inverse range must be nonnegative, got {u_inv_m}")
    kappa = chirp_constant(cfg, theta_rad) * u_inv_m
    return chirp_vector(cfg.centred_index, spatial_frequency(cfg, theta_rad), kappa)


def ebrd(cfg: ArrayConfig, theta_rad) -> float | np.ndarray:
    """Effective beamfocused Rayleigh distance r_RD*cos(theta)^2/10."""
    return cfg.rayleigh_distance_m * np.cos(theta_rad) ** 2 / 10.0
