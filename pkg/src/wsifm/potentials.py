"""External potential of a trapped atom above a reflecting surface.

The atom sits in a vertical standing-wave lattice with gravity pulling it
toward the surface at z = 0, plus a parametric atom-surface interaction
(near-field 1/z^3 with a retardation crossover) and an optional Yukawa-type
short-range term.

All positions are SI meters at the interface.  Internally everything is
expressed in recoil units: energies in E_r = hbar^2 k_l^2 / (2 m_a), lengths
scaled by the lattice wavevector k_l, times by hbar / E_r.  Only I/O
boundaries convert to and from SI.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .constants import (
    DEFAULT_K_PROBE_RATIO,
    DEFAULT_LATTICE_WAVELENGTH_M,
    DEFAULT_RABI_RAD_S,
    HBAR,
    RB87_MASS_KG,
    STANDARD_GRAVITY,
)
from .errors import ConfigurationError


@dataclass(frozen=True)
class SurfacePotentialParams:
    """Parametric atom-surface potential.

    V(z) = -c3 / (z^3 (1 + z/retardation_length))
           + yukawa_amplitude * yukawa_prefactor * exp(-z/yukawa_range)

    The 1/z^3 coefficient and crossover length are placeholders to be
    calibrated against a dedicated surface-interaction computation; none of
    the defaults is a physics claim.

    c3 : J m^3, near-field coefficient (0 disables the term)
    retardation_length : m, crossover scale of the 1/z^3 -> 1/z^4 rollover
    yukawa_amplitude : dimensionless strength alpha (0 disables the term)
    yukawa_range : m, exponential range
    yukawa_prefactor : J, energy scale multiplying alpha (required when
        alpha != 0; the CLI defaults it to m_a * g * yukawa_range)
    """

    c3: float = 0.0
    retardation_length: float = 150e-9
    yukawa_amplitude: float = 0.0
    yukawa_range: float | None = None
    yukawa_prefactor: float | None = None

    def validate(self) -> None:
        if self.c3 != 0.0 and not self.retardation_length > 0.0:
            raise ConfigurationError(
                "retardation_length must be positive when c3 is nonzero"
            )
        if self.yukawa_amplitude != 0.0:
            if self.yukawa_range is None or not self.yukawa_range > 0.0:
                raise ConfigurationError(
                    "yukawa_range must be positive when yukawa_amplitude is nonzero"
                )
            if self.yukawa_prefactor is None:
                raise ConfigurationError(
                    "yukawa_prefactor (J) is required when yukawa_amplitude is nonzero"
                )

    @property
    def is_off(self) -> bool:
        return self.c3 == 0.0 and self.yukawa_amplitude == 0.0


@dataclass(frozen=True)
class GridSpec:
    """Spatial grid for the eigensolver: [z_min, z_max] with n_points samples.

    z_min is a small positive offset rather than exactly 0; the hard wall
    itself is represented by the Dirichlet condition at the grid edge, and
    the offset keeps the surface potential finite on every sample.
    """

    z_min: float
    z_max: float
    n_points: int

    def validate(self, lambda_lattice: float) -> None:
        if not (0.0 < self.z_min < self.z_max):
            raise ConfigurationError("grid requires 0 < z_min < z_max")
        periods = (self.z_max - self.z_min) / (lambda_lattice / 2.0)
        if self.n_points < max(2, int(2 * periods)):
            raise ConfigurationError(
                f"grid too coarse: {self.n_points} points for ~{periods:.1f} periods"
            )

    @classmethod
    def for_wells(
        cls,
        lambda_lattice: float,
        max_well: int,
        buffer_periods: int = 7,
        points_per_period: int = 512,
        zmin_fraction: float = 1e-3,
    ) -> "GridSpec":
        """Grid spanning the wall to max_well + buffer_periods lattice periods."""
        d = lambda_lattice / 2.0
        z_min = zmin_fraction * d
        z_max = (max_well + buffer_periods) * d
        n = int(round(points_per_period * (z_max - z_min) / d))
        return cls(z_min=z_min, z_max=z_max, n_points=n)

    def z(self) -> np.ndarray:
        return np.linspace(self.z_min, self.z_max, self.n_points)


@dataclass(frozen=True)
class LatticeConfig:
    """Physical parameters of the trap and probe, plus the solver grid.

    depth_U : lattice depth in recoil units E_r
    lambda_lattice : lattice laser wavelength (m)
    atom_mass : kg
    gravity_g : m/s^2
    rabi_omega : free-space Rabi rate (rad/s)
    k_probe_ratio : k_s / k_l of the probe (0 for microwave pulses)
    omega_eg : internal transition angular frequency (rad/s); only used for
        reporting absolute probe frequencies, never by the dynamics
    """

    depth_U: float = 3.0
    lambda_lattice: float = DEFAULT_LATTICE_WAVELENGTH_M
    atom_mass: float = RB87_MASS_KG
    gravity_g: float = STANDARD_GRAVITY
    rabi_omega: float = DEFAULT_RABI_RAD_S
    k_probe_ratio: float = DEFAULT_K_PROBE_RATIO
    omega_eg: float = 2 * math.pi * 6.8e9
    surface_model: SurfacePotentialParams = field(
        default_factory=SurfacePotentialParams
    )
    grid: GridSpec = field(
        default_factory=lambda: GridSpec.for_wells(DEFAULT_LATTICE_WAVELENGTH_M, 12)
    )

    def __post_init__(self):
        if not self.depth_U > 0.0:
            raise ConfigurationError("depth_U must be positive")
        if not self.lambda_lattice > 0.0:
            raise ConfigurationError("lambda_lattice must be positive")
        if not self.atom_mass > 0.0:
            raise ConfigurationError("atom_mass must be positive")
        if self.rabi_omega < 0.0:
            raise ConfigurationError("rabi_omega must be nonnegative")
        self.surface_model.validate()
        self.grid.validate(self.lambda_lattice)

    # -- derived scales -------------------------------------------------

    @property
    def k_lattice(self) -> float:
        """Lattice wavevector k_l = 2 pi / lambda_l (1/m)."""
        return 2.0 * math.pi / self.lambda_lattice

    @property
    def recoil_energy(self) -> float:
        """E_r = hbar^2 k_l^2 / (2 m_a) (J)."""
        return HBAR**2 * self.k_lattice**2 / (2.0 * self.atom_mass)

    @property
    def recoil_angular_frequency(self) -> float:
        """E_r / hbar (rad/s)."""
        return self.recoil_energy / HBAR

    @property
    def well_spacing(self) -> float:
        """Lattice period lambda_l / 2 (m)."""
        return self.lambda_lattice / 2.0

    @property
    def tilt(self) -> float:
        """Dimensionless gravity slope: m_a g / (E_r k_l)."""
        return self.atom_mass * self.gravity_g / (self.recoil_energy * self.k_lattice)

    @property
    def ladder_spacing(self) -> float:
        """Gravitational energy drop per well, m_a g lambda_l / 2, in E_r."""
        return self.tilt * math.pi

    def well_center(self, m) -> np.ndarray | float:
        """Position of the m-th lattice minimum, z = m lambda_l / 2 (m)."""
        return np.asarray(m) * self.well_spacing

    # -- unit conversions ------------------------------------------------

    def to_recoil(self, energy_si):
        """J -> E_r units."""
        return np.asarray(energy_si) / self.recoil_energy

    def to_si(self, energy_recoil):
        """E_r units -> J."""
        return np.asarray(energy_recoil) * self.recoil_energy

    def config_hash(self) -> str:
        """Short stable identifier of every physical parameter."""
        payload = {
            "depth_U": self.depth_U,
            "lambda_lattice": self.lambda_lattice,
            "atom_mass": self.atom_mass,
            "gravity_g": self.gravity_g,
            "rabi_omega": self.rabi_omega,
            "k_probe_ratio": self.k_probe_ratio,
            "omega_eg": self.omega_eg,
            "surface": [
                self.surface_model.c3,
                self.surface_model.retardation_length,
                self.surface_model.yukawa_amplitude,
                self.surface_model.yukawa_range,
                self.surface_model.yukawa_prefactor,
            ],
            "grid": [self.grid.z_min, self.grid.z_max, self.grid.n_points],
        }
        text = json.dumps(payload, sort_keys=True, default=repr)
        return hashlib.sha256(text.encode()).hexdigest()[:12]


# -- potential terms ----------------------------------------------------


def lattice_gravity_potential(z, cfg: LatticeConfig):
    """Lattice plus gravity, -m_a g z + (U/2)(1 - cos 2 k_l z), in E_r.

    Total function for z >= 0; z in meters (scalar or array).
    """
    z = np.asarray(z, dtype=float)
    zeta = cfg.k_lattice * z
    v = 0.5 * cfg.depth_U * (1.0 - np.cos(2.0 * zeta)) - cfg.tilt * zeta
    return v if v.ndim else float(v)


def surface_potential(z, params: SurfacePotentialParams):
    """Parametric atom-surface interaction in SI joules; requires z > 0."""
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0.0):
        raise ConfigurationError("surface_potential requires z > 0 (surface at z=0)")
    v = np.zeros_like(z)
    if params.c3 != 0.0:
        v -= params.c3 / (z**3 * (1.0 + z / params.retardation_length))
    if params.yukawa_amplitude != 0.0:
        params.validate()
        v += (
            params.yukawa_amplitude
            * params.yukawa_prefactor
            * np.exp(-z / params.yukawa_range)
        )
    return v if v.ndim else float(v)


def total_potential(z, cfg: LatticeConfig):
    """Lattice + gravity + surface terms, in E_r; requires z > 0."""
    v = lattice_gravity_potential(z, cfg)
    if not cfg.surface_model.is_off:
        v = v + cfg.to_recoil(surface_potential(z, cfg.surface_model))
    return v
