"""Physical constants and default experimental parameters (SI units)."""

from scipy.constants import g as STANDARD_GRAVITY
from scipy.constants import hbar as HBAR
from scipy.constants import physical_constants

ATOMIC_MASS_KG = physical_constants["atomic mass constant"][0]

# Rb-87 ground-state atom
RB87_MASS_KG = 86.909180531 * ATOMIC_MASS_KG

# 532 nm vertical lattice (frequency-doubled Nd:YAG)
DEFAULT_LATTICE_WAVELENGTH_M = 532e-9

# Counter-propagating Raman pair on the Rb D2 line (780 nm), expressed as
# the ratio of the effective probe wavevector to the lattice wavevector.
DEFAULT_K_PROBE_RATIO = 2.0 * 532.0 / 780.0

# Free-space Rabi rate used throughout pulse-duration tables
DEFAULT_RABI_RAD_S = 100.0

__all__ = [
    "ATOMIC_MASS_KG",
    "DEFAULT_K_PROBE_RATIO",
    "DEFAULT_LATTICE_WAVELENGTH_M",
    "DEFAULT_RABI_RAD_S",
    "HBAR",
    "RB87_MASS_KG",
    "STANDARD_GRAVITY",
]
