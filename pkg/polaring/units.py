"""
Unit conversions.

Energies enter the toolkit in cm⁻¹ and times in fs. The dynamics works with
hbar = 1, so every energy is turned into an angular frequency in rad/fs once,
at the model boundary.
"""

import math

# Speed of light in cm/fs.
SPEED_OF_LIGHT_CM_PER_FS = 2.99792458e-5

# 1 cm⁻¹ as an angular frequency: 2*pi*c = 1.88365156731e-4 rad/fs.
CM1_TO_RAD_PER_FS = 2.0 * math.pi * SPEED_OF_LIGHT_CM_PER_FS

# Boltzmann constant in cm⁻¹/K.
BOLTZMANN_CM1_PER_K = 0.6950348

ANGSTROM_PER_NM = 10.0


def cm1_to_rad_fs(value):
    """Convert an energy (or array of energies) from cm⁻¹ to rad/fs."""
    return value * CM1_TO_RAD_PER_FS


def rad_fs_to_cm1(value):
    """Convert an angular frequency from rad/fs back to cm⁻¹."""
    return value / CM1_TO_RAD_PER_FS


def thermal_energy_cm1(temperature_k: float) -> float:
    """k_B T in cm⁻¹."""
    return BOLTZMANN_CM1_PER_K * temperature_k
