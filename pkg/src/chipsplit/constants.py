"""Physical constants and unit conversion factors (SI internally)."""

import math

from scipy.constants import physical_constants

MU0 = 4.0e-7 * math.pi  # vacuum permeability, T*m/A
KB = 1.380649e-23  # Boltzmann constant, J/K (exact)
HBAR = 1.054571817e-34  # reduced Planck constant, J*s
MU_B = physical_constants["Bohr magneton"][0]  # J/T
AMU = physical_constants["atomic mass constant"][0]  # kg

# File/flag boundary units; all internal math is SI.
GAUSS = 1.0e-4  # tesla per gauss (exact)
UM = 1.0e-6  # metre per micrometre
UK = 1.0e-6  # kelvin per microkelvin

LI7_MASS = 7.016003437 * AMU  # kg
