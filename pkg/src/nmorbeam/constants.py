"""CODATA 2018 physical constants (SI)."""

import math
from types import MappingProxyType

MU0 = 1.25663706212e-6  # T m / A
ELECTRON_CHARGE = 1.602176634e-19  # C
PLANCK_H = 6.62607015e-34  # J s
HBAR = PLANCK_H / (2.0 * math.pi)
LIGHT_SPEED = 299792458.0  # m / s

PHYS_CONSTS = MappingProxyType(
    {
        "mu0": MU0,
        "electron_charge": ELECTRON_CHARGE,
        "planck_h": PLANCK_H,
        "hbar": HBAR,
        "light_speed_c": LIGHT_SPEED,
    }
)
