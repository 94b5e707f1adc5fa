"""Three-level (Lambda) NMOR response of Rb vapor and the beta calibration map.

Two response models are available. ``"linear"`` is the long-coherence
rate ``hbar c N gamma B / (lambda I)``; ``"eit"`` uses the power-broadened
EIT rates ``alpha0 Gamma delta_B / Gamma_EIT^2``. They are not rescaled to
agree with each other.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .constants import HBAR, LIGHT_SPEED
from .errors import AllMasked, ValidityWarning
from .maps import Grid, ResponseMap

TWO_PI = 2 * math.pi
EPSILON0 = 8.8541878128e-12  # F/m

MODELS = ("linear", "eit")


@dataclass(frozen=True)
class AtomParams:
    excited_decoherence_Gamma: float = TWO_PI * 6.07e6  # rad/s
    ground_decoherence_Gamma0: float = TWO_PI * 10.0  # rad/s
    resonant_absorption_alpha0: float = 3e-4  # 1/m, effective value for the EIT rate
    vapor_density_N: float = 2.7e17  # 1/m^3
    wavelength_lambda: float = 780e-9  # m
    gyromagnetic_gamma: float = 5e9  # Hz/T
    power_broadening_kappa: float = TWO_PI * 30.0  # (rad/s) per (W/m^2)

    def __post_init__(self):
        for name, v in self.__dict__.items():
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v!r}")
        if not self.ground_decoherence_Gamma0 < self.excited_decoherence_Gamma:
            raise ValueError("ground decoherence must be below excited-state decoherence")

    @property
    def gyromagnetic_rad(self) -> float:
        """Gyromagnetic ratio in rad/s per tesla."""
        return TWO_PI * self.gyromagnetic_gamma


def zeeman_shift(B, a: AtomParams):
    """delta_B = gamma B in rad/s."""
    return a.gyromagnetic_rad * np.asarray(B, dtype=float)


def gamma_eit(intensity, a: AtomParams):
    intensity = np.asarray(intensity, dtype=float)
    if np.any(intensity < 0):
        raise ValueError("intensity must be non-negative")
    return a.ground_decoherence_Gamma0 + a.power_broadening_kappa * intensity


def susceptibility_pm(delta_B, intensity, a: AtomParams, sign: int = 1):
    """Susceptibility of the sigma+ (sign=+1) or sigma- (sign=-1) component."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    d = sign * np.asarray(delta_B, dtype=float)
    ge = gamma_eit(intensity, a)
    g0 = a.ground_decoherence_Gamma0
    pref = 1j * a.resonant_absorption_alpha0 * a.wavelength_lambda / math.pi
    return pref * ((g0 * ge + 4 * d * d) - 1j * d * ge) / (4 * d * d + ge * ge)


def rotation_rate_from_susceptibility(delta_B, intensity, a: AtomParams):
    """dphi/dx from half the phase difference of the two circular components."""
    chi_p = susceptibility_pm(delta_B, intensity, a, +1)
    chi_m = susceptibility_pm(delta_B, intensity, a, -1)
    return (math.pi / a.wavelength_lambda) * np.real(chi_p - chi_m) / 2


def rotation_rate(delta_B, intensity, a: AtomParams):
    """Small-shift EIT rotation rate ``alpha0 Gamma delta_B / Gamma_EIT^2`` (rad/m)."""
    delta_B = np.asarray(delta_B, dtype=float)
    ge = gamma_eit(intensity, a)
    if np.any(np.abs(delta_B) >= ge / 4):
        warnings.warn("|delta_B| >= Gamma_EIT/4: outside small-shift regime",
                      ValidityWarning, stacklevel=2)
    return a.resonant_absorption_alpha0 * a.excited_decoherence_Gamma * delta_B / ge**2


def absorption_rate(intensity, a: AtomParams):
    """Attenuation coefficient (1/m) so that ``dI/dx = -rate * I``."""
    return a.resonant_absorption_alpha0 * a.ground_decoherence_Gamma0 / gamma_eit(intensity, a)


def rotation_rate_linear(B, intensity, a: AtomParams):
    """Long-coherence rate ``hbar c N gamma B / (lambda I)`` (rad/m)."""
    intensity = np.asarray(intensity, dtype=float)
    if np.any(intensity == 0):
        raise ZeroDivisionError("rotation_rate_linear needs nonzero intensity")
    if np.any(intensity < 0):
        raise ValueError("intensity must be non-negative")
    return (HBAR * LIGHT_SPEED * a.vapor_density_N / (a.wavelength_lambda * intensity)
            * a.gyromagnetic_rad * np.asarray(B, dtype=float))


def alpha0_from_dipole(dipole_moment, a: AtomParams):
    """``mu^2 N / (2 eps0 hbar Gamma)`` evaluated as written.

    Not used by any model: the expression does not carry units of 1/m, so
    ``resonant_absorption_alpha0`` is supplied directly instead.
    """
    return dipole_moment**2 * a.vapor_density_N / (
        2 * EPSILON0 * HBAR * a.excited_decoherence_Gamma)


def calibrate_beta(applied_B, laser_intensity_profile, g, a: AtomParams,
                   model: str = "linear", grid: Grid | None = None,
                   mask_threshold: float = 0.05) -> ResponseMap:
    """Simulate the uniform-field calibration and return beta = phi / (B L).

    Pixels whose intensity is below ``mask_threshold`` of the peak are masked.
    """
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}, got {model!r}")
    applied_B = float(applied_B)
    if applied_B == 0 or not math.isfinite(applied_B):
        raise ValueError("applied_B must be finite and nonzero")
    intensity = np.asarray(laser_intensity_profile, dtype=float)
    if grid is None:
        grid = Grid(*intensity.shape, pixel_size=g.extent_y / intensity.shape[0])
    peak = float(intensity.max()) if intensity.size else 0.0
    mask = (intensity > 0) & (intensity >= mask_threshold * peak)
    if not mask.any():
        raise AllMasked("no pixel passes the intensity threshold")

    rate = np.full(intensity.shape, np.nan)
    if model == "linear":
        rate[mask] = rotation_rate_linear(applied_B, intensity[mask], a)
    else:
        rate[mask] = rotation_rate(zeeman_shift(applied_B, a), intensity[mask], a)
    phi_cal = rate * g.cell_path_L
    beta = phi_cal / (applied_B * g.cell_path_L)
    return ResponseMap(beta, mask, grid)
