"""Shot-noise-limited rotation sensitivity and beam-current noise spectra."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .constants import ELECTRON_CHARGE, LIGHT_SPEED, PLANCK_H

REFERENCE_RESPONSIVITY = 210.0  # rad/A, i.e. 0.21 mrad/uA
EMISSION_PER_FARADAY = 2.0  # emission current / Faraday-cup current
CURRENT_REFERENCES = ("emission", "faraday")


@dataclass(frozen=True)
class SensitivityInputs:
    responsivity_S: float = REFERENCE_RESPONSIVITY  # rad/A
    laser_power_P: float | None = None  # W
    detector_efficiency_eta: float | None = None
    wavelength: float = 780e-9
    photocurrent: float | None = None  # A
    dark_noise_floor: float = 1e-9  # A/sqrt(Hz), beam-current referred
    flicker_corner: float = 10.0  # Hz

    def __post_init__(self):
        if not self.responsivity_S > 0:
            raise ValueError("responsivity_S must be positive")
        optical = self.laser_power_P is not None or self.detector_efficiency_eta is not None
        if optical and self.photocurrent is not None:
            raise ValueError("give either (laser_power_P, detector_efficiency_eta) or photocurrent")
        if optical and (self.laser_power_P is None or self.detector_efficiency_eta is None):
            raise ValueError("laser_power_P and detector_efficiency_eta go together")
        if self.dark_noise_floor < 0 or self.flicker_corner < 0:
            raise ValueError("noise floor and flicker corner must be non-negative")

    @property
    def has_light(self) -> bool:
        return self.photocurrent is not None or self.laser_power_P is not None


def photocurrent_from_power(power, eta, wavelength=780e-9):
    """``eta P e / (h c / lambda)``."""
    return eta * power * ELECTRON_CHARGE / (PLANCK_H * LIGHT_SPEED / wavelength)


def shot_noise_rotation(inputs: SensitivityInputs) -> float:
    """Shot-noise rotation floor in rad/sqrt(Hz)."""
    if inputs.photocurrent is not None:
        if inputs.photocurrent <= 0:
            raise ZeroDivisionError("photocurrent must be positive")
        return math.sqrt(2 * ELECTRON_CHARGE / inputs.photocurrent)
    if inputs.laser_power_P is None:
        raise ValueError("no optical input given")
    rate = inputs.detector_efficiency_eta * inputs.laser_power_P
    if rate <= 0:
        raise ZeroDivisionError("laser power and efficiency must be positive")
    return math.sqrt(2 * PLANCK_H * LIGHT_SPEED / inputs.wavelength / rate)


def photocurrent_for_rotation_noise(delta_phi):
    """Invert ``delta_phi = sqrt(2 e / I_ph)`` for the photocurrent."""
    return 2 * ELECTRON_CHARGE / delta_phi**2


def min_detectable_current(delta_phi, S):
    """``delta_phi / S`` in A/sqrt(Hz)."""
    if not S > 0:
        raise ValueError("S must be positive")
    return delta_phi / S


def referred_responsivity(S_emission, reference="emission", ratio=EMISSION_PER_FARADAY):
    """Responsivity against the chosen current reading.

    ``S_emission`` is rotation per unit emission current. Referred to the
    Faraday-cup reading (``I_E = ratio * I_FC``) the slope is ``ratio * S``,
    so the minimum detectable Faraday-cup current is ``ratio`` times smaller.
    """
    if reference not in CURRENT_REFERENCES:
        raise ValueError(f"reference must be one of {CURRENT_REFERENCES}")
    if not ratio > 0:
        raise ValueError("ratio must be positive")
    return S_emission if reference == "emission" else ratio * S_emission


def noise_spectrum(inputs: SensitivityInputs, freqs, seed=None):
    """Beam-current-referred ASD (A/sqrt(Hz)).

    ``sqrt(shot^2 + dark^2 + (dark f_c / f)^2)``; with ``seed`` a Rayleigh
    scattered realization is returned as a second array.
    """
    f = np.asarray(freqs, dtype=float)
    if np.any(f <= 0) or np.any(np.diff(f) <= 0):
        raise ValueError("frequencies must be positive and ascending")
    shot = (min_detectable_current(shot_noise_rotation(inputs), inputs.responsivity_S)
            if inputs.has_light else 0.0)
    dark = inputs.dark_noise_floor
    asd = np.sqrt(shot**2 + dark**2 + (dark * inputs.flicker_corner / f) ** 2)
    if seed is None:
        return asd
    rng = np.random.default_rng(seed)
    # |complex Gaussian| has unit rms
    scatter = np.abs(rng.normal(size=f.size) + 1j * rng.normal(size=f.size)) / math.sqrt(2)
    return asd, asd * scatter


def spectrum_csv(freqs, asd) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["frequency_hz", "asd_A_per_rtHz"])
    for f, a in zip(freqs, asd):
        w.writerow([repr(float(f)), repr(float(a))])
    return buf.getvalue()


def finite_difference_slopes(response, currents):
    """Forward-difference slopes of ``response(I)`` between consecutive currents."""
    currents = np.asarray(currents, dtype=float)
    values = np.array([response(c) for c in currents])
    return np.diff(values) / np.diff(currents)
