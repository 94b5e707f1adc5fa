"""Synthetic electron-impact fluorescence images and their Gaussian profile fit.

Serves as an independent position/width reference for the NMOR fit: the
mean image is proportional to the beam's column current density along the
line of sight, ``(I0 / (sqrt(pi) w)) exp(-(y - y0)^2 / w^2)``, uniform in z.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit

from .errors import NonConvergence, SaturationWarning
from .imaging import SATURATION_FRACTION, CameraConfig, Frame, dn_variance, expose, frame_rng
from .maps import Grid
from .physics import BeamParams


@dataclass(frozen=True)
class FluorescenceConfig:
    exposure: float = 30.0  # s
    quantum_efficiency: float = 0.25
    magnification: float = 1.0
    brightness_scale: float = 1e4  # photons/s per (A/m) of column density
    background: float = 100.0  # photoelectrons per pixel; keeps the wings off the zero clip
    pixels_y: int = 256
    pixels_z: int = 256
    pixel_pitch: float = 31.25e-6
    read_noise: float = 5.0
    gain: float = 1.0
    bit_depth: int = 16
    rng_seed: int | None = None

    def __post_init__(self):
        if not self.exposure > 0 or not self.brightness_scale > 0:
            raise ValueError("exposure and brightness_scale must be positive")
        if self.background < 0:
            raise ValueError("background must be non-negative")
        self.camera()  # remaining checks

    def camera(self) -> CameraConfig:
        return CameraConfig(self.pixels_y, self.pixels_z, self.pixel_pitch, self.magnification,
                            self.exposure, self.quantum_efficiency, self.read_noise, self.gain,
                            self.bit_depth, self.rng_seed, transmission=1.0)


def column_density(y, p: BeamParams):
    """Current density integrated along the line of sight (A/m)."""
    dy = np.asarray(y, dtype=float) - p.center_y0
    return p.total_current / (math.sqrt(math.pi) * p.width_w) * np.exp(-(dy / p.width_w) ** 2)


def synthesize_fluorescence(p: BeamParams, c: FluorescenceConfig, grid: Grid | None = None,
                            noise_on: bool = False, acquisition_index: int = 0) -> Frame:
    cam = c.camera()
    grid = grid or cam.grid()
    col = np.abs(column_density(grid.y, p))
    mean_e = (c.brightness_scale * c.exposure * c.quantum_efficiency * col)[:, None]
    mean_e = np.broadcast_to(mean_e + c.background, grid.shape)
    if noise_on and c.rng_seed is None:
        raise ValueError("noise_on requires rng_seed")
    rng = frame_rng(c.rng_seed, acquisition_index, "fluorescence") if noise_on else None
    data, quantized = expose(mean_e, cam, noise_on, rng)
    frame = Frame(np.array(data), "fluorescence", "on", cam, acquisition_index, grid, quantized)
    frac = frame.saturated.mean()
    if frac > SATURATION_FRACTION:
        warnings.warn(f"fluorescence frame: {frac:.2%} of pixels saturated",
                      SaturationWarning, stacklevel=2)
    return frame


@dataclass(frozen=True)
class FluorescenceFit:
    center_y0: float
    center_err: float
    width_w: float
    width_err: float
    amplitude: float
    background: float


def _gauss_bg(y, amp, y0, w, bg):
    return amp * np.exp(-((y - y0) / w) ** 2) + bg


def fit_fluorescence(frame: Frame) -> FluorescenceFit:
    """Gaussian plus constant fitted to the z-averaged profile."""
    y = frame.grid.y
    prof = frame.data.astype(float).mean(axis=1)
    bg0 = float(np.median(np.concatenate([prof[:5], prof[-5:]])))
    sig = prof - bg0
    amp0 = float(sig.max())
    if not amp0 > 0:
        raise NonConvergence("fluorescence profile has no positive peak")
    weights = np.clip(sig, 0, None)
    y00 = float((weights * y).sum() / weights.sum())
    above = y[sig > amp0 / math.e]
    w0 = max(0.5 * (above.max() - above.min()), frame.grid.pixel_size) if above.size else frame.grid.pixel_size
    sigma = None
    if frame.quantized:
        # shot + read + rounding variance of each row mean, from the camera model
        sigma = np.sqrt(dn_variance(frame).mean(axis=1) / frame.data.shape[1])
    try:
        with warnings.catch_warnings():
            # exact data leave the covariance undefined
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, pcov = curve_fit(_gauss_bg, y, prof, p0=[amp0, y00, w0, bg0], sigma=sigma,
                                   absolute_sigma=sigma is not None,
                                   xtol=1e-15, ftol=1e-15, gtol=1e-15, maxfev=20000)
    except (RuntimeError, ValueError) as exc:
        raise NonConvergence(f"fluorescence fit failed: {exc}") from exc
    if not np.all(np.isfinite(pcov)):
        pcov = np.zeros((4, 4))
    err = np.sqrt(np.clip(np.diag(pcov), 0, None))
    return FluorescenceFit(float(popt[1]), float(err[1]), abs(float(popt[2])), float(err[2]),
                           float(popt[0]), float(popt[3]))
