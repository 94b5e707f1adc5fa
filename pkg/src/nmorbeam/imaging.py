"""Balanced-polarimeter camera frames: synthesis and inversion to rotation maps.

The two analyzer outputs are modelled as ``I1,2 = (I/2)(1 -/+ sin 2 phi)``.
Inversion defaults to ``phi = arcsin((I2 - I1) / (2 (I2 + I1)))``, which
returns ``phi - phi^3/2 + O(phi^5)`` for that forward model; pass
``exact=True`` for ``arcsin((I2 - I1)/(I2 + I1)) / 2``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .constants import LIGHT_SPEED, MU0, PLANCK_H
from .errors import DegenerateFrame, MaskMismatch, SaturationWarning
from .maps import Grid, NormalizedMap, ResponseMap, RotationMap
from .physics import GeometryParams

CHANNELS = ("ch1", "ch2")
# stream keys for the seeded generators; fluorescence frames share the format
CHANNEL_CODES = {"ch1": 0, "ch2": 1, "fluorescence": 2}
BEAM_STATES = ("on", "off")
DEFAULT_WAVELENGTH = 780e-9
SATURATION_FRACTION = 1e-3


@dataclass(frozen=True)
class CameraConfig:
    pixels_y: int = 256
    pixels_z: int = 256
    pixel_pitch: float = 15.625e-6  # sensor plane, m
    magnification: float = 0.50
    exposure: float = 200e-6  # s
    quantum_efficiency: float = 0.5
    read_noise: float = 5.0  # electrons rms
    gain: float = 1.0  # electrons per DN
    bit_depth: int = 16
    rng_seed: int | None = None
    transmission: float = 3e-3  # neutral-density attenuation between cell and sensor

    def __post_init__(self):
        if not 0 < self.transmission <= 1:
            raise ValueError("transmission must lie in (0, 1]")
        if self.pixels_y < 1 or self.pixels_z < 1:
            raise ValueError("pixel counts must be positive")
        for name in ("pixel_pitch", "magnification", "exposure", "gain"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.quantum_efficiency <= 1:
            raise ValueError("quantum_efficiency must lie in (0, 1]")
        if self.read_noise < 0:
            raise ValueError("read_noise must be non-negative")
        if not 1 <= self.bit_depth <= 16:
            raise ValueError("bit_depth must be between 1 and 16")
        if self.rng_seed is not None and not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must be an unsigned 64-bit integer")

    @property
    def object_pixel_size(self) -> float:
        return self.pixel_pitch / self.magnification

    @property
    def max_dn(self) -> int:
        return 2**self.bit_depth - 1

    def grid(self) -> Grid:
        return Grid(self.pixels_y, self.pixels_z, self.object_pixel_size)


@dataclass
class Frame:
    """One exposure in digital numbers.

    Noisy frames hold integer counts (``quantized=True``); noiseless frames
    keep the ideal, unrounded DN values as float64.
    """

    data: np.ndarray
    channel: str
    beam_state: str
    config: CameraConfig
    acquisition_index: int = 0
    grid: Grid | None = None
    quantized: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.channel not in CHANNEL_CODES:
            raise ValueError(f"channel must be one of {tuple(CHANNEL_CODES)}")
        if self.beam_state not in BEAM_STATES:
            raise ValueError(f"beam_state must be one of {BEAM_STATES}")
        if self.grid is None:
            self.grid = self.config.grid()
        if self.data.shape != self.grid.shape:
            raise ValueError("frame data does not match grid")

    @property
    def saturated(self) -> np.ndarray:
        return self.data >= self.config.max_dn


def photon_energy(wavelength=DEFAULT_WAVELENGTH) -> float:
    return PLANCK_H * LIGHT_SPEED / wavelength


def laser_profile(c: CameraConfig, g: GeometryParams, peak_intensity: float,
                  grid: Grid | None = None) -> np.ndarray:
    """Gaussian intensity (W/m^2) with 1/e^2 radius ``g.laser_radius``."""
    if not peak_intensity > 0:
        raise ValueError("peak_intensity must be positive")
    grid = grid or c.grid()
    yy, zz = grid.mesh()
    r2 = (yy - grid.center_y) ** 2 + (zz - grid.center_z) ** 2
    return peak_intensity * np.exp(-2 * r2 / g.laser_radius**2)


def mean_photoelectrons(intensity, c: CameraConfig, wavelength=DEFAULT_WAVELENGTH):
    """Expected photoelectrons per pixel for an in-cell intensity."""
    area = c.object_pixel_size**2
    return (np.asarray(intensity) * c.transmission * area * c.exposure * c.quantum_efficiency
            / photon_energy(wavelength))


def ideal_channels(intensity, phi):
    s = np.sin(2 * np.asarray(phi, dtype=float))
    half = 0.5 * np.asarray(intensity, dtype=float)
    return half * (1 - s), half * (1 + s)


def frame_rng(seed: int, acquisition_index: int, channel: str) -> np.random.Generator:
    """Counter-based stream keyed by (seed, acquisition, channel)."""
    ss = np.random.SeedSequence([seed, acquisition_index, CHANNEL_CODES[channel]])
    return np.random.Generator(np.random.Philox(ss))


def expose(mean_e, c: CameraConfig, noise_on: bool, rng=None):
    """Photoelectron means to DN: shot + read noise, gain, clipping.

    Returns ``(data, quantized)``.
    """
    if noise_on:
        electrons = rng.poisson(mean_e).astype(float)
        if c.read_noise > 0:
            electrons += rng.normal(0.0, c.read_noise, size=np.shape(mean_e))
        dn = np.clip(np.rint(electrons / c.gain), 0, c.max_dn)
        return dn.astype(np.uint16), True
    return np.clip(np.asarray(mean_e, dtype=float) / c.gain, 0, c.max_dn), False


def _warn_saturation(frames, laser):
    region = laser >= 0.05 * laser.max()
    n = max(int(region.sum()), 1)
    for fr in frames:
        frac = np.count_nonzero(fr.saturated & region) / n
        if frac > SATURATION_FRACTION:
            warnings.warn(f"{fr.channel}/{fr.beam_state}: {frac:.2%} of pixels saturated",
                          SaturationWarning, stacklevel=3)


def synthesize_frame_pair(phi_true: RotationMap, laser, c: CameraConfig, beam_state: str,
                          noise_on: bool, *, stray_phi=0.0, acquisition_index: int = 0,
                          wavelength: float = DEFAULT_WAVELENGTH):
    """Render the (ch1, ch2) frames for one beam state."""
    laser = np.asarray(laser, dtype=float)
    if beam_state not in BEAM_STATES:
        raise ValueError(f"beam_state must be one of {BEAM_STATES}")
    if phi_true.phi.shape != laser.shape or laser.shape != (c.pixels_y, c.pixels_z):
        raise ValueError("rotation map, laser profile and camera grid differ in shape")
    if noise_on and c.rng_seed is None:
        raise ValueError("noise_on requires CameraConfig.rng_seed")

    phi = np.where(phi_true.mask, np.nan_to_num(phi_true.phi), 0.0) if beam_state == "on" else 0.0
    phi = phi + stray_phi
    frames = []
    for ch, intensity in zip(CHANNELS, ideal_channels(laser, phi)):
        rng = frame_rng(c.rng_seed, acquisition_index, ch) if noise_on else None
        data, quantized = expose(mean_photoelectrons(intensity, c, wavelength), c, noise_on, rng)
        frames.append(Frame(data, ch, beam_state, c, acquisition_index, phi_true.grid,
                            quantized, {"wavelength_m": wavelength}))
    _warn_saturation(frames, laser)
    return frames[0], frames[1]


def phi_from_channels(i1, i2, exact=False):
    i1 = np.asarray(i1, dtype=float)
    i2 = np.asarray(i2, dtype=float)
    ratio = (i2 - i1) / (i2 + i1)
    if exact:
        return 0.5 * np.arcsin(np.clip(ratio, -1, 1))
    return np.arcsin(0.5 * ratio)


def inversion_error_bound(phi):
    """Bound on the error of the default inversion for ``|phi| <= 0.3`` rad.

    The residual is ``-(phi^3/2 + phi^5/8 + ...)``; the quintic term is
    doubled here to cover the tail.
    """
    a = np.abs(phi)
    return 0.5 * a**3 + 0.25 * a**5


def _check_pair(pair, state):
    ch1, ch2 = pair
    if (ch1.channel, ch2.channel) != CHANNELS:
        raise ValueError("frame pair must be ordered (ch1, ch2)")
    if ch1.beam_state != state or ch2.beam_state != state:
        raise ValueError(f"expected beam_state={state!r} pair")


def rotation_from_frames(on_pair, off_pair, mask_threshold: float = 0.05,
                         exact: bool = False) -> RotationMap:
    """Beam-on minus beam-off rotation; pixels under the threshold are masked."""
    _check_pair(on_pair, "on")
    _check_pair(off_pair, "off")
    frames = [*on_pair, *off_pair]
    grid = frames[0].grid
    for fr in frames[1:]:
        if fr.grid != grid or fr.config != frames[0].config:
            raise ValueError("frames do not share camera config and grid")

    on1, on2 = (f.data.astype(float) for f in on_pair)
    off1, off2 = (f.data.astype(float) for f in off_pair)
    total_off = off1 + off2
    peak = total_off.max()
    mask = (total_off > 0) & (total_off >= mask_threshold * peak)
    if np.any((on1 + on2)[mask] == 0):
        raise DegenerateFrame("beam-on channels sum to zero inside the mask")
    if not mask.any():
        raise DegenerateFrame("beam-off frames carry no light")

    phi = np.full(grid.shape, np.nan)
    phi[mask] = (phi_from_channels(on1[mask], on2[mask], exact)
                 - phi_from_channels(off1[mask], off2[mask], exact))
    return RotationMap(phi, mask, grid)


def dn_variance(frame: Frame) -> np.ndarray:
    """Noise-model variance of each pixel in DN^2 (shot + read + rounding)."""
    c = frame.config
    dn = np.clip(frame.data.astype(float), 0, None)
    var = dn / c.gain + (c.read_noise / c.gain) ** 2
    return var + 1 / 12 if frame.quantized else var


def rotation_variance(on_pair, off_pair, exact: bool = True) -> np.ndarray:
    """Propagated variance (rad^2) of the beam-on minus beam-off rotation."""
    total = 0.0
    for i1f, i2f in (on_pair, off_pair):
        i1 = i1f.data.astype(float)
        i2 = i2f.data.astype(float)
        s = i1 + i2
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = (i2 - i1) / s
            var_r = 4 * (i2**2 * dn_variance(i1f) + i1**2 * dn_variance(i2f)) / s**4
            if exact:
                slope2 = 1 / (4 * (1 - np.clip(ratio, -1, 1) ** 2))
            else:
                slope2 = 1 / (4 * (1 - (ratio / 2) ** 2))
        total = total + slope2 * var_r
    return total


def normalize_map(phi: RotationMap, beta: ResponseMap) -> NormalizedMap:
    """``phi / (mu0 beta)`` on the intersection of both masks."""
    if phi.grid != beta.grid:
        raise ValueError("rotation and response maps are on different grids")
    mask = phi.mask & beta.mask
    if not mask.any():
        raise MaskMismatch("rotation and response masks do not overlap")
    out = np.full(phi.grid.shape, np.nan)
    out[mask] = phi.phi[mask] / (MU0 * beta.beta[mask])
    return NormalizedMap(out, mask, phi.grid)
