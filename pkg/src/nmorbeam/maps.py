"""Object-plane pixel grid and the per-pixel map containers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Pixel-centred grid; axis 0 is y (vertical), axis 1 is z (beam axis).

    Pixel centres are symmetric about ``(center_y, center_z)``.
    """

    ny: int
    nz: int
    pixel_size: float  # object-plane metres per pixel
    center_y: float = 0.0
    center_z: float = 0.0

    def __post_init__(self):
        if self.ny < 1 or self.nz < 1:
            raise ValueError("grid needs at least one pixel per axis")
        if not self.pixel_size > 0:
            raise ValueError("pixel_size must be positive")

    @property
    def shape(self):
        return (self.ny, self.nz)

    @property
    def y(self) -> np.ndarray:
        return self.center_y + (np.arange(self.ny) - 0.5 * (self.ny - 1)) * self.pixel_size

    @property
    def z(self) -> np.ndarray:
        return self.center_z + (np.arange(self.nz) - 0.5 * (self.nz - 1)) * self.pixel_size

    def mesh(self):
        return np.meshgrid(self.y, self.z, indexing="ij")

    def to_dict(self):
        return {
            "ny": self.ny,
            "nz": self.nz,
            "pixel_size_m": self.pixel_size,
            "center_y_m": self.center_y,
            "center_z_m": self.center_z,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["ny"]), int(d["nz"]), float(d["pixel_size_m"]),
                   float(d["center_y_m"]), float(d["center_z_m"]))


def _check(values, mask, grid):
    if values.shape != grid.shape or mask.shape != grid.shape:
        raise ValueError(f"array shapes {values.shape}/{mask.shape} != grid {grid.shape}")


@dataclass
class ResponseMap:
    """Rotation response beta in rad/(T m); NaN outside ``mask``."""

    beta: np.ndarray
    mask: np.ndarray
    grid: Grid

    def __post_init__(self):
        _check(self.beta, self.mask, self.grid)
        vals = self.beta[self.mask]
        if not (np.all(np.isfinite(vals)) and np.all(vals > 0)):
            raise ValueError("beta must be finite and positive on the mask")


@dataclass
class RotationMap:
    """Polarization rotation phi in radians; NaN outside ``mask``."""

    phi: np.ndarray
    mask: np.ndarray
    grid: Grid

    def __post_init__(self):
        _check(self.phi, self.mask, self.grid)


@dataclass
class NormalizedMap:
    """Normalized signal ``phi / (mu0 beta)`` in amperes; NaN outside ``mask``."""

    signal: np.ndarray
    mask: np.ndarray
    grid: Grid

    def __post_init__(self):
        _check(self.signal, self.mask, self.grid)

    @property
    def n_valid(self) -> int:
        return int(self.mask.sum())
