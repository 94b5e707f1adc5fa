"""Shared builders for synthetic normalized maps."""

import numpy as np

from nmorbeam.maps import Grid, NormalizedMap
from nmorbeam.physics import BeamParams, GeometryParams
from nmorbeam.pipeline import true_signal_map

GEO = GeometryParams()
SMALL_GRID = Grid(64, 16, 125e-6)


def signal_map(i0=100e-6, y0=0.0, w=1e-3, grid=SMALL_GRID, method="closed_form"):
    return true_signal_map(BeamParams(i0, w, center_y0=y0), GEO, grid, method)


def noisy(m, sigma, rng):
    noise = rng.normal(0.0, sigma, size=m.signal.shape)
    return NormalizedMap(np.where(m.mask, m.signal + noise, np.nan), m.mask, m.grid)
