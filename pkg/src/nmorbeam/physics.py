"""Gaussian electron-beam current density, its magnetic field, and the
path-integrated field seen by a probe laser crossing the beam along x.

Coordinates: the beam travels along z, the laser along x, y is vertical.
Sign convention: ``B_x`` carries the sign of ``total_current * (y - y0)``,
so the normalized signal equals ``(I0/2)[erf(u) - (2/pi) arctan(2uw/L)]``
for positive current.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

from .constants import MU0
from .errors import ApproximationDomainWarning
from .quadrature import QuadResult, integrate

# below this fraction of w the field kernel uses its Taylor series
SERIES_RADIUS = 1e-6
# closed form is trusted when exp(-L^2/4w^2) stays below this
CLOSED_FORM_EDGE_LIMIT = 1e-12


@dataclass(frozen=True)
class BeamParams:
    total_current: float  # A, conventional current along +z
    width_w: float  # m, scale of exp(-r^2/w^2)
    center_y0: float = 0.0
    center_x0: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.width_w) and self.width_w > 0):
            raise ValueError(f"width_w must be positive, got {self.width_w!r}")
        if not math.isfinite(self.total_current):
            raise ValueError("total_current must be finite")
        if not (math.isfinite(self.center_y0) and math.isfinite(self.center_x0)):
            raise ValueError("beam center must be finite")


@dataclass(frozen=True)
class GeometryParams:
    cell_path_L: float = 45e-3
    laser_radius: float = 3e-3  # 1/e^2 intensity radius
    extent_y: float = 8e-3
    extent_z: float = 8e-3

    def __post_init__(self):
        for name in ("cell_path_L", "laser_radius", "extent_y", "extent_z"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v!r}")


def erf(x):
    """Error function, exactly odd and saturating to +-1 beyond |x| = 6."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    out = np.where(ax > 6.0, 1.0, special.erf(np.minimum(ax, 6.0)))
    out = np.copysign(out, x)
    return out if out.ndim else float(out)


def current_density(x, y, p: BeamParams):
    """Current density in A/m^2."""
    r2 = (np.asarray(x) - p.center_x0) ** 2 + (np.asarray(y) - p.center_y0) ** 2
    return p.total_current / (math.pi * p.width_w**2) * np.exp(-r2 / p.width_w**2)


def _field_kernel(r2, w):
    # (1 - exp(-r^2/w^2)) / r^2, with the removable singularity at r = 0
    r2 = np.asarray(r2, dtype=float)
    rho2 = r2 / w**2
    small = rho2 < SERIES_RADIUS**2
    safe = np.where(small, 1.0, r2)
    out = -np.expm1(-np.where(small, 1.0, rho2)) / safe
    series = (1.0 - 0.5 * rho2) / w**2
    return np.where(small, series, out)


def b_field_magnitude(x, y, p: BeamParams):
    """|B| in tesla from the enclosed-current (Ampere) solution."""
    dx = np.asarray(x, dtype=float) - p.center_x0
    dy = np.asarray(y, dtype=float) - p.center_y0
    r2 = dx * dx + dy * dy
    r = np.sqrt(r2)
    return MU0 * abs(p.total_current) / (2 * math.pi) * r * _field_kernel(r2, p.width_w)


def b_field_x(x, y, p: BeamParams):
    """Field component along the probe direction; odd in (y - y0)."""
    dx = np.asarray(x, dtype=float) - p.center_x0
    dy = np.asarray(y, dtype=float) - p.center_y0
    k = _field_kernel(dx * dx + dy * dy, p.width_w)
    return MU0 * p.total_current / (2 * math.pi) * dy * k


def b_field_y(x, y, p: BeamParams):
    dx = np.asarray(x, dtype=float) - p.center_x0
    dy = np.asarray(y, dtype=float) - p.center_y0
    k = _field_kernel(dx * dx + dy * dy, p.width_w)
    return -MU0 * p.total_current / (2 * math.pi) * dx * k


def integrated_bx_quadrature(
    y: float, p: BeamParams, g: GeometryParams, tol: float = 1e-10, full_output=False
):
    """Adaptive-quadrature integral of ``B_x`` over ``x`` in ``[-L/2, L/2]`` (T m).

    Raises :class:`~nmorbeam.errors.NonConvergence` when the panel cap is hit.
    """
    if not 1e-14 < tol < 1e-3:
        raise ValueError(f"tol must lie in (1e-14, 1e-3), got {tol!r}")
    half = 0.5 * g.cell_path_L
    w = p.width_w
    y = float(y)
    if y == p.center_y0:
        res = QuadResult(0.0, 0.0, 0)
        return res if full_output else 0.0
    bps = [p.center_x0 + k * w for k in (-10, -3, 0, 3, 10)]
    res = integrate(
        lambda xs: b_field_x(xs, y, p), -half, half,
        rel_tol=tol, abs_tol=1e-20, breakpoints=bps,
    )
    return res if full_output else res.value


def quadrature_signal(y, p: BeamParams, g: GeometryParams, tol: float = 1e-10):
    """Normalized signal (A) from the quadrature path, ``integral / mu0``."""
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.array([integrated_bx_quadrature(v, p, g, tol) for v in ys.ravel()]) / MU0
    out = out.reshape(ys.shape)
    return out if np.ndim(y) else float(out[0])


def closed_form_edge_term(p: BeamParams, g: GeometryParams) -> float:
    """``exp(-L^2/4w^2)``: size of the neglected Gaussian tail."""
    return math.exp(-(g.cell_path_L**2) / (4 * p.width_w**2))


def closed_form_signal(y, p: BeamParams, g: GeometryParams):
    """Normalized signal (A): ``(I0/2)[erf(dy/w) - (2/pi) arctan(2 dy/L)]``.

    Valid for L >> w; a warning is issued otherwise but the value is still
    returned. The horizontal offset ``center_x0`` is ignored here.
    """
    edge = closed_form_edge_term(p, g)
    if edge > CLOSED_FORM_EDGE_LIMIT:
        warnings.warn(
            f"exp(-L^2/4w^2) = {edge:.3g} exceeds {CLOSED_FORM_EDGE_LIMIT:g}",
            ApproximationDomainWarning,
            stacklevel=2,
        )
    dy = np.asarray(y, dtype=float) - p.center_y0
    out = 0.5 * p.total_current * (
        erf(dy / p.width_w) - (2 / math.pi) * np.arctan(2 * dy / g.cell_path_L)
    )
    return out if np.ndim(out) else float(out)


def closed_form_jacobian(y, current, center, width, cell_path_L):
    """Partial derivatives of the closed form w.r.t. (I0, y0, w)."""
    dy = np.asarray(y, dtype=float) - center
    u = dy / width
    gauss = np.exp(-u * u) * (2 / math.sqrt(math.pi))
    d_i0 = 0.5 * (erf(u) - (2 / math.pi) * np.arctan(2 * dy / cell_path_L))
    d_arctan = (2 / math.pi) * (2 / cell_path_L) / (1 + (2 * dy / cell_path_L) ** 2)
    d_y0 = 0.5 * current * (-gauss / width + d_arctan)
    d_w = 0.5 * current * (-gauss * u / width)
    return d_i0, d_y0, d_w
