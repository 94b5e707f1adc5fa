"""Recover beam current, centroid and width from a normalized rotation map."""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import DegenerateInput, NonConvergence, NoSignChange, SingularJacobian
from .maps import NormalizedMap
from .physics import closed_form_jacobian, erf

CSV_COLUMNS = ("I0_A", "I0_err", "y0_m", "y0_err", "w_m", "w_err", "fwhm_m",
               "residual", "iterations", "converged")
FWHM_PER_W = 2 * math.sqrt(math.log(2))
MIN_VALID_PIXELS = 100


@dataclass(frozen=True)
class FitConfig:
    max_iterations: int = 200
    parameter_tolerance: float = 1e-10
    residual_tolerance: float = 1e-12
    initial_damping: float = 1e-3

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        for name in ("parameter_tolerance", "residual_tolerance", "initial_damping"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class FitResult:
    current_I0: float
    center_y0: float
    width_w: float
    current_err: float
    center_err: float
    width_err: float
    residual_norm: float
    iterations: int
    converged: bool
    covariance: np.ndarray
    gradient_norm: float = 0.0
    n_pixels: int = 0
    history: list = field(default_factory=list, repr=False)

    @property
    def params(self):
        return np.array([self.current_I0, self.center_y0, self.width_w])

    @property
    def errors(self):
        return np.array([self.current_err, self.center_err, self.width_err])

    @property
    def fwhm(self) -> float:
        return fwhm_from_w(self.width_w)

    def csv_row(self) -> dict:
        return {
            "I0_A": repr(self.current_I0), "I0_err": repr(self.current_err),
            "y0_m": repr(self.center_y0), "y0_err": repr(self.center_err),
            "w_m": repr(self.width_w), "w_err": repr(self.width_err),
            "fwhm_m": repr(self.fwhm), "residual": repr(self.residual_norm),
            "iterations": str(self.iterations), "converged": str(self.converged).lower(),
        }

    def to_dict(self) -> dict:
        return {
            "current_I0_A": self.current_I0, "current_err_A": self.current_err,
            "center_y0_m": self.center_y0, "center_err_m": self.center_err,
            "width_w_m": self.width_w, "width_err_m": self.width_err,
            "fwhm_m": self.fwhm, "residual_norm_A": self.residual_norm,
            "iterations": self.iterations, "converged": self.converged,
            "gradient_norm": self.gradient_norm, "n_pixels": self.n_pixels,
            "covariance": self.covariance.tolist(),
        }


def csv_text(results) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in results:
        writer.writerow(r.csv_row())
    return buf.getvalue()


def _shape(y, y0, w, L):
    # closed-form profile per unit current
    dy = y - y0
    return 0.5 * (erf(dy / w) - (2 / math.pi) * np.arctan(2 * dy / L))


def model_signal(y, params, cell_path_L):
    i0, y0, w = params
    return i0 * _shape(np.asarray(y, dtype=float), y0, w, cell_path_L)


def row_profile(m: NormalizedMap):
    """z-averaged profile over rows holding at least one valid pixel."""
    counts = m.mask.sum(axis=1)
    rows = counts > 0
    sums = np.where(m.mask, m.signal, 0.0).sum(axis=1)
    return m.grid.y[rows], sums[rows] / counts[rows]


def _peak_offset(w, L):
    # u* > 0 where d/du [erf(u) - (2/pi) arctan(2uw/L)] = 0
    a = 2 * w / L
    fprime = lambda u: 2 / math.sqrt(math.pi) * math.exp(-u * u) - (2 / math.pi) * a / (1 + (a * u) ** 2)
    hi = 1.0
    while fprime(hi) > 0:
        hi *= 2
        if hi > 1e6:
            return None
    return optimize.brentq(fprime, 0.0, hi)


def initial_guess(m: NormalizedMap, cell_path_L: float = 45e-3):
    """Starting (I0, y0, w) from the z-averaged profile.

    y0: sign change nearest the grid centre, linearly interpolated.
    w: half the distance between the profile extrema, rescaled by the model's
    extremum position. I0: peak-to-peak over the model's value at those rows.
    """
    if m.n_valid < MIN_VALID_PIXELS:
        raise DegenerateInput(f"need >= {MIN_VALID_PIXELS} valid pixels, got {m.n_valid}")
    y, prof = row_profile(m)
    s = np.sign(prof)
    crossings = []
    for i in range(len(prof) - 1):
        if s[i] == 0 and i > 0 and s[i - 1] * s[i + 1] < 0:
            crossings.append(y[i])
        elif s[i] * s[i + 1] < 0:
            t = prof[i] / (prof[i] - prof[i + 1])
            crossings.append(y[i] + t * (y[i + 1] - y[i]))
    if not crossings:
        raise NoSignChange("normalized signal does not change sign")
    centre = m.grid.center_y
    y0 = min(crossings, key=lambda c: (abs(c - centre), c))

    i_max, i_min = int(np.argmax(prof)), int(np.argmin(prof))
    half = 0.5 * abs(y[i_max] - y[i_min])
    w = max(half, m.grid.pixel_size)
    for _ in range(50):
        u = _peak_offset(w, cell_path_L)
        if u is None:
            break
        w_new = max(half / u, m.grid.pixel_size)
        if abs(w_new - w) <= 1e-9 * w:
            w = w_new
            break
        w = w_new
    denom = _shape(y[i_max], y0, w, cell_path_L) - _shape(y[i_min], y0, w, cell_path_L)
    ptp = prof[i_max] - prof[i_min]
    i0 = ptp / denom if denom != 0 else ptp
    return float(i0), float(y0), float(w)


def _jacobian(y, params, L):
    d_i0, d_y0, d_w = closed_form_jacobian(y, *params, L)
    return np.column_stack([d_i0, d_y0, d_w])


def _gradient_measure(J, r):
    rn = np.linalg.norm(r)
    if rn == 0:
        return 0.0
    cols = np.linalg.norm(J, axis=0)
    cols[cols == 0] = 1.0
    return float(np.max(np.abs(J.T @ r) / (cols * rn)))


def fit_erf_model(m: NormalizedMap, cell_path_L: float = 45e-3, cfg: FitConfig | None = None,
                  guess=None, weights=None) -> FitResult:
    """Damped least-squares fit of the erf-arctan model over all masked pixels.

    ``weights`` (same shape as the map) are optional inverse variances.
    Iteration never accepts a step that raises the residual; on hitting
    ``max_iterations`` the best point is returned with ``converged=False``.
    """
    cfg = cfg or FitConfig()
    if guess is None:
        guess = initial_guess(m, cell_path_L)
    yy = np.broadcast_to(m.grid.y[:, None], m.grid.shape)[m.mask]
    data = m.signal[m.mask]
    sw = np.ones_like(data) if weights is None else np.sqrt(np.asarray(weights)[m.mask])
    n = data.size
    if n <= 3:
        raise DegenerateInput("not enough pixels to fit three parameters")
    y_lo, y_hi = m.grid.y[0], m.grid.y[-1]

    def residual(p):
        return sw * (model_signal(yy, p, cell_path_L) - data)

    p = np.array(guess, dtype=float)
    if not p[2] > 0:
        raise ValueError("initial width must be positive")
    r = residual(p)
    cost = 0.5 * float(r @ r)
    lam = cfg.initial_damping
    converged = False
    history = [cost]
    it = 0
    while it < cfg.max_iterations:
        it += 1
        J = sw[:, None] * _jacobian(yy, p, cell_path_L)
        A = J.T @ J
        g = J.T @ r
        d = np.diag(A).copy()
        if np.any(d <= 0) or not np.all(np.isfinite(A)):
            raise SingularJacobian("a fit parameter has no influence on the model")
        if cost == 0.0:
            converged = True
            break
        accepted = False
        while lam < 1e16:
            try:
                step = np.linalg.solve(A + lam * np.diag(d), -g)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            trial = p + step
            if trial[2] > 0 and y_lo <= trial[1] <= y_hi:
                r_t = residual(trial)
                cost_t = 0.5 * float(r_t @ r_t)
                if cost_t <= cost:
                    accepted = True
                    break
            lam *= 10
        if not accepted:
            # no decrease possible at any damping: stationary to working precision
            converged = _gradient_measure(J, r) < 1e-6
            break
        scale = np.array([abs(p[0]), max(abs(p[1]), p[2]), p[2]])
        small_step = np.all(np.abs(step) <= cfg.parameter_tolerance * scale)
        small_gain = cost - cost_t <= cfg.residual_tolerance * cost
        p, r, cost = trial, r_t, cost_t
        history.append(cost)
        lam = max(lam / 10, 1e-15)
        if small_step or small_gain or cost == 0.0:
            converged = True
            break

    J = sw[:, None] * _jacobian(yy, p, cell_path_L)
    A = J.T @ J
    dscale = np.sqrt(np.diag(A))
    if np.any(dscale == 0):
        raise SingularJacobian("singular normal matrix at solution")
    An = A / np.outer(dscale, dscale)
    if np.linalg.cond(An) > 1e14:
        raise SingularJacobian("normal matrix is numerically singular (degenerate y0/w)")
    s2 = 2 * cost / (n - 3)
    cov = s2 * np.linalg.inv(An) / np.outer(dscale, dscale)
    cov = 0.5 * (cov + cov.T)
    errs = np.sqrt(np.clip(np.diag(cov), 0, None))
    return FitResult(
        float(p[0]), float(p[1]), float(p[2]), float(errs[0]), float(errs[1]), float(errs[2]),
        residual_norm=float(np.linalg.norm(r)), iterations=it, converged=converged,
        covariance=cov, gradient_norm=_gradient_measure(J, r), n_pixels=n, history=history,
    )


def fit_or_raise(m, cell_path_L=45e-3, cfg=None, **kw) -> FitResult:
    res = fit_erf_model(m, cell_path_L, cfg, **kw)
    if not res.converged:
        raise NonConvergence(f"fit did not converge in {res.iterations} iterations")
    return res


def fwhm_from_w(w):
    """FWHM of ``exp(-r^2/w^2)``: ``2 w sqrt(ln 2)``."""
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0):
        raise ValueError("w must be positive")
    out = FWHM_PER_W * w
    return out if out.ndim else float(out)


def w_from_fwhm(fwhm):
    return fwhm / FWHM_PER_W


@dataclass(frozen=True)
class Regression:
    slope: float
    stderr: float
    n: int

    def __str__(self):
        return format_slope(self.slope, self.stderr)


def regression_compare(x, y) -> Regression:
    """Zero-intercept least squares ``y = slope * x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DegenerateInput("x and y must be 1-D and the same length")
    if x.size < 2:
        raise DegenerateInput("need at least two points")
    sxx = float(x @ x)
    if sxx == 0:
        raise DegenerateInput("x is identically zero")
    slope = float(x @ y) / sxx
    res = y - slope * x
    stderr = math.sqrt(float(res @ res) / (x.size - 1) / sxx)
    return Regression(slope, stderr, int(x.size))


def format_slope(slope, err, digits=2) -> str:
    return f"({slope:.{digits}f} ± {err:.{digits}f})"


_SLOPE_RE = re.compile(r"\(?\s*([-+]?\d*\.?\d+(?:[eE][-+]?\d+)?)\s*(?:±|\+/-|\\pm)\s*"
                       r"(\d*\.?\d+(?:[eE][-+]?\d+)?)\s*\)?")


def parse_slope(text: str):
    """Read a ``(a ± b)`` slope as printed in a report or caption."""
    mt = _SLOPE_RE.search(text)
    if mt is None:
        raise ValueError(f"no 'value ± error' in {text!r}")
    return float(mt.group(1)), float(mt.group(2))
