"""End-to-end workflows: scenario -> frames -> rotation -> fit."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .atomic import calibrate_beta
from .constants import MU0
from .errors import ValidityWarning
from .fluorescence import FluorescenceFit, fit_fluorescence, synthesize_fluorescence
from .imaging import (laser_profile, normalize_map, rotation_from_frames, rotation_variance,
                      synthesize_frame_pair)
from .maps import Grid, NormalizedMap, ResponseMap, RotationMap
from .physics import BeamParams, GeometryParams, closed_form_signal, quadrature_signal
from .reconstruction import FitConfig, fit_erf_model
from .scenario import Scenario

ON_ACQUISITION, OFF_ACQUISITION = 0, 1


def signal_rows(beam: BeamParams, geometry: GeometryParams, grid: Grid, method="quadrature"):
    """Normalized signal (A) per grid row; uniform along z."""
    if method == "closed_form":
        return closed_form_signal(grid.y, beam, geometry)
    return quadrature_signal(grid.y, beam, geometry)


def true_signal_map(beam, geometry, grid, method="quadrature") -> NormalizedMap:
    rows = signal_rows(beam, geometry, grid, method)
    return NormalizedMap(np.repeat(rows[:, None], grid.nz, axis=1),
                         np.ones(grid.shape, dtype=bool), grid)


def forward_rotation(beam, geometry, beta: ResponseMap, method="quadrature") -> RotationMap:
    """``phi = mu0 beta Phi`` on the response mask."""
    signal = true_signal_map(beam, geometry, beta.grid, method).signal
    phi = np.where(beta.mask, MU0 * beta.beta * signal, np.nan)
    return RotationMap(phi, beta.mask.copy(), beta.grid)


@dataclass
class Simulation:
    frames: dict  # (beam_state, channel) -> Frame
    beta: ResponseMap  # calibration map at the analysis threshold
    phi_true: RotationMap
    laser: np.ndarray
    truth: dict

    def pairs(self):
        f = self.frames
        return (f["on", "ch1"], f["on", "ch2"]), (f["off", "ch1"], f["off", "ch2"])


def response_maps(sc: Scenario, laser, grid):
    """(analysis map masked at the threshold, unmasked map used for synthesis)."""
    kw = dict(g=sc.geometry, a=sc.atoms, model=sc.response_model, grid=grid)
    beta = calibrate_beta(sc.calibration_field, laser, mask_threshold=sc.mask_threshold, **kw)
    with warnings.catch_warnings():
        # the dim wings leave the small-shift regime; they never reach the fit
        warnings.simplefilter("ignore", ValidityWarning)
        beta_all = calibrate_beta(sc.calibration_field, laser, mask_threshold=0.0, **kw)
    return beta, beta_all


def simulate(sc: Scenario) -> Simulation:
    grid = sc.camera.grid()
    laser = laser_profile(sc.camera, sc.geometry, sc.peak_intensity, grid)
    beta, beta_all = response_maps(sc, laser, grid)
    phi_true = forward_rotation(sc.beam, sc.geometry, beta_all, sc.forward_model)
    frames = {}
    for state, acq in (("on", ON_ACQUISITION), ("off", OFF_ACQUISITION)):
        ch1, ch2 = synthesize_frame_pair(
            phi_true, laser, sc.camera, state, sc.noise_on,
            stray_phi=sc.stray_rotation, acquisition_index=acq,
            wavelength=sc.atoms.wavelength_lambda)
        frames[state, "ch1"], frames[state, "ch2"] = ch1, ch2
    return Simulation(frames, beta, phi_true, laser, truth_record(sc))


def truth_record(sc: Scenario) -> dict:
    return {
        "total_current_A": sc.beam.total_current,
        "center_y0_m": sc.beam.center_y0,
        "center_x0_m": sc.beam.center_x0,
        "width_w_m": sc.beam.width_w,
        "energy_keV": sc.energy_keV,
        "cell_path_L_m": sc.geometry.cell_path_L,
        "response_model": sc.response_model,
        "forward_model": sc.forward_model,
        "noise_on": sc.noise_on,
        "seed": sc.seed,
    }


def reconstruct(on_pair, off_pair, beta: ResponseMap, cell_path_L: float,
                cfg: FitConfig | None = None, mask_threshold: float = 0.05,
                exact: bool = False):
    """Frames -> masked rotation -> normalized map -> fit. Returns (fit, normalized map).

    Frames carrying shot noise are fitted with inverse-variance weights from
    the camera noise model; noiseless frames are fitted unweighted.
    """
    rot = rotation_from_frames(on_pair, off_pair, mask_threshold, exact)
    norm = normalize_map(rot, beta)
    weights = None
    if any(f.quantized for f in (*on_pair, *off_pair)):
        var_phi = rotation_variance(on_pair, off_pair, exact)
        with np.errstate(divide="ignore", invalid="ignore"):
            weights = np.where(norm.mask, (MU0 * beta.beta) ** 2 / var_phi, 0.0)
    return fit_erf_model(norm, cell_path_L, cfg, weights=weights), norm


def simulate_and_fit(sc: Scenario):
    sim = simulate(sc)
    on, off = sim.pairs()
    fit, norm = reconstruct(on, off, sim.beta, sc.geometry.cell_path_L, sc.fit,
                            sc.mask_threshold, sc.inversion == "exact")
    return sim, fit, norm


def fluorescence_fit(sc: Scenario, acquisition_index: int = 0) -> FluorescenceFit:
    frame = synthesize_fluorescence(sc.beam, sc.fluorescence, noise_on=sc.noise_on,
                                    acquisition_index=acquisition_index)
    return fit_fluorescence(frame)


def rotation_amplitude(sc: Scenario) -> float:
    """Half the peak-to-peak of the z-averaged measured rotation profile (rad)."""
    sim = simulate(sc)
    on, off = sim.pairs()
    rot = rotation_from_frames(on, off, sc.mask_threshold, sc.inversion == "exact")
    counts = rot.mask.sum(axis=1)
    rows = counts > 0
    prof = np.where(rot.mask, rot.phi, 0.0).sum(axis=1)[rows] / counts[rows]
    return 0.5 * float(prof.max() - prof.min())


def estimate_responsivity(sc: Scenario, currents=(10e-6, 50e-6, 100e-6, 200e-6)):
    """Finite-difference rotation per ampere through the noiseless pipeline.

    Returns the slopes between consecutive currents (rad/A).
    """
    from .sensitivity import finite_difference_slopes

    quiet = replace(sc, noise_on=False)
    return finite_difference_slopes(
        lambda c: rotation_amplitude(quiet.with_beam(total_current=c)), currents)
