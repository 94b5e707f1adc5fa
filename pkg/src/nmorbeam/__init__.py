"""Optical-magnetometry (NMOR) imaging of electron beams: forward model,
synthetic polarimeter frames, and beam-parameter reconstruction."""

__version__ = "0.1.0"

from .atomic import AtomParams, calibrate_beta
from .fluorescence import FluorescenceConfig, fit_fluorescence, synthesize_fluorescence
from .imaging import (CameraConfig, Frame, laser_profile, normalize_map, rotation_from_frames,
                      synthesize_frame_pair)
from .maps import Grid, NormalizedMap, ResponseMap, RotationMap
from .physics import (BeamParams, GeometryParams, b_field_magnitude, b_field_x, closed_form_signal,
                      current_density, erf, integrated_bx_quadrature)
from .reconstruction import FitConfig, FitResult, fit_erf_model, fwhm_from_w, regression_compare
from .scenario import Scenario, load_scenario

__all__ = [
    "AtomParams", "BeamParams", "CameraConfig", "FitConfig", "FitResult", "FluorescenceConfig",
    "Frame", "GeometryParams", "Grid", "NormalizedMap", "ResponseMap", "RotationMap", "Scenario",
    "b_field_magnitude", "b_field_x", "calibrate_beta", "closed_form_signal", "current_density",
    "erf", "fit_erf_model", "fit_fluorescence", "fwhm_from_w", "integrated_bx_quadrature",
    "laser_profile", "load_scenario", "normalize_map", "regression_compare", "rotation_from_frames",
    "synthesize_fluorescence", "synthesize_frame_pair",
]
