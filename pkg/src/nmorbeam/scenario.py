"""Scenario files: YAML with one section per parameter group.

Every physical quantity carries its unit in the key name, e.g.
``total_current_uA``. Unknown keys and invalid values raise
:class:`~nmorbeam.errors.ConfigError` pointing at the offending line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .atomic import MODELS, AtomParams
from .errors import ConfigError
from .fluorescence import FluorescenceConfig
from .imaging import CameraConfig
from .physics import BeamParams, GeometryParams
from .reconstruction import FitConfig

TWO_PI = 2 * math.pi

# section -> key -> (target field, scale to SI, type)
SCHEMA = {
    "beam": {
        "total_current_uA": ("total_current", 1e-6, float),
        "width_w_mm": ("width_w", 1e-3, float),
        "center_y0_mm": ("center_y0", 1e-3, float),
        "center_x0_mm": ("center_x0", 1e-3, float),
        "energy_keV": ("energy_keV", 1.0, float),
    },
    "geometry": {
        "cell_path_L_mm": ("cell_path_L", 1e-3, float),
        "laser_radius_mm": ("laser_radius", 1e-3, float),
        "extent_y_mm": ("extent_y", 1e-3, float),
        "extent_z_mm": ("extent_z", 1e-3, float),
    },
    "atoms": {
        "excited_decoherence_Gamma_over_2pi_MHz": ("excited_decoherence_Gamma", TWO_PI * 1e6, float),
        "ground_decoherence_Gamma0_over_2pi_Hz": ("ground_decoherence_Gamma0", TWO_PI, float),
        "resonant_absorption_alpha0_per_m": ("resonant_absorption_alpha0", 1.0, float),
        "vapor_density_N_per_cm3": ("vapor_density_N", 1e6, float),
        "wavelength_nm": ("wavelength_lambda", 1e-9, float),
        "gyromagnetic_gamma_Hz_per_nT": ("gyromagnetic_gamma", 1e9, float),
        "power_broadening_kappa_over_2pi_Hz_per_W_m2": ("power_broadening_kappa", TWO_PI, float),
    },
    "camera": {
        "pixels_y": ("pixels_y", 1, int),
        "pixels_z": ("pixels_z", 1, int),
        "pixel_pitch_um": ("pixel_pitch", 1e-6, float),
        "magnification": ("magnification", 1.0, float),
        "exposure_us": ("exposure", 1e-6, float),
        "quantum_efficiency": ("quantum_efficiency", 1.0, float),
        "read_noise_e": ("read_noise", 1.0, float),
        "gain_e_per_DN": ("gain", 1.0, float),
        "bit_depth": ("bit_depth", 1, int),
        "transmission": ("transmission", 1.0, float),
    },
    "laser": {
        "peak_intensity_W_per_m2": ("peak_intensity", 1.0, float),
        "calibration_field_nT": ("calibration_field", 1e-9, float),
    },
    "fluorescence": {
        "exposure_s": ("exposure", 1.0, float),
        "quantum_efficiency": ("quantum_efficiency", 1.0, float),
        "magnification": ("magnification", 1.0, float),
        "brightness_scale_per_s_per_A_per_m": ("brightness_scale", 1.0, float),
        "background_e": ("background", 1.0, float),
        "pixels_y": ("pixels_y", 1, int),
        "pixels_z": ("pixels_z", 1, int),
        "pixel_pitch_um": ("pixel_pitch", 1e-6, float),
        "read_noise_e": ("read_noise", 1.0, float),
        "gain_e_per_DN": ("gain", 1.0, float),
        "bit_depth": ("bit_depth", 1, int),
    },
    "fit": {
        "max_iterations": ("max_iterations", 1, int),
        "parameter_tolerance": ("parameter_tolerance", 1.0, float),
        "residual_tolerance": ("residual_tolerance", 1.0, float),
        "initial_damping": ("initial_damping", 1.0, float),
    },
    "simulation": {
        "noise_on": ("noise_on", None, bool),
        "seed": ("seed", None, int),
        "response_model": ("response_model", None, str),
        "forward_model": ("forward_model", None, str),
        "inversion": ("inversion", None, str),
        "mask_threshold": ("mask_threshold", 1.0, float),
        "stray_rotation_mrad": ("stray_rotation", 1e-3, float),
    },
}

FORWARD_MODELS = ("quadrature", "closed_form")
INVERSIONS = ("arcsin_half", "exact")


@dataclass(frozen=True)
class Scenario:
    beam: BeamParams = BeamParams(100e-6, 1e-3)
    geometry: GeometryParams = GeometryParams()
    atoms: AtomParams = AtomParams()
    camera: CameraConfig = CameraConfig()
    fluorescence: FluorescenceConfig = FluorescenceConfig()
    fit: FitConfig = FitConfig()
    noise_on: bool = False
    response_model: str = "linear"
    seed: int | None = None
    forward_model: str = "quadrature"
    inversion: str = "exact"
    mask_threshold: float = 0.05
    stray_rotation: float = 0.0  # rad
    peak_intensity: float = 30.0  # W/m^2, inside the cell
    calibration_field: float = 1e-9  # T
    energy_keV: float = 20.0  # metadata only: the field model does not use it
    lines: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.response_model not in MODELS:
            raise ConfigError(f"response_model must be one of {MODELS}", "response_model",
                              self.lines.get(("simulation", "response_model")))
        if self.forward_model not in FORWARD_MODELS:
            raise ConfigError(f"forward_model must be one of {FORWARD_MODELS}", "forward_model",
                              self.lines.get(("simulation", "forward_model")))
        if self.inversion not in INVERSIONS:
            raise ConfigError(f"inversion must be one of {INVERSIONS}", "inversion",
                              self.lines.get(("simulation", "inversion")))
        if self.noise_on and self.seed is None:
            raise ConfigError("noise_on requires a seed", "seed",
                              self.lines.get(("simulation", "noise_on")))
        if self.seed is not None and not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer", "seed",
                              self.lines.get(("simulation", "seed")))
        if not 0 <= self.mask_threshold < 1:
            raise ConfigError("mask_threshold must lie in [0, 1)", "mask_threshold",
                              self.lines.get(("simulation", "mask_threshold")))
        for name, sec, key in (("peak_intensity", "laser", "peak_intensity_W_per_m2"),
                               ("calibration_field", "laser", "calibration_field_nT")):
            v = getattr(self, name)
            if not (math.isfinite(v) and v != 0) or (name == "peak_intensity" and v < 0):
                raise ConfigError(f"{key} must be {'positive' if name == 'peak_intensity' else 'nonzero'}",
                                  key, self.lines.get((sec, key)))
        cam_y = self.camera.pixels_y * self.camera.object_pixel_size
        cam_z = self.camera.pixels_z * self.camera.object_pixel_size
        if (abs(cam_y - self.geometry.extent_y) > 1e-9 * cam_y
                or abs(cam_z - self.geometry.extent_z) > 1e-9 * cam_z):
            raise ConfigError(
                f"geometry extents ({self.geometry.extent_y:g}, {self.geometry.extent_z:g}) m do not "
                f"match camera field of view ({cam_y:g}, {cam_z:g}) m", "extent_y_mm",
                self.lines.get(("geometry", "extent_y_mm")))

    def with_beam(self, **changes) -> "Scenario":
        return replace(self, beam=replace(self.beam, **changes))


def _line_index(text):
    """Map (section, key) to 1-based line numbers using the YAML node tree."""
    lines = {}
    root = yaml.compose(text)
    if root is None or not isinstance(root, yaml.MappingNode):
        return lines
    for knode, vnode in root.value:
        lines[(knode.value, None)] = knode.start_mark.line + 1
        if isinstance(vnode, yaml.MappingNode):
            for k2, _ in vnode.value:
                lines[(knode.value, k2.value)] = k2.start_mark.line + 1
    return lines


def _to_si(value, scale):
    # dividing by an exact power of ten rounds correctly; multiplying by 1e-6 does not
    inv = round(1 / scale)
    if scale < 1 and abs(inv * scale - 1) < 1e-12:
        return value / inv
    return value * scale


def _coerce(value, typ, key, line):
    if value is None and typ is int:
        return None
    if typ is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be true or false", key, line)
        return value
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer", key, line)
        return value
    if typ is float:
        if isinstance(value, str):
            # YAML 1.1 reads exponents without a sign ("2.7e11") as strings
            try:
                value = float(value)
            except ValueError:
                pass
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number", key, line)
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{key} must be a string", key, line)
    return value


def scenario_from_dict(data, lines=None) -> Scenario:
    lines = lines or {}
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError("scenario must be a mapping of sections")
    parsed = {sec: {} for sec in SCHEMA}
    for sec, body in data.items():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section {sec!r}", sec, lines.get((sec, None)))
        if not isinstance(body, dict):
            raise ConfigError(f"section {sec!r} must be a mapping", sec, lines.get((sec, None)))
        for key, value in body.items():
            line = lines.get((sec, key))
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {sec}.{key}", key, line)
            target, scale, typ = SCHEMA[sec][key]
            v = _coerce(value, typ, key, line)
            if scale not in (None, 1) and v is not None:
                v = _to_si(v, scale)
            parsed[sec][target] = (v, key, line)

    def build(cls, sec, extra=None):
        kwargs = {k: v for k, (v, _, _) in parsed[sec].items()}
        kwargs.update(extra or {})
        try:
            return cls(**kwargs)
        except (ValueError, TypeError) as exc:
            msg = str(exc)
            hit = next(((key, line) for t, (_, key, line) in parsed[sec].items() if t in msg),
                       (sec, lines.get((sec, None))))
            raise ConfigError(f"{sec}.{hit[0]}: {msg}", hit[0], hit[1]) from None

    beam_kw = dict(parsed["beam"])
    energy = beam_kw.pop("energy_keV", (20.0, None, None))[0]
    parsed["beam"] = beam_kw
    beam_defaults = {"total_current": 100e-6, "width_w": 1e-3}
    for k, v in beam_defaults.items():
        parsed["beam"].setdefault(k, (v, k, None))
    beam = build(BeamParams, "beam")

    sim = {k: v for k, (v, _, _) in parsed["simulation"].items()}
    seed = sim.get("seed")
    camera = build(CameraConfig, "camera", {"rng_seed": seed})
    fov = {"extent_y": camera.pixels_y * camera.object_pixel_size,
           "extent_z": camera.pixels_z * camera.object_pixel_size}
    geo_given = {k for k in parsed["geometry"]}
    geometry = build(GeometryParams, "geometry", {k: v for k, v in fov.items() if k not in geo_given})
    atoms = build(AtomParams, "atoms")
    fluo = build(FluorescenceConfig, "fluorescence",
                 {"rng_seed": None if seed is None else (seed + 1) % 2**64})
    fit = build(FitConfig, "fit")
    laser = {k: v for k, (v, _, _) in parsed["laser"].items()}
    return Scenario(beam=beam, geometry=geometry, atoms=atoms, camera=camera, fluorescence=fluo,
                    fit=fit, energy_keV=energy, lines=lines, **sim, **laser)


def load_scenario(path) -> Scenario:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
        lines = _line_index(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {exc}", None,
                          mark.line + 1 if mark else None) from None
    return scenario_from_dict(data, lines)


DEFAULT_SCENARIO_YAML = """\
# Default NMOR e-beam imaging scenario. Units are part of every key name.
beam:
  total_current_uA: 100.0
  width_w_mm: 1.0
  center_y0_mm: 0.0
  center_x0_mm: 0.0
  energy_keV: 20.0
geometry:
  cell_path_L_mm: 45.0
  laser_radius_mm: 3.0
atoms:
  excited_decoherence_Gamma_over_2pi_MHz: 6.07
  ground_decoherence_Gamma0_over_2pi_Hz: 10.0
  resonant_absorption_alpha0_per_m: 3.0e-4
  vapor_density_N_per_cm3: 2.7e11
  wavelength_nm: 780.0
  gyromagnetic_gamma_Hz_per_nT: 5.0
  power_broadening_kappa_over_2pi_Hz_per_W_m2: 30.0
camera:
  pixels_y: 256
  pixels_z: 256
  pixel_pitch_um: 15.625
  magnification: 0.5
  exposure_us: 200.0
  quantum_efficiency: 0.5
  read_noise_e: 5.0
  gain_e_per_DN: 1.0
  bit_depth: 16
  transmission: 3.0e-3
laser:
  peak_intensity_W_per_m2: 30.0
  calibration_field_nT: 1.0
fluorescence:
  exposure_s: 30.0
  quantum_efficiency: 0.25
  magnification: 1.0
  brightness_scale_per_s_per_A_per_m: 1.0e4
  background_e: 100.0
fit:
  max_iterations: 200
  parameter_tolerance: 1.0e-10
  residual_tolerance: 1.0e-12
  initial_damping: 1.0e-3
simulation:
  noise_on: false
  seed: 12345
  response_model: linear
  forward_model: quadrature
  inversion: exact
  mask_threshold: 0.05
  stray_rotation_mrad: 0.0
"""
