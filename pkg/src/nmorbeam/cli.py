"""Command-line interface.

Exit codes: 0 success, 2 configuration/input error, 3 I/O error,
4 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .errors import ConfigError, NmorError, NonConvergence, NoSignChange, SingularJacobian
from .fileio import dump_json, load_json, read_frame, read_map, write_frame, write_map
from .pipeline import (estimate_responsivity, fluorescence_fit, reconstruct, response_maps,
                       simulate, simulate_and_fit)
from .imaging import laser_profile
from .reconstruction import CSV_COLUMNS, regression_compare
from .scenario import DEFAULT_SCENARIO_YAML, Scenario, load_scenario, scenario_from_dict
from .sensitivity import (CURRENT_REFERENCES, EMISSION_PER_FARADAY, SensitivityInputs,
                          min_detectable_current, noise_spectrum, referred_responsivity,
                          shot_noise_rotation, spectrum_csv)

log = logging.getLogger("nmorbeam")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4
FRAME_NAMES = [f"frame_{state}_{ch}" for state in ("on", "off") for ch in ("ch1", "ch2")]
SWEEP_PARAMS = {
    "center_y0_mm": ("center_y0", 1e-3),
    "total_current_uA": ("total_current", 1e-6),
    "energy_keV": ("energy_keV", 1.0),
}


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _say(args, *msg):
    if not args.quiet:
        print(*msg)


def _scenario(args) -> Scenario:
    if args.scenario:
        try:
            sc = load_scenario(args.scenario)
        except OSError as exc:
            raise CliError(EXIT_CONFIG, f"cannot read scenario: {exc}") from None
    else:
        sc = scenario_from_dict(yaml.safe_load(DEFAULT_SCENARIO_YAML))
    if args.seed is not None:
        sc = with_seed(sc, args.seed)
    return sc


def with_seed(sc: Scenario, seed: int) -> Scenario:
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer", "seed")
    return replace(sc, seed=seed,
                   camera=replace(sc.camera, rng_seed=seed),
                   fluorescence=replace(sc.fluorescence, rng_seed=(seed + 1) % 2**64))


def _out_dir(args, required=True) -> Path | None:
    if args.out is None:
        if required:
            raise CliError(EXIT_CONFIG, "--out is required for this command")
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    sc = _scenario(args)
    out = _out_dir(args)
    sim = simulate(sc)
    written = []
    for name in FRAME_NAMES:
        _, state, ch = name.split("_")
        written += write_frame(sim.frames[state, ch], out / name)
    written += write_map(sim.beta, out / "beta", {"response_model": sc.response_model,
                                                  "calibration_field_T": sc.calibration_field})
    dump_json(sim.truth, out / "truth.json")
    _say(args, f"wrote {len(written) + 1} files to {out}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    sc = _scenario(args)
    if args.model:
        sc = replace(sc, response_model=args.model)
    out = _out_dir(args)
    grid = sc.camera.grid()
    laser = laser_profile(sc.camera, sc.geometry, sc.peak_intensity, grid)
    beta, _ = response_maps(sc, laser, grid)
    write_map(beta, out / "beta", {"response_model": sc.response_model,
                                   "calibration_field_T": sc.calibration_field})
    _say(args, f"beta map ({sc.response_model}): median {np.nanmedian(beta.beta):.4g} rad/(T m), "
               f"{int(beta.mask.sum())} valid pixels")
    return EXIT_OK


def _append_csv(path: Path, row: dict, columns) -> None:
    new = not path.exists()
    with path.open("a", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        if new:
            w.writeheader()
        w.writerow(row)


def cmd_reconstruct(args) -> int:
    frames_dir = Path(args.frames or args.out or ".")
    beta_path = Path(args.beta) if args.beta else frames_dir / "beta"
    missing = [str(frames_dir / f"{n}{ext}") for n in FRAME_NAMES for ext in (".pgm", ".json")
               if not (frames_dir / f"{n}{ext}").exists()]
    missing += [str(beta_path.with_suffix(ext)) for ext in (".f64", ".mask", ".json")
                if not beta_path.with_suffix(ext).exists()]
    if missing:
        raise CliError(EXIT_CONFIG, "missing input files: " + ", ".join(missing))
    sc = _scenario(args)
    cell = args.cell_length_mm * 1e-3 if args.cell_length_mm else sc.geometry.cell_path_L
    cfg = sc.fit if args.max_iterations is None else replace(sc.fit, max_iterations=args.max_iterations)
    inversion = args.inversion or sc.inversion
    frames = {n: read_frame(frames_dir / n) for n in FRAME_NAMES}
    beta = read_map(beta_path)
    on = (frames["frame_on_ch1"], frames["frame_on_ch2"])
    off = (frames["frame_off_ch1"], frames["frame_off_ch2"])
    out = Path(args.out) if args.out else frames_dir
    out.mkdir(parents=True, exist_ok=True)

    report = {"inputs": {"frames": str(frames_dir), "beta": str(beta_path), "cell_path_L_m": cell,
                         "mask_threshold": args.mask_threshold, "inversion": inversion}}
    try:
        fit, _ = reconstruct(on, off, beta, cell, cfg, args.mask_threshold, inversion == "exact")
    except (NoSignChange, SingularJacobian) as exc:
        report["error"] = str(exc)
        dump_json(report, out / "report.json")
        raise CliError(EXIT_NUMERIC, f"fit failed: {exc}") from None
    report["fit"] = fit.to_dict()
    truth_path = frames_dir / "truth.json"
    if truth_path.exists():
        truth = load_json(truth_path)
        report["truth"] = truth
    dump_json(report, out / "report.json")
    _append_csv(out / "fit_results.csv", fit.csv_row(), CSV_COLUMNS)
    _say(args, f"I0 = {fit.current_I0 * 1e6:.6g} ± {fit.current_err * 1e6:.2g} uA")
    _say(args, f"y0 = {fit.center_y0 * 1e3:.6g} ± {fit.center_err * 1e3:.2g} mm")
    _say(args, f"w  = {fit.width_w * 1e3:.6g} ± {fit.width_err * 1e3:.2g} mm "
               f"(FWHM {fit.fwhm * 1e3:.4g} mm)")
    if not fit.converged:
        _say(args, f"WARNING: fit did not converge after {fit.iterations} iterations")
        return EXIT_NUMERIC
    return EXIT_OK


SWEEP_COLUMNS = ("index", "param", "value", "truth_I0_A", "truth_y0_m", "truth_w_m", "fit_I0_A",
                 "fit_I0_err", "fit_y0_m", "fit_y0_err", "fit_w_m", "fit_w_err", "converged",
                 "fluor_y0_m", "fluor_w_m", "error")


def sweep_point(sc: Scenario, param: str, value: float, index: int) -> dict:
    target, scale = SWEEP_PARAMS[param]
    if target == "energy_keV":
        sc = replace(sc, energy_keV=value * scale)
    else:
        sc = sc.with_beam(**{target: value * scale})
    if sc.seed is not None:
        sc = with_seed(sc, (sc.seed + 1000 * index) % 2**64)
    row = dict.fromkeys(SWEEP_COLUMNS, "")
    row.update(index=index, param=param, value=repr(value), truth_I0_A=repr(sc.beam.total_current),
               truth_y0_m=repr(sc.beam.center_y0), truth_w_m=repr(sc.beam.width_w))
    try:
        _, fit, _ = simulate_and_fit(sc)
        row.update(fit_I0_A=repr(fit.current_I0), fit_I0_err=repr(fit.current_err),
                   fit_y0_m=repr(fit.center_y0), fit_y0_err=repr(fit.center_err),
                   fit_w_m=repr(fit.width_w), fit_w_err=repr(fit.width_err),
                   converged=str(fit.converged).lower())
        fl = fluorescence_fit(sc, acquisition_index=index)
        row.update(fluor_y0_m=repr(fl.center_y0), fluor_w_m=repr(fl.width_w))
    except NmorError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _regression(rows, xkey, ykey):
    ok = [r for r in rows if r[xkey] != "" and r[ykey] != ""]
    try:
        reg = regression_compare([float(r[xkey]) for r in ok], [float(r[ykey]) for r in ok])
    except NmorError:
        return None
    return {"slope": reg.slope, "stderr": reg.stderr, "n": reg.n, "text": str(reg)}


def sweep_summary(param, rows) -> dict:
    if param == "center_y0_mm":
        truth = _regression(rows, "truth_y0_m", "fit_y0_m")
    else:
        truth = _regression(rows, "truth_I0_A", "fit_I0_A")
    return {
        "param": param,
        "points": len(rows),
        "failed": sum(1 for r in rows if r["error"]),
        "nmor_vs_truth": truth,
        # centroid comparison is only informative when the centroid moves
        "nmor_vs_fluorescence": (_regression(rows, "fluor_y0_m", "fit_y0_m")
                                 if param == "center_y0_mm" else None),
    }


def run_sweep(sc: Scenario, param: str, values, jobs: int = 1):
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"sweep parameter must be one of {tuple(SWEEP_PARAMS)}", "param")
    idx = range(len(values))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(sweep_point, [sc] * len(values), [param] * len(values), values, idx))
    else:
        rows = [sweep_point(sc, param, v, i) for i, v in zip(idx, values)]
    return rows, sweep_summary(param, rows)


def _parse_values(text):
    try:
        vals = [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise CliError(EXIT_CONFIG, f"--values must be numbers, got {text!r}") from None
    if not vals:
        raise CliError(EXIT_CONFIG, "--values is empty")
    return vals


def cmd_sweep(args) -> int:
    sc = _scenario(args)
    out = _out_dir(args)
    values = _parse_values(args.values)
    rows, summary = run_sweep(sc, args.param, values, args.jobs)
    points = out / "points"
    points.mkdir(exist_ok=True)
    for r in rows:
        dump_json(r, points / f"point_{r['index']:03d}.json")
    with (out / "sweep.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    dump_json(summary, out / "summary.json")
    (out / "sweep.gp").write_text(_sweep_gnuplot(args.param), encoding="utf-8")
    for key in ("nmor_vs_truth", "nmor_vs_fluorescence"):
        if summary[key]:
            _say(args, f"{key}: slope {summary[key]['slope']:.6f} ± {summary[key]['stderr']:.2g}")
    if summary["failed"]:
        _say(args, f"{summary['failed']} of {len(rows)} points failed (see sweep.csv)")
    return EXIT_NUMERIC if summary["failed"] == len(rows) else EXIT_OK


def _sweep_gnuplot(param):
    if param == "center_y0_mm":
        cols, xl, yl = "14:9", "fluorescence y0 (m)", "NMOR y0 (m)"
    else:
        cols, xl, yl = "4:7", "injected I0 (A)", "NMOR I0 (A)"
    return (f"set datafile separator ','\nset key autotitle columnhead\n"
            f"set xlabel '{xl}'\nset ylabel '{yl}'\n"
            f"plot 'sweep.csv' using {cols} with points pt 7, x with lines dt 2\n")


def cmd_sensitivity(args) -> int:
    if args.power is not None and args.photocurrent is not None:
        raise CliError(EXIT_CONFIG, "--power and --photocurrent are mutually exclusive")
    if args.power is not None and not args.power > 0:
        raise CliError(EXIT_CONFIG, "--power must be positive")
    if args.photocurrent is not None and not args.photocurrent > 0:
        raise CliError(EXIT_CONFIG, "--photocurrent must be positive")
    if args.eta is not None and args.power is None:
        raise CliError(EXIT_CONFIG, "--eta requires --power")
    S = args.responsivity
    source = "given"
    if S is None:
        S = float(np.mean(estimate_responsivity(_scenario(args))))
        source = "pipeline estimate"
    S_emission = S
    try:
        S = referred_responsivity(S, args.current_reference, args.faraday_ratio)
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from None
    try:
        inputs = SensitivityInputs(
            responsivity_S=S,
            laser_power_P=args.power,
            detector_efficiency_eta=(args.eta if args.eta is not None else 1.0) if args.power else None,
            wavelength=args.wavelength_nm * 1e-9, photocurrent=args.photocurrent,
            dark_noise_floor=args.dark_floor, flicker_corner=args.flicker_corner)
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from None
    report = {"responsivity_rad_per_A": S, "responsivity_source": source,
              "emission_responsivity_rad_per_A": S_emission,
              "current_reference": args.current_reference,
              "dark_noise_floor_A_per_rtHz": inputs.dark_noise_floor,
              "flicker_corner_Hz": inputs.flicker_corner}
    if inputs.has_light:
        dphi = shot_noise_rotation(inputs)
        report["shot_noise_rotation_rad_per_rtHz"] = dphi
        report["min_detectable_current_A_per_rtHz"] = min_detectable_current(dphi, S)
        _say(args, f"shot-noise rotation  : {dphi:.4g} rad/rtHz")
        _say(args, f"min detectable current: {report['min_detectable_current_A_per_rtHz'] * 1e12:.4g} pA/rtHz")
    freqs = np.logspace(math.log10(args.fmin), math.log10(args.fmax), args.npoints)
    asd = noise_spectrum(inputs, freqs)
    report["high_frequency_floor_A_per_rtHz"] = float(asd[-1])
    _say(args, f"ASD at {freqs[-1]:.3g} Hz: {asd[-1] * 1e9:.4g} nA/rtHz (S = {S:.4g} rad/A, {source})")
    out = _out_dir(args, required=False)
    if out is not None:
        (out / "spectrum.csv").write_text(spectrum_csv(freqs, asd), encoding="utf-8")
        (out / "spectrum.gp").write_text(
            "set datafile separator ','\nset logscale xy\nset xlabel 'frequency (Hz)'\n"
            "set ylabel 'beam-current noise (A/sqrt(Hz))'\n"
            "plot 'spectrum.csv' using 1:2 skip 1 with lines title 'model ASD'\n", encoding="utf-8")
        dump_json(report, out / "sensitivity.json")
    return EXIT_OK


def _common(parser, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--scenario", default=d(None), help="scenario YAML file")
    parser.add_argument("--out", default=d(None), help="output directory")
    parser.add_argument("--seed", type=int, default=d(None), help="override the scenario seed (u64)")
    parser.add_argument("--quiet", action="store_true", default=d(False))
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nmorbeam", description=__doc__.splitlines()[0])
    _common(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="render the four polarimeter frames and the beta map")
    _common(s, True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("reconstruct", help="fit beam parameters from a frame directory")
    _common(s, True)
    s.add_argument("--frames", help="directory with frame_{on,off}_{ch1,ch2}.pgm")
    s.add_argument("--beta", help="beta map basename (default <frames>/beta)")
    s.add_argument("--cell-length-mm", type=float)
    s.add_argument("--mask-threshold", type=float, default=0.05)
    s.add_argument("--inversion", choices=("exact", "arcsin_half"))
    s.add_argument("--max-iterations", type=int)
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("sweep", help="simulate and fit over a list of parameter values")
    _common(s, True)
    s.add_argument("--param", required=True, choices=tuple(SWEEP_PARAMS))
    s.add_argument("--values", required=True, help="comma-separated values in the param's unit")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("sensitivity", help="shot-noise sensitivity and noise spectrum")
    _common(s, True)
    s.add_argument("--power", type=float, help="laser power on the detector (W)")
    s.add_argument("--eta", type=float, help="detector quantum efficiency (default 1)")
    s.add_argument("--photocurrent", type=float, help="total photocurrent (A)")
    s.add_argument("--responsivity", type=float, help="rotation per beam current (rad/A)")
    s.add_argument("--current-reference", choices=CURRENT_REFERENCES, default="emission",
                   help="which current reading the responsivity refers to")
    s.add_argument("--faraday-ratio", type=float, default=EMISSION_PER_FARADAY,
                   help="emission / Faraday-cup current ratio")
    s.add_argument("--wavelength-nm", type=float, default=780.0)
    s.add_argument("--dark-floor", type=float, default=1e-9, help="A/sqrt(Hz)")
    s.add_argument("--flicker-corner", type=float, default=10.0, help="Hz")
    s.add_argument("--fmin", type=float, default=0.1)
    s.add_argument("--fmax", type=float, default=1e4)
    s.add_argument("--npoints", type=int, default=200)
    s.set_defaults(func=cmd_sensitivity)

    s = sub.add_parser("calibrate", help="write the beta response map for a scenario")
    _common(s, True)
    s.add_argument("--model", choices=("linear", "eit"))
    s.set_defaults(func=cmd_calibrate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NonConvergence, SingularJacobian, NoSignChange) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
