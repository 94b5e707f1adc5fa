"""On-disk formats.

Frames: 16-bit binary PGM (P5, big-endian samples, maxval 65535) plus a
JSON sidecar with the same basename. Unquantized (noiseless) frames also
get a ``.f64`` file holding the exact DN values; readers prefer it.

Maps: little-endian float64 raw array (``.f64``), a uint8 mask (``.mask``)
and a JSON sidecar. All writers are deterministic, so write/read/write
reproduces identical bytes.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from .imaging import CameraConfig, Frame
from .maps import Grid, NormalizedMap, ResponseMap, RotationMap

FORMAT_VERSION = 1
PGM_MAXVAL = 65535
MAP_KINDS = {"response": ResponseMap, "rotation": RotationMap, "normalized": NormalizedMap}
_MAP_UNITS = {"response": "rad/(T m)", "rotation": "rad", "normalized": "A"}


def dump_json(obj, path) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def load_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_pgm(path, data) -> None:
    data = np.asarray(data)
    if data.ndim != 2:
        raise ValueError("PGM data must be 2-D")
    if np.any(data < 0) or np.any(data > PGM_MAXVAL):
        raise ValueError("PGM samples must lie in [0, 65535]")
    samples = np.rint(data).astype(">u2")
    header = f"P5\n{data.shape[1]} {data.shape[0]}\n{PGM_MAXVAL}\n".encode("ascii")
    Path(path).write_bytes(header + samples.tobytes())


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        end = pos
        while not raw[end:end + 1].isspace():
            end += 1
        fields.append(raw[pos:end].decode("ascii"))
        pos = end
    pos += 1  # single whitespace before the raster
    magic, width, height, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    if magic != "P5":
        raise ValueError(f"{path}: not a binary PGM")
    dtype = ">u2" if maxval > 255 else "u1"
    count = width * height
    arr = np.frombuffer(raw, dtype=dtype, count=count, offset=pos)
    return arr.reshape(height, width).astype(np.uint16)


def _camera_dict(c: CameraConfig):
    return dataclasses.asdict(c)


def write_frame(frame: Frame, base) -> list[Path]:
    """Write ``base.pgm`` + ``base.json`` (+ ``base.f64`` when unquantized)."""
    base = Path(base)
    written = [base.with_suffix(".pgm"), base.with_suffix(".json")]
    write_pgm(written[0], frame.data)
    exact = None
    if not frame.quantized:
        exact = base.with_suffix(".f64").name
        np.ascontiguousarray(frame.data, dtype="<f8").tofile(base.with_suffix(".f64"))
        written.append(base.with_suffix(".f64"))
    meta = {
        "kind": "frame",
        "format_version": FORMAT_VERSION,
        "channel": frame.channel,
        "beam_state": frame.beam_state,
        "acquisition_index": frame.acquisition_index,
        "seed": frame.config.rng_seed,
        "camera": _camera_dict(frame.config),
        "grid": frame.grid.to_dict(),
        "quantized": frame.quantized,
        "exact_data": exact,
        "extra": frame.meta,
    }
    dump_json(meta, written[1])
    return written


def read_frame(base) -> Frame:
    base = Path(base)
    meta = load_json(base.with_suffix(".json"))
    if meta.get("kind") != "frame":
        raise ValueError(f"{base}: sidecar is not a frame")
    grid = Grid.from_dict(meta["grid"])
    if meta["exact_data"]:
        data = np.fromfile(base.parent / meta["exact_data"], dtype="<f8").reshape(grid.shape)
        data = data.astype(float)
    else:
        data = read_pgm(base.with_suffix(".pgm"))
    return Frame(data, meta["channel"], meta["beam_state"], CameraConfig(**meta["camera"]),
                 meta["acquisition_index"], grid, meta["quantized"], meta.get("extra", {}))


def write_map(m, base, extra=None) -> list[Path]:
    base = Path(base)
    kind = next(k for k, cls in MAP_KINDS.items() if isinstance(m, cls))
    values = {"response": "beta", "rotation": "phi", "normalized": "signal"}[kind]
    arr = getattr(m, values)
    paths = [base.with_suffix(".f64"), base.with_suffix(".mask"), base.with_suffix(".json")]
    np.ascontiguousarray(arr, dtype="<f8").tofile(paths[0])
    np.ascontiguousarray(m.mask, dtype=np.uint8).tofile(paths[1])
    dump_json({
        "kind": kind,
        "format_version": FORMAT_VERSION,
        "units": _MAP_UNITS[kind],
        "dtype": "<f8",
        "grid": m.grid.to_dict(),
        "data_file": paths[0].name,
        "mask_file": paths[1].name,
        "extra": extra or {},
    }, paths[2])
    return paths


def read_map(base):
    base = Path(base)
    if base.suffix in (".f64", ".mask", ".json"):
        base = base.with_suffix("")
    meta = load_json(base.with_suffix(".json"))
    kind = meta["kind"]
    if kind not in MAP_KINDS:
        raise ValueError(f"{base}: unknown map kind {kind!r}")
    grid = Grid.from_dict(meta["grid"])
    arr = np.fromfile(base.parent / meta["data_file"], dtype="<f8").reshape(grid.shape).astype(float)
    mask = np.fromfile(base.parent / meta["mask_file"], dtype=np.uint8).reshape(grid.shape) != 0
    return MAP_KINDS[kind](arr, mask, grid)
