"""Binary array files with a sidecar JSON header.

An artifact ``name`` is stored as ``name.bin`` (contiguous little-endian
array) and ``name.json`` (shape, dtype and free-form metadata).  JSON is
written with sorted keys and a fixed float format so that reading and
re-writing an artifact reproduces identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .grid import Field, Grid

FORMAT_VERSION = 1


def _stem(path) -> Path:
    p = Path(path)
    return p.with_suffix("") if p.suffix in (".bin", ".json") else p


def dumps_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_default, allow_nan=False) + "\n"


def _default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def write_json(path, obj) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(dumps_json(obj))
    return p


def write_array(path, arr: np.ndarray, header: dict | None = None) -> Path:
    arr = np.ascontiguousarray(arr)
    if arr.dtype.kind == "c":
        arr = arr.astype("<c16")
    elif arr.dtype.kind == "f":
        arr = arr.astype("<f8")
    elif arr.dtype.kind in "iu":
        arr = arr.astype("<i8")
    else:
        raise TypeError(f"unsupported dtype {arr.dtype}")
    stem = _stem(path)
    stem.parent.mkdir(parents=True, exist_ok=True)
    meta = dict(header or {})
    meta.update({"shape": list(arr.shape), "dtype": arr.dtype.str, "format_version": FORMAT_VERSION})
    stem.with_suffix(".bin").write_bytes(arr.tobytes(order="C"))
    write_json(stem.with_suffix(".json"), meta)
    return stem


def read_array(path):
    stem = _stem(path)
    header = json.loads(stem.with_suffix(".json").read_text())
    arr = np.frombuffer(stem.with_suffix(".bin").read_bytes(), dtype=np.dtype(header["dtype"]))
    return arr.reshape(header["shape"]).copy(), header


def write_field(path, f: Field, extra: dict | None = None) -> Path:
    header = {"kind": "field", "grid": {"d": f.grid.d, "L": f.grid.L, "n": f.grid.n},
              "times": None if f.times is None else np.asarray(f.times, dtype=float).tolist()}
    if extra:
        header["meta"] = extra
    return write_array(path, f.values, header)


def read_field(path) -> tuple[Field, dict]:
    arr, header = read_array(path)
    g = header["grid"]
    grid = Grid(g["d"], g["L"], g["n"])
    times = None if header.get("times") is None else np.asarray(header["times"])
    return Field(grid, arr, times), header


def roundtrip_identical(path) -> bool:
    """Read an artifact and re-serialize it; True iff both files are byte-identical."""
    stem = _stem(path)
    b0 = stem.with_suffix(".bin").read_bytes()
    j0 = stem.with_suffix(".json").read_bytes()
    arr, header = read_array(stem)
    header = {k: v for k, v in header.items() if k not in ("shape", "dtype", "format_version")}
    tmp = stem.parent / (stem.name + "_roundtrip")
    write_array(tmp, arr, header)
    ok = tmp.with_suffix(".bin").read_bytes() == b0 and tmp.with_suffix(".json").read_bytes() == j0
    tmp.with_suffix(".bin").unlink()
    tmp.with_suffix(".json").unlink()
    return ok
