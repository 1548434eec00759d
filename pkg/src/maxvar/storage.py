"""On-disk format for grid sets and scalar fields.

A single JSON document holds a header ``{version, kind, d, shape, h,
origin, encoding}`` plus a base64 run-length payload.  Masks are encoded
as alternating run lengths starting with the False run; fields as
(run length, 64-bit float value) pairs.  Round trips are bit-identical.

Writes are atomic: content goes to a temporary file in the target
directory which is then renamed over the destination.
"""

from __future__ import annotations

import base64
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .grid import GridGeometry, GridSet, ScalarField

__all__ = [
    "save_grid_set",
    "save_scalar_field",
    "load_grid_set",
    "load_scalar_field",
    "load_any",
    "atomic_write_text",
]

FORMAT_VERSION = 1
ENCODING = "rle-base64"


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _rle_bool(mask: np.ndarray) -> bytes:
    flat = mask.ravel(order="C")
    if flat.size == 0:
        return np.uint64(0).tobytes()
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate([[0], change, [flat.size]])
    runs = np.diff(bounds).astype(np.uint32)
    if flat[0]:  # payload always starts with the False run, possibly empty
        runs = np.concatenate([[np.uint32(0)], runs])
    return np.uint64(runs.size).tobytes() + runs.astype("<u4").tobytes()


def _unrle_bool(buf: bytes, size: int) -> np.ndarray:
    nruns = int(np.frombuffer(buf[:8], dtype="<u8")[0])
    runs = np.frombuffer(buf[8 : 8 + 4 * nruns], dtype="<u4").astype(np.int64)
    flat = np.zeros(size, dtype=bool)
    pos = 0
    value = False
    for run in runs:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    if pos != size:
        raise ValueError(f"run lengths sum to {pos}, expected {size}")
    return flat


def _rle_float(values: np.ndarray) -> bytes:
    flat = values.ravel(order="C")
    if flat.size == 0:
        return np.uint64(0).tobytes()
    bits = flat.view(np.uint64)  # compare bit patterns so -0.0/NaN stay faithful
    change = np.flatnonzero(bits[1:] != bits[:-1]) + 1
    bounds = np.concatenate([[0], change, [flat.size]])
    runs = np.diff(bounds).astype("<u4")
    reps = flat[bounds[:-1]].astype("<f8")
    return np.uint64(runs.size).tobytes() + runs.tobytes() + reps.tobytes()


def _unrle_float(buf: bytes, size: int) -> np.ndarray:
    nruns = int(np.frombuffer(buf[:8], dtype="<u8")[0])
    off = 8
    runs = np.frombuffer(buf[off : off + 4 * nruns], dtype="<u4").astype(np.int64)
    off += 4 * nruns
    reps = np.frombuffer(buf[off : off + 8 * nruns], dtype="<f8")
    flat = np.repeat(reps, runs)
    if flat.size != size:
        raise ValueError(f"run lengths sum to {flat.size}, expected {size}")
    return flat.astype(np.float64)


def _header(kind: str, geo: GridGeometry) -> dict:
    return {
        "version": FORMAT_VERSION,
        "kind": kind,
        "d": geo.d,
        "shape": list(geo.shape),
        "h": geo.h,
        "origin": list(geo.origin),
        "encoding": ENCODING,
    }


def save_grid_set(cells: GridSet, path: str | Path) -> None:
    doc = _header("grid_set", cells.geometry)
    doc["outside"] = bool(cells.outside)
    doc["payload"] = base64.b64encode(_rle_bool(cells.mask)).decode("ascii")
    atomic_write_text(path, json.dumps(doc))


def save_scalar_field(field: ScalarField, path: str | Path) -> None:
    doc = _header("scalar_field", field.geometry)
    doc["payload"] = base64.b64encode(_rle_float(field.values)).decode("ascii")
    atomic_write_text(path, json.dumps(doc))


def _load_doc(path: str | Path) -> tuple[dict, GridGeometry, bytes]:
    doc = json.loads(Path(path).read_text())
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported format version {doc.get('version')!r}")
    if doc.get("encoding") != ENCODING:
        raise ValueError(f"unsupported encoding {doc.get('encoding')!r}")
    geo = GridGeometry(tuple(doc["shape"]), float(doc["h"]), tuple(doc["origin"]))
    if geo.d != doc.get("d"):
        raise ValueError("header dimension disagrees with shape")
    return doc, geo, base64.b64decode(doc["payload"])


def load_grid_set(path: str | Path) -> GridSet:
    doc, geo, buf = _load_doc(path)
    if doc["kind"] != "grid_set":
        raise ValueError(f"expected a grid_set file, found {doc['kind']!r}")
    mask = _unrle_bool(buf, geo.n_cells).reshape(geo.shape)
    return GridSet(geo, mask, outside=bool(doc.get("outside", False)))


def load_scalar_field(path: str | Path) -> ScalarField:
    doc, geo, buf = _load_doc(path)
    if doc["kind"] != "scalar_field":
        raise ValueError(f"expected a scalar_field file, found {doc['kind']!r}")
    values = _unrle_float(buf, geo.n_cells).reshape(geo.shape)
    return ScalarField(geo, values)


def load_any(path: str | Path) -> GridSet | ScalarField:
    doc = json.loads(Path(path).read_text())
    if doc.get("kind") == "grid_set":
        return load_grid_set(path)
    if doc.get("kind") == "scalar_field":
        return load_scalar_field(path)
    raise ValueError(f"unrecognized kind {doc.get('kind')!r} in {path}")
