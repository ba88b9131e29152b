"""Atomic file output: CSV tables, raw field snapshots, graymap heatmaps, manifests."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .grid import Grid, MOMENTUM, POSITION, WaveField

FIELD_MAGIC = "RWF1"
HEADER_BYTES = 64
LOG_FLOOR = 1e-12
_REPR_TAGS = {POSITION: "pos", MOMENTUM: "mom"}
_TAG_REPRS = {v: k for k, v in _REPR_TAGS.items()}


class FieldFormatError(ValueError):
    pass


def atomic_write_bytes(path: str | Path, data: bytes) -> Path:
    """Write to a temporary sibling and rename, so readers never see a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path: str | Path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def format_cell(value) -> str:
    """Shortest round-trip text for numbers; booleans and strings as is."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(value)


def write_csv(path: str | Path, columns: Sequence[str], rows: Iterable[dict]) -> Path:
    """Fixed-column CSV; keys outside ``columns`` are an error, missing ones are blank."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    allowed = set(columns)
    for row in rows:
        extra = set(row) - allowed
        if extra:
            raise KeyError(f"row has columns outside the schema: {sorted(extra)}")
        w.writerow([format_cell(row.get(c)) for c in columns])
    return atomic_write_text(path, buf.getvalue())


def read_csv(path: str | Path) -> tuple[list[str], list[dict]]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [dict(zip(header, line)) for line in r]
    return header, rows


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _field_header(psi: WaveField, t: float) -> bytes:
    text = f"{FIELD_MAGIC} {psi.grid.n} {psi.grid.L!r} {_REPR_TAGS[psi.rep]} {float(t)!r}"
    if len(text) > HEADER_BYTES - 1:
        raise FieldFormatError("field header does not fit in 64 bytes")
    return (text.ljust(HEADER_BYTES - 1) + "\n").encode("ascii")


def field_bytes(psi: WaveField, t: float = 0.0) -> bytes:
    body = np.ascontiguousarray(psi.values, dtype="<c16").tobytes()
    return _field_header(psi, t) + body


def write_field(path: str | Path, psi: WaveField, t: float = 0.0) -> Path:
    """Snapshot: 64-byte ASCII header then little-endian (re, im) float64 pairs, row-major."""
    return atomic_write_bytes(path, field_bytes(psi, t))


def read_field(path: str | Path) -> tuple[WaveField, float]:
    data = Path(path).read_bytes()
    if len(data) < HEADER_BYTES:
        raise FieldFormatError(f"{path}: shorter than the field header")
    parts = data[:HEADER_BYTES].decode("ascii").split()
    if len(parts) != 5 or parts[0] != FIELD_MAGIC:
        raise FieldFormatError(f"{path}: not a field snapshot")
    n, L, tag, t = int(parts[1]), float(parts[2]), parts[3], float(parts[4])
    if tag not in _TAG_REPRS:
        raise FieldFormatError(f"{path}: unknown representation tag {tag!r}")
    expected = HEADER_BYTES + 16 * n * n
    if len(data) != expected:
        raise FieldFormatError(f"{path}: expected {expected} bytes for n={n}, found {len(data)}")
    vals = np.frombuffer(data, dtype="<c16", offset=HEADER_BYTES).reshape(n, n).astype(complex)
    return WaveField(Grid(n, L), vals, _TAG_REPRS[tag]), t


def heatmap_pixels(psi: WaveField, scale: str = "linear", floor: float = LOG_FLOOR) -> np.ndarray:
    """16-bit image rows of ``|psi|^2``: top row is the largest x2, columns run along x1."""
    if psi.rep != POSITION:
        raise ValueError("heatmap export needs a position-representation field")
    if scale not in ("linear", "log"):
        raise ValueError(f"scale must be 'linear' or 'log', got {scale!r}")
    dens = psi.density()
    peak = float(dens.max())
    if scale == "linear":
        if peak > 0:
            lo = float(dens.min())
            span = peak - lo
            img = (dens - lo) / span if span > 0 else np.ones_like(dens)
        else:
            img = np.zeros_like(dens)
    else:
        if peak > 0:
            rel = np.maximum(dens / peak, floor)
            img = np.log10(rel) / -np.log10(floor) + 1.0
        else:
            img = np.zeros_like(dens)
    pix = np.round(np.clip(img, 0.0, 1.0) * 65535).astype(np.uint16)
    # array axis 0 is x1; image rows are x2 descending
    return pix.T[::-1, :]


def export_heatmap(psi: WaveField, path: str | Path, scale: str = "linear",
                   t: float | None = None, floor: float = LOG_FLOOR) -> Path:
    """Binary 16-bit PGM (P5, big-endian samples) with the grid metadata in a comment."""
    pix = heatmap_pixels(psi, scale, floor)
    g = psi.grid
    meta = f"# rotorwave n={g.n} L={g.L!r} dx={g.dx!r} x_min={float(g.x[0])!r} scale={scale}"
    if scale == "log":
        meta += f" floor={floor!r}"
    if t is not None:
        meta += f" t={float(t)!r}"
    header = f"P5\n{meta}\n{pix.shape[1]} {pix.shape[0]}\n65535\n".encode("ascii")
    return atomic_write_bytes(path, header + pix.astype(">u2").tobytes())


def read_pgm(path: str | Path) -> tuple[np.ndarray, list[str]]:
    """Pixels and comment lines of a 16-bit P5 file written by :func:`export_heatmap`."""
    data = Path(path).read_bytes()
    pos, tokens, comments = 0, [], []
    while len(tokens) < 4:
        end = data.index(b"\n", pos)
        line = data[pos:end].decode("ascii")
        pos = end + 1
        if line.startswith("#"):
            comments.append(line)
        else:
            tokens.extend(line.split())
    if tokens[0] != "P5":
        raise FieldFormatError(f"{path}: not a binary graymap")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    dtype = ">u2" if maxval > 255 else "u1"
    pix = np.frombuffer(data, dtype=dtype, offset=pos, count=w * h).reshape(h, w)
    return pix, comments


def write_json(path: str | Path, doc) -> Path:
    return atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")
