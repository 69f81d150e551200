"""Reading and writing paired-embedding files.

Binary layout: magic "CNST", u16 version (1), u8 dtype code (4 = float32,
8 = float64), u32 dim, u32 count, then U row-major, then V row-major, all
little-endian. A CSV alternative uses the header side,index,c0,...  Rows
within 1e-6 of unit norm are renormalized on load; anything farther off is
rejected.
"""

from __future__ import annotations

import csv
import struct
import warnings
from pathlib import Path

import numpy as np

from .errors import NonUnitRows, ParseError, ShapeError
from .geometry import EmbeddingSet, PairedConfig

_MAGIC = b"CNST"
_VERSION = 1
_HEADER = struct.Struct("<4sHBII")
_UNIT_LOAD_TOL = 1e-6


def _check_and_renormalize(mat: np.ndarray, label: str) -> np.ndarray:
    norms = np.linalg.norm(mat, axis=1)
    off = np.abs(norms - 1.0)
    if np.any(off > _UNIT_LOAD_TOL):
        worst = int(np.argmax(off))
        raise NonUnitRows(f"{label} row {worst} has norm {norms[worst]:.8g}")
    if np.any(off > 1e-12):
        warnings.warn(f"renormalizing near-unit {label} rows on load", stacklevel=3)
    return mat / norms[:, None]


def write_pair_file(path, pair: PairedConfig, dtype=np.float64):
    code = {np.dtype(np.float32): 4, np.dtype(np.float64): 8}.get(np.dtype(dtype))
    if code is None:
        raise ShapeError(f"unsupported dtype {dtype}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, code, pair.dim, pair.count))
        fh.write(np.ascontiguousarray(pair.u.vectors, dtype=np.dtype(dtype).newbyteorder("<")).tobytes())
        fh.write(np.ascontiguousarray(pair.v.vectors, dtype=np.dtype(dtype).newbyteorder("<")).tobytes())


def read_pair_file(path) -> PairedConfig:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ParseError("file too short for header")
    magic, version, code, d, n = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ParseError(f"bad magic {magic!r}")
    if version != _VERSION:
        raise ParseError(f"unsupported version {version}")
    if code not in (4, 8):
        raise ParseError(f"unknown dtype code {code}")
    if d < 1 or n < 1:
        raise ShapeError(f"bad dimensions d={d}, n={n}")
    expected = _HEADER.size + 2 * n * d * code
    if len(raw) != expected:
        raise ShapeError(f"payload length {len(raw)} != expected {expected}")
    dt = np.dtype(np.float32 if code == 4 else np.float64).newbyteorder("<")
    flat = np.frombuffer(raw, dtype=dt, offset=_HEADER.size).astype(np.float64)
    u = _check_and_renormalize(flat[: n * d].reshape(n, d).copy(), "U")
    v = _check_and_renormalize(flat[n * d:].reshape(n, d).copy(), "V")
    return PairedConfig(EmbeddingSet(u), EmbeddingSet(v))


def write_pair_csv(path, pair: PairedConfig):
    d = pair.dim
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["side", "index"] + [f"c{i}" for i in range(d)])
        for side, mat in (("U", pair.u.vectors), ("V", pair.v.vectors)):
            for i, row in enumerate(mat):
                writer.writerow([side, i] + [repr(float(x)) for x in row])


def read_pair_csv(path) -> PairedConfig:
    rows = {"U": {}, "V": {}}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty CSV file") from None
        if header[:2] != ["side", "index"] or any(
            h != f"c{i}" for i, h in enumerate(header[2:])
        ):
            raise ParseError(f"bad CSV header {header[:4]}...")
        d = len(header) - 2
        if d < 1:
            raise ShapeError("no coordinate columns")
        for line in reader:
            if len(line) != d + 2:
                raise ParseError(f"row length {len(line)} != {d + 2}")
            side, idx = line[0], line[1]
            if side not in rows:
                raise ParseError(f"bad side {side!r}")
            try:
                rows[side][int(idx)] = np.array([float(x) for x in line[2:]])
            except ValueError as exc:
                raise ParseError(str(exc)) from exc
    if not rows["U"] or set(rows["U"]) != set(rows["V"]):
        raise ShapeError("U and V must cover the same index set")
    order = sorted(rows["U"])
    if order != list(range(len(order))):
        raise ShapeError("indices must be 0..n-1 without gaps")
    u = _check_and_renormalize(np.stack([rows["U"][i] for i in order]), "U")
    v = _check_and_renormalize(np.stack([rows["V"][i] for i in order]), "V")
    return PairedConfig(EmbeddingSet(u), EmbeddingSet(v))


def load_pair(path) -> PairedConfig:
    """Format dispatch on extension: .csv text, anything else binary."""
    if str(path).endswith(".csv"):
        return read_pair_csv(path)
    return read_pair_file(path)
