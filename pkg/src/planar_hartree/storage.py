"""On-disk formats: binary field files, JSON reports and run manifests.

Field file layout (all little-endian)::

    b"LCGS" | u16 version | u32 n | f64 L | n*n f64 values (row-major)
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np

from .errors import FieldFormatError
from .functionals import StatePair
from .grid import Field, GridSpec

MAGIC = b"LCGS"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHId")


def write_field(path: str | os.PathLike, u: Field) -> Path:
    path = Path(path)
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, u.spec.n, u.spec.L)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(u.values, dtype="<f8").tobytes())
    return path


def read_field(path: str | os.PathLike) -> Field:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise FieldFormatError(f"cannot read field file {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise FieldFormatError(f"{path}: truncated header")
    magic, version, n, L = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FieldFormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FieldFormatError(f"{path}: unsupported format version {version}")
    expected = _HEADER.size + 8 * n * n
    if len(raw) != expected:
        raise FieldFormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    try:
        spec = GridSpec(L, n)
        values = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(n, n)
        return Field(spec, values)
    except ValueError as exc:
        raise FieldFormatError(f"{path}: {exc}") from exc


def write_state(directory: str | os.PathLike, s: StatePair) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    return [write_field(directory / "u.fld", s.u), write_field(directory / "v.fld", s.v)]


def read_state(path: str | os.PathLike, expected: GridSpec | None = None) -> StatePair:
    """Read ``u.fld`` and ``v.fld`` from a directory."""
    path = Path(path)
    u = read_field(path / "u.fld")
    v = read_field(path / "v.fld")
    if u.spec != v.spec:
        raise FieldFormatError(f"{path}: u and v are on different grids")
    if expected is not None and u.spec != expected:
        raise FieldFormatError(f"{path}: stored grid {u.spec} does not match requested {expected}")
    return StatePair(u, v)


def write_json(path: str | os.PathLike, payload) -> Path:
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def sha256_file(path: str | os.PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def file_inventory(paths, root: str | os.PathLike) -> list[dict]:
    root = Path(root)
    out = []
    for p in sorted(Path(x) for x in paths):
        out.append({"path": str(p.relative_to(root)), "bytes": p.stat().st_size, "sha256": sha256_file(p)})
    return out
