"""Binary field snapshots (QNSF).

Layout, all little-endian: magic ``QNSF``, u32 version (=1), u32 d, u32 K,
f64 L, d*d f64 deformation entries row-major, u32 field count, then per
field M^d coefficients as (f64 re, f64 im) pairs, row-major, node index
running -K..K with the first axis slowest.  Loading is strict: bad magic,
unknown version, malformed header, or a byte count that does not match the
header exactly is a format error, never a best-effort parse.
"""

from __future__ import annotations

import struct

import numpy as np

from .qspace import FrequencyGrid, QElement, ThetaMatrix

__all__ = ["SnapshotFormatError", "save_snapshot", "load_snapshot"]

_MAGIC = b"QNSF"
_VERSION = 1
_HEAD = struct.Struct("<4sIII d")        # magic, version, d, K, L
_COUNT = struct.Struct("<I")


class SnapshotFormatError(ValueError):
    """Raised when a file is not a well-formed QNSF snapshot."""


def save_snapshot(path, fields) -> None:
    """Write one or more coefficient fields sharing a grid and deformation."""
    fields = list(fields)
    if not fields:
        raise ValueError("nothing to save: empty field list")
    grid = fields[0].grid
    theta = fields[0].theta
    if any(f.grid != grid or f.theta != theta for f in fields[1:]):
        raise ValueError("snapshot fields must share grid and theta")
    parts = [_HEAD.pack(_MAGIC, _VERSION, grid.d, grid.K, grid.L)]
    parts.append(theta.as_array().astype("<f8").tobytes())
    parts.append(_COUNT.pack(len(fields)))
    for f in fields:
        parts.append(np.ascontiguousarray(f.coeffs, dtype="<c16").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def _take(buf: bytes, offset: int, size: int, what: str):
    if offset + size > len(buf):
        raise SnapshotFormatError(f"truncated snapshot: {what} missing")
    return buf[offset:offset + size], offset + size


def load_snapshot(path):
    """Read back the tuple of coefficient fields of a QNSF file."""
    with open(path, "rb") as fh:
        buf = fh.read()
    raw, off = _take(buf, 0, _HEAD.size, "header")
    magic, version, d, K, L = _HEAD.unpack(raw)
    if magic != _MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r}, expected {_MAGIC!r}")
    if version != _VERSION:
        raise SnapshotFormatError(f"unsupported snapshot version {version}")
    if not (1 <= d <= 8) or K < 1 or not np.isfinite(L) or L <= 0:
        raise SnapshotFormatError(f"implausible header: d={d}, K={K}, L={L}")
    raw, off = _take(buf, off, 8 * d * d, "theta block")
    entries = np.frombuffer(raw, dtype="<f8").reshape(d, d)
    try:
        theta = ThetaMatrix(entries)
    except ValueError as exc:
        raise SnapshotFormatError(f"theta block invalid: {exc}") from exc
    raw, off = _take(buf, off, _COUNT.size, "field count")
    (count,) = _COUNT.unpack(raw)
    if count < 1:
        raise SnapshotFormatError("snapshot holds no fields")
    grid = FrequencyGrid(d, K, L)
    span = 16 * grid.M ** d
    fields = []
    for i in range(count):
        raw, off = _take(buf, off, span, f"field {i}")
        coeffs = np.frombuffer(raw, dtype="<c16").reshape(grid.shape)
        fields.append(QElement(grid, theta, coeffs.astype(np.complex128)))
    if off != len(buf):
        raise SnapshotFormatError(f"{len(buf) - off} trailing bytes after last field")
    return tuple(fields)
