"""Binary field snapshots.

Layout: the 4-byte magic "KFP1"; little-endian u32 counts (Nt, Nx, Nv);
six little-endian f64 domain bounds (t_start, t_end, 0, Lx, -V, V); then
Nt*Nx*Nv little-endian f64 samples with v varying fastest, then x, then t
(exactly the C order of the in-memory (t, x, v) array).
"""

from __future__ import annotations

import struct

import numpy as np

from .grids import GridField, GridSpec

MAGIC = b"KFP1"
_HEAD = struct.Struct("<III6d")

__all__ = ["MAGIC", "write_snapshot", "read_snapshot"]


def write_snapshot(path, field: GridField) -> None:
    if field.tag != "solution":
        raise ValueError(
            f"snapshots store solver output only, got tag {field.tag!r}"
        )
    g = field.grid
    head = _HEAD.pack(g.nt, g.nx, g.nv, g.t_start, g.t_end, 0.0, g.lx, -g.vmax, g.vmax)
    data = np.ascontiguousarray(field.values, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(head)
        fh.write(data.tobytes())


def read_snapshot(path) -> GridField:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"not a field snapshot: bad magic {magic!r}")
        head = fh.read(_HEAD.size)
        if len(head) != _HEAD.size:
            raise ValueError("truncated snapshot header")
        nt, nx, nv, t_start, t_end, x_lo, lx, v_lo, v_hi = _HEAD.unpack(head)
        if x_lo != 0.0 or v_lo != -v_hi:
            raise ValueError("snapshot domain bounds are not in canonical form")
        raw = fh.read(8 * nt * nx * nv)
    if len(raw) != 8 * nt * nx * nv:
        raise ValueError("truncated snapshot payload")
    values = np.frombuffer(raw, dtype="<f8").reshape(nt, nx, nv).astype(np.float64)
    grid = GridSpec(nx=nx, nv=nv, nt=nt, lx=lx, vmax=v_hi, t_start=t_start, t_end=t_end)
    return GridField(grid, values, tag="solution")
