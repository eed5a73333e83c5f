"""Phase-space grids, stored solution fields, and cylinder rasterization.

The domain is x in [0, lx) with periodic identification, v in [-vmax, vmax]
with zero-flux walls, and t in (t_start, t_end].  Cells are uniform; x and v
samples sit at cell centers.  In time the solver stores one slice after each
step, at ts[k] = t_start + (k+1) dt, so the nt stored slices tile exactly the
half-open span (t_start, t_end] -- the same convention the kinetic cylinders
use (bottom excluded, top included).

Rasterization rule, used by every quadrature downstream: a cell belongs to a
cylinder (or box) iff its sample point does -- the (x, v) cell center and the
slice time.  x-offsets are wrapped to the torus before the comparison, so
cylinders may sit anywhere on the circle provided they are narrower than half
of it.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .geometry import Box, CylinderKind, CylinderSpec

__all__ = ["GridSpec", "GridField", "cylinder_mask", "box_mask", "region_mask",
           "slice_section_mask", "wrap_offset"]


@dataclass(frozen=True)
class GridSpec:
    nx: int
    nv: int
    nt: int
    lx: float
    vmax: float
    t_start: float
    t_end: float

    def __post_init__(self):
        if min(self.nx, self.nv, self.nt) < 1:
            raise ValueError("grid counts must be positive")
        if not (self.lx > 0 and self.vmax > 0 and self.t_end > self.t_start):
            raise ValueError("grid extents must be positive")

    @property
    def dx(self) -> float:
        return self.lx / self.nx

    @property
    def dv(self) -> float:
        return 2.0 * self.vmax / self.nv

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / self.nt

    @property
    def cell_measure(self) -> float:
        return self.dx * self.dv * self.dt

    @cached_property
    def xs(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.dx

    @cached_property
    def vs(self) -> np.ndarray:
        return -self.vmax + (np.arange(self.nv) + 0.5) * self.dv

    @cached_property
    def ts(self) -> np.ndarray:
        return self.t_start + (np.arange(self.nt) + 1) * self.dt

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nt, self.nx, self.nv)

    def t_index(self, t: float) -> int:
        """Index of the stored slice closest to t (slices live at t_start + (k+1) dt)."""
        k = int(round((t - self.t_start) / self.dt)) - 1
        if k < 0 or k >= self.nt:
            raise ValueError(f"time {t} outside the stored span ({self.t_start}, {self.t_end}]")
        return k


@dataclass
class GridField:
    """A scalar field sampled on a grid, with a provenance tag.

    tag is one of 'solution' (came out of the solver), 'subsolution'
    (image under a convex nondecreasing change of unknown, or any object
    only claimed to satisfy the one-sided equation), or 'generic'.
    """

    grid: GridSpec
    values: np.ndarray
    tag: str = "generic"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"values shape {self.values.shape} != grid shape {self.grid.shape}"
            )
        if self.tag not in ("solution", "subsolution", "generic"):
            raise ValueError(f"unknown tag {self.tag!r}")

    def copy(self, tag: str | None = None) -> "GridField":
        return GridField(self.grid, self.values.copy(), tag or self.tag)


def wrap_offset(offsets: np.ndarray, lx: float) -> np.ndarray:
    """Wrap x-offsets into [-lx/2, lx/2) on the periodic circle."""
    return np.mod(offsets + 0.5 * lx, lx) - 0.5 * lx


def _time_window_mask(grid: GridSpec, lo: float, hi: float) -> np.ndarray:
    ts = grid.ts
    return (ts > lo) & (ts <= hi)


def _section_offsets(spec: CylinderSpec, grid: GridSpec, t: float) -> np.ndarray:
    """Wrapped x-offset of every (x, v) cell center at time t, shape (nx, nv)."""
    x0, v0, t0 = spec.center.x[0], spec.center.v[0], spec.center.t
    xs, vs = grid.xs, grid.vs
    if spec.kind is CylinderKind.STRAIGHT:
        off = (xs - x0)[:, None] + np.zeros((1, grid.nv))
    elif spec.kind is CylinderKind.SLANTED:
        off = (xs - x0 - (t - t0) * v0)[:, None] + np.zeros((1, grid.nv))
    else:
        off = (xs - x0)[:, None] - (t - t0) * (vs - v0)[None, :]
    return wrap_offset(off, grid.lx)


def slice_section_mask(spec: CylinderSpec, grid: GridSpec, t: float) -> np.ndarray:
    """(nx, nv) mask of the cylinder's (x, v) section at time t; empty if t is
    outside the cylinder's half-open time window."""
    lo, hi = spec.time_window()
    if not (lo < t <= hi):
        return np.zeros((grid.nx, grid.nv), dtype=bool)
    v_ok = np.abs(grid.vs - spec.center.v[0]) < spec.radius
    x_ok = np.abs(_section_offsets(spec, grid, t)) < spec.radius**3
    return x_ok & v_ok[None, :]


_MASK_CACHE: OrderedDict[tuple, np.ndarray] = OrderedDict()
_MASK_CACHE_SIZE = 12


def _cache_get(key):
    m = _MASK_CACHE.get(key)
    if m is not None:
        _MASK_CACHE.move_to_end(key)
    return m


def _cache_put(key, mask):
    _MASK_CACHE[key] = mask
    if len(_MASK_CACHE) > _MASK_CACHE_SIZE:
        _MASK_CACHE.popitem(last=False)


def cylinder_mask(spec: CylinderSpec, grid: GridSpec) -> np.ndarray:
    """Boolean (nt, nx, nv) rasterization of a cylinder onto the grid."""
    if spec.center.d != 1:
        raise ValueError("rasterization is implemented for d = 1")
    key = (grid, spec.key())
    cached = _cache_get(key)
    if cached is not None:
        return cached
    lo, hi = spec.time_window()
    t_ok = _time_window_mask(grid, lo, hi)
    x0, v0 = spec.center.x[0], spec.center.v[0]
    v_ok = np.abs(grid.vs - v0) < spec.radius
    if spec.kind is CylinderKind.STRAIGHT:
        x_ok = np.abs(wrap_offset(grid.xs - x0, grid.lx)) < spec.radius**3
        mask = t_ok[:, None, None] & x_ok[None, :, None] & v_ok[None, None, :]
    else:
        mask = np.zeros(grid.shape, dtype=bool)
        idx = np.nonzero(t_ok)[0]
        for start in range(0, idx.size, 64):  # chunk to bound transient memory
            chunk = idx[start:start + 64]
            sections = np.stack([
                np.abs(_section_offsets(spec, grid, grid.ts[k])) < spec.radius**3
                for k in chunk
            ])
            mask[chunk] = sections & v_ok[None, None, :]
    mask.setflags(write=False)
    _cache_put(key, mask)
    return mask


def box_mask(box: Box, grid: GridSpec) -> np.ndarray:
    """Boolean (nt, nx, nv) rasterization of an axis-aligned box."""
    if box.center.d != 1:
        raise ValueError("rasterization is implemented for d = 1")
    key = (grid, box.key())
    cached = _cache_get(key)
    if cached is not None:
        return cached
    lo, hi = box.time_window()
    t_ok = _time_window_mask(grid, lo, hi)
    x_ok = np.abs(wrap_offset(grid.xs - box.center.x[0], grid.lx)) < box.x_radius
    v_ok = np.abs(grid.vs - box.center.v[0]) < box.v_radius
    mask = t_ok[:, None, None] & x_ok[None, :, None] & v_ok[None, None, :]
    mask.setflags(write=False)
    _cache_put(key, mask)
    return mask


def region_mask(region, grid: GridSpec) -> np.ndarray:
    """Dispatch on CylinderSpec vs Box."""
    if isinstance(region, CylinderSpec):
        return cylinder_mask(region, grid)
    if isinstance(region, Box):
        return box_mask(region, grid)
    raise TypeError(f"expected CylinderSpec or Box, got {type(region).__name__}")
