"""Norms, cutoffs, weighted means, oscillations, and level-set measures.

Everything here is a pure function of rasterized fields: regions are turned
into cell masks by the shared rasterization rules, sums are plain (pairwise)
numpy reductions over float64, and all quadrature is the midpoint rule the
grid induces.  Mixed norms nest innermost-in-v, then x, then t, so that the
(p, p, p) mixed norm and the plain L^p norm are the same reduction and agree
exactly, not just to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import Box, CylinderSpec, Point
from .grids import GridField, GridSpec, region_mask, wrap_offset

__all__ = [
    "MixedNormSpec",
    "CutoffSpec",
    "smooth_step",
    "dv_centered",
    "lp_norm",
    "mixed_norm",
    "grad_v",
    "frac_deriv_x",
    "phi_profile",
    "phi_integral",
    "cutoff_chi",
    "cutoff_slice",
    "weighted_mean",
    "oscillation",
    "level_set_measure",
]

INF = math.inf


# -- shared smooth profiles ------------------------------------------------------


def smooth_step(u: np.ndarray) -> np.ndarray:
    """C-infinity monotone transition: 0 for u <= 0, 1 for u >= 1."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
        b = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1.0 - u, 1.0)), 0.0)
    return a / (a + b)


def _eta(s: np.ndarray) -> np.ndarray:
    """Plateau profile: 1 on |s| <= 1, 0 on |s| >= 2, smooth in between."""
    return smooth_step(np.clip(2.0 - np.abs(np.asarray(s, dtype=float)), 0.0, 1.0))


def phi_profile(s) -> np.ndarray:
    """The shipped cutoff bump: phi = eta^2, so sqrt(phi) is itself smooth."""
    return _eta(s) ** 2


@lru_cache(maxsize=1)
def phi_integral() -> float:
    """int phi over the line, by fine trapezoid quadrature (phi is smooth and
    compactly supported, so this converges faster than any power of h)."""
    s = np.linspace(-2.0, 2.0, 40001)
    return float(np.trapezoid(phi_profile(s), s))


def dv_centered(values: np.ndarray, dv: float) -> np.ndarray:
    """v-derivative along the last axis: centered inside, one-sided at walls."""
    out = np.empty_like(values)
    out[..., 1:-1] = (values[..., 2:] - values[..., :-2]) / (2.0 * dv)
    out[..., 0] = (values[..., 1] - values[..., 0]) / dv
    out[..., -1] = (values[..., -1] - values[..., -2]) / dv
    return out


# -- norms -------------------------------------------------------------------------


@dataclass(frozen=True)
class MixedNormSpec:
    """Exponents applied innermost-in-v, then x, then t; each >= 1 or inf."""

    p_t: float
    p_x: float
    p_v: float

    def __post_init__(self):
        for p in (self.p_t, self.p_x, self.p_v):
            if not (p >= 1.0):
                raise ValueError(f"exponents must be >= 1 (or inf), got {p}")


def _reduce(stack: np.ndarray, nonempty: np.ndarray, p: float, weight: float, axis: int):
    """One nesting level: p-quadrature (or sup) over `axis`, counting only
    positions flagged nonempty; returns (values, any-nonempty) one level up."""
    gated = np.where(nonempty, stack, 0.0)
    if p == INF:
        reduced = gated.max(axis=axis)
    else:
        reduced = (np.sum(gated**p, axis=axis) * weight) ** (1.0 / p)
    return reduced, nonempty.any(axis=axis)


def mixed_norm(f: GridField, region, spec: MixedNormSpec) -> float:
    """Nested norm over the rasterized region: v-norm per (t, x) column, then
    x-norm per slice, then t-norm."""
    grid = f.grid
    mask = region_mask(region, grid)
    if not mask.any():
        raise ValueError("region does not intersect the stored grid")
    level = np.where(mask, np.abs(f.values), 0.0)
    level, alive = _reduce(level, mask, spec.p_v, grid.dv, axis=2)
    level, alive = _reduce(level, alive, spec.p_x, grid.dx, axis=1)
    level, _ = _reduce(level, alive, spec.p_t, grid.dt, axis=0)
    return float(level)


def lp_norm(f: GridField, region, p: float) -> float:
    """Plain L^p over the region; p = inf gives the max over cells.  Defined
    as the (p, p, p) mixed norm so the two can never disagree."""
    return mixed_norm(f, region, MixedNormSpec(p, p, p))


# -- derivatives --------------------------------------------------------------------


def grad_v(f: GridField) -> GridField:
    """Discrete v-gradient: centered differences inside, one-sided at the
    zero-flux walls (exact on fields linear in v)."""
    if f.grid.nv < 3:
        raise ValueError("the v-gradient needs at least three v-cells")
    return GridField(f.grid, dv_centered(f.values, f.grid.dv), tag="generic")


def frac_deriv_x(f: GridField, s: float, window: "CutoffSpec | None" = None) -> GridField:
    """Fractional x-derivative of order s on the torus.

    If a window is given the field is multiplied by its cutoff first, which
    localizes the data; the window's support must not exceed half the torus
    or the periodic multiplier would see its own wraparound.  The multiplier
    is |xi|^s on physical frequencies xi = 2 pi k / lx, so constants map to
    zero and a pure mode of frequency xi scales by exactly |xi|^s.
    """
    if not 0.0 < s < 1.0:
        raise ValueError("the fractional order must lie in (0, 1)")
    grid = f.grid
    vals = f.values
    if window is not None:
        if 4.0 * window.radius**3 > 0.5 * grid.lx:
            raise ValueError(
                "window support exceeds half the torus; the periodic "
                "transform would wrap it onto itself"
            )
        vals = vals * cutoff_slab(window, grid)
    mult = np.abs(2.0 * np.pi * np.fft.rfftfreq(grid.nx, d=grid.dx)) ** s
    out = np.fft.irfft(
        np.fft.rfft(vals, axis=1) * mult[None, :, None], n=grid.nx, axis=1
    )
    return GridField(grid, out, tag="generic")


# -- cutoffs and weighted means -------------------------------------------------------


@dataclass(frozen=True)
class CutoffSpec:
    """Shear-following product cutoff.

    With plateau radius R, the weight is

        chi(x, v, t) = phi(((x - x0) - (t - t0)(v - v0)) / R^3) * phi((v - v0) / R),

    identically 1 on the sheared radius-R cylinder's sections and 0 outside
    the radius-2R tube.  There is deliberately no time factor: the weight
    rides along the free stream, and time localization belongs to whoever
    integrates in t.
    """

    center: Point
    radius: float

    def __post_init__(self):
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValueError("cutoff radius must be positive and finite")

    def key(self):
        return (self.center.key(), self.radius)


def cutoff_chi(spec: CutoffSpec, z: Point) -> float:
    """Pointwise weight on the line (no torus wrap); radial in each factor."""
    if z.d != spec.center.d:
        raise ValueError("point and cutoff dimensions differ")
    c = spec.center
    shear = z.x - c.x - (z.t - c.t) * (z.v - c.v)
    r3 = spec.radius**3
    return float(
        phi_profile(np.linalg.norm(shear) / r3)
        * phi_profile(np.linalg.norm(z.v - c.v) / spec.radius)
    )


def cutoff_slice(spec: CutoffSpec, grid: GridSpec, t: float) -> np.ndarray:
    """The (nx, nv) weight at time t on the periodic grid."""
    if spec.center.d != 1:
        raise ValueError("grid evaluation is implemented for d = 1")
    if 4.0 * spec.radius**3 > grid.lx:
        raise ValueError("cutoff support does not fit on the torus")
    x0, v0, t0 = spec.center.x[0], spec.center.v[0], spec.center.t
    shear = wrap_offset(
        grid.xs[:, None] - x0 - (t - t0) * (grid.vs[None, :] - v0), grid.lx
    )
    return phi_profile(shear / spec.radius**3) * phi_profile(
        (grid.vs[None, :] - v0) / spec.radius
    )


def cutoff_slab(spec: CutoffSpec, grid: GridSpec) -> np.ndarray:
    """The weight on every stored slice, shape (nt, nx, nv)."""
    return np.stack([cutoff_slice(spec, grid, t) for t in grid.ts])


def weighted_mean(f: GridField, spec: CutoffSpec, t: float) -> float:
    """Cutoff-weighted average of the slice nearest t.

    Normalized by c R^4 with c = (int phi)^2, which is exactly the weight's
    own integral, so constants are reproduced up to quadrature error.
    """
    grid = f.grid
    k = grid.t_index(t)
    chi = cutoff_slice(spec, grid, grid.ts[k])
    total = float(np.sum(f.values[k] * chi)) * grid.dx * grid.dv
    return total / (phi_integral() ** 2 * spec.radius**4)


# -- oscillation and level sets ---------------------------------------------------------


def oscillation(f: GridField, region) -> float:
    """max - min over the region's cells."""
    mask = region_mask(region, f.grid)
    if not mask.any():
        raise ValueError("region does not intersect the stored grid")
    vals = f.values[mask]
    return float(vals.max() - vals.min())


def level_set_measure(f: GridField, region, op: str, a: float, b: float | None = None) -> float:
    """Phase-space measure of {f >= a} ('ge'), {f <= a} ('le'), or the open
    band {a < f < b} ('band') inside the region, by cell-center counting."""
    mask = region_mask(region, f.grid)
    vals = f.values
    if op == "ge":
        hit = vals >= a
    elif op == "le":
        hit = vals <= a
    elif op == "band":
        if b is None or not a < b:
            raise ValueError("band predicate needs thresholds a < b")
        hit = (vals > a) & (vals < b)
    else:
        raise ValueError(f"unknown predicate {op!r}; use 'ge', 'le', or 'band'")
    return float(np.count_nonzero(hit & mask)) * f.grid.cell_measure
