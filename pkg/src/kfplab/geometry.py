"""Kinetic phase-space geometry: cylinders, boxes, and the hypoelliptic scaling.

Coordinates are z = (x, v, t) with x, v in R^d and t real.  The natural
cylinders for the transport-diffusion operator d_t + v.grad_x - div_v(A grad_v)
are anisotropic: an x-extent of R^3, a v-extent of R and a time depth of R^2,
reflecting the invariance of the operator under

    (x, v, t)  ->  ((x - x0)/r^3, (v - v0)/r, (t - t0)/r^2).

Three cylinder flavours are supported:

* ``STRAIGHT``  B_{R^3}(x0) x B_R(v0) x (t0 - R^2, t0]
* ``SLANTED``   same, but the x-ball follows the free stream of the center
                velocity: |x - x0 - (t - t0) v0| < R^3
* ``SHEARED``   translated image of {|x - t v| < R^3, |v| < R, -R^2 < t <= 0},
                i.e. |(x - x0) - (t - t0)(v - v0)| < R^3

All cylinders are open in space and half-open in time with the top slice
t = t0 included.  Membership is exact (no grid knowledge lives here).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Point",
    "CylinderKind",
    "CylinderSpec",
    "Box",
    "ScalingParams",
    "cylinder_contains",
    "cylinder_contains_batch",
    "cylinder_volume",
    "box_contains",
    "box_volume",
    "kinetic_rescale_point",
    "kinetic_unscale_point",
    "cylinder_rescale",
    "unit_ball_volume",
]


def _as_vector(a) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(a, dtype=float))
    if arr.ndim != 1:
        raise ValueError(f"expected a scalar or 1-d coordinate, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class Point:
    """A phase-space point z = (x, v, t); x and v may be scalars when d = 1."""

    x: np.ndarray
    v: np.ndarray
    t: float

    def __post_init__(self):
        object.__setattr__(self, "x", _as_vector(self.x))
        object.__setattr__(self, "v", _as_vector(self.v))
        object.__setattr__(self, "t", float(self.t))
        if self.x.shape != self.v.shape:
            raise ValueError("x and v must have the same dimension")

    @property
    def d(self) -> int:
        return self.x.size

    def key(self) -> tuple:
        """Hashable identity, used for caching derived grid masks."""
        return (tuple(self.x), tuple(self.v), self.t)


class CylinderKind(enum.Enum):
    STRAIGHT = "straight"
    SLANTED = "slanted"
    SHEARED = "sheared"


@dataclass(frozen=True)
class CylinderSpec:
    center: Point
    radius: float
    kind: CylinderKind = CylinderKind.STRAIGHT

    def __post_init__(self):
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValueError(f"cylinder radius must be positive, got {self.radius}")

    @property
    def x_radius(self) -> float:
        return self.radius**3

    @property
    def t_depth(self) -> float:
        return self.radius**2

    def time_window(self) -> tuple[float, float]:
        """(bottom, top]; the top is part of the cylinder."""
        t0 = self.center.t
        return (t0 - self.radius**2, t0)

    def key(self) -> tuple:
        return (self.kind.value, self.center.key(), self.radius)


@dataclass(frozen=True)
class Box:
    """Axis-aligned phase-space box B_rx(x0) x B_rv(v0) x (t0 - depth, t0].

    Used by the oscillation/measure-shrinking experiments, whose natural
    domains are plain boxes with equal x- and v-extents rather than the
    anisotropic kinetic cylinders.
    """

    center: Point
    x_radius: float
    v_radius: float
    t_depth: float

    def __post_init__(self):
        if min(self.x_radius, self.v_radius, self.t_depth) <= 0:
            raise ValueError("box extents must all be positive")

    def time_window(self) -> tuple[float, float]:
        return (self.center.t - self.t_depth, self.center.t)

    def key(self) -> tuple:
        return ("box", self.center.key(), self.x_radius, self.v_radius, self.t_depth)


def unit_ball_volume(d: int) -> float:
    """Lebesgue volume of the unit ball in R^d (2 for d = 1)."""
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def _spatial_offset(spec: CylinderSpec, x: np.ndarray, v: np.ndarray, t: float) -> np.ndarray:
    """The quantity whose norm is compared with R^3, per cylinder kind."""
    c = spec.center
    if spec.kind is CylinderKind.STRAIGHT:
        return x - c.x
    if spec.kind is CylinderKind.SLANTED:
        return x - c.x - (t - c.t) * c.v
    return x - c.x - (t - c.t) * (v - c.v)


def cylinder_contains(spec: CylinderSpec, z: Point) -> bool:
    """Exact membership test; open in space, (t0 - R^2, t0] in time."""
    if z.d != spec.center.d:
        raise ValueError("point and cylinder dimensions differ")
    lo, hi = spec.time_window()
    if not (lo < z.t <= hi):
        return False
    if np.linalg.norm(z.v - spec.center.v) >= spec.radius:
        return False
    off = _spatial_offset(spec, z.x, z.v, z.t)
    return bool(np.linalg.norm(off) < spec.radius**3)


def cylinder_contains_batch(spec: CylinderSpec, xs, vs, ts) -> np.ndarray:
    """Vectorized membership for d = 1 coordinate arrays of equal shape."""
    if spec.center.d != 1:
        raise ValueError("batch membership is implemented for d = 1")
    xs, vs, ts = (np.asarray(a, dtype=float) for a in (xs, vs, ts))
    x0, v0, t0 = spec.center.x[0], spec.center.v[0], spec.center.t
    lo, hi = spec.time_window()
    inside_t = (ts > lo) & (ts <= hi)
    inside_v = np.abs(vs - v0) < spec.radius
    if spec.kind is CylinderKind.STRAIGHT:
        off = xs - x0
    elif spec.kind is CylinderKind.SLANTED:
        off = xs - x0 - (ts - t0) * v0
    else:
        off = xs - x0 - (ts - t0) * (vs - v0)
    return inside_t & inside_v & (np.abs(off) < spec.radius**3)


def cylinder_volume(spec: CylinderSpec) -> float:
    """|B_{R^3}| * |B_R| * R^2; identical for all kinds (shears preserve volume)."""
    d = spec.center.d
    R = spec.radius
    return unit_ball_volume(d) ** 2 * R ** (4 * d + 2)


def box_contains(box: Box, z: Point) -> bool:
    if z.d != box.center.d:
        raise ValueError("point and box dimensions differ")
    lo, hi = box.time_window()
    if not (lo < z.t <= hi):
        return False
    if np.linalg.norm(z.x - box.center.x) >= box.x_radius:
        return False
    return bool(np.linalg.norm(z.v - box.center.v) < box.v_radius)


def box_volume(box: Box) -> float:
    d = box.center.d
    ub = unit_ball_volume(d)
    return ub * box.x_radius**d * ub * box.v_radius**d * box.t_depth


@dataclass(frozen=True)
class ScalingParams:
    """Origin and factor of the kinetic dilation (x,v,t) -> (x/r^3, v/r, t/r^2)."""

    origin: Point
    r: float

    def __post_init__(self):
        if not (self.r > 0 and math.isfinite(self.r)):
            raise ValueError(f"scale factor must be positive, got {self.r}")


def kinetic_rescale_point(z: Point, s: ScalingParams) -> Point:
    o, r = s.origin, s.r
    return Point((z.x - o.x) / r**3, (z.v - o.v) / r, (z.t - o.t) / r**2)


def kinetic_unscale_point(z: Point, s: ScalingParams) -> Point:
    o, r = s.origin, s.r
    return Point(o.x + z.x * r**3, o.v + z.v * r, o.t + z.t * r**2)


def cylinder_rescale(spec: CylinderSpec, s: ScalingParams) -> CylinderSpec:
    """Image of a cylinder under the kinetic dilation anchored at its center.

    The dilation maps center-anchored straight and sheared cylinders onto the
    same kind of cylinder at the origin with radius R/r.  A slanted cylinder
    only maps onto a spec expressible here when its center velocity vanishes
    (the slant velocity r-scales away from the new center otherwise).
    """
    o = s.origin
    same_center = (
        np.array_equal(o.x, spec.center.x)
        and np.array_equal(o.v, spec.center.v)
        and o.t == spec.center.t
    )
    if not same_center:
        raise ValueError("cylinder_rescale requires the scaling origin to be the cylinder center")
    if spec.kind is CylinderKind.SLANTED and np.any(spec.center.v != 0):
        raise ValueError("slanted cylinders with nonzero center velocity do not rescale to a spec")
    d = spec.center.d
    origin = Point(np.zeros(d), np.zeros(d), 0.0)
    return CylinderSpec(origin, spec.radius / s.r, spec.kind)
