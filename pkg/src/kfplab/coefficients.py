"""Measurable elliptic coefficient fields A(x, v, t) with lam*I <= A <= Lam*I.

No smoothness is assumed anywhere downstream, so the interesting fields here
are genuinely discontinuous: checkerboards and independently-drawn laminate
cells.  Evaluation is pointwise-deterministic -- the laminate draws come from
a counter-based hash of the cell indices, so the same (x, v, t) always sees
the same coefficient regardless of evaluation order or chunking.

Fields carry an affine pre-map of the coordinates (identity by default).
That is what makes the kinetic rescaling of a field exact: the rescaled
field just composes the pre-map with the inverse dilation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .geometry import Point, ScalingParams

__all__ = [
    "CoefficientKind",
    "CoefficientField",
    "EllipticityReport",
    "generate",
    "eval_values",
    "eval_matrix",
    "validate_ellipticity",
    "rescale_field",
]

_IDENTITY = ((1.0, 0.0), (1.0, 0.0), (1.0, 0.0))


class CoefficientKind(enum.Enum):
    CONSTANT = "constant"
    CHECKERBOARD = "checkerboard"
    RANDOM_LAMINATE = "random_laminate"
    OSCILLATORY = "oscillatory"


@dataclass(frozen=True)
class CoefficientField:
    kind: CoefficientKind
    lam: float
    Lam: float
    seed: int = 0
    # cell sizes (hx, hv, ht) for the piecewise-constant kinds
    cells: tuple[float, float, float] = (0.125, 0.5, 0.25)
    # wavenumbers (kx, kv, kt) for the oscillatory kind
    wavenumbers: tuple[float, float, float] = (8.0, 8.0, 4.0)
    # affine coordinate pre-map u -> scale*u + offset, per variable (x, v, t)
    premap: tuple[tuple[float, float], ...] = _IDENTITY

    @property
    def mid(self) -> float:
        return 0.5 * (self.lam + self.Lam)

    @property
    def amp(self) -> float:
        return 0.5 * (self.Lam - self.lam)


@dataclass(frozen=True)
class EllipticityReport:
    min_eig: float
    max_eig: float
    lam: float
    Lam: float
    n_samples: int
    passed: bool


def kinetic_cells(h: float) -> tuple[float, float, float]:
    """Cell sizes (h^3, h, h^2) matching the anisotropy of the cylinders."""
    return (h**3, h, h**2)


def generate(
    kind: CoefficientKind,
    lam: float,
    Lam: float,
    seed: int = 0,
    cells: tuple[float, float, float] | None = None,
    wavenumbers: tuple[float, float, float] | None = None,
) -> CoefficientField:
    if not (0 < lam <= Lam) or not math.isfinite(Lam):
        raise ValueError(f"need 0 < lam <= Lam, got lam={lam}, Lam={Lam}")
    kwargs = {}
    if cells is not None:
        if min(cells) <= 0:
            raise ValueError("cell sizes must be positive")
        kwargs["cells"] = tuple(float(c) for c in cells)
    if wavenumbers is not None:
        kwargs["wavenumbers"] = tuple(float(k) for k in wavenumbers)
    return CoefficientField(kind, float(lam), float(Lam), int(seed), **kwargs)


# -- counter-based uniform draws ------------------------------------------

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _mix(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):  # wraparound mod 2^64 is the point
        z = (z + _GOLDEN).astype(np.uint64)
        z ^= z >> np.uint64(30)
        z *= _M1
        z ^= z >> np.uint64(27)
        z *= _M2
        z ^= z >> np.uint64(31)
    return z


def _cell_uniform(seed: int, ix: np.ndarray, iv: np.ndarray, it: np.ndarray) -> np.ndarray:
    """Deterministic U[0,1) keyed on (seed, cell indices); order-independent."""
    u = _mix(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + np.zeros_like(ix, dtype=np.uint64))
    for idx in (ix, iv, it):
        u = _mix(u ^ idx.astype(np.int64).view(np.uint64))
    return (u >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


# -- evaluation ------------------------------------------------------------


def _apply_premap(field: CoefficientField, x, v, t):
    (sx, ox), (sv, ov), (st, ot) = field.premap
    return sx * np.asarray(x, float) + ox, sv * np.asarray(v, float) + ov, st * np.asarray(t, float) + ot


def eval_values(field: CoefficientField, x, v, t) -> np.ndarray:
    """Scalar coefficient value a(x, v, t), broadcast over array arguments (d = 1)."""
    x, v, t = _apply_premap(field, x, v, t)
    if field.kind is CoefficientKind.CONSTANT:
        return np.broadcast_to(np.float64(field.mid), np.broadcast_shapes(x.shape, v.shape, t.shape)).copy()
    if field.kind is CoefficientKind.OSCILLATORY:
        kx, kv, kt = field.wavenumbers
        return field.mid + field.amp * np.sin(kx * x) * np.sin(kv * v) * np.cos(kt * t)
    hx, hv, ht = field.cells
    ix = np.floor(x / hx).astype(np.int64)
    iv = np.floor(v / hv).astype(np.int64)
    it = np.floor(t / ht).astype(np.int64)
    if field.kind is CoefficientKind.CHECKERBOARD:
        even = (ix + iv + it) % 2 == 0
        return np.where(even, field.lam, field.Lam).astype(np.float64)
    # random laminate: iid uniform in [lam, Lam] per cell
    ix, iv, it = np.broadcast_arrays(ix, iv, it)
    u = _cell_uniform(field.seed, ix, iv, it)
    return field.lam + (field.Lam - field.lam) * u


def eval_at(field: CoefficientField, z: Point) -> float:
    """Scalar value at a single phase-space point (d = 1)."""
    if z.d != 1:
        raise ValueError("scalar evaluation requires d = 1")
    return float(eval_values(field, z.x[0], z.v[0], z.t))


def eval_matrix(field: CoefficientField, z: Point) -> np.ndarray:
    """Coefficient matrix at a point.

    d = 1 returns the 1x1 scalar; d > 1 builds a rotated diagonal matrix whose
    eigenvalues are per-cell draws clamped to [lam, Lam], so the ellipticity
    sandwich holds by construction.
    """
    d = z.d
    if d == 1:
        return np.array([[eval_at(field, z)]])
    # componentwise draws along a hashed rotation; exercised at small d only
    vals = np.array([
        float(eval_values(field, z.x[i], z.v[i], z.t)) for i in range(d)
    ])
    if field.kind in (CoefficientKind.CONSTANT, CoefficientKind.OSCILLATORY) or d != 2:
        return np.diag(vals)
    hx, hv, ht = field.cells
    ang = float(_cell_uniform(
        field.seed ^ 0x5A5A5A5A,
        np.floor(z.x[:1] / hx), np.floor(z.v[:1] / hv), np.array([math.floor(z.t / ht)]),
    )[0]) * math.pi
    c, s = math.cos(ang), math.sin(ang)
    rot = np.array([[c, -s], [s, c]])
    return rot @ np.diag(vals) @ rot.T


def validate_ellipticity(
    field: CoefficientField,
    xs: np.ndarray,
    vs: np.ndarray,
    ts: np.ndarray,
    tol: float = 1e-12,
    include_midpoints: bool = True,
) -> EllipticityReport:
    """Scan the tensor grid xs x vs x ts (plus midpoints) for sandwich violations."""
    def axis_with_midpoints(a):
        a = np.asarray(a, float)
        if include_midpoints and a.size > 1:
            return np.union1d(a, 0.5 * (a[1:] + a[:-1]))
        return a

    xs, vs, ts = (axis_with_midpoints(a) for a in (xs, vs, ts))
    mn, mx = np.inf, -np.inf
    n = 0
    for t in ts:  # chunk over time to bound memory
        vals = eval_values(field, xs[:, None], vs[None, :], float(t))
        mn = min(mn, float(vals.min()))
        mx = max(mx, float(vals.max()))
        n += vals.size
    passed = (mn >= field.lam - tol) and (mx <= field.Lam + tol)
    return EllipticityReport(mn, mx, field.lam, field.Lam, n, passed)


def rescale_field(field: CoefficientField, s: ScalingParams) -> CoefficientField:
    """Pull the field back through the kinetic dilation.

    If zhat = ((x-x0)/r^3, (v-v0)/r, (t-t0)/r^2), the rescaled field satisfies
    eval(rescaled, zhat) == eval(field, z) exactly, for every z.
    """
    if s.origin.d != 1:
        raise ValueError("field rescaling is implemented for d = 1")
    r = s.r
    x0, v0, t0 = float(s.origin.x[0]), float(s.origin.v[0]), float(s.origin.t)
    factors = (r**3, r, r**2)
    offsets = (x0, v0, t0)
    new_premap = tuple(
        (a * f, a * o + b)
        for (a, b), f, o in zip(field.premap, factors, offsets)
    )
    return CoefficientField(
        field.kind, field.lam, field.Lam, field.seed,
        field.cells, field.wavenumbers, new_premap,
    )
