"""Experiment configuration: structured TOML files -> validated dataclasses.

A config names one experiment: a grid (optionally a refinement ladder), a
coefficient family, initial data, scheme parameters, the sweep seed list, and
the verification tasks with their probe geometry.  Validation happens at load
time with section/key-precise messages; every referenced cylinder or box must
fit the solved domain before any solve starts.  Seeds are explicit; nothing
here consults an entropy source.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import tomli

from .coefficients import CoefficientField, CoefficientKind, generate
from .geometry import Box, CylinderSpec, Point
from .grids import GridSpec
from .solver import SchemeParams, TransportScheme

__all__ = [
    "ConfigError",
    "TaskSpec",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "config_hash",
    "task_point",
    "PAIR_TASKS",
    "TASK_NAMES",
]


class ConfigError(ValueError):
    """Configuration problem, reported with its section and key."""


# ratio estimates probing one nested cylinder pair
PAIR_TASKS = (
    "energy",
    "averaging_gain",
    "mixed_gain",
    "integrability_gain",
    "sup_bound",
    "grad_l2eps",
)

TASK_NAMES = PAIR_TASKS + (
    "weighted_mean",
    "moser",
    "holder",
    "degiorgi",
    "doubling",
    "oracle",
)


@dataclass(frozen=True)
class TaskSpec:
    name: str
    params: dict = field(default_factory=dict)
    finest_only: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    out_dir: str
    grid: GridSpec
    ladder: tuple[GridSpec, ...]  # coarse -> fine; always contains >= 1 grid
    coeff_kind: CoefficientKind
    lam: float
    big_lam: float
    coeff_seed: int
    coeff_cells: tuple[float, float, float] | None
    coeff_wavenumbers: tuple[float, float, float] | None
    initial: dict
    scheme: SchemeParams
    seeds: tuple[int, ...]
    alternate_kind: CoefficientKind | None
    tasks: tuple[TaskSpec, ...]

    def coefficient(self, seed: int = 0, member: int | None = None) -> CoefficientField:
        """Coefficient field for one ensemble member.  When an alternate kind
        is configured, members alternate kinds by seed parity, giving the
        mixed-structure ensemble from a single seed list."""
        kind = self.coeff_kind
        if self.alternate_kind is not None and seed % 2 == 1:
            kind = self.alternate_kind
        return generate(
            kind,
            self.lam,
            self.big_lam,
            seed=self.coeff_seed + seed,
            cells=self.coeff_cells,
            wavenumbers=self.coeff_wavenumbers,
        )


def _get(table: dict, section: str, key: str, kind, default=None, required=False):
    if key not in table:
        if required:
            raise ConfigError(f"[{section}] is missing required key {key!r}")
        return default
    val = table[key]
    if kind is float and isinstance(val, int):
        val = float(val)
    if not isinstance(val, kind):
        raise ConfigError(
            f"[{section}] {key} must be {kind.__name__}, got {type(val).__name__}"
        )
    return val


def _parse_grid(table: dict, section: str, base: GridSpec | None = None) -> GridSpec:
    """Parse a grid table; ladder entries inherit the domain extents from the
    base [grid] section and usually override only the resolution."""
    try:
        return GridSpec(
            nx=_get(table, section, "nx", int, required=True),
            nv=_get(table, section, "nv", int, required=True),
            nt=_get(table, section, "nt", int, required=True),
            lx=_get(table, section, "lx", float,
                    base.lx if base else None, required=base is None),
            vmax=_get(table, section, "vmax", float,
                      base.vmax if base else None, required=base is None),
            t_start=_get(table, section, "t_start", float,
                         base.t_start if base else 0.0),
            t_end=_get(table, section, "t_end", float,
                       base.t_end if base else None, required=base is None),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[{section}]: {exc}") from exc


def _parse_scheme(table: dict) -> SchemeParams:
    try:
        return SchemeParams(
            transport=TransportScheme(
                _get(table, "scheme", "transport", str, "semi_lagrangian_linear")
            ),
            theta=_get(table, "scheme", "theta", float, 0.5),
            face_average=_get(table, "scheme", "face_average", str, "harmonic"),
            cfl_safety=_get(table, "scheme", "cfl_safety", float, 1.0),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[scheme]: {exc}") from exc


def task_point(params: dict, key: str = "center") -> Point:
    center = params.get(key)
    if not (isinstance(center, (list, tuple)) and len(center) == 3):
        raise ConfigError(f"task {key} must be a 3-entry [x, v, t] array")
    return Point(float(center[0]), float(center[1]), float(center[2]))


def _require_cylinder_fits(grid: GridSpec, z0: Point, radius: float, where: str) -> None:
    x0, v0, t0 = float(z0.x[0]), float(z0.v[0]), z0.t
    problems = []
    if 2.0 * radius**3 > grid.lx:
        problems.append(f"x-extent 2R^3 = {2 * radius**3:.4g} exceeds lx = {grid.lx}")
    if abs(v0) + radius > grid.vmax:
        problems.append(f"|v0| + R = {abs(v0) + radius:.4g} exceeds vmax = {grid.vmax}")
    if t0 > grid.t_end or t0 - radius**2 < grid.t_start:
        problems.append(
            f"time window ({t0 - radius**2:.4g}, {t0:.4g}] leaves ({grid.t_start}, {grid.t_end}]"
        )
    if not 0.0 <= x0 < grid.lx:
        problems.append(f"x0 = {x0} outside the periodic cell [0, {grid.lx})")
    if problems:
        raise ConfigError(f"{where}: " + "; ".join(problems))


def _require_box_fits(grid: GridSpec, z0: Point, rx: float, rv: float, depth: float, where: str) -> None:
    v0, t0 = float(z0.v[0]), z0.t
    problems = []
    if 2.0 * rx > grid.lx:
        problems.append(f"x-extent {2 * rx:.4g} exceeds lx = {grid.lx}")
    if abs(v0) + rv > grid.vmax:
        problems.append(f"|v0| + rv = {abs(v0) + rv:.4g} exceeds vmax = {grid.vmax}")
    if t0 > grid.t_end or t0 - depth < grid.t_start:
        problems.append(
            f"time window ({t0 - depth:.4g}, {t0:.4g}] leaves ({grid.t_start}, {grid.t_end}]"
        )
    if problems:
        raise ConfigError(f"{where}: " + "; ".join(problems))


def _box_from(params: dict, key: str, where: str) -> tuple[float, float, float]:
    val = params.get(key)
    if not (isinstance(val, (list, tuple)) and len(val) == 3):
        raise ConfigError(f"{where}: {key} must be [x_radius, v_radius, t_depth]")
    return tuple(float(u) for u in val)


def _validate_task(task: TaskSpec, grids, where: str) -> None:
    p = task.params
    if task.name in PAIR_TASKS:
        z0 = task_point(p)
        r_in = _get(p, where, "r_inner", float, required=True)
        r_out = _get(p, where, "r_outer", float, required=True)
        if not 0.0 < r_in < r_out:
            raise ConfigError(f"{where}: need 0 < r_inner < r_outer")
        for g in grids:
            _require_cylinder_fits(g, z0, r_out, where)
    elif task.name == "weighted_mean":
        z0 = task_point(p)
        r = _get(p, where, "radius", float, required=True)
        for g in grids:
            _require_cylinder_fits(g, z0, 3.0 * r, where)
            if 4.0 * (3.0 * r) ** 3 > g.lx:
                raise ConfigError(
                    f"{where}: cutoff support 4(3R)^3 = {4 * (3 * r) ** 3:.4g} exceeds lx"
                )
    elif task.name == "moser":
        z0 = task_point(p)
        r0 = _get(p, where, "r0", float, required=True)
        r_inf = _get(p, where, "r_inf", float, required=True)
        if not 0.0 < r_inf < r0:
            raise ConfigError(f"{where}: need 0 < r_inf < r0")
        for g in grids:
            _require_cylinder_fits(g, z0, r0, where)
    elif task.name == "holder":
        z0 = task_point(p)
        scales = p.get("scales")
        if not (isinstance(scales, (list, tuple)) and len(scales) >= 3):
            raise ConfigError(f"{where}: scales must list at least three radii")
        for g in grids:
            _require_cylinder_fits(g, z0, float(max(scales)), where)
    elif task.name in ("degiorgi", "doubling"):
        z0 = task_point(p)
        keys = ("outer", "inner") + (("core",) if task.name == "doubling" else ())
        prev = None
        for key in keys:
            rx, rv, depth = _box_from(p, key, where)
            if prev is not None and not (
                rx <= prev[0] and rv <= prev[1] and depth <= prev[2]
            ):
                raise ConfigError(
                    f"{where}: {key} box {(rx, rv, depth)} is not nested in "
                    f"the enclosing box {prev}"
                )
            prev = (rx, rv, depth)
            for g in grids:
                _require_box_fits(g, z0, rx, rv, depth, f"{where}.{key}")
    elif task.name == "oracle":
        pass  # geometry-free: compares to the closed-form reference
    else:
        raise ConfigError(f"{where}: unknown estimate_id {task.name!r}")


def parse_config(raw: dict, name_hint: str = "config") -> ExperimentConfig:
    name = _get(raw, "top level", "name", str, name_hint)
    out_dir = _get(raw, "top level", "out_dir", str, f"out/{name}")

    if "grid" not in raw:
        raise ConfigError("missing [grid] section")
    grid = _parse_grid(raw["grid"], "grid")
    ladder_raw = raw.get("ladder", [])
    if ladder_raw:
        ladder = tuple(
            _parse_grid(t, f"ladder[{i}]", base=grid) for i, t in enumerate(ladder_raw)
        )
    else:
        ladder = (grid,)

    coeff = raw.get("coefficients", {})
    kind_name = _get(coeff, "coefficients", "kind", str, "constant")
    try:
        kind = CoefficientKind(kind_name)
    except ValueError as exc:
        raise ConfigError(f"[coefficients] unknown kind {kind_name!r}") from exc
    lam = _get(coeff, "coefficients", "lam", float, 1.0)
    big_lam = _get(coeff, "coefficients", "Lam", float, lam)
    if not 0.0 < lam <= big_lam or not math.isfinite(big_lam):
        raise ConfigError(f"[coefficients] need 0 < lam <= Lam, got {lam}, {big_lam}")
    cells = coeff.get("cells")
    if cells is not None:
        if not (isinstance(cells, (list, tuple)) and len(cells) == 3):
            raise ConfigError("[coefficients] cells must be [hx, hv, ht]")
        cells = tuple(float(c) for c in cells)
    waves = coeff.get("wavenumbers")
    if waves is not None:
        if not (isinstance(waves, (list, tuple)) and len(waves) == 3):
            raise ConfigError("[coefficients] wavenumbers must be [kx, kv, kt]")
        waves = tuple(float(w) for w in waves)
    alternate = coeff.get("alternate")
    if alternate is not None:
        try:
            alternate = CoefficientKind(alternate)
        except ValueError as exc:
            raise ConfigError(f"[coefficients] unknown alternate kind {alternate!r}") from exc

    initial = dict(raw.get("initial", {"kind": "gaussian"}))
    if "kind" not in initial:
        raise ConfigError("[initial] is missing required key 'kind'")

    scheme = _parse_scheme(raw.get("scheme", {}))

    sweep = raw.get("sweep", {})
    if "seeds" in sweep:
        seeds = tuple(int(s) for s in sweep["seeds"])
    else:
        start = _get(sweep, "sweep", "seed_start", int, 0)
        count = _get(sweep, "sweep", "seed_count", int, 1)
        seeds = tuple(range(start, start + count))
    if not seeds:
        raise ConfigError("[sweep] seed list is empty")

    tasks = []
    for i, t in enumerate(raw.get("tasks", [])):
        where = f"tasks[{i}]"
        tname = _get(t, where, "name", str, required=True)
        finest_only = bool(t.get("finest_only", False))
        params = {
            k: v for k, v in t.items() if k not in ("name", "finest_only", "params")
        }
        sub = t.get("params", {})
        if not isinstance(sub, dict):
            raise ConfigError(f"{where}: params must be a table")
        params.update(sub)
        task = TaskSpec(name=tname, params=params, finest_only=finest_only)
        _validate_task(task, ladder, where)
        tasks.append(task)

    cfg = ExperimentConfig(
        name=name,
        out_dir=out_dir,
        grid=grid,
        ladder=ladder,
        coeff_kind=kind,
        lam=lam,
        big_lam=big_lam,
        coeff_seed=int(coeff.get("seed", 0)),
        coeff_cells=cells,
        coeff_wavenumbers=waves,
        initial=initial,
        scheme=scheme,
        seeds=seeds,
        alternate_kind=alternate,
        tasks=tuple(tasks),
    )
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        try:
            raw = tomli.load(fh)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    import os

    hint = os.path.splitext(os.path.basename(str(path)))[0]
    return parse_config(raw, name_hint=hint)


def _canonical(obj) -> str:
    if isinstance(obj, dict):
        inner = ",".join(f"{k}={_canonical(obj[k])}" for k in sorted(obj))
        return "{" + inner + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_canonical(u) for u in obj) + "]"
    if isinstance(obj, float):
        return repr(obj)
    return str(obj)


def config_hash(cfg: ExperimentConfig) -> str:
    """Deterministic digest of the effective configuration."""
    parts = {
        "name": cfg.name,
        "grid": repr(cfg.grid),
        "ladder": [repr(g) for g in cfg.ladder],
        "coeff": [
            cfg.coeff_kind.value,
            cfg.lam,
            cfg.big_lam,
            cfg.coeff_seed,
            cfg.coeff_cells,
            cfg.coeff_wavenumbers,
            cfg.alternate_kind.value if cfg.alternate_kind else "none",
        ],
        "initial": cfg.initial,
        "scheme": repr(cfg.scheme),
        "seeds": list(cfg.seeds),
        "tasks": [[t.name, _canonical(t.params), t.finest_only] for t in cfg.tasks],
    }
    return hashlib.sha256(_canonical(parts).encode()).hexdigest()
