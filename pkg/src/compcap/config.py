"""
Run configuration: flat ``key = value`` text with dotted section names.

Example::

    domain.shape = rectangle
    domain.width = 1.0
    domain.height = 1.0
    grid.resolution = 64
    beta.kind = constant
    beta.value = 0.3
    beta.margin = 0.5

Every key has a default, unknown keys are rejected, and :func:`dump_config`
writes a text that parses back to an equal :class:`RunConfig`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .bounds import IterationParams
from .domain import BoundaryData, DomainSpec, Grid
from .minimize import SolverConfig
from .pde import NewtonConfig

SIDES = ("left", "right", "bottom", "top")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class BetaSpec:
    """Physical adhesion coefficient: constant, one value per side, or a polar-angle table."""

    kind: str = "constant"
    value: float = 0.0
    sides: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    table: tuple[tuple[float, float], ...] = ()
    project: bool = True

    def values(self) -> list[float]:
        if self.kind == "constant":
            return [self.value]
        if self.kind == "sides":
            return list(self.sides)
        return [b for _, b in self.table]

    def sample(self, spec: DomainSpec, mid: np.ndarray) -> np.ndarray:
        if self.kind == "constant":
            return np.full(len(mid), self.value)
        if self.kind == "sides":
            nrm = spec.outward_normal(mid)
            horiz = np.abs(nrm[:, 0]) >= np.abs(nrm[:, 1])
            idx = np.where(horiz, np.where(nrm[:, 0] < 0, 0, 1), np.where(nrm[:, 1] < 0, 2, 3))
            return np.asarray(self.sides)[idx]
        centre = _centroid(spec)
        theta = np.degrees(np.arctan2(mid[:, 1] - centre[1], mid[:, 0] - centre[0])) % 360.0
        ang, val = (np.asarray(x) for x in zip(*self.table))
        return np.interp(theta, ang, val, period=360.0)

    def boundary_data(self, grid: Grid, margin: float) -> BoundaryData:
        return BoundaryData.from_function(grid, lambda mid, nrm: self.sample(grid.spec, mid), margin, self.project)


def _centroid(spec: DomainSpec) -> tuple[float, float]:
    if spec.shape == "rectangle":
        return (spec.width / 2, spec.height / 2)
    if spec.shape == "disk":
        return (0.0, 0.0)
    import shapely

    c = shapely.Polygon(spec.vertices).centroid
    return (c.x, c.y)


@dataclass(frozen=True)
class ContinuationConfig:
    center: tuple[float, float] = (0.5, 0.5)
    radius: float = 0.3
    data: str = "constant"  # constant | random
    value: float = 1.0
    amplitude: float = 0.5
    step: float = 0.1
    min_step: float = 1e-3
    scale_data: bool = False
    newton: NewtonConfig = NewtonConfig()


@dataclass(frozen=True)
class RunConfig:
    domain: DomainSpec = DomainSpec.rectangle(1.0, 1.0)
    resolution: int = 64
    beta: BetaSpec = BetaSpec()
    margin: float = 0.5
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    solver: SolverConfig = SolverConfig()
    output_dir: str = "out"
    c_R: float | None = None
    seed: int = 0
    radial_tol: float = 1e-10
    radial_points: int = 2001
    continuation: ContinuationConfig = ContinuationConfig()
    lemmas: IterationParams | None = None
    plots: bool = True


# --- value codecs -------------------------------------------------------------

def _float(s: str) -> float:
    x = float(s)
    if not math.isfinite(x):
        raise ValueError(f"non-finite number {s!r}")
    return x


def _bool(s: str) -> bool:
    t = s.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _pairs(s: str) -> tuple[tuple[float, float], ...]:
    out = []
    for item in s.split(";"):
        if item.strip():
            parts = item.replace(",", " ").split()
            if len(parts) != 2:
                raise ValueError(f"expected a pair of numbers, got {item!r}")
            out.append((_float(parts[0]), _float(parts[1])))
    return tuple(out)


def _floats(s: str) -> tuple[float, ...]:
    return tuple(_float(x) for x in s.replace(",", " ").split())


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, tuple):
        if x and isinstance(x[0], tuple):
            return "; ".join(f"{_fmt(a)} {_fmt(b)}" for a, b in x)
        return " ".join(_fmt(v) for v in x)
    return str(x)


# --- parsing ------------------------------------------------------------------

_KEYS = {
    "domain.shape": str,
    "domain.width": _float,
    "domain.height": _float,
    "domain.radius": _float,
    "domain.vertices": _pairs,
    "grid.resolution": int,
    "beta.kind": str,
    "beta.value": _float,
    "beta.left": _float,
    "beta.right": _float,
    "beta.bottom": _float,
    "beta.top": _float,
    "beta.table": _pairs,
    "beta.project": _bool,
    "beta.margin": _float,
    "weights.surface": _float,
    "weights.potential": _float,
    "weights.wetting": _float,
    "solver.v_floor": _float,
    "solver.max_iterations": int,
    "solver.grad_tolerance": _float,
    "solver.energy_rel_tolerance": _float,
    "solver.sweep": int,
    "solver.initial_step": _float,
    "solver.max_step": _float,
    "solver.precondition": _bool,
    "output.dir": str,
    "output.plots": _bool,
    "bounds.c_R": _float,
    "run.seed": int,
    "radial.tol": _float,
    "radial.points": int,
    "continuation.center": _floats,
    "continuation.radius": _float,
    "continuation.data": str,
    "continuation.value": _float,
    "continuation.amplitude": _float,
    "continuation.step": _float,
    "continuation.min_step": _float,
    "continuation.scale_data": _bool,
    "newton.tol": _float,
    "newton.max_iterations": int,
    "newton.min_damping": _float,
    "lemmas.C": _float,
    "lemmas.gamma": _float,
    "lemmas.k0": _float,
    "lemmas.B0": _float,
}


def read_pairs(text: str) -> dict[str, str]:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def parse_config(text: str) -> RunConfig:
    """Parse and validate; every problem surfaces as :class:`ConfigError`."""
    raw = read_pairs(text)
    try:
        vals = {k: _KEYS[k](v) for k, v in raw.items()}
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    try:
        return _build(vals)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _build(v: dict) -> RunConfig:
    d = RunConfig()
    shape = v.get("domain.shape", d.domain.shape)
    if shape == "rectangle":
        domain = DomainSpec.rectangle(v.get("domain.width", 1.0), v.get("domain.height", 1.0))
    elif shape == "disk":
        domain = DomainSpec.disk(v.get("domain.radius", 1.0))
    elif shape == "polygon":
        domain = DomainSpec.polygon(v.get("domain.vertices", ()))
    else:
        raise ConfigError(f"unknown domain shape {shape!r}")
    domain.validate()

    resolution = v.get("grid.resolution", d.resolution)
    if resolution < 4:
        raise ConfigError(f"grid.resolution must be at least 4, got {resolution}")

    kind = v.get("beta.kind", "constant")
    if kind not in ("constant", "sides", "table"):
        raise ConfigError(f"unknown beta.kind {kind!r}")
    table = v.get("beta.table", ())
    if kind == "table":
        if not table:
            raise ConfigError("beta.kind = table needs beta.table")
        angles = [a for a, _ in table]
        if any(b <= a for a, b in zip(angles, angles[1:])) or angles[0] < 0 or angles[-1] >= 360:
            raise ConfigError("beta.table angles must increase within [0, 360)")
    beta = BetaSpec(
        kind=kind,
        value=v.get("beta.value", 0.0),
        sides=tuple(v.get(f"beta.{s}", 0.0) for s in SIDES),
        table=table,
        project=v.get("beta.project", True),
    )
    margin = v.get("beta.margin", d.margin)
    if not 0 < margin <= 1:
        raise ConfigError(f"beta.margin must lie in (0, 1], got {margin}")
    worst = max(abs(b) for b in beta.values())
    if worst > 1 - margin + 1e-12:
        raise ConfigError(f"|beta| = {worst} exceeds 1 - a = {1 - margin}")

    weights = tuple(v.get(f"weights.{k}", 1.0) for k in ("surface", "potential", "wetting"))
    if not all(w > 0 for w in weights):
        raise ConfigError("weights must be positive")

    sd = SolverConfig()
    solver = SolverConfig(**{f.name: v.get(f"solver.{f.name}", getattr(sd, f.name)) for f in fields(SolverConfig)})

    c_R = v.get("bounds.c_R")
    if c_R is not None and not c_R > 0:
        raise ConfigError("bounds.c_R must be positive")

    nd = NewtonConfig()
    newton = NewtonConfig(**{f.name: v.get(f"newton.{f.name}", getattr(nd, f.name)) for f in fields(NewtonConfig)})
    cd = ContinuationConfig()
    center = v.get("continuation.center", cd.center)
    if len(center) != 2:
        raise ConfigError("continuation.center needs two numbers")
    cont = ContinuationConfig(
        center=tuple(center),
        radius=v.get("continuation.radius", cd.radius),
        data=v.get("continuation.data", cd.data),
        value=v.get("continuation.value", cd.value),
        amplitude=v.get("continuation.amplitude", cd.amplitude),
        step=v.get("continuation.step", cd.step),
        min_step=v.get("continuation.min_step", cd.min_step),
        scale_data=v.get("continuation.scale_data", cd.scale_data),
        newton=newton,
    )
    if cont.data not in ("constant", "random"):
        raise ConfigError(f"unknown continuation.data {cont.data!r}")
    if not 0 < cont.step <= 1:
        raise ConfigError("continuation.step must lie in (0, 1]")

    lemma_keys = [k for k in ("C", "gamma", "k0", "B0") if f"lemmas.{k}" in v]
    lemmas = None
    if lemma_keys:
        if len(lemma_keys) != 4:
            raise ConfigError("lemmas needs all of lemmas.C, lemmas.gamma, lemmas.k0, lemmas.B0")
        lemmas = IterationParams(v["lemmas.C"], v["lemmas.gamma"], v["lemmas.k0"], v["lemmas.B0"])

    return RunConfig(
        domain=domain,
        resolution=resolution,
        beta=beta,
        margin=margin,
        weights=weights,
        solver=solver,
        output_dir=v.get("output.dir", d.output_dir),
        c_R=c_R,
        seed=v.get("run.seed", d.seed),
        radial_tol=v.get("radial.tol", d.radial_tol),
        radial_points=v.get("radial.points", d.radial_points),
        continuation=cont,
        lemmas=lemmas,
        plots=v.get("output.plots", d.plots),
    )


def dump_config(cfg: RunConfig) -> str:
    """Effective configuration as text; ``parse_config(dump_config(c)) == c``."""
    dom = cfg.domain
    lines = [f"domain.shape = {dom.shape}"]
    if dom.shape == "rectangle":
        lines += [f"domain.width = {_fmt(dom.width)}", f"domain.height = {_fmt(dom.height)}"]
    elif dom.shape == "disk":
        lines.append(f"domain.radius = {_fmt(dom.radius)}")
    else:
        lines.append(f"domain.vertices = {_fmt(dom.vertices)}")
    lines.append(f"grid.resolution = {cfg.resolution}")
    b = cfg.beta
    lines += [f"beta.kind = {b.kind}", f"beta.value = {_fmt(b.value)}"]
    lines += [f"beta.{s} = {_fmt(x)}" for s, x in zip(SIDES, b.sides)]
    if b.table:
        lines.append(f"beta.table = {_fmt(b.table)}")
    lines += [f"beta.project = {_fmt(b.project)}", f"beta.margin = {_fmt(cfg.margin)}"]
    lines += [f"weights.{k} = {_fmt(w)}" for k, w in zip(("surface", "potential", "wetting"), cfg.weights)]
    lines += [f"solver.{f.name} = {_fmt(getattr(cfg.solver, f.name))}" for f in fields(SolverConfig)]
    lines += [f"output.dir = {cfg.output_dir}", f"output.plots = {_fmt(cfg.plots)}"]
    if cfg.c_R is not None:
        lines.append(f"bounds.c_R = {_fmt(cfg.c_R)}")
    lines += [f"run.seed = {cfg.seed}", f"radial.tol = {_fmt(cfg.radial_tol)}", f"radial.points = {cfg.radial_points}"]
    c = cfg.continuation
    for name in ("center", "radius", "data", "value", "amplitude", "step", "min_step", "scale_data"):
        lines.append(f"continuation.{name} = {_fmt(getattr(c, name))}")
    lines += [f"newton.{f.name} = {_fmt(getattr(c.newton, f.name))}" for f in fields(NewtonConfig)]
    if cfg.lemmas is not None:
        lines += [f"lemmas.{k} = {_fmt(getattr(cfg.lemmas, k))}" for k in ("C", "gamma", "k0", "B0")]
    return "\n".join(lines) + "\n"
