"""Scenario files: INI sections parsed into a runnable configuration.

Numeric values accept constant expressions from the field mini-language
(``sqrt(3)``, ``pi/6``); field values may additionally use t, x, y.  The
full grammar and key reference live in the README.  Preset scenarios
matching the reference figure captions ship under ``firefront/presets``.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from firefront.errors import ConfigError, ParseError
from firefront.fields import ScalarField, Var, parse_expression, eval_expression, uses_time
from firefront.front import (
    FireMap,
    Ignition,
    IgnitionCircle,
    IgnitionEllipse,
    IgnitionPoint,
    IgnitionPolyline,
    propagate,
)
from firefront.metric import FireMetric
from firefront.terrain import (
    GaussianBump,
    GaussianSumTerrain,
    GridTerrain,
    PlaneTerrain,
    Rect,
    Terrain,
    load_dem,
)


@dataclass(frozen=True)
class Scenario:
    name: str
    terrain: Terrain
    a: ScalarField
    h: ScalarField
    h_prime: ScalarField | None
    epsilon: ScalarField
    wind_angle: ScalarField
    wind_frame: str
    ignition: Ignition
    n: int
    dt: float
    t_end: float
    output_interval: float
    renormalize: bool = True
    threads: int = 1
    focal_epsilon_factor: float = 1e-3
    allow_nonconvex: bool = False
    indicatrix_grid: tuple[int, int] = (5, 5)
    indicatrix_scale: float = 0.0  # 0 = auto

    def metric(self) -> FireMetric:
        return FireMetric(
            terrain=self.terrain, a=self.a, h=self.h, h_prime=self.h_prime,
            epsilon=self.epsilon, wind_angle=self.wind_angle,
            wind_frame=self.wind_frame, time_scale=max(self.t_end, 1.0),
        )

    def run(self, exclude_ids=frozenset(), convexity_audit: bool = True) -> FireMap:
        return propagate(
            self.metric(), self.ignition, n=self.n, dt=self.dt, t_end=self.t_end,
            output_interval=self.output_interval, renormalize=self.renormalize,
            threads=self.threads, focal_epsilon_factor=self.focal_epsilon_factor,
            allow_nonconvex=self.allow_nonconvex, convexity_audit=convexity_audit,
            exclude_ids=exclude_ids,
        )


def _number(raw: str, key: str) -> float:
    """A numeric config value: a constant expression (no t, x, y)."""
    try:
        expr = parse_expression(raw)
    except ParseError as exc:
        raise ConfigError(f"{key}: {exc}") from exc
    if uses_time(expr) or _uses_space(expr):
        raise ConfigError(f"{key}: must be a constant, got {raw!r}")
    return eval_expression(expr)


def _uses_space(node) -> bool:
    if isinstance(node, Var):
        return node.name in ("x", "y")
    for attr in ("arg", "lhs", "rhs"):
        child = getattr(node, attr, None)
        if child is not None and _uses_space(child):
            return True
    return False


def _numbers(raw: str, key: str, count: int | None = None) -> list[float]:
    text = raw.strip()
    if text.startswith("(") and text.endswith(")"):
        text = text[1:-1]
    parts = [p for p in text.split(",") if p.strip()]
    vals = [_number(p, key) for p in parts]
    if count is not None and len(vals) != count:
        raise ConfigError(f"{key}: expected {count} comma-separated values, got {len(vals)}")
    return vals


class _Section:
    def __init__(self, cfg: configparser.ConfigParser, name: str, where: str):
        self.name = name
        self.where = where
        self.raw = dict(cfg[name]) if cfg.has_section(name) else None
        self.used: set[str] = set()

    def require(self):
        if self.raw is None:
            raise ConfigError(f"{self.name}: required")
        return self

    def get(self, key: str, default=None, required: bool = False) -> str | None:
        if self.raw is None:
            if required:
                raise ConfigError(f"{self.name}: required")
            return default
        self.used.add(key)
        if key in self.raw:
            return self.raw[key]
        if required:
            raise ConfigError(f"{self.name}.{key}: required")
        return default

    def number(self, key: str, default=None, required: bool = False) -> float | None:
        raw = self.get(key, required=required)
        return default if raw is None else _number(raw, f"{self.name}.{key}")

    def field(self, key: str, default=None, required: bool = False) -> ScalarField | None:
        raw = self.get(key, required=required)
        if raw is None:
            return default
        try:
            return ScalarField.parse(raw)
        except ParseError as exc:
            raise ConfigError(f"{self.name}.{key}: {exc}") from exc

    def boolean(self, key: str, default: bool) -> bool:
        raw = self.get(key)
        if raw is None:
            return default
        low = raw.strip().lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ConfigError(f"{self.name}.{key}: expected a boolean, got {raw!r}")

    def check_unknown(self):
        if self.raw is None:
            return
        unknown = set(self.raw) - self.used
        if unknown:
            raise ConfigError(f"{self.name}.{sorted(unknown)[0]}: unknown key")


def _parse_terrain(sec: _Section, domain: Rect | None, base: Path | None) -> Terrain:
    kind = (sec.get("kind", required=True) or "").strip().lower()
    if kind == "plane":
        t = PlaneTerrain(gx=sec.number("gx", 0.0), gy=sec.number("gy", 0.0), domain=domain)
    elif kind == "gaussians":
        raw = sec.get("bumps", required=True)
        bumps = []
        for line in raw.strip().splitlines():
            vals = [_number(p, "terrain.bumps") for p in line.split()]
            if len(vals) == 4:
                amp, cx, cy, w = vals
                bumps.append(GaussianBump(amp, (cx, cy), w))
            elif len(vals) == 5:
                amp, cx, cy, wx, wy = vals
                bumps.append(GaussianBump(amp, (cx, cy), (wx, wy)))
            else:
                raise ConfigError(
                    "terrain.bumps: each line is 'amplitude cx cy width' "
                    "or 'amplitude cx cy wx wy'"
                )
        t = GaussianSumTerrain(bumps=tuple(bumps), domain=domain)
    elif kind == "dem":
        rel = sec.get("path", required=True)
        path = Path(rel)
        if base is not None and not path.is_absolute():
            path = base / path
        t = load_dem(path, domain=domain)
    else:
        raise ConfigError(f"terrain.kind: unknown kind {kind!r}")
    sec.check_unknown()
    return t


def _parse_ignition(sec: _Section, base: Path | None) -> Ignition:
    kind = (sec.get("kind", required=True) or "").strip().lower()
    if kind == "point":
        cx, cy = _numbers(sec.get("center", required=True), "ignition.center", 2)
        ign = IgnitionPoint((cx, cy))
    elif kind == "circle":
        cx, cy = _numbers(sec.get("center", required=True), "ignition.center", 2)
        radius = sec.number("radius", required=True)
        if radius <= 0:
            raise ConfigError("ignition.radius: must be positive")
        ign = IgnitionCircle((cx, cy), radius)
    elif kind == "ellipse":
        cx, cy = _numbers(sec.get("center", required=True), "ignition.center", 2)
        rx, ry = _numbers(sec.get("semi_axes", required=True), "ignition.semi_axes", 2)
        rot = sec.number("rotation", 0.0)
        if rx <= 0 or ry <= 0:
            raise ConfigError("ignition.semi_axes: must be positive")
        ign = IgnitionEllipse((cx, cy), (rx, ry), rot)
    elif kind == "polyline":
        rel = sec.get("path", required=True)
        path = Path(rel)
        if base is not None and not path.is_absolute():
            path = base / path
        try:
            pts = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
        except OSError as exc:
            raise ConfigError(f"ignition.path: {exc}") from exc
        if pts.shape[1] != 2:
            raise ConfigError("ignition.path: expected two columns x,y")
        ign = IgnitionPolyline(pts)
    else:
        raise ConfigError(f"ignition.kind: unknown kind {kind!r}")
    sec.check_unknown()
    return ign


def parse_scenario(text: str, name: str = "<config>", base: Path | None = None) -> Scenario:
    cfg = configparser.ConfigParser(inline_comment_prefixes=("#", ";"),
                                    interpolation=None)
    try:
        cfg.read_string(text, source=name)
    except configparser.Error as exc:
        raise ConfigError(f"{name}: {exc}") from exc

    known = {"terrain", "domain", "fields", "wind", "ignition", "solver", "indicatrix"}
    for s in cfg.sections():
        if s not in known:
            raise ConfigError(f"{s}: unknown section")

    dom_sec = _Section(cfg, "domain", name)
    domain = None
    if dom_sec.raw is not None:
        domain = (dom_sec.number("xmin", required=True),
                  dom_sec.number("xmax", required=True),
                  dom_sec.number("ymin", required=True),
                  dom_sec.number("ymax", required=True))
        if domain[0] >= domain[1] or domain[2] >= domain[3]:
            raise ConfigError("domain: xmin < xmax and ymin < ymax required")
        dom_sec.check_unknown()

    terr_sec = _Section(cfg, "terrain", name).require()
    terrain = _parse_terrain(terr_sec, domain, base)
    if not isinstance(terrain, GridTerrain) and domain is None:
        raise ConfigError("domain: required for analytic terrains")

    f_sec = _Section(cfg, "fields", name).require()
    a = f_sec.field("a", required=True)
    h = f_sec.field("h", required=True)
    h_prime = f_sec.field("h_prime", None)
    epsilon = f_sec.field("epsilon", ScalarField.constant(0.0))
    f_sec.check_unknown()

    w_sec = _Section(cfg, "wind", name)
    wind_angle = w_sec.field("angle", ScalarField.constant(0.0))
    wind_frame = (w_sec.get("frame", "surface") or "surface").strip().lower()
    if wind_frame not in ("surface", "aerial"):
        raise ConfigError(f"wind.frame: expected surface or aerial, got {wind_frame!r}")
    w_sec.check_unknown()

    ign_sec = _Section(cfg, "ignition", name).require()
    ignition = _parse_ignition(ign_sec, base)

    s_sec = _Section(cfg, "solver", name)
    n = int(s_sec.number("n", 64))
    dt = s_sec.number("dt", 1e-2)
    t_end = s_sec.number("t_end", required=True)
    output_interval = s_sec.number("output_interval", required=True)
    renormalize = s_sec.boolean("renormalize", True)
    threads = int(s_sec.number("threads", 1))
    focal_factor = s_sec.number("focal_epsilon_factor", 1e-3)
    allow_nonconvex = s_sec.boolean("allow_nonconvex", False)
    s_sec.check_unknown()

    if n < 8:
        raise ConfigError("solver.n: at least 8 trajectories required")
    if dt <= 0:
        raise ConfigError("solver.dt: must be positive")
    if t_end <= 0:
        raise ConfigError("solver.t_end: must be positive")
    if output_interval < dt:
        raise ConfigError("solver.output_interval: must be at least dt")
    nsub = round(output_interval / dt)
    if abs(nsub * dt - output_interval) > 1e-9 * output_interval:
        raise ConfigError("solver.output_interval: must be a multiple of dt")

    i_sec = _Section(cfg, "indicatrix", name)
    gx = int(i_sec.number("nx", 5))
    gy = int(i_sec.number("ny", 5))
    iscale = i_sec.number("scale", 0.0)
    i_sec.check_unknown()

    return Scenario(
        name=name, terrain=terrain, a=a, h=h, h_prime=h_prime, epsilon=epsilon,
        wind_angle=wind_angle, wind_frame=wind_frame, ignition=ignition,
        n=n, dt=dt, t_end=t_end, output_interval=output_interval,
        renormalize=renormalize, threads=threads,
        focal_epsilon_factor=focal_factor, allow_nonconvex=allow_nonconvex,
        indicatrix_grid=(gx, gy), indicatrix_scale=iscale,
    )


def list_presets() -> list[str]:
    root = resources.files("firefront.presets")
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def load_scenario(which: str | Path, overrides: dict | None = None) -> Scenario:
    """Load a scenario from a file path or a preset name (e.g. 'fig5a')."""
    path = Path(which)
    if path.exists():
        scn = parse_scenario(path.read_text(), name=path.stem, base=path.parent)
    else:
        root = resources.files("firefront.presets")
        res = root / f"{which}.ini"
        if not res.is_file():
            raise ConfigError(
                f"config: no file {which!r} and no such preset "
                f"(available: {', '.join(list_presets())})"
            )
        scn = parse_scenario(res.read_text(), name=str(which), base=None)
    if overrides:
        scn = replace(scn, **overrides)
    return scn
