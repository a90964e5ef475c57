"""Terrain kinds and the geometry derived from z(x, y).

Aerial points are plain ``(x, y)`` tuples.  All angle conventions: theta is
measured counterclockwise from +x, in radians.  The slope angle delta is
the angle between the vertical axis and the surface direction; the slant
sigma is the inclination of the tangent plane, sigma = pi/2 - min(delta).
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from firefront.backend import engine
from firefront.errors import ConfigError

AerialPoint = tuple[float, float]
SurfaceVector = tuple[float, float, float]
#: (xmin, xmax, ymin, ymax); None means unbounded (analytic terrains only).
Rect = tuple[float, float, float, float]


@dataclass(frozen=True)
class PlaneTerrain:
    """z = gx*x + gy*y."""

    gx: float
    gy: float
    domain: Rect | None = None


@dataclass(frozen=True)
class GaussianBump:
    """amplitude * exp(-(x-cx)^2/(2*wx^2) - (y-cy)^2/(2*wy^2)).

    width may be a scalar (isotropic) or (wx, wy); an infinite width makes
    the bump constant along that axis (a ridge).
    """

    amplitude: float
    center: AerialPoint
    width: float | tuple[float, float]

    def decay(self) -> tuple[float, float]:
        w = self.width
        wx, wy = (w, w) if isinstance(w, (int, float)) else w
        if wx <= 0 or wy <= 0:
            raise ValueError("gaussian width must be positive")
        qx = 0.0 if math.isinf(wx) else 0.5 / (wx * wx)
        qy = 0.0 if math.isinf(wy) else 0.5 / (wy * wy)
        return qx, qy


@dataclass(frozen=True)
class GaussianSumTerrain:
    bumps: tuple[GaussianBump, ...]
    domain: Rect | None = None


@dataclass(frozen=True, eq=False)
class GridTerrain:
    """Gridded DEM; heights[iy, ix] at node (x0 + ix*cs, y0 + iy*cs), row 0 south.

    Interpolation is bicubic (Catmull-Rom), C1 everywhere; the evaluable
    extent is inset one cell from the node extent so the 4x4 stencil always
    fits.
    """

    heights: np.ndarray
    x0: float
    y0: float
    cellsize: float
    domain: Rect | None = None

    def node_extent(self) -> Rect:
        ny, nx = self.heights.shape
        return (self.x0, self.x0 + (nx - 1) * self.cellsize,
                self.y0, self.y0 + (ny - 1) * self.cellsize)

    def interp_extent(self) -> Rect:
        ny, nx = self.heights.shape
        cs = self.cellsize
        return (self.x0 + cs, self.x0 + (nx - 2) * cs,
                self.y0 + cs, self.y0 + (ny - 2) * cs)


Terrain = PlaneTerrain | GaussianSumTerrain | GridTerrain

_NO_BUMPS = np.zeros((0, 5), dtype=np.float64)
_NO_DEM = np.zeros((2, 2), dtype=np.float64)
_EVAL_CACHE: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()


def effective_bounds(terrain: Terrain) -> Rect:
    """The hard evaluable extent (DEM inset intersected with any domain)."""
    inf = math.inf
    xmin, xmax, ymin, ymax = terrain.domain or (-inf, inf, -inf, inf)
    if isinstance(terrain, GridTerrain):
        ixmin, ixmax, iymin, iymax = terrain.interp_extent()
        xmin, xmax = max(xmin, ixmin), min(xmax, ixmax)
        ymin, ymax = max(ymin, iymin), min(ymax, iymax)
    return (xmin, xmax, ymin, ymax)


def boundary_margin(terrain: Terrain) -> float:
    """Dead-marking margin: one cellsize for DEMs, 1e-3 of extent otherwise."""
    if isinstance(terrain, GridTerrain):
        return terrain.cellsize
    xmin, xmax, ymin, ymax = effective_bounds(terrain)
    extent = max(xmax - xmin, ymax - ymin)
    return 1e-3 * extent if math.isfinite(extent) else 0.0


def terrain_eval(terrain: Terrain):
    """The engine-side evaluator for this terrain (cached per instance)."""
    cached = _EVAL_CACHE.get(terrain)
    if cached is not None:
        return cached
    bounds = effective_bounds(terrain)
    if isinstance(terrain, PlaneTerrain):
        ev = engine.TerrainEval(engine.TERRAIN_PLANE, terrain.gx, terrain.gy,
                                _NO_BUMPS, _NO_DEM, 0.0, 0.0, 1.0, bounds)
    elif isinstance(terrain, GaussianSumTerrain):
        rows = np.zeros((len(terrain.bumps), 5), dtype=np.float64)
        for k, b in enumerate(terrain.bumps):
            qx, qy = b.decay()
            rows[k] = (b.amplitude, b.center[0], b.center[1], qx, qy)
        ev = engine.TerrainEval(engine.TERRAIN_GAUSSIANS, 0.0, 0.0,
                                rows, _NO_DEM, 0.0, 0.0, 1.0, bounds)
    elif isinstance(terrain, GridTerrain):
        h = np.ascontiguousarray(terrain.heights, dtype=np.float64)
        ev = engine.TerrainEval(engine.TERRAIN_DEM, 0.0, 0.0, _NO_BUMPS,
                                h, terrain.x0, terrain.y0, terrain.cellsize, bounds)
    else:
        raise TypeError(f"unknown terrain kind {type(terrain).__name__}")
    _EVAL_CACHE[terrain] = ev
    return ev


def elevation(terrain: Terrain, p: AerialPoint) -> float:
    return terrain_eval(terrain).elevation(p[0], p[1])


def gradient(terrain: Terrain, p: AerialPoint) -> tuple[float, float]:
    return terrain_eval(terrain).gradient(p[0], p[1])


def slant_angle(terrain: Terrain, p: AerialPoint) -> float:
    """Inclination sigma of the tangent plane, in [0, pi/2)."""
    z1, z2 = gradient(terrain, p)
    return math.acos(1.0 / math.sqrt(1.0 + z1 * z1 + z2 * z2))


def slope_angle(terrain: Terrain, p: AerialPoint, theta: float) -> float:
    """Vertical slope angle delta(p, theta) in (0, pi)."""
    z1, z2 = gradient(terrain, p)
    beta = math.cos(theta) * z1 + math.sin(theta) * z2
    return math.acos(beta / math.sqrt(1.0 + beta * beta))


def surface_unit_dir(terrain: Terrain, p: AerialPoint, theta: float) -> SurfaceVector:
    """Euclidean-unit surface vector over the aerial direction theta."""
    z1, z2 = gradient(terrain, p)
    c, s = math.cos(theta), math.sin(theta)
    beta = c * z1 + s * z2
    n = math.sqrt(1.0 + beta * beta)
    return (c / n, s / n, beta / n)


def surface_image(terrain: Terrain, p: AerialPoint, v: tuple[float, float]) -> SurfaceVector:
    """dz-hat(v): the tangent vector on the surface above v."""
    z1, z2 = gradient(terrain, p)
    return (v[0], v[1], v[0] * z1 + v[1] * z2)


_DEM_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize")


def load_dem(path: str | Path, domain: Rect | None = None) -> GridTerrain:
    """Read the text DEM format (header then north-up rows of heights)."""
    path = Path(path)
    tokens: list[str] = []
    header: dict[str, float] = {}
    with open(path, encoding="ascii") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            key = parts[0].lower()
            if key == "nodata_value":
                raise ConfigError(f"{path}: NODATA_value is not supported")
            if key in _DEM_HEADER_KEYS and len(parts) == 2 and not tokens:
                header[key] = float(parts[1])
            else:
                tokens.extend(parts)
    missing = [k for k in _DEM_HEADER_KEYS if k not in header]
    if missing:
        raise ConfigError(f"{path}: missing DEM header keys: {', '.join(missing)}")
    ncols = int(header["ncols"])
    nrows = int(header["nrows"])
    if ncols < 4 or nrows < 4:
        raise ConfigError(f"{path}: DEM must be at least 4x4 for bicubic interpolation")
    if len(tokens) != ncols * nrows:
        raise ConfigError(
            f"{path}: expected {ncols * nrows} height values, found {len(tokens)}"
        )
    data = np.array([float(v) for v in tokens], dtype=np.float64).reshape(nrows, ncols)
    return GridTerrain(
        heights=data[::-1].copy(),  # file is north-up; store south-up
        x0=header["xllcorner"],
        y0=header["yllcorner"],
        cellsize=header["cellsize"],
        domain=domain,
    )


def save_dem(path: str | Path, values_south_up: np.ndarray,
             x0: float, y0: float, cellsize: float) -> None:
    """Write a grid in the same text DEM format (rows north-up)."""
    ny, nx = values_south_up.shape
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"ncols {nx}\n")
        fh.write(f"nrows {ny}\n")
        fh.write(f"xllcorner {x0:.9g}\n")
        fh.write(f"yllcorner {y0:.9g}\n")
        fh.write(f"cellsize {cellsize:.9g}\n")
        for row in values_south_up[::-1]:
            fh.write(" ".join(f"{v:.9g}" for v in row) + "\n")


def sample_grid_terrain(terrain: Terrain, x0: float, y0: float, cellsize: float,
                        nx: int, ny: int, domain: Rect | None = None) -> GridTerrain:
    """Sample an analytic terrain onto a DEM grid (testing and fixtures)."""
    xs = x0 + cellsize * np.arange(nx)
    ys = y0 + cellsize * np.arange(ny)
    ev = terrain_eval(terrain)
    h = np.empty((ny, nx), dtype=np.float64)
    for iy, yy in enumerate(ys):
        for ix, xx in enumerate(xs):
            h[iy, ix] = ev.elevation(xx, yy)
    return GridTerrain(heights=h, x0=x0, y0=y0, cellsize=cellsize, domain=domain)
