"""Brute-force first-arrival validation on a dense grid.

Dijkstra over an anisotropic co-prime offset stencil, with edge costs
F_mid(q - p): by one-homogeneity F(v) is exactly the time needed to
traverse the displacement v under frozen conditions, so shortest paths in
this graph approximate first arrival times (up to the angular resolution
of the stencil).  Time-dependent metrics are rejected: label-setting
assumes edge costs do not improve later.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from firefront.errors import EmptyFrontError, OutOfDomainError, TimeDependentMetricError
from firefront.front import FireMap, Ignition, IgnitionCircle, IgnitionPoint, \
    _point_in_polygon, sample_ignition
from firefront.metric import FireMetric
from firefront.terrain import Rect, save_dem


@dataclass(frozen=True, eq=False)
class ArrivalGrid:
    x0: float
    y0: float
    cellsize: float
    times: np.ndarray  # (ny, nx), +inf where unreached

    @property
    def shape(self) -> tuple[int, int]:
        return self.times.shape

    def node_x(self) -> np.ndarray:
        return self.x0 + self.cellsize * np.arange(self.times.shape[1])

    def node_y(self) -> np.ndarray:
        return self.y0 + self.cellsize * np.arange(self.times.shape[0])

    def sample(self, x: float, y: float) -> float:
        """Bilinear interpolation of the arrival time."""
        ny, nx = self.times.shape
        fx = (x - self.x0) / self.cellsize
        fy = (y - self.y0) / self.cellsize
        if fx < 0 or fy < 0 or fx > nx - 1 or fy > ny - 1:
            raise OutOfDomainError(f"({x:g}, {y:g}) outside the arrival grid")
        ix = min(int(fx), nx - 2)
        iy = min(int(fy), ny - 2)
        u, v = fx - ix, fy - iy
        t = self.times
        return float((1 - u) * (1 - v) * t[iy, ix] + u * (1 - v) * t[iy, ix + 1]
                     + (1 - u) * v * t[iy + 1, ix] + u * v * t[iy + 1, ix + 1])

    def save(self, path) -> None:
        """Write in the text DEM format (same header; inf marks unreached)."""
        save_dem(path, self.times, self.x0, self.y0, self.cellsize)


def stencil_offsets(radius: int) -> np.ndarray:
    """Co-prime integer offsets within the Chebyshev radius (16 or 32 moves)."""
    if radius not in (2, 3):
        raise ValueError(f"stencil radius must be 2 or 3, got {radius}")
    offs = []
    for dx in range(-radius, radius + 1):
        for dy in range(-radius, radius + 1):
            if (dx, dy) != (0, 0) and math.gcd(abs(dx), abs(dy)) == 1:
                offs.append((dx, dy))
    return np.array(offs, dtype=np.float64)


def check_time_independent(metric: FireMetric, t_samples: tuple[float, ...],
                           bounds: Rect, n_probe: int = 5) -> None:
    """Reject metrics whose fields change over the sampled times."""
    core = metric.core()
    xmin, xmax, ymin, ymax = bounds
    xs = np.linspace(xmin, xmax, n_probe)
    ys = np.linspace(ymin, ymax, n_probe)
    t0 = t_samples[0]
    for yy in ys:
        for xx in xs:
            ref = core.point_data(t0, xx, yy)
            for t in t_samples[1:]:
                cur = core.point_data(t, xx, yy)
                for r, c in zip(ref, cur):
                    if abs(r - c) > 1e-12 * max(1.0, abs(r)):
                        raise TimeDependentMetricError(
                            f"fields differ between t={t0:g} and t={t:g} "
                            f"at p=({xx:.4g}, {yy:.4g})"
                        )


def grid_arrival(metric: FireMetric, ignition: Ignition, bounds: Rect,
                 nx: int, ny: int, radius: int = 3,
                 t_samples: tuple[float, ...] = (0.0, 1.0, 2.0)) -> ArrivalGrid:
    """Label-setting first-arrival times from the ignition set."""
    check_time_independent(metric, t_samples, bounds)
    xmin, xmax, ymin, ymax = bounds
    cs = min((xmax - xmin) / (nx - 1), (ymax - ymin) / (ny - 1))
    x0, y0 = xmin, ymin
    core = metric.core()

    offs = stencil_offsets(radius)
    world = np.ascontiguousarray(offs * cs)
    noffs = len(offs)
    costs = np.empty(noffs, dtype=np.float64)

    dist = np.full((ny, nx), np.inf, dtype=np.float64)
    settled = np.zeros((ny, nx), dtype=bool)
    heap: list[tuple[float, int]] = []

    def push(iy: int, ix: int, d: float):
        if d < dist[iy, ix]:
            dist[iy, ix] = d
            heapq.heappush(heap, (d, iy * nx + ix))

    # seed the ignition set
    if isinstance(ignition, IgnitionPoint):
        cx, cy = ignition.center
        ix = round((cx - x0) / cs)
        iy = round((cy - y0) / cs)
        if not (0 <= ix < nx and 0 <= iy < ny):
            raise OutOfDomainError("ignition point outside the oracle grid")
        push(iy, ix, 0.0)
    else:
        if isinstance(ignition, IgnitionCircle):
            cx, cy = ignition.center
            r = ignition.radius
            seeded = 0
            for iy in range(ny):
                for ix in range(nx):
                    if (x0 + ix * cs - cx) ** 2 + (y0 + iy * cs - cy) ** 2 <= r * r:
                        push(iy, ix, 0.0)
                        seeded += 1
        else:
            _, poly, _ = sample_ignition(ignition, 256)
            seeded = 0
            for iy in range(ny):
                for ix in range(nx):
                    if _point_in_polygon(x0 + ix * cs, y0 + iy * cs, poly, 1e-12):
                        push(iy, ix, 0.0)
                        seeded += 1
        if seeded == 0:
            # curve thinner than the grid: fall back to its sampled vertices
            _, poly, _ = sample_ignition(ignition, 256)
            for px, py in poly:
                ix = round((px - x0) / cs)
                iy = round((py - y0) / cs)
                if not (0 <= ix < nx and 0 <= iy < ny):
                    raise OutOfDomainError("ignition curve outside the oracle grid")
                push(iy, ix, 0.0)

    # near the grid boundary use per-node filtered stencils so that edge
    # midpoints stay inside the evaluable extent
    ioffs = offs.astype(np.int64)
    t0 = t_samples[0]
    while heap:
        d, node = heapq.heappop(heap)
        iy, ix = divmod(node, nx)
        if settled[iy, ix]:
            continue
        settled[iy, ix] = True
        x = x0 + ix * cs
        y = y0 + iy * cs
        if radius <= ix < nx - radius and radius <= iy < ny - radius:
            core.edge_costs(t0, x, y, world, costs)
            for k in range(noffs):
                jx = ix + ioffs[k, 0]
                jy = iy + ioffs[k, 1]
                if not settled[jy, jx]:
                    push(jy, jx, d + costs[k])
        else:
            valid = [k for k in range(noffs)
                     if 0 <= ix + ioffs[k, 0] < nx and 0 <= iy + ioffs[k, 1] < ny]
            vworld = np.ascontiguousarray(world[valid])
            vcosts = np.empty(len(valid), dtype=np.float64)
            core.edge_costs(t0, x, y, vworld, vcosts)
            for m, k in enumerate(valid):
                jx = ix + ioffs[k, 0]
                jy = iy + ioffs[k, 1]
                if not settled[jy, jx]:
                    push(jy, jx, d + vcosts[m])

    return ArrivalGrid(x0=x0, y0=y0, cellsize=cs, times=dist)


@dataclass(frozen=True)
class FrontDeviation:
    t: float
    n_vertices: int
    median: float
    p95: float
    max: float

    @property
    def ok(self) -> bool:
        return self.median < 0.5  # flags nonsense comparisons, not accuracy

    def __str__(self) -> str:
        return (f"t={self.t:g}: n={self.n_vertices} median={self.median:.3%} "
                f"p95={self.p95:.3%} max={self.max:.3%}")


def compare_front(arrival: ArrivalGrid, firemap: FireMap, t: float) -> FrontDeviation:
    """Relative deviation |arrival(p) - t| / t over the live front vertices."""
    snap = firemap.front_at(t)
    if len(snap.ids) == 0:
        raise EmptyFrontError(f"no live front at t={t:g}")
    devs = []
    for x, y in snap.coords:
        a = arrival.sample(x, y)
        devs.append(abs(a - t) / t if t > 0 else abs(a))
    devs = np.sort(np.array(devs))
    return FrontDeviation(
        t=t,
        n_vertices=len(devs),
        median=float(np.median(devs)),
        p95=float(devs[min(len(devs) - 1, int(math.ceil(0.95 * len(devs))) - 1)]),
        max=float(devs[-1]),
    )
