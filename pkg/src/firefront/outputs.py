"""Run outputs: CSV tables and SVG plots (fronts, indicatrix fields)."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from firefront.front import LIVE, FireMap
from firefront.metric import FireMetric
from firefront.terrain import Rect, Terrain, elevation, terrain_eval


def _f(v: float) -> str:
    return f"{v:.9g}"


def write_fronts_csv(path, firemap: FireMap, metric: FireMetric) -> None:
    """Live front members per output time, in seed order."""
    lines = ["t,trajectory_id,seed_param,x,y,z,vx,vy,status"]
    if firemap.nonconvex:
        lines.insert(0, "# warning: non-convex metric, fronts may be non-minimizing")
    terr = metric.terrain
    for snap in firemap.fronts:
        for tid, (x, y) in zip(snap.ids, snap.coords):
            tr = firemap.trajectory(tid)
            idx = tr.times.index(snap.t) if snap.t in tr.times else -1
            vx, vy = (tr.states[idx][2], tr.states[idx][3]) if idx >= 0 else (0.0, 0.0)
            z = elevation(terr, (x, y))
            lines.append(",".join((
                _f(snap.t), str(tid), _f(tr.seed_param), _f(x), _f(y), _f(z),
                _f(vx), _f(vy), LIVE,
            )))
    Path(path).write_text("\n".join(lines) + "\n")


def write_trajectories_csv(path, firemap: FireMap, metric: FireMetric) -> None:
    """Full state history of every computed trajectory at the output times."""
    lines = ["t,trajectory_id,seed_param,x,y,z,vx,vy,status"]
    if firemap.nonconvex:
        lines.insert(0, "# warning: non-convex metric, fronts may be non-minimizing")
    terr = metric.terrain
    for tr in firemap.trajectories:
        last = len(tr.times) - 1
        for i, (t, (x, y, vx, vy)) in enumerate(zip(tr.times, tr.states)):
            status = tr.status if (i == last and tr.status != LIVE) else LIVE
            z = elevation(terr, (x, y))
            lines.append(",".join((
                _f(t), str(tr.id), _f(tr.seed_param), _f(x), _f(y), _f(z),
                _f(vx), _f(vy), status,
            )))
    Path(path).write_text("\n".join(lines) + "\n")


def write_cuts_csv(path, firemap: FireMap) -> None:
    lines = ["t_cut,x,y,kind,ids"]
    for rec in firemap.cut_records:
        lines.append(",".join((
            _f(rec.t_cut), _f(rec.point[0]), _f(rec.point[1]), rec.kind,
            ";".join(str(i) for i in rec.ids),
        )))
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# SVG


class _Canvas:
    """Minimal SVG writer with a world-to-viewport affine transform."""

    def __init__(self, bbox: Rect, size: int = 720, pad: float = 0.05):
        xmin, xmax, ymin, ymax = bbox
        span = max(xmax - xmin, ymax - ymin)
        xmin -= pad * span
        xmax += pad * span
        ymin -= pad * span
        ymax += pad * span
        self.scale = size / max(xmax - xmin, ymax - ymin)
        self.w = (xmax - xmin) * self.scale
        self.h = (ymax - ymin) * self.scale
        self.x0, self.y1 = xmin, ymax
        self.parts: list[str] = []

    def pt(self, x: float, y: float) -> tuple[float, float]:
        return ((x - self.x0) * self.scale, (self.y1 - y) * self.scale)

    def polyline(self, pts, stroke: str, width: float = 1.2, dash: str | None = None,
                 closed: bool = False, fill: str = "none"):
        if len(pts) == 0:
            return
        coords = " ".join(f"{px:.2f},{py:.2f}" for px, py in (self.pt(x, y) for x, y in pts))
        tag = "polygon" if closed else "polyline"
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<{tag} points="{coords}" fill="{fill}" stroke="{stroke}" '
            f'stroke-width="{width:.2f}"{d}/>'
        )

    def segment(self, a, b, stroke: str, width: float = 1.2, dash: str | None = None):
        (x1, y1), (x2, y2) = self.pt(*a), self.pt(*b)
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
            f'stroke="{stroke}" stroke-width="{width:.2f}"{d}/>'
        )

    def circle(self, c, r_px: float, stroke: str, fill: str = "none", width: float = 1.2):
        x, y = self.pt(*c)
        self.parts.append(
            f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{r_px:.2f}" fill="{fill}" '
            f'stroke="{stroke}" stroke-width="{width:.2f}"/>'
        )

    def cross(self, c, r_px: float, stroke: str, width: float = 1.4):
        x, y = self.pt(*c)
        self.parts.append(
            f'<path d="M {x - r_px:.2f} {y - r_px:.2f} L {x + r_px:.2f} {y + r_px:.2f} '
            f'M {x - r_px:.2f} {y + r_px:.2f} L {x + r_px:.2f} {y - r_px:.2f}" '
            f'stroke="{stroke}" stroke-width="{width:.2f}"/>'
        )

    def text(self, c, s: str, size_px: int = 12, fill: str = "#333"):
        x, y = self.pt(*c)
        self.parts.append(f'<text x="{x:.2f}" y="{y:.2f}" font-size="{size_px}" '
                          f'fill="{fill}" font-family="sans-serif">{s}</text>')

    def save(self, path):
        body = "\n".join(self.parts)
        Path(path).write_text(
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.w:.0f}" '
            f'height="{self.h:.0f}" viewBox="0 0 {self.w:.2f} {self.h:.2f}">\n'
            f'<rect width="100%" height="100%" fill="white"/>\n{body}\n</svg>\n'
        )


def _time_color(frac: float) -> str:
    hue = 240.0 * (1.0 - frac)  # blue (early) to red (late)
    return f"hsl({hue:.0f},75%,45%)"


def _contour_segments(terrain: Terrain, bbox: Rect, n_levels: int = 9,
                      res: int = 120) -> list[tuple[tuple, tuple]]:
    """Marching-squares elevation contours (unjoined segments)."""
    xmin, xmax, ymin, ymax = bbox
    ev = terrain_eval(terrain)
    xs = np.linspace(xmin, xmax, res)
    ys = np.linspace(ymin, ymax, res)
    z = np.array([[ev.elevation(x, y) for x in xs] for y in ys])
    zmin, zmax = float(z.min()), float(z.max())
    if zmax - zmin < 1e-12:
        return []
    levels = np.linspace(zmin, zmax, n_levels + 2)[1:-1]
    segs = []
    for lv in levels:
        for iy in range(res - 1):
            for ix in range(res - 1):
                corners = ((z[iy, ix], z[iy, ix + 1]),
                           (z[iy + 1, ix], z[iy + 1, ix + 1]))
                pts = []
                edges = (
                    (xs[ix], ys[iy], xs[ix + 1], ys[iy], corners[0][0], corners[0][1]),
                    (xs[ix + 1], ys[iy], xs[ix + 1], ys[iy + 1], corners[0][1], corners[1][1]),
                    (xs[ix], ys[iy + 1], xs[ix + 1], ys[iy + 1], corners[1][0], corners[1][1]),
                    (xs[ix], ys[iy], xs[ix], ys[iy + 1], corners[0][0], corners[1][0]),
                )
                for x1, y1, x2, y2, z1, z2 in edges:
                    if (z1 < lv) != (z2 < lv):
                        u = (lv - z1) / (z2 - z1)
                        pts.append((x1 + u * (x2 - x1), y1 + u * (y2 - y1)))
                if len(pts) >= 2:
                    segs.append((pts[0], pts[1]))
    return segs


def render_fronts_svg(path, firemap: FireMap, metric: FireMetric,
                      contours: bool = False) -> None:
    """Fronts colored by time, dashed bridging edges, cut-point markers."""
    all_pts = [snap.coords for snap in firemap.fronts if len(snap.coords)]
    if not all_pts:
        raise ValueError("nothing to draw: no fronts recorded")
    pts = np.vstack(all_pts)
    bbox = (float(pts[:, 0].min()), float(pts[:, 0].max()),
            float(pts[:, 1].min()), float(pts[:, 1].max()))
    if bbox[1] - bbox[0] < 1e-9 or bbox[3] - bbox[2] < 1e-9:
        bbox = (bbox[0] - 1, bbox[1] + 1, bbox[2] - 1, bbox[3] + 1)
    cv = _Canvas(bbox)
    if contours:
        for a, b in _contour_segments(metric.terrain, bbox):
            cv.segment(a, b, "#c9bfa8", width=0.8)
    t_max = max(snap.t for snap in firemap.fronts) or 1.0
    marker = 0.006 * max(bbox[1] - bbox[0], bbox[3] - bbox[2]) * cv.scale
    for snap in firemap.fronts:
        m = len(snap.ids)
        if m == 0:
            continue
        color = _time_color(snap.t / t_max)
        if m == 1:
            cv.circle(tuple(snap.coords[0]), 2.0, color)
            continue
        edge_count = m if snap.closed else m - 1
        for e in range(edge_count):
            a = tuple(snap.coords[e])
            b = tuple(snap.coords[(e + 1) % m])
            cv.segment(a, b, color, width=1.3,
                       dash="4,3" if snap.bridged[e] else None)
    for rec in firemap.cut_records:
        if rec.kind == "focal":
            cv.circle(rec.point, max(2.0, marker), "#222")
        else:
            cv.cross(rec.point, max(2.0, marker), "#222")
    cv.save(path)


def render_indicatrices_svg(path, metric: FireMetric, bbox: Rect,
                            nx: int = 5, ny: int = 5, t: float = 0.0,
                            n_poly: int = 256, scale: float = 0.0,
                            overlay: bool = False) -> None:
    """Indicatrix polygons at a lattice of points, scaled for display.

    With overlay=True, also draws the pure wind-ellipse contribution and the
    ellipse+flame-sphere sum (the double-semi-ellipse without the slope
    projection) at each point.
    """
    xmin, xmax, ymin, ymax = bbox
    core = metric.core()
    xs = np.linspace(xmin, xmax, nx) if nx > 1 else np.array([(xmin + xmax) / 2])
    ys = np.linspace(ymin, ymax, ny) if ny > 1 else np.array([(ymin + ymax) / 2])
    thetas = 2.0 * math.pi * np.arange(n_poly) / n_poly

    lattice = []
    rmax = 0.0
    for yy in ys:
        for xx in xs:
            ind = np.array([core.indicatrix_point(t, xx, yy, th) for th in thetas])
            lattice.append(((xx, yy), ind))
            rmax = max(rmax, float(np.hypot(ind[:, 0], ind[:, 1]).max()))
    if scale <= 0.0:
        spacing = min((xs[1] - xs[0]) if nx > 1 else (xmax - xmin) or 1.0,
                      (ys[1] - ys[0]) if ny > 1 else (ymax - ymin) or 1.0)
        scale = 0.42 * spacing / rmax if rmax > 0 else 1.0

    cv = _Canvas((xmin, xmax, ymin, ymax))
    for (xx, yy), ind in lattice:
        pts = np.column_stack((xx + scale * ind[:, 0], yy + scale * ind[:, 1]))
        cv.polyline(pts, "#b03030", width=1.2, closed=True)
        cv.circle((xx, yy), 1.5, "#555", fill="#555")
        if overlay:
            z1, z2, a, h, hp, eps, w1, w2 = core.point_data(t, xx, yy)
            A = a * (1.0 - eps * eps)
            ell, dse = [], []
            for th in thetas:
                c, s = math.cos(th), math.sin(th)
                beta = z1 * c + z2 * s
                al = math.sqrt(1.0 + beta * beta)
                rho = al - eps * (w1 * c + w2 * s)
                f_e = A / rho  # radius of the ellipse term alone
                ell.append((xx + scale * f_e * c, yy + scale * f_e * s))
                al2 = al * al
                f_es = al2 / (A * al2 / rho + h * al)
                dse.append((xx + scale * c / f_es, yy + scale * s / f_es))
            cv.polyline(np.array(ell), "#3060b0", width=0.9, dash="3,3", closed=True)
            cv.polyline(np.array(dse), "#309060", width=0.9, dash="5,3", closed=True)
    cv.save(path)
