"""Firemap orchestration: seeding, lockstep stepping, fronts, cut pruning.

Each trajectory is integrated independently; at every output time a
single-threaded barrier assembles the front polyline, detects cut points
(crossings between trajectories, entries into the burned region, front
self-intersection loops, focal collapse of neighbors) and retires the
affected trajectories.  Cut trajectories never influence the others'
states, only the bookkeeping.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from firefront.backend import engine
from firefront.errors import (
    DegenerateCurveError,
    EmptyFrontError,
    NonConvexMetricError,
)
from firefront.geodesic import GeodesicState, ignition_fan, initial_velocity
from firefront.metric import FireMetric
from firefront.terrain import AerialPoint, boundary_margin, effective_bounds

LIVE = "live"
CUT = "cut"
LEFT_DOMAIN = "left-domain"

_EXCLUDED = 99  # engine status for trajectories removed from the computation


@dataclass(frozen=True)
class IgnitionPoint:
    center: AerialPoint


@dataclass(frozen=True)
class IgnitionCircle:
    center: AerialPoint
    radius: float


@dataclass(frozen=True)
class IgnitionEllipse:
    center: AerialPoint
    semi_axes: tuple[float, float]
    rotation: float = 0.0


@dataclass(frozen=True, eq=False)
class IgnitionPolyline:
    points: np.ndarray  # (m, 2), closed (last edge wraps to the first point)


Ignition = IgnitionPoint | IgnitionCircle | IgnitionEllipse | IgnitionPolyline


@dataclass
class Trajectory:
    id: int
    seed_param: float
    times: list[float] = field(default_factory=list)
    states: list[tuple[float, float, float, float]] = field(default_factory=list)
    status: str = LIVE
    t_cut: float | None = None
    cut_kind: str | None = None
    t_exit: float | None = None

    @property
    def terminal_time(self) -> float | None:
        if self.status == CUT:
            return self.t_cut
        if self.status == LEFT_DOMAIN:
            return self.t_exit
        return None


@dataclass(frozen=True)
class CutRecord:
    t_cut: float
    point: AerialPoint
    kind: str  # "crossing" | "focal"
    ids: tuple[int, ...]  # ids[0] is the trajectory being cut


@dataclass(frozen=True)
class FrontSnapshot:
    index: int
    t: float
    ids: tuple[int, ...]          # live trajectories, seed order
    coords: np.ndarray           # (m, 2)
    closed: bool
    bridged: tuple[bool, ...]    # per edge; True where pruned gaps were bridged


@dataclass
class FireMap:
    trajectories: list[Trajectory]
    output_times: list[float]
    fronts: list[FrontSnapshot]
    cut_records: list[CutRecord]
    burned: list[np.ndarray]
    closed: bool
    n_seeds: int
    nonconvex: bool = False

    def front_at(self, t: float) -> FrontSnapshot:
        for snap in self.fronts:
            if abs(snap.t - t) <= 1e-9 * max(1.0, abs(t)):
                if len(snap.ids) == 0:
                    raise EmptyFrontError(f"no live trajectories at t={t:g}")
                return snap
        raise EmptyFrontError(f"t={t:g} is not a stored output time")

    def front_area(self, snap: FrontSnapshot) -> float:
        if len(snap.ids) < 3:
            return 0.0
        return abs(_signed_area(snap.coords))

    def trajectory(self, tid: int) -> Trajectory:
        for tr in self.trajectories:
            if tr.id == tid:
                return tr
        raise KeyError(tid)


# ---------------------------------------------------------------------------
# geometry predicates (snapping policy: values below 1e-12*scale are zero)


def _signed_area(pts: np.ndarray) -> float:
    x = pts[:, 0]
    y = pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _seg_intersection(p0, p1, q0, q1, snap: float):
    """Proper intersection of open segments; touching endpoints don't count.

    Returns (ua, ub, point) with ua, ub the parameters along p and q.
    """
    rx, ry = p1[0] - p0[0], p1[1] - p0[1]
    sx, sy = q1[0] - q0[0], q1[1] - q0[1]
    denom = rx * sy - ry * sx
    scale = max(abs(rx), abs(ry), abs(sx), abs(sy), 1.0)
    if abs(denom) <= snap * scale * scale:
        return None
    qpx, qpy = q0[0] - p0[0], q0[1] - p0[1]
    ua = (qpx * sy - qpy * sx) / denom
    ub = (qpx * ry - qpy * rx) / denom
    lo = snap
    if ua <= lo or ua >= 1.0 - lo or ub <= lo or ub >= 1.0 - lo:
        return None
    return ua, ub, (p0[0] + ua * rx, p0[1] + ua * ry)


def _point_in_polygon(px: float, py: float, poly: np.ndarray, snap: float) -> bool:
    """Strictly inside (boundary points within the snap distance count as out)."""
    m = len(poly)
    if m < 3:
        return False
    inside = False
    j = m - 1
    for i in range(m):
        xi, yi = poly[i, 0], poly[i, 1]
        xj, yj = poly[j, 0], poly[j, 1]
        # distance to edge (i, j) below snap -> on boundary
        ex, ey = xj - xi, yj - yi
        ee = ex * ex + ey * ey
        if ee > 0.0:
            u = ((px - xi) * ex + (py - yi) * ey) / ee
            u = 0.0 if u < 0.0 else (1.0 if u > 1.0 else u)
            dx, dy = px - (xi + u * ex), py - (yi + u * ey)
            if dx * dx + dy * dy <= snap * snap:
                return False
        elif (px - xi) ** 2 + (py - yi) ** 2 <= snap * snap:
            return False
        if (yi > py) != (yj > py):
            xcross = xi + (py - yi) * (xj - xi) / (yj - yi)
            if px < xcross:
                inside = not inside
        j = i
    return inside


# ---------------------------------------------------------------------------
# seeding


def sample_ignition(ignition: Ignition, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(seed params, positions (n,2), tangents (n,2)) for a closed curve.

    The curve is re-oriented counterclockwise (with a warning) if needed.
    """
    if isinstance(ignition, IgnitionCircle):
        s = 2.0 * math.pi * np.arange(n) / n
        cx, cy = ignition.center
        r = ignition.radius
        pos = np.column_stack((cx + r * np.cos(s), cy + r * np.sin(s)))
        tan = np.column_stack((-r * np.sin(s), r * np.cos(s)))
        return s, pos, tan
    if isinstance(ignition, IgnitionEllipse):
        s = 2.0 * math.pi * np.arange(n) / n
        rx, ry = ignition.semi_axes
        cr, sr = math.cos(ignition.rotation), math.sin(ignition.rotation)
        ex, ey = rx * np.cos(s), ry * np.sin(s)
        dx, dy = -rx * np.sin(s), ry * np.cos(s)
        cx, cy = ignition.center
        pos = np.column_stack((cx + cr * ex - sr * ey, cy + sr * ex + cr * ey))
        tan = np.column_stack((cr * dx - sr * dy, sr * dx + cr * dy))
        return s, pos, tan
    if isinstance(ignition, IgnitionPolyline):
        pts = np.asarray(ignition.points, dtype=np.float64)
        if len(pts) >= 2 and np.allclose(pts[0], pts[-1]):
            pts = pts[:-1]
        if len(pts) < 3:
            raise DegenerateCurveError("ignition polyline needs at least 3 distinct points")
        seg = np.roll(pts, -1, axis=0) - pts
        seglen = np.hypot(seg[:, 0], seg[:, 1])
        scale = max(1.0, float(np.abs(pts).max()))
        if (seglen <= 1e-12 * scale).any():
            raise DegenerateCurveError("ignition polyline has repeated points")
        if _signed_area(pts) < 0:
            warnings.warn("ignition curve was clockwise; reversed to counterclockwise")
            pts = pts[::-1].copy()
            seg = np.roll(pts, -1, axis=0) - pts
            seglen = np.hypot(seg[:, 0], seg[:, 1])
        cum = np.concatenate(([0.0], np.cumsum(seglen)))
        total = cum[-1]
        s = total * np.arange(n) / n
        pos = np.empty((n, 2))
        tan = np.empty((n, 2))
        j = 0
        for i, si in enumerate(s):
            while j + 1 < len(cum) and cum[j + 1] <= si:
                j += 1
            u = (si - cum[j]) / seglen[j]
            pos[i] = pts[j] + u * seg[j]
            tan[i] = seg[j] / seglen[j]
        return s, pos, tan
    raise TypeError(f"not a curve ignition: {ignition!r}")


def seed(metric: FireMetric, ignition: Ignition, n: int,
         t0: float = 0.0) -> tuple[np.ndarray, list[GeodesicState], bool, np.ndarray | None]:
    """Initial trajectory states: (seed params, states, closed, S0 polygon)."""
    if isinstance(ignition, IgnitionPoint):
        fan = ignition_fan(metric, t0, ignition.center, n)
        params = 2.0 * math.pi * np.arange(n) / n
        states = [GeodesicState(t0, ignition.center[0], ignition.center[1], v[0], v[1])
                  for v in fan]
        return params, states, True, None
    params, pos, tan = sample_ignition(ignition, n)
    if _signed_area(pos) <= 0:
        # analytic curves above are CCW by construction; polylines were fixed
        raise DegenerateCurveError("ignition curve encloses no area")
    states = []
    for k in range(n):
        try:
            v = initial_velocity(metric, t0, (pos[k, 0], pos[k, 1]),
                                 (tan[k, 0], tan[k, 1]), orientation=1.0)
        except Exception as exc:
            raise NonConvexMetricError(
                f"no outward F-orthogonal velocity at seed {k} "
                f"(s={params[k]:.6g}): {exc}"
            ) from exc
        states.append(GeodesicState(t0, pos[k, 0], pos[k, 1], v[0], v[1]))
    return params, states, True, pos.copy()


# ---------------------------------------------------------------------------
# propagation


def audit_convexity(metric: FireMetric, t_end: float, n_space: int = 9,
                    n_dirs: int = 64) -> tuple[bool, tuple | None]:
    """Scan a coarse (t, p) lattice; returns (ok, first failure (t, p, report))."""
    xmin, xmax, ymin, ymax = effective_bounds(metric.terrain)
    margin = boundary_margin(metric.terrain)
    xs = np.linspace(xmin + margin, xmax - margin, n_space)
    ys = np.linspace(ymin + margin, ymax - margin, n_space)
    for t in (0.0, 0.5 * t_end, t_end):
        for yy in ys:
            for xx in xs:
                report = metric.convexity_scan_numeric(t, (xx, yy), n_dirs)
                if not report.passed:
                    return False, (t, (xx, yy), report)
    return True, None


def propagate(metric: FireMetric, ignition: Ignition, *, n: int, dt: float,
              t_end: float, output_interval: float, renormalize: bool = True,
              threads: int = 1, focal_epsilon_factor: float = 1e-3,
              allow_nonconvex: bool = False, convexity_audit: bool = True,
              exclude_ids: frozenset[int] | set[int] = frozenset()) -> FireMap:
    """Integrate the firemap with lockstep RK4 and per-output-time pruning."""
    xmin, xmax, ymin, ymax = effective_bounds(metric.terrain)
    if not all(map(math.isfinite, (xmin, xmax, ymin, ymax))):
        raise ValueError("propagation requires a bounded domain")
    margin = boundary_margin(metric.terrain)
    inset = (xmin + margin, xmax - margin, ymin + margin, ymax - margin)
    snap = 1e-12 * max(1.0, xmax - xmin, ymax - ymin)

    nonconvex = False
    if convexity_audit:
        ok, failure = audit_convexity(metric, t_end)
        if not ok:
            t_bad, p_bad, report = failure
            msg = (f"metric is not strongly convex at t={t_bad:g}, "
                   f"p=({p_bad[0]:.4g}, {p_bad[1]:.4g}), "
                   f"theta={report.theta_worst:.4g} "
                   f"(min eigenvalue {report.min_eigenvalue:.3e})")
            if not allow_nonconvex:
                raise NonConvexMetricError(
                    msg + "; geodesic fronts would not be time-minimizing "
                    "(pass allow_nonconvex to force)"
                )
            warnings.warn(msg + "; continuing, fronts may be non-minimizing")
            nonconvex = True

    params, states0, closed, s0_poly = seed(metric, ignition, n)

    core = metric.core()
    states = np.array([[s.x, s.y, s.vx, s.vy] for s in states0], dtype=np.float64)
    status = np.zeros(n, dtype=np.int32)
    death_t = np.full(n, np.nan, dtype=np.float64)
    for i in exclude_ids:
        status[i] = _EXCLUDED

    trajectories = [Trajectory(id=i, seed_param=float(params[i]))
                    for i in range(n) if i not in exclude_ids]
    by_id = {tr.id: tr for tr in trajectories}

    nsub = max(1, round(output_interval / dt))
    n_out = int(math.floor(t_end / output_interval + 1e-9))
    output_times = [k * output_interval for k in range(n_out + 1)]

    cut_records: list[CutRecord] = []
    burned: list[np.ndarray] = []
    if s0_poly is not None:
        burned.append(s0_poly)

    def snapshot(k: int, t: float, ids_then_live: list[int]):
        for i in ids_then_live:
            tr = by_id[i]
            tr.times.append(t)
            tr.states.append(tuple(states[i]))

    def live_ids() -> list[int]:
        return [i for i in range(n) if status[i] == engine.STATUS_LIVE]

    fronts: list[FrontSnapshot] = []

    def make_front(k: int, t: float) -> FrontSnapshot:
        ids = live_ids()
        coords = states[ids, :2].copy() if ids else np.zeros((0, 2))
        bridged = []
        m = len(ids)
        edge_count = m if closed else m - 1
        present = sorted(by_id.keys())
        ring = {tid: pos for pos, tid in enumerate(present)}
        for e in range(max(0, edge_count)):
            a, b = ids[e], ids[(e + 1) % m]
            bridged.append((ring[b] - ring[a]) % len(present) != 1)
        if m == 1:
            warnings.warn(f"front at t={t:g} degenerated to a single trajectory")
        return FrontSnapshot(index=k, t=t, ids=tuple(ids), coords=coords,
                             closed=closed, bridged=tuple(bridged))

    snapshot(0, 0.0, live_ids())
    fronts.append(make_front(0, 0.0))

    prev_pos = states[:, :2].copy()
    prev_gap: dict[tuple[int, int], float] = {}

    def cut(i: int, t_cut: float, kind: str, ids: tuple[int, ...], point) -> None:
        status[i] = engine.STATUS_CUT
        tr = by_id[i]
        tr.status = CUT
        tr.t_cut = t_cut
        tr.cut_kind = kind
        cut_records.append(CutRecord(t_cut=t_cut, point=(point[0], point[1]),
                                     kind=kind, ids=ids))

    def nearest_history_id(i: int, px: float, py: float) -> int:
        best = (math.inf, -1)
        for tr in trajectories:
            if tr.id == i:
                continue
            for (sx, sy, _, _) in tr.states:
                d = (sx - px) ** 2 + (sy - py) ** 2
                if d < best[0]:
                    best = (d, tr.id)
        return best[1]

    executor = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for k in range(1, n_out + 1):
            t_prev = output_times[k - 1]
            t_now = output_times[k]
            if executor is None:
                core.advance(states, status, death_t, t_prev, dt, nsub,
                             renormalize, *inset, nonconvex)
            else:
                chunk = (n + threads - 1) // threads
                futures = [
                    executor.submit(core.advance, states[a:a + chunk],
                                    status[a:a + chunk], death_t[a:a + chunk],
                                    t_prev, dt, nsub, renormalize, *inset,
                                    nonconvex)
                    for a in range(0, n, chunk)
                ]
                for f in futures:
                    f.result()

            # mark the trajectories that left the domain during this interval
            for i in range(n):
                if status[i] == engine.STATUS_LEFT_DOMAIN and i in by_id \
                        and by_id[i].status == LIVE:
                    tr = by_id[i]
                    tr.status = LEFT_DOMAIN
                    tr.t_exit = float(death_t[i])

            L = live_ids()

            # --- focal collapse: adjacent spacing below epsilon and shrinking
            if len(L) >= 3:
                m = len(L)
                per = 0.0
                gaps = {}
                edge_count = m if closed else m - 1
                for e in range(edge_count):
                    i, j = L[e], L[(e + 1) % m]
                    d = math.hypot(states[j, 0] - states[i, 0],
                                   states[j, 1] - states[i, 1])
                    gaps[(i, j)] = d
                    per += d
                focal_eps = focal_epsilon_factor * per / m
                collapsing = [e for e in range(edge_count)
                              if gaps[(L[e], L[(e + 1) % m])] < focal_eps
                              and gaps[(L[e], L[(e + 1) % m])]
                              < prev_gap.get((L[e], L[(e + 1) % m]), math.inf)]
                if collapsing:
                    runs: list[list[int]] = [[collapsing[0]]]
                    for e in collapsing[1:]:
                        if e == runs[-1][-1] + 1:
                            runs[-1].append(e)
                        else:
                            runs.append([e])
                    if closed and len(runs) > 1 and runs[0][0] == 0 \
                            and runs[-1][-1] == edge_count - 1:
                        runs[0] = runs.pop() + runs[0]
                    for run in runs:
                        members = [L[run[0]]] + [L[(e + 1) % m] for e in run]
                        victims = members[1:-1] if len(members) > 2 else [members[-1]]
                        keepers = [members[0], members[-1]]
                        for v in victims:
                            if status[v] != engine.STATUS_LIVE:
                                continue
                            cut(v, t_now, "focal",
                                (v, keepers[0], keepers[-1]),
                                (states[v, 0], states[v, 1]))
                prev_gap = gaps
                L = live_ids()

            # --- crossings between trajectory displacement segments
            events = []
            m = len(L)
            for a in range(m):
                for b in range(a + 1, m):
                    if closed and (b - a == 1 or (a == 0 and b == m - 1)):
                        continue
                    if not closed and b - a == 1:
                        continue
                    i, j = L[a], L[b]
                    hit = _seg_intersection(prev_pos[i], states[i, :2],
                                            prev_pos[j], states[j, :2], snap)
                    if hit is None:
                        continue
                    ua, ub, point = hit
                    ti = t_prev + ua * output_interval
                    tj = t_prev + ub * output_interval
                    events.append((min(ti, tj), i, j, ti, tj, point))
            events.sort(key=lambda e: (e[0], e[1], e[2]))

            def reached(tid: int, t_arr: float) -> bool:
                # a trajectory claims the crossing point only if it was still
                # on the front when it got there
                term = by_id[tid].terminal_time
                return term is None or term >= t_arr - 1e-12

            for _, i, j, ti, tj, point in events:
                i_live = status[i] == engine.STATUS_LIVE
                j_live = status[j] == engine.STATUS_LIVE
                if not (i_live or j_live):
                    continue
                sym_tol = 1e-6 * max(ti, tj, dt)
                if abs(ti - tj) <= sym_tol:
                    if i_live and reached(j, tj):
                        cut(i, ti, "crossing", (i, j), point)
                    if j_live and reached(i, ti):
                        cut(j, tj, "crossing", (j, i), point)
                elif ti < tj:
                    if j_live and reached(i, ti):
                        cut(j, tj, "crossing", (j, i), point)
                else:
                    if i_live and reached(j, tj):
                        cut(i, ti, "crossing", (i, j), point)

            # --- entries into the burned region
            for i in live_ids():
                px, py = states[i, 0], states[i, 1]
                for poly in burned:
                    if _point_in_polygon(px, py, poly, snap):
                        partner = nearest_history_id(i, px, py)
                        ids = (i, partner) if partner >= 0 else (i,)
                        cut(i, t_now, "crossing", ids, (px, py))
                        break

            # --- front self-intersection: excise the enclosed loop
            for _ in range(n):
                L = live_ids()
                m = len(L)
                if m < 4:
                    break
                coords = states[L, :2]
                edge_count = m if closed else m - 1
                best = None
                for a in range(edge_count):
                    for b in range(a + 1, edge_count):
                        if b == a + 1 or (closed and a == 0 and b == edge_count - 1):
                            continue
                        hit = _seg_intersection(coords[a], coords[(a + 1) % m],
                                                coords[b], coords[(b + 1) % m], snap)
                        if hit is None:
                            continue
                        loop_len = b - a
                        if loop_len > m - loop_len:
                            loop_len = m - loop_len
                        cand = (loop_len, a, b, hit[2])
                        if best is None or cand < best:
                            best = cand
                if best is None:
                    break
                _, a, b, point = best
                if b - a <= m - (b - a):
                    loop = [L[idx] for idx in range(a + 1, b + 1)]
                    keep = (L[a], L[(b + 1) % m])
                else:
                    loop = [L[idx % m] for idx in range(b + 1, a + 1 + m)]
                    keep = (L[b], L[(a + 1) % m])
                for v in loop:
                    cut(v, t_now, "crossing", (v, keep[0], keep[1]), point)

            L = live_ids()
            # record rows: survivors plus the trajectories retired this interval
            retired = [tr.id for tr in trajectories
                       if tr.status != LIVE and (not tr.times or tr.times[-1] < t_now)
                       and (tr.terminal_time is None or tr.terminal_time <= t_now + 1e-12)]
            snapshot(k, t_now, sorted(L + retired))
            fronts.append(make_front(k, t_now))
            front_poly = fronts[-1].coords
            if len(front_poly) >= 3:
                burned.append(front_poly.copy())
            prev_pos = states[:, :2].copy()
            if not L:
                break
    finally:
        if executor is not None:
            executor.shutdown(wait=False)

    return FireMap(trajectories=trajectories, output_times=output_times,
                   fronts=fronts, cut_records=cut_records, burned=burned,
                   closed=closed, n_seeds=n, nonconvex=nonconvex)
