import math

import numpy as np
import pytest

from firefront.errors import DegenerateCurveError, EmptyFrontError, NonConvexMetricError
from firefront.front import (
    IgnitionCircle,
    IgnitionEllipse,
    IgnitionPoint,
    IgnitionPolyline,
    propagate,
    sample_ignition,
    seed,
)
from firefront.outputs import write_cuts_csv, write_fronts_csv, write_trajectories_csv
from firefront.terrain import PlaneTerrain
from conftest import BIG, make_metric

P0 = (0.0, 0.0)


def pacman_polyline(big_r=2.0, dent_r=0.8, half_gap=0.3, n_pts=200):
    """CCW circle with a concave dent arc (radius dent_r) near angle 0."""
    a = np.linspace(half_gap, 2 * math.pi - half_gap, n_pts)
    outer = np.column_stack((big_r * np.cos(a), big_r * np.sin(a)))
    ax, ay = big_r * math.cos(half_gap), big_r * math.sin(half_gap)
    cx = ax + math.sqrt(dent_r ** 2 - ay ** 2)
    phi = math.atan2(ay, ax - cx)  # angle of B at the dent center (in (pi/2, pi))
    b = np.linspace(2 * math.pi - phi, phi, 40)  # from A' up through the dent to B
    dent = np.column_stack((cx + dent_r * np.cos(b), dent_r * np.sin(b)))
    return np.vstack((outer, dent[1:-1])), (cx, 0.0), dent_r


class TestSeeding:
    def test_point_fan_radial(self, isotropic_metric):
        params, states, closed, poly = seed(isotropic_metric, IgnitionPoint(P0), 64)
        assert closed and poly is None and len(states) == 64
        for s, p in zip(states, params):
            assert (s.x, s.y) == P0
            assert math.hypot(s.vx, s.vy) == pytest.approx(3.0)
            assert math.atan2(s.vy, s.vx) % (2 * math.pi) == pytest.approx(p, abs=1e-12)

    def test_circle_outward_determinant(self, hill_wind_metric):
        ign = IgnitionCircle((-1.0, 1.0), 0.2)
        params, states, closed, poly = seed(hill_wind_metric, ign, 64)
        assert closed and len(poly) == 64
        _, pos, tan = sample_ignition(ign, 64)
        for k, s in enumerate(states):
            det = s.vx * tan[k, 1] - s.vy * tan[k, 0]
            assert det > 0  # outward for the CCW curve
            f = hill_wind_metric.metric_value(0.0, (s.x, s.y), (s.vx, s.vy))
            assert f == pytest.approx(1.0, abs=1e-9)

    def test_clockwise_polyline_reversed_with_warning(self, isotropic_metric):
        a = np.linspace(0, 2 * math.pi, 32, endpoint=False)
        cw = np.column_stack((np.cos(-a), np.sin(-a)))
        with pytest.warns(UserWarning, match="clockwise"):
            _, states, _, _ = seed(isotropic_metric, IgnitionPolyline(cw), 16)
        for s in states:
            # outward = radial for the isotropic metric
            assert s.x * s.vx + s.y * s.vy > 0

    def test_repeated_points_rejected(self, isotropic_metric):
        pts = np.array([[0, 0], [1, 0], [1, 0], [0, 1]], dtype=float)
        with pytest.raises(DegenerateCurveError):
            seed(isotropic_metric, IgnitionPolyline(pts), 16)

    def test_ellipse_orientation(self, isotropic_metric):
        ign = IgnitionEllipse((0.0, 0.0), (2.0, 1.0), rotation=0.7)
        _, pos, tan = sample_ignition(ign, 48)
        area = 0.5 * float(np.sum(pos[:, 0] * np.roll(pos[:, 1], -1)
                                  - pos[:, 1] * np.roll(pos[:, 0], -1)))
        assert area == pytest.approx(math.pi * 2.0 * 1.0, rel=1e-2)


def run_isotropic_circle(metric, n=64, t_end=1.0, dt=1e-2):
    return propagate(metric, IgnitionPoint(P0), n=n, dt=dt, t_end=t_end,
                     output_interval=t_end, convexity_audit=False)


class TestPropagateBasics:
    def test_isotropic_circle_radius(self, isotropic_metric):
        fm = run_isotropic_circle(isotropic_metric)
        snap = fm.front_at(1.0)
        radii = np.hypot(snap.coords[:, 0], snap.coords[:, 1])
        np.testing.assert_allclose(radii, 3.0, atol=1e-6)

    def test_straight_lines_on_constant_metric(self):
        # slope+wind plane: the metric is constant, trajectories are straight
        for a, h in ((1.0, 3.0), (3.0, 1.0)):
            m = make_metric(PlaneTerrain(0.5, 0.0, domain=BIG), a, h,
                            epsilon=0.8, wind_angle=0.0)
            fm = propagate(m, IgnitionPoint(P0), n=32, dt=1e-2, t_end=6.0,
                           output_interval=1.0, convexity_audit=False)
            for tr in fm.trajectories:
                pts = np.array([(s[0], s[1]) for s in tr.states])
                chord = pts[-1] - pts[0]
                clen = np.linalg.norm(chord)
                rel = pts - pts[0]
                dev = np.abs(chord[0] * rel[:, 1] - chord[1] * rel[:, 0]) / clen
                assert dev.max() <= 1e-7 * clen

    def test_fronts_nested(self, isotropic_metric):
        fm = propagate(isotropic_metric, IgnitionPoint(P0), n=32, dt=1e-2,
                       t_end=3.0, output_interval=0.5, convexity_audit=False)
        areas = [fm.front_area(s) for s in fm.fronts]
        assert all(b >= a - 1e-9 * max(1, a) for a, b in zip(areas, areas[1:]))

    def test_left_domain_marking(self, isotropic_metric):
        # domain is BIG = [-50, 50]; by t=25 even the diagonal rays (which
        # cross the margin last) have radius 75 > 50*sqrt(2)
        fm = propagate(isotropic_metric, IgnitionPoint(P0), n=16, dt=1e-2,
                       t_end=25.0, output_interval=5.0, convexity_audit=False)
        statuses = {tr.status for tr in fm.trajectories}
        assert statuses == {"left-domain"}
        for tr in fm.trajectories:
            assert tr.t_exit is not None and tr.t_exit <= 25.0
            x, y = tr.states[-1][0], tr.states[-1][1]
            assert max(abs(x), abs(y)) <= 50.0


@pytest.fixture(scope="module")
def pacman_toy(isotropic_metric):
    """Concave dent on the isotropic metric: straight speed-3 rays from the
    dent converge and cross at analytically known times."""
    pts, center, dent_r = pacman_polyline()
    fm = propagate(isotropic_metric, IgnitionPolyline(pts), n=96, dt=5e-3,
                   t_end=1.0, output_interval=0.05, convexity_audit=False)
    starts = {tr.id: np.array(tr.states[0][:2]) for tr in fm.trajectories}
    vels = {tr.id: np.array(tr.states[0][2:]) for tr in fm.trajectories}
    return fm, starts, vels, center, dent_r


class TestCrossingToy:
    def test_crossings_cut_the_later_arrival(self, pacman_toy):
        fm, starts, vels, _, _ = pacman_toy
        checked = 0
        for rec in fm.cut_records:
            if rec.kind != "crossing" or len(rec.ids) != 2:
                continue
            loser, winner = rec.ids
            p = np.array(rec.point)
            t_loser = _straight_arrival(starts[loser], vels[loser], p)
            t_winner = _straight_arrival(starts[winner], vels[winner], p)
            if t_loser is None or t_winner is None:
                continue
            assert t_loser >= t_winner - 1e-2
            assert rec.t_cut == pytest.approx(t_loser, abs=6e-2)
            checked += 1
        assert checked >= 4  # the dent rays genuinely fold

    def test_cut_permanence(self, pacman_toy):
        fm, _, _, _, _ = pacman_toy
        cut_ids = {tr.id for tr in fm.trajectories if tr.status == "cut"}
        assert cut_ids
        for tr in fm.trajectories:
            if tr.id in cut_ids:
                later = [s for s in fm.fronts if s.t > tr.t_cut + 0.05]
                assert all(tr.id not in s.ids for s in later)

    def test_empty_cut_locus_for_constant_metric_convex_curve(self, wind_metric,
                                                              isotropic_metric):
        # straight F-orthogonal rays from a convex curve never cross
        for m, ign in ((wind_metric, IgnitionCircle(P0, 1.0)),
                       (isotropic_metric, IgnitionEllipse(P0, (2.0, 1.0)))):
            fm = propagate(m, ign, n=48, dt=1e-2, t_end=2.0,
                           output_interval=0.5, convexity_audit=False)
            assert fm.cut_records == []
            assert all(tr.status == "live" for tr in fm.trajectories)


def _straight_arrival(p0, v, target, tol=0.12):
    d = target - p0
    s = np.linalg.norm(v)
    if s == 0:
        return None
    t = float(d @ v) / (s * s)
    miss = np.linalg.norm(p0 + t * v - target)
    return t if (t >= 0 and miss <= tol) else None


class TestFocalCollapse:
    def test_no_focal_on_expanding_circle(self, isotropic_metric):
        fm = propagate(isotropic_metric, IgnitionCircle(P0, 0.5), n=32, dt=1e-2,
                       t_end=2.0, output_interval=0.25, convexity_audit=False,
                       focal_epsilon_factor=0.25)
        assert all(r.kind != "focal" for r in fm.cut_records)

    def test_concave_arc_focus_time(self, isotropic_metric):
        # dent of curvature radius r collapses at t = r / speed
        pts, center, dent_r = pacman_polyline()
        fm = propagate(isotropic_metric, IgnitionPolyline(pts), n=96, dt=5e-3,
                       t_end=1.0, output_interval=0.05, convexity_audit=False,
                       focal_epsilon_factor=0.25)
        focal = [r for r in fm.cut_records if r.kind == "focal"]
        assert focal
        t_star = dent_r / 3.0
        near = [r for r in focal
                if math.hypot(r.point[0] - center[0], r.point[1] - center[1]) < 0.2]
        assert near
        for r in near:
            assert 0.7 * t_star <= r.t_cut <= 1.3 * t_star

    def test_symmetric_hill_focal_precedes_crossings(self, hill_metric):
        # behind the hill the fold opens at a focal point on the symmetry
        # axis; with outputs fine enough to resolve it, the first recorded
        # cut is focal and the flank crossings come later
        from firefront.front import IgnitionCircle
        fm = propagate(hill_metric, IgnitionCircle((-1.0, 0.0), 0.2), n=64,
                       dt=1e-2, t_end=2.0, output_interval=0.2,
                       convexity_audit=False, focal_epsilon_factor=0.5)
        focal = [r for r in fm.cut_records if r.kind == "focal"]
        crossing = [r for r in fm.cut_records if r.kind == "crossing"]
        assert focal and crossing
        first_focal = min(focal, key=lambda r: r.t_cut)
        assert abs(first_focal.point[1]) <= 0.15  # at/near the axis
        assert first_focal.t_cut < min(r.t_cut for r in crossing)


class TestFrontPolygon:
    def test_regular_polygon(self, isotropic_metric):
        fm = run_isotropic_circle(isotropic_metric, n=64)
        snap = fm.front_at(1.0)
        assert snap.closed and len(snap.ids) == 64
        assert not any(snap.bridged)
        # regular 64-gon: equal side lengths
        d = np.diff(np.vstack((snap.coords, snap.coords[:1])), axis=0)
        lens = np.hypot(d[:, 0], d[:, 1])
        np.testing.assert_allclose(lens, lens[0], rtol=1e-9)

    def test_bridged_edges_after_pruning(self, pacman_toy):
        fm, _, _, _, _ = pacman_toy
        cut_ids = {tr.id for tr in fm.trajectories if tr.status == "cut"}
        assert cut_ids
        last = [s for s in fm.fronts if s.ids][-1]
        assert any(last.bridged)  # gaps where the dent trajectories were cut

    def test_missing_time_raises(self, isotropic_metric):
        fm = run_isotropic_circle(isotropic_metric)
        with pytest.raises(EmptyFrontError):
            fm.front_at(0.123)

    def test_single_live_trajectory_warns_not_raises(self, isotropic_metric):
        with pytest.warns(UserWarning, match="single"):
            fm = propagate(isotropic_metric, IgnitionPoint(P0), n=8, dt=1e-2,
                           t_end=0.5, output_interval=0.5, convexity_audit=False,
                           exclude_ids=set(range(1, 8)))
        snap = fm.front_at(0.5)
        assert len(snap.ids) == 1


class TestDeterminismAndIndependence:
    def _csv_bytes(self, fm, metric):
        bufs = []
        import tempfile, pathlib
        with tempfile.TemporaryDirectory() as d:
            d = pathlib.Path(d)
            write_fronts_csv(d / "f.csv", fm, metric)
            write_trajectories_csv(d / "t.csv", fm, metric)
            write_cuts_csv(d / "c.csv", fm)
            for n in ("f.csv", "t.csv", "c.csv"):
                bufs.append((d / n).read_bytes())
        return bufs

    def test_repeated_runs_byte_identical(self, hill_wind_metric):
        ign = IgnitionCircle((-1.0, 1.0), 0.2)
        kw = dict(n=48, dt=1e-2, t_end=4.2, output_interval=1.05,
                  convexity_audit=False)
        a = self._csv_bytes(propagate(hill_wind_metric, ign, **kw), hill_wind_metric)
        b = self._csv_bytes(propagate(hill_wind_metric, ign, **kw), hill_wind_metric)
        assert a == b

    def test_threads_do_not_change_results(self, hill_wind_metric):
        ign = IgnitionCircle((-1.0, 1.0), 0.2)
        kw = dict(n=48, dt=1e-2, t_end=3.15, output_interval=1.05,
                  convexity_audit=False)
        a = self._csv_bytes(propagate(hill_wind_metric, ign, threads=1, **kw),
                            hill_wind_metric)
        b = self._csv_bytes(propagate(hill_wind_metric, ign, threads=4, **kw),
                            hill_wind_metric)
        assert a == b

    def test_removing_cut_trajectory_leaves_others_unchanged(self, hill_wind_metric):
        ign = IgnitionCircle((-1.0, 1.0), 0.2)
        kw = dict(n=48, dt=1e-2, t_end=4.2, output_interval=1.05,
                  convexity_audit=False)
        full = propagate(hill_wind_metric, ign, **kw)
        victim = next(tr.id for tr in full.trajectories if tr.status == "cut")
        reduced = propagate(hill_wind_metric, ign, exclude_ids={victim}, **kw)
        for tr in full.trajectories:
            if tr.id == victim:
                continue
            other = reduced.trajectory(tr.id)
            assert other.times == tr.times
            assert other.states == tr.states  # bit-identical integration
            assert other.status == tr.status


class TestConvexityGate:
    def test_nonconvex_refuses(self):
        m = make_metric(PlaneTerrain(1.0, 0.0, domain=(-5, 5, -5, 5)), 1.0, 2.0,
                        epsilon=0.9, wind_angle=0.0)
        with pytest.raises(NonConvexMetricError):
            propagate(m, IgnitionPoint(P0), n=16, dt=1e-2, t_end=0.2,
                      output_interval=0.1)

    def test_allow_nonconvex_overrides_with_warning(self):
        m = make_metric(PlaneTerrain(1.0, 0.0, domain=(-5, 5, -5, 5)), 1.0, 2.0,
                        epsilon=0.9, wind_angle=0.0)
        with pytest.warns(UserWarning, match="non-minimizing|not strongly convex"):
            fm = propagate(m, IgnitionPoint(P0), n=16, dt=1e-2, t_end=0.2,
                           output_interval=0.1, allow_nonconvex=True)
        assert fm.nonconvex
