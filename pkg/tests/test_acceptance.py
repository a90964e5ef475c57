"""Acceptance suite: one test per criterion, printing a pass/fail line each.

Run `pytest tests/test_acceptance.py -v -s` to see the per-criterion lines.
"""

import math
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from firefront.front import IgnitionCircle, IgnitionPoint, propagate
from firefront.geodesic import GeodesicState, initial_velocity, rk4_step
from firefront.oracle import compare_front, grid_arrival
from firefront.outputs import write_cuts_csv, write_fronts_csv, write_trajectories_csv
from firefront.scenario import load_scenario
from firefront.terrain import GaussianBump, GaussianSumTerrain, PlaneTerrain
from conftest import BIG, make_metric

P0 = (0.0, 0.0)
RT3 = math.sqrt(3.0)


def report(num: int, ok: bool, detail: str):
    print(f"ACCEPTANCE {num:2d} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


def test_01_isotropic_circle(isotropic_metric):
    t0 = time.perf_counter()
    fm = propagate(isotropic_metric, IgnitionPoint(P0), n=64, dt=1e-2,
                   t_end=1.0, output_interval=1.0, convexity_audit=False)
    elapsed = time.perf_counter() - t0
    snap = fm.front_at(1.0)
    radii = np.hypot(snap.coords[:, 0], snap.coords[:, 1])
    err = float(np.abs(radii - 3.0).max())
    report(1, err <= 1e-6 and elapsed < 5.0,
           f"isotropic circle radius error {err:.2e} (tol 1e-6), {elapsed:.2f}s (< 5s)")


def test_02_straight_line_geodesics():
    worst = 0.0
    for name in ("fig5a", "fig5b"):
        scn = load_scenario(name)
        fm = scn.run(convexity_audit=False)
        for tr in fm.trajectories:
            pts = np.array([(s[0], s[1]) for s in tr.states])
            chord = pts[-1] - pts[0]
            clen = float(np.linalg.norm(chord))
            if clen == 0.0:
                continue
            rel = pts - pts[0]
            dev = np.abs(chord[0] * rel[:, 1] - chord[1] * rel[:, 0]) / clen
            worst = max(worst, float(dev.max()) / clen)
    report(2, worst <= 1e-7,
           f"slope+wind trajectories straight: max chord deviation {worst:.2e} "
           "of length (tol 1e-7)")


def test_03_double_semi_ellipse_extremes(wind_metric):
    fm = propagate(wind_metric, IgnitionPoint(P0), n=64, dt=1e-2, t_end=1.0,
                   output_interval=1.0, convexity_audit=False)
    snap = fm.front_at(1.0)
    down = snap.coords[0]   # seed theta = 0
    up = snap.coords[32]    # seed theta = pi
    err = max(abs(down[0] - 6.4), abs(down[1]), abs(up[0] + 1.6), abs(up[1]))
    report(3, err <= 1e-6,
           f"downwind 6.4 / upwind 1.6 front distances, error {err:.2e} (tol 1e-6)")


def test_04_matsumoto_slope_distances(slope_metric):
    fm = propagate(slope_metric, IgnitionPoint(P0), n=64, dt=1e-2, t_end=1.0,
                   output_interval=1.0, convexity_audit=False)
    snap = fm.front_at(1.0)
    up, down = snap.coords[0], snap.coords[32]
    want_up = 1.5 + RT3 / 4.0     # (3 + sqrt3/2) / 2
    want_down = 1.5 - RT3 / 4.0   # (3 - sqrt3/2) / 2
    err = max(abs(up[0] - want_up), abs(up[1]),
              abs(down[0] + want_down), abs(down[1]))
    report(4, err <= 1e-6,
           f"up-slope {want_up:.6f} / down-slope {want_down:.6f} aerial "
           f"distances, error {err:.2e} (tol 1e-6)")


def test_05_wind_metric_reduces_to_matsumoto(hill_metric):
    core = hill_metric.core()
    r = np.random.default_rng(50)
    worst = 0.0
    for _ in range(10_000):
        t = r.uniform(0, 5)
        p = (r.uniform(-3, 3), r.uniform(-3, 3))
        v = tuple(r.normal(size=2))
        if v == (0.0, 0.0):
            continue
        al, beta = core.alpha_beta(p[0], p[1], *v)
        matsumoto = al * al / (al + al + beta)  # a = h = h' = 1
        got = hill_metric.metric_value(t, p, v)
        worst = max(worst, abs(got - matsumoto) / matsumoto)
    report(5, worst <= 1e-14,
           f"eps=0 wind metric vs Matsumoto formula: max rel dev {worst:.2e} "
           "(tol 1e-14, 1e4 samples)")


def test_06_fundamental_tensor_cross_validation():
    hill = GaussianSumTerrain((GaussianBump(3.0, (0.0, 0.0), 1.0),),
                              domain=(-16.0, 16.0, -16.0, 16.0))
    m = make_metric(hill, 1.0, 1.0)
    r = np.random.default_rng(51)
    worst_c = worst_euler = 0.0
    for _ in range(1000):
        t = r.uniform(0, 3)
        p = (r.uniform(-2, 2), r.uniform(-2, 2))
        ang, rad = r.uniform(0, 2 * math.pi), r.uniform(0.3, 3.0)
        v = (rad * math.cos(ang), rad * math.sin(ang))
        u = tuple(r.normal(size=2))
        gf = m.fundamental_tensor(t, p, v)
        assert gf.g12 == gf.as_matrix()[1, 0]  # symmetric by construction
        ga = m.fundamental_tensor_analytic(t, p, v)
        f = m.metric_value(t, p, v)
        # contraction vs the closed-form product, Cauchy-Schwarz normalized
        want = m.analytic_g_product(t, p, v, u)
        cs = f * math.sqrt(ga.product(u, u))
        worst_c = max(worst_c, abs(gf.product(v, u) - want) / cs)
        worst_euler = max(worst_euler, abs(gf.product(v, v) - f * f) / (f * f))
    report(6, worst_c <= 1e-6 and worst_euler <= 1e-6,
           f"FD tensor vs analytic g_v(v,u): {worst_c:.2e} (tol 1e-6); "
           f"g_v(v,v)=F^2: {worst_euler:.2e} (tol 1e-6); symmetry exact")


def test_07_pde_ode_equivalence():
    # circle ignition on the same Gaussian hill; eps=0.1 is the largest wind
    # eccentricity that stays strongly convex everywhere there, and n=512
    # makes the neighbor-difference estimate of ds_f second-order accurate
    # enough for the 1e-3 residual bound (the estimator converges ~ds^2)
    hill = GaussianSumTerrain((GaussianBump(3.0, (0.0, 0.0), 1.0),),
                              domain=(-25.0, 25.0, -25.0, 25.0))
    m = make_metric(hill, 1.0, 1.0, epsilon=0.1, time_scale=6.3)
    n = 512
    fm = propagate(m, IgnitionCircle((-1.0, 1.0), 0.2), n=n, dt=1e-2,
                   t_end=4.2, output_interval=1.05, convexity_audit=False)
    core = m.core()
    ds = 2 * math.pi / n
    worst_f = worst_g = 0.0
    trs = {tr.id: tr for tr in fm.trajectories}
    for snap in fm.fronts:
        if snap.t <= 0:
            continue
        for i in range(n):
            left, right = (i - 1) % n, (i + 1) % n
            if not all(snap.t in trs[j].times
                       and (trs[j].terminal_time is None
                            or trs[j].terminal_time > snap.t)
                       for j in (left, i, right)):
                continue
            k = trs[i].times.index(snap.t)
            x, y, vx, vy = trs[i].states[k]
            f = core.metric_value(snap.t, x, y, vx, vy)
            worst_f = max(worst_f, abs(f - 1.0))
            sl = trs[left].states[trs[left].times.index(snap.t)]
            sr = trs[right].states[trs[right].times.index(snap.t)]
            w = ((sr[0] - sl[0]) / (2 * ds), (sr[1] - sl[1]) / (2 * ds))
            g = core.g_product(snap.t, x, y, vx, vy, w[0], w[1])
            guu = core.tensor(snap.t, x, y, vx, vy)
            gn = abs(g) / (f * math.sqrt(max(
                guu[0] * w[0] * w[0] + 2 * guu[1] * w[0] * w[1]
                + guu[2] * w[1] * w[1], 1e-300)))
            worst_g = max(worst_g, gn)
    report(7, worst_f <= 1e-6 and worst_g <= 1e-3,
           f"orthogonality residuals: |F-1| {worst_f:.2e} (tol 1e-6), "
           f"normalized |g(dt f, ds f)| {worst_g:.2e} (tol 1e-3)")


def test_08_killing_conservation(flat_terrain):
    m = make_metric(flat_terrain, "1+t", 1.0, epsilon=0.5, wind_angle=0.0,
                    time_scale=3.0)
    worst = 0.0
    for w in ((1.0, 0.0), (0.0, 1.0)):
        v0 = initial_velocity(m, 0.0, P0, w)
        s = GeodesicState(0.0, 0.0, 0.0, *v0)
        g0 = m.analytic_g_product(0.0, P0, (s.vx, s.vy), w)
        for _ in range(300):
            s = rk4_step(m, s, 0.01)
            g = m.analytic_g_product(s.t, (s.x, s.y), (s.vx, s.vy), w)
            worst = max(worst, abs(g - g0))
    report(8, worst <= 1e-6,
           f"Killing invariant (orthogonality zero) drift {worst:.2e} over "
           "t in [0,3] (tol 1e-6)")


def test_09_oracle_equivalence():
    hill = GaussianSumTerrain((GaussianBump(3.0, (0.0, 0.0), 1.0),),
                              domain=(-13.0, 13.0, -13.0, 13.0))
    m = make_metric(hill, 1.0, 1.0, time_scale=5.16)
    ign = IgnitionCircle((-1.0, 0.0), 0.2)
    t0 = time.perf_counter()
    fm = propagate(m, ign, n=64, dt=1e-2, t_end=5.16, output_interval=0.86)
    arr = grid_arrival(m, ign, (-12.9, 12.9, -12.9, 12.9), 400, 400, radius=3,
                       t_samples=(0.0, 2.58, 5.16))
    elapsed = time.perf_counter() - t0
    worst_med = worst_p95 = 0.0
    for snap in fm.fronts:
        if snap.t <= 0 or not snap.ids:
            continue
        rep = compare_front(arr, fm, snap.t)
        worst_med = max(worst_med, rep.median)
        worst_p95 = max(worst_p95, rep.p95)
    report(9, worst_med <= 0.03 and worst_p95 <= 0.06 and elapsed < 60.0,
           f"front vs 400x400 r=3 arrival grid: median {worst_med:.2%} "
           f"(tol 3%), p95 {worst_p95:.2%} (tol 6%), {elapsed:.1f}s (< 60s)")


def test_10_symmetric_cut_point():
    scn = load_scenario("fig7")
    fm = scn.run()
    n = scn.n
    trs = {tr.id: tr for tr in fm.trajectories}
    top = trs[0]  # seed s=0, straight over the summit
    assert top.status == "cut"
    # mirrored seeds have mirrored histories: their cut times must coincide
    pairs = []
    for i in range(1, n // 2):
        j = n - i
        if trs[i].status == "cut" and trs[j].status == "cut":
            pairs.append((i, j, trs[i].t_cut, trs[j].t_cut))
    assert pairs
    worst_dt = max(abs(ti - tj) / max(ti, tj) for _, _, ti, tj in pairs)
    # records where a mirror pair cut each other: meetings on the axis
    mirror_meets = [r for r in fm.cut_records
                    if r.kind == "crossing" and len(r.ids) == 2
                    and (r.ids[0] + r.ids[1]) % n == 0]
    assert mirror_meets
    axis_err = max(abs(r.point[1]) for r in mirror_meets)
    flank_t = max(t for i, j, ti, tj in pairs for t in (ti, tj)
                  if max(ti, tj) < top.t_cut)
    ok = worst_dt <= 1e-3 and axis_err <= 1e-3 and top.t_cut > flank_t
    report(10, ok,
           f"flank cut times differ {worst_dt:.2e} (tol 1e-3), meeting on the "
           f"axis within {axis_err:.2e} (tol 1e-3), summit trajectory cut at "
           f"{top.t_cut:.4f} > flank {flank_t:.4f}")


def test_11_convexity_audit():
    fig2 = load_scenario("fig2").metric()
    fig9 = load_scenario("fig9").metric()
    ok2 = all(fig2.convexity_scan_numeric(0.0, (x, y), 128).passed
              for x in np.linspace(-9, 9, 5) for y in np.linspace(-9, 9, 5))
    ok2 = ok2 and fig2.convexity_check_slope(0.0, P0).margin == pytest.approx(3 - RT3)
    rep9 = fig9.convexity_scan_numeric(0.0, P0, 256)
    ok9 = not rep9.passed
    r = np.random.default_rng(52)
    okr = True
    for _ in range(200):
        gx, gy = r.uniform(-3, 3, 2)
        h = r.uniform(0.2, 3.0)
        a = h * r.uniform(1.001, 4.0)  # a > h' (= h, the coupled default)
        m = make_metric(PlaneTerrain(gx, gy, domain=BIG), a, h)
        okr = okr and m.convexity_check_slope(0.0, P0).passed \
            and m.convexity_scan_numeric(0.0, P0, 64).passed
    report(11, ok2 and ok9 and okr,
           f"slope config passes (margin {3 - RT3:.4f}), nonconvex config fails "
           f"(min eig {rep9.min_eigenvalue:.2e} at theta {rep9.theta_worst:.2f}), "
           "200 random a>h' configs pass")


def test_12_rk4_order(hill_metric):
    v = hill_metric.indicatrix_point(0.0, (-1.0, 0.0), 0.3)
    s0 = GeodesicState(0.0, -1.0, 0.0, *v)

    def endpoint(dt):
        s = s0
        for _ in range(round(1.0 / dt)):
            s = rk4_step(hill_metric, s, dt, renormalize=False)
        return np.array([s.x, s.y])

    ref = endpoint(1.25e-3)
    errs = [float(np.linalg.norm(endpoint(dt) - ref)) for dt in (4e-2, 2e-2, 1e-2)]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    report(12, min(orders) >= 3.7,
           f"RK4 endpoint errors {errs[0]:.2e}/{errs[1]:.2e}/{errs[2]:.2e}, "
           f"observed orders {orders[0]:.2f}, {orders[1]:.2f} (>= 3.7)")


def test_13_determinism_and_independence():
    scn = load_scenario("fig6")
    m = scn.metric()

    def csv_bytes(fm):
        out = []
        with tempfile.TemporaryDirectory() as d:
            d = Path(d)
            write_fronts_csv(d / "f.csv", fm, m)
            write_trajectories_csv(d / "t.csv", fm, m)
            write_cuts_csv(d / "c.csv", fm)
            for nm in ("f.csv", "t.csv", "c.csv"):
                out.append((d / nm).read_bytes())
        return out

    fm1 = scn.run()
    fm2 = scn.run()
    deterministic = csv_bytes(fm1) == csv_bytes(fm2)

    victim = next(tr.id for tr in fm1.trajectories if tr.status == "cut")
    fm3 = scn.run(exclude_ids={victim})
    independent = True
    for tr in fm1.trajectories:
        if tr.id == victim:
            continue
        other = fm3.trajectory(tr.id)
        independent = independent and tr.times == other.times \
            and tr.states == other.states and tr.status == other.status
    report(13, deterministic and independent,
           f"repeated runs byte-identical: {deterministic}; removing cut "
           f"trajectory {victim} leaves all other rows identical: {independent}")
