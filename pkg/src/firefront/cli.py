"""Command-line interface: run | indicatrix | check | oracle.

Exit codes: 0 ok, 2 convexity abort (or failed convexity audit in `check`),
3 config error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

import firefront
from firefront.errors import (
    ConfigError,
    FirefrontError,
    NonConvexMetricError,
    NotApplicableError,
    TimeDependentMetricError,
)
from firefront.metric import FireMetric
from firefront.oracle import compare_front, grid_arrival
from firefront.outputs import (
    render_fronts_svg,
    render_indicatrices_svg,
    write_cuts_csv,
    write_fronts_csv,
    write_trajectories_csv,
)
from firefront.scenario import Scenario, list_presets, load_scenario
from firefront.terrain import boundary_margin, effective_bounds


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="firefront",
        description="Wildfire firefront simulation from a slope/wind fire metric "
                    f"(engine backend: {firefront.BACKEND})",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="scenario file or preset name "
                                       f"({', '.join(list_presets())})")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads for trajectory stepping")
        sp.add_argument("--allow-nonconvex", action="store_true",
                        help="propagate even if the convexity audit fails")
        sp.add_argument("--no-renormalize", action="store_true",
                        help="disable the per-step projection onto F(v)=1")
        sp.add_argument("--dt", type=float, default=None, help="override solver.dt")
        sp.add_argument("--n", type=int, default=None,
                        help="override the number of trajectories")

    run = sub.add_parser("run", help="integrate the firemap and write CSV/SVG outputs")
    common(run)
    run.add_argument("--contours", action="store_true",
                     help="draw elevation contours behind the fronts")

    ind = sub.add_parser("indicatrix", help="plot the indicatrix field")
    common(ind)
    ind.add_argument("--overlay", action="store_true",
                     help="overlay the wind-ellipse / double-semi-ellipse construction")

    chk = sub.add_parser("check", help="convexity audit over a coarse (t, p) lattice")
    common(chk)
    chk.add_argument("--dirs", type=int, default=256,
                     help="indicatrix directions per lattice point")

    orc = sub.add_parser("oracle", help="compare fronts against grid first-arrival times")
    common(orc)
    orc.add_argument("--grid", type=int, default=400, help="oracle grid nodes per axis")
    orc.add_argument("--stencil", type=int, default=3, choices=(2, 3),
                     help="stencil radius (16 or 32 moves)")
    orc.add_argument("--save-arrival", action="store_true",
                     help="export the arrival grid in the DEM text format")
    return p


def _load(args) -> Scenario:
    scn = load_scenario(args.config)
    overrides = {}
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.allow_nonconvex:
        overrides["allow_nonconvex"] = True
    if args.no_renormalize:
        overrides["renormalize"] = False
    if args.dt is not None:
        overrides["dt"] = args.dt
    if args.n is not None:
        overrides["n"] = args.n
    return replace(scn, **overrides) if overrides else scn


def _report_angle_warnings(metric: FireMetric) -> None:
    count, maxdev = metric.core().angle_warnings()
    if count:
        print(f"warning: aerial-to-surface angle left the unit circle "
              f"{count} times (max deviation {maxdev:.3e}); formulas kept verbatim",
              file=sys.stderr)


def cmd_run(args) -> int:
    scn = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metric = scn.metric()
    started = time.perf_counter()
    firemap = scn.run()
    elapsed = time.perf_counter() - started
    write_fronts_csv(out / "fronts.csv", firemap, metric)
    write_trajectories_csv(out / "trajectories.csv", firemap, metric)
    write_cuts_csv(out / "cuts.csv", firemap)
    render_fronts_svg(out / "fronts.svg", firemap, metric, contours=args.contours)
    live = sum(tr.status == "live" for tr in firemap.trajectories)
    cuts = sum(tr.status == "cut" for tr in firemap.trajectories)
    left = sum(tr.status == "left-domain" for tr in firemap.trajectories)
    print(f"{scn.name}: {len(firemap.fronts)} fronts, "
          f"{live} live / {cuts} cut / {left} left-domain trajectories, "
          f"{len(firemap.cut_records)} cut records, {elapsed:.2f}s "
          f"[{firefront.BACKEND}]")
    print(f"wrote fronts.csv, trajectories.csv, cuts.csv, fronts.svg in {out}")
    _report_angle_warnings(metric)
    return 0


def cmd_indicatrix(args) -> int:
    scn = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metric = scn.metric()
    bounds = effective_bounds(metric.terrain)
    margin = boundary_margin(metric.terrain)
    bbox = (bounds[0] + margin, bounds[1] - margin,
            bounds[2] + margin, bounds[3] - margin)
    nx, ny = scn.indicatrix_grid
    render_indicatrices_svg(out / "indicatrices.svg", metric, bbox,
                            nx=nx, ny=ny, scale=scn.indicatrix_scale,
                            overlay=args.overlay)
    print(f"wrote indicatrices.svg ({nx}x{ny} lattice) in {out}")
    _report_angle_warnings(metric)
    return 0


def cmd_check(args) -> int:
    scn = _load(args)
    metric = scn.metric()
    bounds = effective_bounds(metric.terrain)
    margin = boundary_margin(metric.terrain)
    xs = np.linspace(bounds[0] + margin, bounds[1] - margin, 9)
    ys = np.linspace(bounds[2] + margin, bounds[3] - margin, 9)
    times = (0.0, 0.5 * scn.t_end, scn.t_end)
    worst_margin = math.inf
    worst_eig = math.inf
    failures = []
    for t in times:
        for yy in ys:
            for xx in xs:
                try:
                    rep = metric.convexity_check_slope(t, (xx, yy))
                    worst_margin = min(worst_margin, rep.margin)
                except NotApplicableError:
                    pass
                scan = metric.convexity_scan_numeric(t, (xx, yy), args.dirs)
                worst_eig = min(worst_eig, scan.min_eigenvalue)
                if not scan.passed:
                    failures.append((t, xx, yy, scan))
    if math.isfinite(worst_margin):
        print(f"slope criterion worst margin: {worst_margin:.6g} "
              f"({'pass' if worst_margin > 0 else 'fail'})")
    print(f"numeric scan worst eigenvalue: {worst_eig:.6g} over "
          f"{len(times) * len(xs) * len(ys)} lattice points, {args.dirs} directions")
    if failures:
        t, xx, yy, scan = failures[0]
        thetas = _nonconvex_directions(metric, t, (xx, yy), args.dirs)
        print(f"FAIL: {len(failures)} lattice points are not strongly convex")
        print(f"first failure at t={t:g}, p=({xx:.4g}, {yy:.4g}); "
              f"non-convex directions theta in [{min(thetas):.4f}, {max(thetas):.4f}] rad "
              f"(worst {scan.theta_worst:.4f}, eigenvalue {scan.min_eigenvalue:.3e})")
        return 2
    print("PASS: strongly convex on the audited lattice")
    return 0


def _nonconvex_directions(metric: FireMetric, t: float, p, n_dirs: int) -> list[float]:
    core = metric.core()
    bad = []
    for k in range(n_dirs):
        theta = 2.0 * math.pi * k / n_dirs
        v1, v2 = core.indicatrix_point(t, p[0], p[1], theta)
        g11, g12, g22 = core.tensor(t, p[0], p[1], v1, v2)
        lo = 0.5 * (g11 + g22) - math.hypot(0.5 * (g11 - g22), g12)
        if lo <= 1e-9 * abs(g11 + g22):
            bad.append(theta)
    return bad or [math.nan]


def cmd_oracle(args) -> int:
    scn = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metric = scn.metric()
    bounds = effective_bounds(metric.terrain)
    margin = boundary_margin(metric.terrain)
    bbox = (bounds[0] + margin, bounds[1] - margin,
            bounds[2] + margin, bounds[3] - margin)
    t_samples = (0.0, 0.5 * scn.t_end, scn.t_end)
    started = time.perf_counter()
    arrival = grid_arrival(metric, scn.ignition, bbox, args.grid, args.grid,
                           radius=args.stencil, t_samples=t_samples)
    t_oracle = time.perf_counter() - started
    firemap = scn.run()
    t_total = time.perf_counter() - started
    print(f"oracle grid {args.grid}x{args.grid}, stencil r={args.stencil}: "
          f"{t_oracle:.2f}s; engine run: {t_total - t_oracle:.2f}s [{firefront.BACKEND}]")
    for snap in firemap.fronts:
        if snap.t <= 0 or len(snap.ids) == 0:
            continue
        print(compare_front(arrival, firemap, snap.t))
    if args.save_arrival:
        arrival.save(out / "arrival.asc")
        print(f"wrote arrival.asc in {out}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "indicatrix":
            return cmd_indicatrix(args)
        if args.command == "check":
            return cmd_check(args)
        if args.command == "oracle":
            return cmd_oracle(args)
        raise AssertionError(args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except NonConvexMetricError as exc:
        print(f"convexity abort: {exc}", file=sys.stderr)
        return 2
    except TimeDependentMetricError as exc:
        print(f"oracle requires a time-independent metric: {exc}", file=sys.stderr)
        return 3
    except FirefrontError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
