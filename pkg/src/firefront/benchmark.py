"""Benchmark the pure-Python engine against the compiled extension.

Run with ``python -m firefront.benchmark``.  Times the hot kernels (metric
evaluation, geodesic RHS, RK4 stepping, oracle edge costs) and a short
end-to-end scenario on both backends, with a cross-check that they agree.
"""

from __future__ import annotations

import math
import sys
import time

import numpy as np

from firefront.backend import load_backend
from firefront.fields import ScalarField, compile_expression

EMPTY_I = np.zeros(0, dtype=np.int32)
EMPTY_D = np.zeros(0, dtype=np.float64)
NO_DEM = np.zeros((2, 2))


def build_core(engine, eps=0.0):
    def const(v, name):
        return engine.FieldProgram(True, float(v), EMPTY_I, EMPTY_D, name)

    codes, consts, _ = compile_expression(ScalarField.parse("1+t/10").expr)
    a = engine.FieldProgram(False, 0.0, codes, consts, "a")
    bumps = np.array([[3.0, 0.0, 0.0, 0.5, 0.5]])
    terr = engine.TerrainEval(engine.TERRAIN_GAUSSIANS, 0.0, 0.0, bumps, NO_DEM,
                              0.0, 0.0, 1.0, (-16.0, 16.0, -16.0, 16.0))
    # eps=0 keeps the metric strongly convex at every sampled direction
    return engine.MetricCore(terr, a, const(1.0, "h"), const(1.0, "hp"),
                             const(eps, "eps"), const(0.0, "phi"), False,
                             1e-4, 3.2e-3, 3.2e-3, 1e-4)


def bench(label, fn, n, repeat=3):
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    rate = n / best
    return best, rate


def kernels(core, n_states=64):
    r = np.random.default_rng(0)
    pts = [(r.uniform(0, 3), r.uniform(-2, 2), r.uniform(-2, 2),
            math.cos(a := r.uniform(0, 2 * math.pi)), math.sin(a))
           for _ in range(2000)]

    def metric_eval():
        for t, x, y, c, s in pts:
            core.metric_value(t, x, y, c, s)

    def rhs_eval():
        for t, x, y, c, s in pts[:400]:
            core.rhs(t, x, y, c, s)

    states = np.zeros((n_states, 4))
    status = np.zeros(n_states, dtype=np.int32)
    death = np.zeros(n_states)
    for i in range(n_states):
        th = 2 * math.pi * i / n_states
        v = core.indicatrix_point(0.0, -1.0, 0.0, th)
        states[i] = (-1.0, 0.0, v[0], v[1])

    def advance():
        s = states.copy()
        st = status.copy()
        core.advance(s, st, death, 0.0, 0.01, 100, True,
                     -15.9, 15.9, -15.9, 15.9, False)
        return s

    offs = np.ascontiguousarray(
        np.array([(dx, dy) for dx in range(-3, 4) for dy in range(-3, 4)
                  if (dx, dy) != (0, 0) and math.gcd(abs(dx), abs(dy)) == 1],
                 dtype=np.float64) * 0.05)
    out = np.empty(len(offs))

    def edges():
        for k in range(2000):
            core.edge_costs(0.0, -2.0 + 0.002 * k, 0.5, offs, out)

    return [
        ("metric_value x2000", metric_eval, 2000),
        ("geodesic_rhs x400", rhs_eval, 400),
        ("rk4 advance 64x100", advance, 6400),
        ("edge_costs 2000x32", edges, 64000),
    ]


def main() -> int:
    pure = build_core(load_backend("pure"))
    try:
        comp = build_core(load_backend("compiled"))
    except ImportError:
        print("compiled engine not built; run pip install -e . --no-build-isolation")
        return 1

    # agreement spot check before timing
    sp = pure.rk4_step(0.0, -1.0, 0.0, *pure.indicatrix_point(0, -1, 0, 0.4),
                       0.01, True)
    sc = comp.rk4_step(0.0, -1.0, 0.0, *comp.indicatrix_point(0, -1, 0, 0.4),
                       0.01, True)
    drift = max(abs(a - b) for a, b in zip(sp, sc))
    print(f"backend agreement on one RK4 step: max|delta| = {drift:.3e}")
    if drift > 1e-9:
        print("backends disagree beyond 1e-9; aborting")
        return 1

    print(f"{'kernel':24s} {'pure':>12s} {'compiled':>12s} {'speedup':>9s}")
    for (label, fn_p, n), (_, fn_c, _) in zip(kernels(pure), kernels(comp)):
        tp, _ = bench(label, fn_p, n)
        tc, _ = bench(label, fn_c, n)
        print(f"{label:24s} {tp * 1e3:10.2f}ms {tc * 1e3:10.2f}ms {tp / tc:8.1f}x")

    # end-to-end run on whichever backend the package imported with; the
    # high-level modules bind the engine at import time, so time the other
    # one via FIREFRONT_BACKEND=pure|compiled in the environment
    from firefront.backend import BACKEND
    from firefront.scenario import load_scenario

    scn = load_scenario("fig7")
    t0 = time.perf_counter()
    scn.run()
    print(f"fig7 end-to-end ({BACKEND} backend): {time.perf_counter() - t0:.2f}s")
    other = "pure" if BACKEND == "compiled" else "compiled"
    print(f"re-run with FIREFRONT_BACKEND={other} to time the other backend "
          "end-to-end")
    return 0


if __name__ == "__main__":
    sys.exit(main())
