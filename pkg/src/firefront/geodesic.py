"""Lightlike geodesics of dt^2 - F^2 in the time parametrization.

The spacetime fundamental tensor is block diagonal (1 over -g^F), so the
formal Christoffel symbols reduce to coordinate derivatives of the spatial
tensor; the engine evaluates the contracted right-hand side directly, and
the full symbol array here exists for inspection and validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from firefront.errors import AmbiguousRootError, NoRootError, SingularTensorError
from firefront.metric import FireMetric, TangentVector
from firefront.terrain import AerialPoint


class GeodesicState(NamedTuple):
    """t-parametrized state; the spacetime velocity is (1, vx, vy)."""

    t: float
    x: float
    y: float
    vx: float
    vy: float


@dataclass(frozen=True)
class SpacetimeTensorSample:
    g: np.ndarray     # 3x3, coordinates (t, x, y)
    inv: np.ndarray


def spacetime_tensor(metric: FireMetric, t: float, p: AerialPoint,
                     v: TangentVector) -> SpacetimeTensorSample:
    """g^G at direction (1, v): diag-block 1 and -g^F, with closed-form inverse."""
    g11, g12, g22 = metric.core().tensor(t, p[0], p[1], v[0], v[1])
    det = g11 * g22 - g12 * g12
    if det <= 0.0:
        raise SingularTensorError(
            f"spatial tensor block not invertible at t={t:g}, p=({p[0]:g}, {p[1]:g})"
        )
    g = np.array([
        [1.0, 0.0, 0.0],
        [0.0, -g11, -g12],
        [0.0, -g12, -g22],
    ])
    inv = np.array([
        [1.0, 0.0, 0.0],
        [0.0, -g22 / det, g12 / det],
        [0.0, g12 / det, -g11 / det],
    ])
    return SpacetimeTensorSample(g=g, inv=inv)


def christoffel(metric: FireMetric, t: float, p: AerialPoint,
                v: TangentVector) -> np.ndarray:
    """Formal Christoffel symbols gamma[k, i, j] of G at direction (1, v).

    Coordinate partials of g_ij are central differences taken with the
    direction argument held fixed; steps are the metric's domain-scaled
    FD steps.  Symmetric in (i, j) by construction.
    """
    core = metric.core()
    fd = core.fd_steps()  # (dt, dx, dy)
    x, y = p

    def block(tt: float, xx: float, yy: float) -> np.ndarray:
        g11, g12, g22 = core.tensor(tt, xx, yy, v[0], v[1])
        return np.array([
            [1.0, 0.0, 0.0],
            [0.0, -g11, -g12],
            [0.0, -g12, -g22],
        ])

    sample = spacetime_tensor(metric, t, p, v)
    dg = np.empty((3, 3, 3))  # dg[r] = d g / d x^r
    dg[0] = (block(t + fd[0], x, y) - block(t - fd[0], x, y)) / (2.0 * fd[0])
    dg[1] = (block(t, x + fd[1], y) - block(t, x - fd[1], y)) / (2.0 * fd[1])
    dg[2] = (block(t, x, y + fd[2]) - block(t, x, y - fd[2])) / (2.0 * fd[2])

    # gamma^k_ij = 1/2 g^{kr} (d_i g_rj + d_j g_ri - d_r g_ij)
    inner = (np.einsum("irj->rij", dg) + np.einsum("jri->rij", dg)
             - np.einsum("rij->rij", dg))
    return 0.5 * np.einsum("kr,rij->kij", sample.inv, inner)


def geodesic_rhs(metric: FireMetric, state: GeodesicState) -> tuple[float, float]:
    """(dvx/dt, dvy/dt) of the t-parametrized lightlike geodesic."""
    return metric.core().rhs(state.t, state.x, state.y, state.vx, state.vy)


def rk4_step(metric: FireMetric, state: GeodesicState, dt: float,
             renormalize: bool = True) -> GeodesicState:
    """One classical RK4 step; optionally projects v back onto F(v) = 1."""
    x, y, vx, vy = metric.core().rk4_step(
        state.t, state.x, state.y, state.vx, state.vy, dt, renormalize
    )
    return GeodesicState(state.t + dt, x, y, vx, vy)


def integrate(metric: FireMetric, state: GeodesicState, t_end: float, dt: float,
              renormalize: bool = True, record_every: int = 1) -> list[GeodesicState]:
    """Fixed-step trajectory from state to t_end; a testing convenience."""
    out = [state]
    n = round((t_end - state.t) / dt)
    for k in range(n):
        state = rk4_step(metric, state, dt, renormalize)
        if (k + 1) % record_every == 0:
            out.append(state)
    return out


def initial_velocity(metric: FireMetric, t: float, p: AerialPoint,
                     w: TangentVector, orientation: float = 1.0,
                     n_scan: int = 720, tol: float = 1e-10) -> TangentVector:
    """The F-unit vector F-orthogonal to w, pointing to the side where
    det[v | w] has the sign of `orientation` (positive = outward for a
    counterclockwise ignition curve).

    Scans indicatrix directions for sign changes of g_v(v, w), then bisects.
    Strong convexity gives exactly two roots (the two orientations).
    """
    wn = math.hypot(w[0], w[1])
    if wn == 0.0:
        raise NoRootError("curve tangent is zero")
    u = (w[0] / wn, w[1] / wn)
    core = metric.core()
    x, y = p

    def residual(theta: float) -> float:
        v1, v2 = core.indicatrix_point(t, x, y, theta)
        return core.g_product(t, x, y, v1, v2, u[0], u[1])

    thetas = [2.0 * math.pi * k / n_scan for k in range(n_scan)]
    vals = [residual(th) for th in thetas]
    brackets = []
    for k in range(n_scan):
        a, b = vals[k], vals[(k + 1) % n_scan]
        if a == 0.0:  # grid point exactly on a root (symmetric configurations)
            brackets.append((thetas[k], thetas[k]))
        elif b != 0.0 and (a < 0.0) != (b < 0.0):
            brackets.append((thetas[k], thetas[k] + 2.0 * math.pi / n_scan))
    if len(brackets) == 0:
        raise NoRootError("no F-orthogonal direction found (metric degenerate?)")
    if len(brackets) > 2:
        raise AmbiguousRootError(
            f"{len(brackets)} orthogonality roots; indicatrix is not strongly convex"
        )

    roots: list[TangentVector] = []
    for lo, hi in brackets:
        if lo == hi:
            roots.append(core.indicatrix_point(t, x, y, lo))
            continue
        flo = residual(lo)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fm = residual(mid)
            if abs(fm) <= tol:
                lo = hi = mid
                break
            if (fm < 0.0) == (flo < 0.0):
                lo, flo = mid, fm
            else:
                hi = mid
        theta = 0.5 * (lo + hi)
        v = core.indicatrix_point(t, x, y, theta)
        if abs(core.g_product(t, x, y, v[0], v[1], u[0], u[1])) > tol:
            raise NoRootError("orthogonality bisection failed to converge")
        roots.append(v)

    for v in roots:
        if (v[0] * w[1] - v[1] * w[0]) * orientation > 0.0:
            return v
    raise NoRootError("no orthogonal root on the requested side of the curve")


def ignition_fan(metric: FireMetric, t: float, p: AerialPoint, n: int) -> list[TangentVector]:
    """n indicatrix points at equally spaced angles: a point fire's velocities."""
    if n < 8:
        raise ValueError(f"ignition fan needs n >= 8, got {n}")
    core = metric.core()
    return [core.indicatrix_point(t, p[0], p[1], 2.0 * math.pi * k / n)
            for k in range(n)]
