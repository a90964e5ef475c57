"""The fire metric F on aerial tangent vectors.

F bundles the terrain with the environment fields: the no-wind form is the
(reverse) Matsumoto quotient alpha^2 / (a*alpha + h*alpha + h'*beta), and
wind replaces the first term by a focus-centered ellipse contribution,
alpha^2 * a(1-eps^2)/(alpha - eps*omega).  F(v) = 1 exactly when the
surface image of v has the modeled fire speed in its direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from firefront.backend import engine
from firefront.errors import NotApplicableError
from firefront.fields import ScalarField, as_field, field_program
from firefront.terrain import AerialPoint, Terrain, effective_bounds, slant_angle, terrain_eval

TangentVector = tuple[float, float]


@dataclass(frozen=True)
class FundamentalTensorSample:
    """Symmetric 2x2 fundamental tensor at one (t, p, v)."""

    g11: float
    g12: float
    g22: float

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.g11, self.g12], [self.g12, self.g22]])

    def product(self, u: TangentVector, w: TangentVector) -> float:
        return (self.g11 * u[0] * w[0] + self.g12 * (u[0] * w[1] + u[1] * w[0])
                + self.g22 * u[1] * w[1])

    def eigenvalues(self) -> tuple[float, float]:
        mean = 0.5 * (self.g11 + self.g22)
        r = math.hypot(0.5 * (self.g11 - self.g22), self.g12)
        return (mean - r, mean + r)


@dataclass(frozen=True)
class ConvexityReport:
    passed: bool
    margin: float = math.nan        # slope criterion: (a+h')/h' - 2 sin(sigma)
    min_eigenvalue: float = math.nan
    theta_worst: float = math.nan


# Relative step for the finite-difference fundamental tensor.  1e-4 balances
# truncation against second-difference roundoff (~4*eps/step^2).
FD_TENSOR_REL_STEP = 1e-4


@dataclass(frozen=True, eq=False)
class FireMetric:
    """Terrain + fields evaluator for F and its fundamental tensor.

    h_prime defaults to h, reproducing the coupled flame term h*(alpha+beta).
    wind_frame is "aerial" (the angle field is converted per point) or
    "surface" (the field already gives the on-surface angle).
    """

    terrain: Terrain
    a: ScalarField
    h: ScalarField
    h_prime: ScalarField | None = None
    epsilon: ScalarField = field(default_factory=lambda: ScalarField.constant(0.0))
    wind_angle: ScalarField = field(default_factory=lambda: ScalarField.constant(0.0))
    wind_frame: str = "surface"
    time_scale: float = 1.0

    def __post_init__(self):
        if self.wind_frame not in ("surface", "aerial"):
            raise ValueError(f"wind_frame must be 'surface' or 'aerial', got {self.wind_frame!r}")

    @staticmethod
    def build(terrain, a, h, h_prime=None, epsilon=0.0, wind_angle=0.0,
              wind_frame="surface", time_scale=1.0) -> "FireMetric":
        return FireMetric(
            terrain=terrain, a=as_field(a), h=as_field(h),
            h_prime=None if h_prime is None else as_field(h_prime),
            epsilon=as_field(epsilon), wind_angle=as_field(wind_angle),
            wind_frame=wind_frame, time_scale=time_scale,
        )

    @property
    def time_dependent(self) -> bool:
        hp = self.h if self.h_prime is None else self.h_prime
        return any(f.time_dependent for f in (self.a, self.h, hp, self.epsilon, self.wind_angle))

    def domain_scale(self) -> float:
        xmin, xmax, ymin, ymax = effective_bounds(self.terrain)
        extent = max(xmax - xmin, ymax - ymin)
        return extent if math.isfinite(extent) else 1.0

    def core(self):
        """The engine evaluator (built lazily, cached)."""
        cached = getattr(self, "_core", None)
        if cached is not None:
            return cached
        hp = self.h if self.h_prime is None else self.h_prime
        scale = self.domain_scale()
        core = engine.MetricCore(
            terrain_eval(self.terrain),
            field_program(self.a, "a"),
            field_program(self.h, "h"),
            field_program(hp, "h_prime"),
            field_program(self.epsilon, "epsilon"),
            field_program(self.wind_angle, "wind_angle"),
            self.wind_frame == "aerial",
            1e-4 * max(self.time_scale, 1e-9),
            1e-4 * scale,
            1e-4 * scale,
            FD_TENSOR_REL_STEP,
        )
        object.__setattr__(self, "_core", core)
        return core

    # -- scalar evaluators ------------------------------------------------

    def alpha(self, p: AerialPoint, v: TangentVector) -> float:
        return self.core().alpha_beta(p[0], p[1], v[0], v[1])[0]

    def beta(self, p: AerialPoint, v: TangentVector) -> float:
        return self.core().alpha_beta(p[0], p[1], v[0], v[1])[1]

    def omega(self, t: float, p: AerialPoint, v: TangentVector) -> float:
        return self.core().omega_value(t, p[0], p[1], v[0], v[1])

    def fire_speed(self, t: float, p: AerialPoint, theta: float) -> float:
        return self.core().fire_speed(t, p[0], p[1], theta)

    def metric_value(self, t: float, p: AerialPoint, v: TangentVector) -> float:
        return self.core().metric_value(t, p[0], p[1], v[0], v[1])

    def indicatrix_point(self, t: float, p: AerialPoint, theta: float) -> TangentVector:
        return self.core().indicatrix_point(t, p[0], p[1], theta)

    def indicatrix_residual(self, t: float, p: AerialPoint, v: TangentVector) -> float:
        return self.core().q_residual(t, p[0], p[1], v[0], v[1])

    def surface_wind(self, t: float, p: AerialPoint) -> tuple[float, float]:
        return self.core().surface_wind(t, p[0], p[1])

    # -- fundamental tensor -----------------------------------------------

    def fundamental_tensor(self, t: float, p: AerialPoint, v: TangentVector,
                           rel_step: float = FD_TENSOR_REL_STEP) -> FundamentalTensorSample:
        """Central-difference tensor on F^2 (the validation route)."""
        g11, g12, g22 = self.core().tensor_fd(t, p[0], p[1], v[0], v[1], rel_step)
        return FundamentalTensorSample(g11, g12, g22)

    def fundamental_tensor_analytic(self, t: float, p: AerialPoint,
                                    v: TangentVector) -> FundamentalTensorSample:
        """Closed-form tensor (the route the geodesic engine consumes)."""
        g11, g12, g22 = self.core().tensor(t, p[0], p[1], v[0], v[1])
        return FundamentalTensorSample(g11, g12, g22)

    def analytic_g_product(self, t: float, p: AerialPoint, v: TangentVector,
                           u: TangentVector) -> float:
        """g_v(v, u) from the closed-form directional derivative of F^2/2."""
        return self.core().g_product(t, p[0], p[1], v[0], v[1], u[0], u[1])

    # -- convexity diagnostics ---------------------------------------------

    def convexity_check_slope(self, t: float, p: AerialPoint) -> ConvexityReport:
        """No-wind slope criterion: 2 sin(sigma) < (a + h')/h'.

        Sharp for the coupled flame term (h' = h); a diagnostic hint
        otherwise (the numeric scan is the authority).  Requires eps = 0.
        """
        core = self.core()
        _, _, a, _, hp, eps, _, _ = core.point_data(t, p[0], p[1])
        if eps != 0.0:
            raise NotApplicableError(
                f"slope convexity criterion requires epsilon = 0, got {eps:g}"
            )
        margin = (a + hp) / hp - 2.0 * math.sin(slant_angle(self.terrain, p))
        return ConvexityReport(passed=margin > 0.0, margin=margin)

    def convexity_scan_numeric(self, t: float, p: AerialPoint,
                               n_dirs: int = 256) -> ConvexityReport:
        """Sample indicatrix directions; fail on a non-positive-definite tensor."""
        core = self.core()
        min_eig = math.inf
        worst = 0.0
        floor = 0.0
        for k in range(n_dirs):
            theta = 2.0 * math.pi * k / n_dirs
            v1, v2 = core.indicatrix_point(t, p[0], p[1], theta)
            g11, g12, g22 = core.tensor(t, p[0], p[1], v1, v2)
            lo = 0.5 * (g11 + g22) - math.hypot(0.5 * (g11 - g22), g12)
            if lo < min_eig:
                min_eig = lo
                worst = theta
                floor = 1e-9 * abs(g11 + g22)
        return ConvexityReport(passed=min_eig > floor,
                               min_eigenvalue=min_eig, theta_worst=worst)
