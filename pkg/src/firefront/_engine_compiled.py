"""Numerical engine: terrain, field expressions, fire metric, geodesic RHS.

Written in Cython pure-Python mode.  ``setup.py`` compiles a copy of this
file as ``firefront._engine_compiled``; the same file also runs uncompiled
as the pure-Python fallback.  ``firefront.backend`` picks one at import
time.  Keep this module free of third-party imports: callers hand in numpy
arrays, which the typed memoryviews accept in both modes.

All evaluation happens in aerial coordinates (x, y); elevation enters only
through z and its gradient.  Angles are radians, counterclockwise from +x.
"""

import cython
import cython as cy

if cython.compiled:
    from cython.cimports.libc.math import (
        INFINITY,
        cos,
        exp,
        fabs,
        floor,
        isfinite,
        pow,
        sin,
        sqrt,
        tan,
    )
else:
    from math import (
        cos,
        exp,
        fabs,
        floor,
        inf as INFINITY,
        isfinite,
        pow,
        sin,
        sqrt,
        tan,
    )

from firefront.errors import (
    EvalError,
    FieldRangeError,
    OutOfDomainError,
    SingularTensorError,
    ZeroVectorError,
)

COMPILED = cython.compiled

# Expression VM opcodes (the compiler in firefront.fields must agree).
OP_CONST = 0
OP_T = 1
OP_X = 2
OP_Y = 3
OP_ADD = 4
OP_SUB = 5
OP_MUL = 6
OP_DIV = 7
OP_POW = 8
OP_NEG = 9
OP_SIN = 10
OP_COS = 11
OP_TAN = 12
OP_EXP = 13
OP_SQRT = 14
OP_ABS = 15

VM_STACK_SIZE = 32

# Terrain kinds.
TERRAIN_PLANE = 0
TERRAIN_GAUSSIANS = 1
TERRAIN_DEM = 2

# Trajectory status codes used by advance().
STATUS_LIVE = 0
STATUS_CUT = 1
STATUS_LEFT_DOMAIN = 2


@cy.cclass
class FieldProgram:
    """A scalar field of (t, x, y): either a constant or a compiled expression."""

    is_const: cy.bint
    const_val: cy.double
    codes: cy.int[::1]
    consts: cy.double[::1]
    name: object

    def __init__(self, is_const, const_val, codes, consts, name=""):
        self.is_const = is_const
        self.const_val = const_val
        self.codes = codes
        self.consts = consts
        self.name = name

    @cy.ccall
    def value(self, t: cy.double, x: cy.double, y: cy.double) -> cy.double:
        if self.is_const:
            return self.const_val
        stack = cython.declare(cython.double[32])
        sp: cy.int = 0
        i: cy.int
        op: cy.int
        arg: cy.int
        b: cy.double
        n: cy.int = self.codes.shape[0] // 2
        for i in range(n):
            op = self.codes[2 * i]
            arg = self.codes[2 * i + 1]
            if op == OP_CONST:
                stack[sp] = self.consts[arg]
                sp += 1
            elif op == OP_T:
                stack[sp] = t
                sp += 1
            elif op == OP_X:
                stack[sp] = x
                sp += 1
            elif op == OP_Y:
                stack[sp] = y
                sp += 1
            elif op == OP_ADD:
                sp -= 1
                stack[sp - 1] = stack[sp - 1] + stack[sp]
            elif op == OP_SUB:
                sp -= 1
                stack[sp - 1] = stack[sp - 1] - stack[sp]
            elif op == OP_MUL:
                sp -= 1
                stack[sp - 1] = stack[sp - 1] * stack[sp]
            elif op == OP_DIV:
                sp -= 1
                b = stack[sp]
                if b == 0.0:
                    raise EvalError(f"field {self.name!r}: division by zero")
                stack[sp - 1] = stack[sp - 1] / b
            elif op == OP_POW:
                sp -= 1
                b = stack[sp]
                a: cy.double = stack[sp - 1]
                if a < 0.0 and b != floor(b):
                    raise EvalError(
                        f"field {self.name!r}: negative base with fractional exponent"
                    )
                if a == 0.0 and b < 0.0:
                    raise EvalError(f"field {self.name!r}: zero base with negative exponent")
                stack[sp - 1] = pow(a, b)
            elif op == OP_NEG:
                stack[sp - 1] = -stack[sp - 1]
            elif op == OP_SIN:
                stack[sp - 1] = sin(stack[sp - 1])
            elif op == OP_COS:
                stack[sp - 1] = cos(stack[sp - 1])
            elif op == OP_TAN:
                stack[sp - 1] = tan(stack[sp - 1])
            elif op == OP_EXP:
                stack[sp - 1] = exp(stack[sp - 1])
            elif op == OP_SQRT:
                b = stack[sp - 1]
                if b < 0.0:
                    raise EvalError(f"field {self.name!r}: sqrt of negative value")
                stack[sp - 1] = sqrt(b)
            elif op == OP_ABS:
                stack[sp - 1] = fabs(stack[sp - 1])
        r: cy.double = stack[0]
        if not isfinite(r):
            raise EvalError(f"field {self.name!r}: nonfinite result")
        return r


@cy.cfunc
def _cr_value(
    p0: cy.double, p1: cy.double, p2: cy.double, p3: cy.double, u: cy.double
) -> cy.double:
    # Catmull-Rom cubic through four uniform samples, u in [0, 1] between p1, p2.
    return 0.5 * (
        2.0 * p1
        + (p2 - p0) * u
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * u * u
        + (3.0 * p1 - p0 - 3.0 * p2 + p3) * u * u * u
    )


@cy.cfunc
def _cr_deriv(
    p0: cy.double, p1: cy.double, p2: cy.double, p3: cy.double, u: cy.double
) -> cy.double:
    return 0.5 * (
        (p2 - p0)
        + 2.0 * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * u
        + 3.0 * (3.0 * p1 - p0 - 3.0 * p2 + p3) * u * u
    )


@cy.cclass
class TerrainEval:
    """Elevation and gradient of z(x, y) for the three terrain kinds.

    Bounds are the hard evaluable extent: infinite for analytic kinds unless
    a scenario domain is imposed, and the one-cell interpolation inset for
    DEM grids (Catmull-Rom needs a full 4x4 neighborhood).
    """

    kind: cy.int
    gx: cy.double
    gy: cy.double
    bumps: cy.double[:, ::1]
    dem: cy.double[:, ::1]
    dem_x0: cy.double
    dem_y0: cy.double
    dem_cs: cy.double
    dem_nx: cy.int
    dem_ny: cy.int
    xmin: cy.double
    xmax: cy.double
    ymin: cy.double
    ymax: cy.double

    def __init__(self, kind, gx, gy, bumps, dem, dem_x0, dem_y0, dem_cs, bounds):
        self.kind = kind
        self.gx = gx
        self.gy = gy
        self.bumps = bumps
        self.dem = dem
        self.dem_x0 = dem_x0
        self.dem_y0 = dem_y0
        self.dem_cs = dem_cs
        self.dem_ny = dem.shape[0]
        self.dem_nx = dem.shape[1]
        self.xmin, self.xmax, self.ymin, self.ymax = bounds

    @cy.ccall
    def bounds(self) -> tuple[cy.double, cy.double, cy.double, cy.double]:
        return (self.xmin, self.xmax, self.ymin, self.ymax)

    @cy.cfunc
    def _check(self, x: cy.double, y: cy.double) -> cy.int:
        if x < self.xmin or x > self.xmax or y < self.ymin or y > self.ymax:
            raise OutOfDomainError(f"point ({x:g}, {y:g}) outside domain")
        return 0

    @cy.ccall
    def elevation(self, x: cy.double, y: cy.double) -> cy.double:
        self._check(x, y)
        if self.kind == TERRAIN_PLANE:
            return self.gx * x + self.gy * y
        if self.kind == TERRAIN_GAUSSIANS:
            z: cy.double = 0.0
            k: cy.int
            for k in range(self.bumps.shape[0]):
                dx: cy.double = x - self.bumps[k, 1]
                dy: cy.double = y - self.bumps[k, 2]
                z += self.bumps[k, 0] * exp(
                    -self.bumps[k, 3] * dx * dx - self.bumps[k, 4] * dy * dy
                )
            return z
        return self._dem_eval(x, y, 0)

    @cy.ccall
    def gradient(self, x: cy.double, y: cy.double) -> tuple[cy.double, cy.double]:
        self._check(x, y)
        if self.kind == TERRAIN_PLANE:
            return (self.gx, self.gy)
        if self.kind == TERRAIN_GAUSSIANS:
            z1: cy.double = 0.0
            z2: cy.double = 0.0
            k: cy.int
            for k in range(self.bumps.shape[0]):
                dx: cy.double = x - self.bumps[k, 1]
                dy: cy.double = y - self.bumps[k, 2]
                e: cy.double = self.bumps[k, 0] * exp(
                    -self.bumps[k, 3] * dx * dx - self.bumps[k, 4] * dy * dy
                )
                z1 += -2.0 * self.bumps[k, 3] * dx * e
                z2 += -2.0 * self.bumps[k, 4] * dy * e
            return (z1, z2)
        return (self._dem_eval(x, y, 1), self._dem_eval(x, y, 2))

    @cy.cfunc
    def _dem_eval(self, x: cy.double, y: cy.double, what: cy.int) -> cy.double:
        # what: 0 = value, 1 = d/dx, 2 = d/dy.  Row 0 of self.dem is the
        # southernmost row (loader flips the file order).
        fx: cy.double = (x - self.dem_x0) / self.dem_cs
        fy: cy.double = (y - self.dem_y0) / self.dem_cs
        ix: cy.int = cy.cast(cy.int, floor(fx))
        iy: cy.int = cy.cast(cy.int, floor(fy))
        if ix < 1:
            ix = 1
        if ix > self.dem_nx - 3:
            ix = self.dem_nx - 3
        if iy < 1:
            iy = 1
        if iy > self.dem_ny - 3:
            iy = self.dem_ny - 3
        u: cy.double = fx - ix
        v: cy.double = fy - iy
        r0: cy.double
        r1: cy.double
        r2: cy.double
        r3: cy.double
        if what == 1:
            r0 = _cr_deriv(self.dem[iy - 1, ix - 1], self.dem[iy - 1, ix],
                           self.dem[iy - 1, ix + 1], self.dem[iy - 1, ix + 2], u)
            r1 = _cr_deriv(self.dem[iy, ix - 1], self.dem[iy, ix],
                           self.dem[iy, ix + 1], self.dem[iy, ix + 2], u)
            r2 = _cr_deriv(self.dem[iy + 1, ix - 1], self.dem[iy + 1, ix],
                           self.dem[iy + 1, ix + 1], self.dem[iy + 1, ix + 2], u)
            r3 = _cr_deriv(self.dem[iy + 2, ix - 1], self.dem[iy + 2, ix],
                           self.dem[iy + 2, ix + 1], self.dem[iy + 2, ix + 2], u)
            return _cr_value(r0, r1, r2, r3, v) / self.dem_cs
        r0 = _cr_value(self.dem[iy - 1, ix - 1], self.dem[iy - 1, ix],
                       self.dem[iy - 1, ix + 1], self.dem[iy - 1, ix + 2], u)
        r1 = _cr_value(self.dem[iy, ix - 1], self.dem[iy, ix],
                       self.dem[iy, ix + 1], self.dem[iy, ix + 2], u)
        r2 = _cr_value(self.dem[iy + 1, ix - 1], self.dem[iy + 1, ix],
                       self.dem[iy + 1, ix + 1], self.dem[iy + 1, ix + 2], u)
        r3 = _cr_value(self.dem[iy + 2, ix - 1], self.dem[iy + 2, ix],
                       self.dem[iy + 2, ix + 1], self.dem[iy + 2, ix + 2], u)
        if what == 2:
            return _cr_deriv(r0, r1, r2, r3, v) / self.dem_cs
        return _cr_value(r0, r1, r2, r3, v)


@cy.ccall
def aerial_to_surface(
    z1: cy.double, z2: cy.double, phi: cy.double
) -> tuple[cy.double, cy.double]:
    """Convert an aerial angle to (cos, sin) of the on-surface angle.

    The two quotient normalizations are separate, so the result is not
    exactly on the unit circle for steep anisotropic slopes; callers decide
    whether to warn.
    """
    cph: cy.double = cos(phi)
    sph: cy.double = sin(phi)
    d: cy.double = cph * z1 + sph * z2
    den: cy.double = sqrt(1.0 + d * d)
    ct: cy.double = (cph * (1.0 + z1 * z1) + sph * z1 * z2) / (den * sqrt(1.0 + z1 * z1))
    st: cy.double = (sph * (1.0 + z2 * z2) + cph * z1 * z2) / (den * sqrt(1.0 + z2 * z2))
    return (ct, st)


@cy.cclass
class MetricCore:
    """Fire metric evaluator: F, fundamental tensor, geodesic RHS, RK4.

    Immutable after construction apart from the surface-angle deviation
    counters, which only accumulate diagnostics.
    """

    terrain: TerrainEval
    fa: FieldProgram
    fh: FieldProgram
    fhp: FieldProgram
    feps: FieldProgram
    fphi: FieldProgram
    wind_aerial: cy.bint
    fd_t: cy.double
    fd_x: cy.double
    fd_y: cy.double
    fd_v_rel: cy.double
    angle_dev_count: cy.int
    angle_dev_max: cy.double

    def __init__(self, terrain, fa, fh, fhp, feps, fphi, wind_aerial,
                 fd_t, fd_x, fd_y, fd_v_rel):
        self.terrain = terrain
        self.fa = fa
        self.fh = fh
        self.fhp = fhp
        self.feps = feps
        self.fphi = fphi
        self.wind_aerial = wind_aerial
        self.fd_t = fd_t
        self.fd_x = fd_x
        self.fd_y = fd_y
        self.fd_v_rel = fd_v_rel
        self.angle_dev_count = 0
        self.angle_dev_max = 0.0

    @cy.ccall
    def fd_steps(self) -> tuple[cy.double, cy.double, cy.double]:
        return (self.fd_t, self.fd_x, self.fd_y)

    @cy.ccall
    def angle_warnings(self) -> tuple[cy.int, cy.double]:
        return (self.angle_dev_count, self.angle_dev_max)

    @cy.cfunc
    def _point(
        self, t: cy.double, x: cy.double, y: cy.double
    ) -> tuple[cy.double, cy.double, cy.double, cy.double, cy.double, cy.double,
               cy.double, cy.double]:
        """Per-point data: (z1, z2, a, h, hp, eps, w1, w2).

        w1, w2 are the coefficients of the wind one-form omega(v) = w1 v1 + w2 v2.
        Field ranges are enforced here, at every evaluation site.
        """
        z1: cy.double
        z2: cy.double
        z1, z2 = self.terrain.gradient(x, y)
        a: cy.double = self.fa.value(t, x, y)
        if a <= 0.0:
            raise FieldRangeError(
                f"field 'a' must be positive, got {a:g} at t={t:g}, p=({x:g}, {y:g})"
            )
        h: cy.double = self.fh.value(t, x, y)
        if h <= 0.0:
            raise FieldRangeError(
                f"field 'h' must be positive, got {h:g} at t={t:g}, p=({x:g}, {y:g})"
            )
        hp: cy.double = self.fhp.value(t, x, y)
        if hp <= 0.0:
            raise FieldRangeError(
                f"field 'h_prime' must be positive, got {hp:g} at t={t:g}, p=({x:g}, {y:g})"
            )
        eps: cy.double = self.feps.value(t, x, y)
        if eps < 0.0 or eps >= 1.0:
            raise FieldRangeError(
                f"field 'epsilon' must lie in [0, 1), got {eps:g} at t={t:g}, p=({x:g}, {y:g})"
            )
        phi: cy.double = self.fphi.value(t, x, y)
        ct: cy.double
        st: cy.double
        if self.wind_aerial:
            ct, st = aerial_to_surface(z1, z2, phi)
            dev: cy.double = fabs(ct * ct + st * st - 1.0)
            if dev > 1e-3:
                self.angle_dev_count += 1
                if dev > self.angle_dev_max:
                    self.angle_dev_max = dev
        else:
            ct = cos(phi)
            st = sin(phi)
        s1: cy.double = sqrt(1.0 + z1 * z1)
        s2: cy.double = sqrt(1.0 + z2 * z2)
        w1: cy.double = s1 * ct + (z1 * z2 / s2) * st
        w2: cy.double = (z1 * z2 / s1) * ct + s2 * st
        return (z1, z2, a, h, hp, eps, w1, w2)

    @cy.ccall
    def point_data(self, t: cy.double, x: cy.double, y: cy.double) -> tuple:
        return self._point(t, x, y)

    @cy.ccall
    def surface_wind(
        self, t: cy.double, x: cy.double, y: cy.double
    ) -> tuple[cy.double, cy.double]:
        """(cos, sin) of the on-surface wind angle at (t, p)."""
        phi: cy.double = self.fphi.value(t, x, y)
        if not self.wind_aerial:
            return (cos(phi), sin(phi))
        z1: cy.double
        z2: cy.double
        z1, z2 = self.terrain.gradient(x, y)
        return aerial_to_surface(z1, z2, phi)

    @cy.cfunc
    def _F_from(
        self, z1: cy.double, z2: cy.double, a: cy.double, h: cy.double,
        hp: cy.double, eps: cy.double, w1: cy.double, w2: cy.double,
        v1: cy.double, v2: cy.double,
    ) -> cy.double:
        beta: cy.double = z1 * v1 + z2 * v2
        a2: cy.double = v1 * v1 + v2 * v2 + beta * beta
        if a2 == 0.0:
            raise ZeroVectorError("metric requires a nonzero vector")
        al: cy.double = sqrt(a2)
        om: cy.double = w1 * v1 + w2 * v2
        rho: cy.double = al - eps * om
        if rho <= 0.0:
            raise FieldRangeError(
                "wind ellipse term degenerate: alpha - eps*omega <= 0 "
                f"(eps={eps:g})"
            )
        den: cy.double = a * (1.0 - eps * eps) * a2 / rho + h * al + hp * beta
        if den <= 0.0:
            raise FieldRangeError(
                "flame term nonpositive: h*alpha + h'*beta <= 0 "
                "(h' too large for this slope)"
            )
        return a2 / den

    @cy.cfunc
    def _f2_from(
        self, z1: cy.double, z2: cy.double, a: cy.double, h: cy.double,
        hp: cy.double, eps: cy.double, w1: cy.double, w2: cy.double,
        v1: cy.double, v2: cy.double,
    ) -> cy.double:
        f: cy.double = self._F_from(z1, z2, a, h, hp, eps, w1, w2, v1, v2)
        return f * f

    @cy.ccall
    def metric_value(
        self, t: cy.double, x: cy.double, y: cy.double, v1: cy.double, v2: cy.double
    ) -> cy.double:
        z1: cy.double; z2: cy.double; a: cy.double; h: cy.double
        hp: cy.double; eps: cy.double; w1: cy.double; w2: cy.double
        z1, z2, a, h, hp, eps, w1, w2 = self._point(t, x, y)
        return self._F_from(z1, z2, a, h, hp, eps, w1, w2, v1, v2)

    @cy.ccall
    def fire_speed(
        self, t: cy.double, x: cy.double, y: cy.double, theta: cy.double
    ) -> cy.double:
        """Speed of the fire front in aerial direction theta (on-surface norm)."""
        z1: cy.double; z2: cy.double; a: cy.double; h: cy.double
        hp: cy.double; eps: cy.double; w1: cy.double; w2: cy.double
        z1, z2, a, h, hp, eps, w1, w2 = self._point(t, x, y)
        v1: cy.double = cos(theta)
        v2: cy.double = sin(theta)
        beta: cy.double = z1 * v1 + z2 * v2
        al: cy.double = sqrt(v1 * v1 + v2 * v2 + beta * beta)
        om: cy.double = w1 * v1 + w2 * v2
        cosdt: cy.double = om / al  # cos(theta_tilde - phi_tilde)
        denom: cy.double = 1.0 - eps * cosdt
        if denom <= 0.0:
            raise FieldRangeError("wind ellipse term degenerate in fire_speed")
        return a * (1.0 - eps * eps) / denom + h + hp * beta / al

    @cy.ccall
    def q_residual(
        self, t: cy.double, x: cy.double, y: cy.double, v1: cy.double, v2: cy.double
    ) -> cy.double:
        """Indicatrix residual Q(v): zero exactly on the unit fire velocities."""
        z1: cy.double; z2: cy.double; a: cy.double; h: cy.double
        hp: cy.double; eps: cy.double; w1: cy.double; w2: cy.double
        z1, z2, a, h, hp, eps, w1, w2 = self._point(t, x, y)
        beta: cy.double = z1 * v1 + z2 * v2
        a2: cy.double = v1 * v1 + v2 * v2 + beta * beta
        if a2 == 0.0:
            raise ZeroVectorError("Q requires a nonzero vector")
        al: cy.double = sqrt(a2)
        om: cy.double = w1 * v1 + w2 * v2
        rho: cy.double = al - eps * om
        if rho <= 0.0:
            raise FieldRangeError("wind ellipse term degenerate in Q")
        return a2 * (1.0 - a * (1.0 - eps * eps) / rho) - (h * al + hp * beta)

    @cy.ccall
    def alpha_beta(
        self, x: cy.double, y: cy.double, v1: cy.double, v2: cy.double
    ) -> tuple[cy.double, cy.double]:
        z1: cy.double
        z2: cy.double
        z1, z2 = self.terrain.gradient(x, y)
        beta: cy.double = z1 * v1 + z2 * v2
        return (sqrt(v1 * v1 + v2 * v2 + beta * beta), beta)

    @cy.ccall
    def omega_value(
        self, t: cy.double, x: cy.double, y: cy.double, v1: cy.double, v2: cy.double
    ) -> cy.double:
        z1: cy.double; z2: cy.double; a: cy.double; h: cy.double
        hp: cy.double; eps: cy.double; w1: cy.double; w2: cy.double
        z1, z2, a, h, hp, eps, w1, w2 = self._point(t, x, y)
        return w1 * v1 + w2 * v2

    @cy.ccall
    def indicatrix_point(
        self, t: cy.double, x: cy.double, y: cy.double, theta: cy.double
    ) -> tuple[cy.double, cy.double]:
        c: cy.double = cos(theta)
        s: cy.double = sin(theta)
        f: cy.double = self.metric_value(t, x, y, c, s)
        return (c / f, s / f)

    @cy.cfunc
    def _tensor_from(
        self, z1: cy.double, z2: cy.double, a: cy.double, h: cy.double,
        hp: cy.double, eps: cy.double, w1: cy.double, w2: cy.double,
        v1: cy.double, v2: cy.double,
    ) -> tuple[cy.double, cy.double, cy.double]:
        """Closed-form fundamental tensor (g11, g12, g22) at direction v.

        Second derivatives of F^2 = alpha^4 / D^2 assembled from the exact
        first and second derivatives of alpha, beta, omega and D; avoids the
        roundoff floor of nested finite differences inside the Christoffel
        derivatives.
        """
        beta: cy.double = z1 * v1 + z2 * v2
        a2: cy.double = v1 * v1 + v2 * v2 + beta * beta
        if a2 == 0.0:
            raise ZeroVectorError("fundamental tensor requires a nonzero vector")
        al: cy.double = sqrt(a2)
        V1: cy.double = v1 + beta * z1
        V2: cy.double = v2 + beta * z2
        al_1: cy.double = V1 / al
        al_2: cy.double = V2 / al
        M11: cy.double = 1.0 + z1 * z1
        M12: cy.double = z1 * z2
        M22: cy.double = 1.0 + z2 * z2
        al_11: cy.double = (M11 - al_1 * al_1) / al
        al_12: cy.double = (M12 - al_1 * al_2) / al
        al_22: cy.double = (M22 - al_2 * al_2) / al

        om: cy.double = w1 * v1 + w2 * v2
        rho: cy.double = al - eps * om
        if rho <= 0.0:
            raise FieldRangeError("wind ellipse term degenerate in tensor")
        rho_1: cy.double = al_1 - eps * w1
        rho_2: cy.double = al_2 - eps * w2

        A: cy.double = a * (1.0 - eps * eps)
        E: cy.double = A / rho
        D: cy.double = E * a2 + h * al + hp * beta
        if D <= 0.0:
            raise FieldRangeError("flame term nonpositive in tensor")
        B: cy.double = A * a2 / (rho * rho)
        D_1: cy.double = 2.0 * E * al * al_1 - B * rho_1 + h * al_1 + hp * z1
        D_2: cy.double = 2.0 * E * al * al_2 - B * rho_2 + h * al_2 + hp * z2

        # N_i = 2 alpha alpha_i rho - alpha^2 rho_i and its v-derivatives.
        N_1: cy.double = 2.0 * al * al_1 * rho - a2 * rho_1
        N_2: cy.double = 2.0 * al * al_2 * rho - a2 * rho_2
        N_11: cy.double = (2.0 * al_1 * al_1 * rho + 2.0 * al * al_11 * rho
                           + 2.0 * al * al_1 * rho_1 - 2.0 * al * al_1 * rho_1
                           - a2 * al_11)
        N_12: cy.double = (2.0 * al_2 * al_1 * rho + 2.0 * al * al_12 * rho
                           + 2.0 * al * al_1 * rho_2 - 2.0 * al * al_2 * rho_1
                           - a2 * al_12)
        N_22: cy.double = (2.0 * al_2 * al_2 * rho + 2.0 * al * al_22 * rho
                           + 2.0 * al * al_2 * rho_2 - 2.0 * al * al_2 * rho_2
                           - a2 * al_22)
        rr: cy.double = rho * rho
        D_11: cy.double = A * (N_11 / rr - 2.0 * N_1 * rho_1 / (rr * rho)) + h * al_11
        D_12: cy.double = A * (N_12 / rr - 2.0 * N_1 * rho_2 / (rr * rho)) + h * al_12
        D_22: cy.double = A * (N_22 / rr - 2.0 * N_2 * rho_2 / (rr * rho)) + h * al_22

        P_1: cy.double = 2.0 * al_1 * D - al * D_1
        P_2: cy.double = 2.0 * al_2 * D - al * D_2
        P_11: cy.double = 2.0 * al_11 * D + 2.0 * al_1 * D_1 - al_1 * D_1 - al * D_11
        P_12: cy.double = 2.0 * al_12 * D + 2.0 * al_1 * D_2 - al_2 * D_1 - al * D_12
        P_22: cy.double = 2.0 * al_22 * D + 2.0 * al_2 * D_2 - al_2 * D_2 - al * D_22

        D3: cy.double = D * D * D
        g11: cy.double = a2 * (3.0 * al_1 * P_1 + al * P_11 - 3.0 * al * P_1 * D_1 / D) / D3
        g12: cy.double = a2 * (3.0 * al_2 * P_1 + al * P_12 - 3.0 * al * P_1 * D_2 / D) / D3
        g22: cy.double = a2 * (3.0 * al_2 * P_2 + al * P_22 - 3.0 * al * P_2 * D_2 / D) / D3
        return (g11, g12, g22)

    @cy.ccall
    def tensor(
        self, t: cy.double, x: cy.double, y: cy.double, v1: cy.double, v2: cy.double
    ) -> tuple[cy.double, cy.double, cy.double]:
        z1: cy.double; z2: cy.double; a: cy.double; h: cy.double
        hp: cy.double; eps: cy.double; w1: cy.double; w2: cy.double
        z1, z2, a, h, hp, eps, w1, w2 = self._point(t, x, y)
        return self._tensor_from(z1, z2, a, h, hp, eps, w1, w2, v1, v2)

    @cy.ccall
    def tensor_fd(
        self, t: cy.double, x: cy.double, y: cy.double, v1: cy.double, v2: cy.double,
        rel_step: cy.double,
    ) -> tuple[cy.double, cy.double, cy.double]:
        """Fundamental tensor by central differences of F^2 (validation path)."""
        z1: cy.double; z2: cy.double; a: cy.double; h: cy.double
        hp: cy.double; eps: cy.double; w1: cy.double; w2: cy.double
        z1, z2, a, h, hp, eps, w1, w2 = self._point(t, x, y)
        nv: cy.double = sqrt(v1 * v1 + v2 * v2)
        if nv == 0.0:
            raise ZeroVectorError("fundamental tensor requires a nonzero vector")
        s: cy.double = rel_step * nv
        c: cy.double = self._f2_from(z1, z2, a, h, hp, eps, w1, w2, v1, v2)
        g11: cy.double = 0.5 * (
            self._f2_from(z1, z2, a, h, hp, eps, w1, w2, v1 + s, v2) - 2.0 * c
            + self._f2_from(z1, z2, a, h, hp, eps, w1, w2, v1 - s, v2)
        ) / (s * s)
        g22: cy.double = 0.5 * (
            self._f2_from(z1, z2, a, h, hp, eps, w1, w2, v1, v2 + s) - 2.0 * c
            + self._f2_from(z1, z2, a, h, hp, eps, w1, w2, v1, v2 - s)
        ) / (s * s)
        g12: cy.double = 0.125 * (
            self._f2_from(z1, z2, a, h, hp, eps, w1, w2, v1 + s, v2 + s)
            - self._f2_from(z1, z2, a, h, hp, eps, w1, w2, v1 + s, v2 - s)
            - self._f2_from(z1, z2, a, h, hp, eps, w1, w2, v1 - s, v2 + s)
            + self._f2_from(z1, z2, a, h, hp, eps, w1, w2, v1 - s, v2 - s)
        ) / (s * s)
        return (g11, g12, g22)

    @cy.ccall
    def g_product(
        self, t: cy.double, x: cy.double, y: cy.double,
        v1: cy.double, v2: cy.double, u1: cy.double, u2: cy.double,
    ) -> cy.double:
        """g_v(v, u): the closed-form directional product of the metric."""
        z1: cy.double; z2: cy.double; a: cy.double; h: cy.double
        hp: cy.double; eps: cy.double; w1: cy.double; w2: cy.double
        z1, z2, a, h, hp, eps, w1, w2 = self._point(t, x, y)
        beta_v: cy.double = z1 * v1 + z2 * v2
        a2: cy.double = v1 * v1 + v2 * v2 + beta_v * beta_v
        if a2 == 0.0:
            raise ZeroVectorError("g_v(v, u) requires nonzero v")
        al: cy.double = sqrt(a2)
        beta_u: cy.double = z1 * u1 + z2 * u2
        S: cy.double = v1 * u1 + v2 * u2 + beta_v * beta_u
        om_v: cy.double = w1 * v1 + w2 * v2
        om_u: cy.double = w1 * u1 + w2 * u2
        rho: cy.double = al - eps * om_v
        if rho <= 0.0:
            raise FieldRangeError("wind ellipse term degenerate in g_v(v, u)")
        A: cy.double = a * (1.0 - eps * eps)
        D: cy.double = A * a2 / rho + h * al + hp * beta_v
        if D <= 0.0:
            raise FieldRangeError("flame term nonpositive in g_v(v, u)")
        return (a2 / (D * D * D)) * (
            2.0 * S * D
            + (A / (rho * rho)) * (eps * a2 * (2.0 * S * om_v - a2 * om_u) - a2 * al * S)
            - h * al * S
            - hp * a2 * beta_u
        )

    @cy.cfunc
    def _tensor_at(
        self, t: cy.double, x: cy.double, y: cy.double, v1: cy.double, v2: cy.double
    ) -> tuple[cy.double, cy.double, cy.double]:
        z1: cy.double; z2: cy.double; a: cy.double; h: cy.double
        hp: cy.double; eps: cy.double; w1: cy.double; w2: cy.double
        z1, z2, a, h, hp, eps, w1, w2 = self._point(t, x, y)
        return self._tensor_from(z1, z2, a, h, hp, eps, w1, w2, v1, v2)

    @cy.cfunc
    def _rhs(
        self, t: cy.double, x: cy.double, y: cy.double, vx: cy.double, vy: cy.double
    ) -> tuple[cy.double, cy.double]:
        """Acceleration of the t-parametrized lightlike geodesic.

        d2x^k/dt2 = -gamma^k_ij vhat^i vhat^j + gamma^0_ij vhat^i vhat^j vx^k
        with vhat = (1, vx, vy); the formal Christoffel symbols contract to
        the unrolled expressions below thanks to the block structure of the
        spacetime tensor (g00 = 1, g0k = 0, spatial block = -g^F).
        """
        g11: cy.double; g12: cy.double; g22: cy.double
        g11, g12, g22 = self._tensor_at(t, x, y, vx, vy)
        det: cy.double = g11 * g22 - g12 * g12
        if det <= 1e-14 * (g11 + g22) * (g11 + g22) or g11 + g22 <= 0.0:
            raise SingularTensorError(
                f"fundamental tensor not positive definite at t={t:g}, "
                f"p=({x:g}, {y:g}); metric not strongly convex there"
            )
        i11: cy.double = g22 / det
        i12: cy.double = -g12 / det
        i22: cy.double = g11 / det

        p11: cy.double; p12: cy.double; p22: cy.double
        m11: cy.double; m12: cy.double; m22: cy.double

        p11, p12, p22 = self._tensor_at(t + self.fd_t, x, y, vx, vy)
        m11, m12, m22 = self._tensor_at(t - self.fd_t, x, y, vx, vy)
        dt_g11: cy.double = (p11 - m11) / (2.0 * self.fd_t)
        dt_g12: cy.double = (p12 - m12) / (2.0 * self.fd_t)
        dt_g22: cy.double = (p22 - m22) / (2.0 * self.fd_t)

        p11, p12, p22 = self._tensor_at(t, x + self.fd_x, y, vx, vy)
        m11, m12, m22 = self._tensor_at(t, x - self.fd_x, y, vx, vy)
        dx_g11: cy.double = (p11 - m11) / (2.0 * self.fd_x)
        dx_g12: cy.double = (p12 - m12) / (2.0 * self.fd_x)
        dx_g22: cy.double = (p22 - m22) / (2.0 * self.fd_x)

        p11, p12, p22 = self._tensor_at(t, x, y + self.fd_y, vx, vy)
        m11, m12, m22 = self._tensor_at(t, x, y - self.fd_y, vx, vy)
        dy_g11: cy.double = (p11 - m11) / (2.0 * self.fd_y)
        dy_g12: cy.double = (p12 - m12) / (2.0 * self.fd_y)
        dy_g22: cy.double = (p22 - m22) / (2.0 * self.fd_y)

        T1: cy.double = dt_g11 * vx + dt_g12 * vy
        T2: cy.double = dt_g12 * vx + dt_g22 * vy
        S1: cy.double = (0.5 * vx * vx * dx_g11 + vx * vy * dy_g11
                         + vy * vy * (dy_g12 - 0.5 * dx_g22))
        S2: cy.double = (0.5 * vy * vy * dy_g22 + vx * vy * dx_g22
                         + vx * vx * (dx_g12 - 0.5 * dy_g11))
        G0: cy.double = 0.5 * (dt_g11 * vx * vx + 2.0 * dt_g12 * vx * vy
                               + dt_g22 * vy * vy)
        A1: cy.double = T1 + S1
        A2: cy.double = T2 + S2
        ax: cy.double = -(i11 * A1 + i12 * A2) + G0 * vx
        ay: cy.double = -(i12 * A1 + i22 * A2) + G0 * vy
        return (ax, ay)

    @cy.ccall
    def rhs(
        self, t: cy.double, x: cy.double, y: cy.double, vx: cy.double, vy: cy.double
    ) -> tuple[cy.double, cy.double]:
        return self._rhs(t, x, y, vx, vy)

    @cy.ccall
    def rk4_step(
        self, t: cy.double, x: cy.double, y: cy.double,
        vx: cy.double, vy: cy.double, dt: cy.double, renorm: cy.bint,
    ) -> tuple[cy.double, cy.double, cy.double, cy.double]:
        ax1: cy.double; ay1: cy.double
        ax2: cy.double; ay2: cy.double
        ax3: cy.double; ay3: cy.double
        ax4: cy.double; ay4: cy.double
        ax1, ay1 = self._rhs(t, x, y, vx, vy)
        h2: cy.double = 0.5 * dt
        ax2, ay2 = self._rhs(t + h2, x + h2 * vx, y + h2 * vy,
                             vx + h2 * ax1, vy + h2 * ay1)
        ax3, ay3 = self._rhs(t + h2, x + h2 * (vx + h2 * ax1), y + h2 * (vy + h2 * ay1),
                             vx + h2 * ax2, vy + h2 * ay2)
        ax4, ay4 = self._rhs(t + dt, x + dt * (vx + h2 * ax2), y + dt * (vy + h2 * ay2),
                             vx + dt * ax3, vy + dt * ay3)
        sixth: cy.double = dt / 6.0
        nx: cy.double = x + sixth * (vx + 2.0 * (vx + h2 * ax1) + 2.0 * (vx + h2 * ax2)
                                     + (vx + dt * ax3))
        ny: cy.double = y + sixth * (vy + 2.0 * (vy + h2 * ay1) + 2.0 * (vy + h2 * ay2)
                                     + (vy + dt * ay3))
        nvx: cy.double = vx + sixth * (ax1 + 2.0 * ax2 + 2.0 * ax3 + ax4)
        nvy: cy.double = vy + sixth * (ay1 + 2.0 * ay2 + 2.0 * ay3 + ay4)
        if renorm:
            f: cy.double = self.metric_value(t + dt, nx, ny, nvx, nvy)
            nvx /= f
            nvy /= f
        return (nx, ny, nvx, nvy)

    @cy.ccall
    def advance(
        self, states: cy.double[:, ::1], status: cy.int[::1], death_t: cy.double[::1],
        t0: cy.double, dt: cy.double, nsteps: cy.int, renorm: cy.bint,
        ixmin: cy.double, ixmax: cy.double, iymin: cy.double, iymax: cy.double,
        lenient: cy.bint,
    ) -> cy.int:
        """Step every live trajectory nsteps times; mark boundary exits.

        states rows are (x, y, vx, vy).  A trajectory whose position enters
        the margin strip (outside the inset rectangle) is frozen and marked
        STATUS_LEFT_DOMAIN; integration of the others is unaffected.  With
        lenient=True a singular fundamental tensor (non-convex direction)
        also freezes the trajectory instead of aborting the run.
        Returns the number of live trajectories.
        """
        n: cy.int = states.shape[0]
        alive: cy.int = 0
        k: cy.int
        i: cy.int
        t: cy.double
        nx: cy.double
        ny: cy.double
        nvx: cy.double
        nvy: cy.double
        for k in range(nsteps):
            t = t0 + k * dt
            for i in range(n):
                if status[i] != STATUS_LIVE:
                    continue
                x: cy.double = states[i, 0]
                y: cy.double = states[i, 1]
                if x < ixmin or x > ixmax or y < iymin or y > iymax:
                    status[i] = STATUS_LEFT_DOMAIN
                    death_t[i] = t
                    continue
                try:
                    nx, ny, nvx, nvy = self.rk4_step(
                        t, x, y, states[i, 2], states[i, 3], dt, renorm
                    )
                except OutOfDomainError:
                    status[i] = STATUS_LEFT_DOMAIN
                    death_t[i] = t
                    continue
                except SingularTensorError:
                    if not lenient:
                        raise
                    status[i] = STATUS_LEFT_DOMAIN
                    death_t[i] = t
                    continue
                states[i, 0] = nx
                states[i, 1] = ny
                states[i, 2] = nvx
                states[i, 3] = nvy
        for i in range(n):
            if status[i] == STATUS_LIVE:
                x2: cy.double = states[i, 0]
                y2: cy.double = states[i, 1]
                if x2 < ixmin or x2 > ixmax or y2 < iymin or y2 > iymax:
                    status[i] = STATUS_LEFT_DOMAIN
                    death_t[i] = t0 + nsteps * dt
                else:
                    alive += 1
        return alive

    @cy.ccall
    def edge_costs(
        self, t: cy.double, x: cy.double, y: cy.double,
        offs: cy.double[:, ::1], out: cy.double[::1],
    ) -> cy.int:
        """Traversal times F_mid(q - p) for the oracle stencil around (x, y)."""
        k: cy.int
        for k in range(offs.shape[0]):
            dx: cy.double = offs[k, 0]
            dy: cy.double = offs[k, 1]
            out[k] = self.metric_value(t, x + 0.5 * dx, y + 0.5 * dy, dx, dy)
        return offs.shape[0]
