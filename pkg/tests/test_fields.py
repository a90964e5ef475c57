import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from firefront.errors import EvalError, ParseError
from firefront.fields import (
    BinOp,
    Call,
    Neg,
    Num,
    ScalarField,
    Var,
    eval_field,
    parse_expression,
    to_source,
    uses_time,
    wind_angle_to_surface,
)
from firefront.terrain import PlaneTerrain

P0 = (0.0, 0.0)


class TestParser:
    def test_fig8_fuel_growth(self):
        f = ScalarField.parse("1+t")
        assert eval_field(f, 2.0, P0) == 3.0

    def test_fig8_space_fuel(self):
        f = ScalarField.parse("1+x^2/2")
        assert eval_field(f, 0.0, (2.0, 0.0)) == 3.0

    def test_function_call(self):
        f = ScalarField.parse("2*sin(pi/2)")
        assert eval_field(f, 0.0, P0) == 2.0

    def test_precedence_pow_over_mul(self):
        assert eval_field(ScalarField.parse("2*3^2"), 0, P0) == 18.0

    def test_pow_right_associative(self):
        assert eval_field(ScalarField.parse("2^3^2"), 0, P0) == 512.0

    def test_pow_binds_above_unary_minus(self):
        assert eval_field(ScalarField.parse("-2^2"), 0, P0) == -4.0

    def test_signed_exponent(self):
        assert eval_field(ScalarField.parse("2^-2"), 0, P0) == 0.25

    def test_division_left_associative(self):
        assert eval_field(ScalarField.parse("8/4/2"), 0, P0) == 1.0

    def test_scientific_literal(self):
        assert eval_field(ScalarField.parse("1.5e-3"), 0, P0) == 1.5e-3

    def test_whitespace_insensitive(self):
        a = parse_expression("1 + x ^ 2 / 2")
        b = parse_expression("1+x^2/2")
        assert a == b

    @pytest.mark.parametrize("src,pos", [
        ("1+foo", 2),        # unknown identifier at offset 2
        ("(1+2", 0),         # unbalanced paren opened at 0
        ("1+2)", 3),         # trailing token
        ("sin 3", 0),        # function without parens
        ("1+*2", 2),
    ])
    def test_errors_carry_position(self, src, pos):
        with pytest.raises(ParseError) as err:
            parse_expression(src)
        assert err.value.position == pos

    def test_empty_input(self):
        with pytest.raises(ParseError):
            parse_expression("   ")


CORPUS = [
    "1+t", "1+x^2/2", "2*t", "2*sin(pi/2)", "1.5e-3", "x*y-t", "sqrt(1+x^2)",
    "abs(x-y)", "exp(-x^2/2-y^2/2)", "3*exp(-(x^2+y^2)/2)", "-x", "--x",
    "-(x+y)", "(-x)^2", "-x^2", "x^-2", "2^3^2", "8/4/2", "1-2-3", "1-(2-3)",
    "a" and "t+t*t", "cos(t)*sin(x)+tan(y)", "pi", "2*pi*t", "1/(1+t)",
    "x/y/t", "x-y+t", "x-(y+t)", "sqrt(abs(x))", "exp(t)^2", "0.25",
    "(x+y)*(x-y)", "x^2^x",
]


class TestRoundTrip:
    @pytest.mark.parametrize("src", CORPUS)
    def test_corpus_round_trip(self, src):
        ast = parse_expression(src)
        assert parse_expression(to_source(ast)) == ast

    def test_eval_pure(self):
        f = ScalarField.parse("sin(t)*exp(-x^2)+y/3")
        a = eval_field(f, 0.37, (1.21, -0.5))
        b = eval_field(f, 0.37, (1.21, -0.5))
        assert a == b  # bit-for-bit


_expr = st.deferred(lambda: st.one_of(
    st.floats(min_value=0.0, max_value=1e6, allow_nan=False).map(Num),
    st.sampled_from(["t", "x", "y"]).map(Var),
    st.builds(Neg, _expr),
    st.builds(Call, st.sampled_from(["sin", "cos", "tan", "exp", "sqrt", "abs"]), _expr),
    st.builds(BinOp, st.sampled_from(list("+-*/^")), _expr, _expr),
))


class TestRoundTripProperty:
    @settings(max_examples=300, deadline=None)
    @given(_expr)
    def test_print_parse_identity(self, ast):
        assert parse_expression(to_source(ast)) == ast


class TestEvalErrors:
    def test_division_by_zero(self):
        with pytest.raises(EvalError, match="division by zero"):
            eval_field(ScalarField.parse("x/0"), 0.0, P0)

    def test_sqrt_negative(self):
        with pytest.raises(EvalError, match="sqrt"):
            eval_field(ScalarField.parse("sqrt(x-1)"), 0.0, P0)

    def test_fractional_power_of_negative(self):
        with pytest.raises(EvalError, match="exponent"):
            eval_field(ScalarField.parse("(x-1)^0.5"), 0.0, P0)

    def test_overflow_is_nonfinite(self):
        with pytest.raises(EvalError, match="nonfinite"):
            eval_field(ScalarField.parse("exp(exp(t))"), 100.0, P0)

    def test_integer_power_of_negative_ok(self):
        assert eval_field(ScalarField.parse("(0-2)^2"), 0.0, P0) == 4.0


class TestScalarField:
    def test_constant(self):
        f = ScalarField.constant(0.25)
        assert f.is_const and eval_field(f, 5.0, (9.0, 9.0)) == 0.25

    def test_literal_folds_to_constant(self):
        assert ScalarField.parse("0.25").is_const

    def test_time_dependence_flag(self):
        assert ScalarField.parse("2*t").time_dependent
        assert not ScalarField.parse("x*y").time_dependent
        assert uses_time(parse_expression("sin(cos(2*t))"))


class TestWindAngleToSurface:
    def test_flat_identity(self):
        t = PlaneTerrain(0.0, 0.0)
        phi = math.pi / 6
        c, s = wind_angle_to_surface(t, P0, phi)
        assert (c, s) == pytest.approx((math.cos(phi), math.sin(phi)))

    def test_cross_slope_unchanged(self):
        t = PlaneTerrain(math.sqrt(3.0), 0.0)
        c, s = wind_angle_to_surface(t, P0, math.pi / 2)
        assert (c, s) == pytest.approx((0.0, 1.0), abs=1e-15)

    def test_mild_slope_pair(self):
        # direct substitution into the quotient formulas
        t = PlaneTerrain(0.4, 0.0)
        phi = math.pi / 6
        cph, sph = math.cos(phi), math.sin(phi)
        den = math.sqrt(1.0 + (cph * 0.4) ** 2)
        want_c = cph * (1.0 + 0.16) / (den * math.sqrt(1.16))
        want_s = sph / den
        c, s = wind_angle_to_surface(t, P0, phi)
        assert (c, s) == pytest.approx((want_c, want_s), rel=1e-14)
        # the pair is only approximately unit (formulas kept verbatim)
        assert c * c + s * s == pytest.approx(1.0, abs=1e-3)

    def test_steep_anisotropic_slope_not_unit(self):
        # the two quotient normalizations are separate; only a slope with
        # both components nonzero shows the deviation
        t = PlaneTerrain(3.0, -2.0)
        c, s = wind_angle_to_surface(t, P0, 2.0)
        assert abs(c * c + s * s - 1.0) > 1e-3  # documented deviation

    def test_single_axis_slope_is_exactly_unit(self):
        t = PlaneTerrain(3.0, 0.0)
        c, s = wind_angle_to_surface(t, P0, 2.0)
        assert c * c + s * s == pytest.approx(1.0, abs=1e-15)
