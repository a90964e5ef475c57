"""Environment fields a, h, h', epsilon, wind angle, and their expression language.

Grammar (whitespace-insensitive)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right-associative, binds above unary minus
    atom   := NUMBER | 't' | 'x' | 'y' | 'pi' | FUNC '(' expr ')' | '(' expr ')'
    FUNC   := sin | cos | tan | exp | sqrt | abs

Numbers accept scientific notation.  Evaluation is total on finite inputs
except division by zero, sqrt of a negative, and fractional powers of
negatives, which raise EvalError (as do nonfinite results).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from firefront.backend import engine
from firefront.errors import EvalError, ParseError
from firefront.terrain import AerialPoint, Terrain, gradient

FUNCTIONS = ("sin", "cos", "tan", "exp", "sqrt", "abs")
VARIABLES = ("t", "x", "y")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * / ^
    lhs: "Expr"
    rhs: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Num | Var | Neg | BinOp | Call


class _Parser:
    def __init__(self, source: str):
        self.src = source
        self.pos = 0

    def error(self, message: str, pos: int | None = None):
        raise ParseError(self.pos if pos is None else pos, message)

    def skip_ws(self):
        while self.pos < len(self.src) and self.src[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.src[self.pos] if self.pos < len(self.src) else ""

    def take(self, ch: str) -> bool:
        if self.peek() == ch:
            self.pos += 1
            return True
        return False

    def parse(self) -> Expr:
        node = self.expr()
        self.skip_ws()
        if self.pos != len(self.src):
            self.error(f"unexpected trailing input {self.src[self.pos:]!r}")
        return node

    def expr(self) -> Expr:
        node = self.term()
        while True:
            c = self.peek()
            if c == "+" or c == "-":
                self.pos += 1
                node = BinOp(c, node, self.term())
            else:
                return node

    def term(self) -> Expr:
        node = self.unary()
        while True:
            c = self.peek()
            if c == "*" or c == "/":
                self.pos += 1
                node = BinOp(c, node, self.unary())
            else:
                return node

    def unary(self) -> Expr:
        if self.take("-"):
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        node = self.atom()
        if self.take("^"):
            return BinOp("^", node, self.unary())
        return node

    def atom(self) -> Expr:
        c = self.peek()
        start = self.pos
        if c == "(":
            self.pos += 1
            node = self.expr()
            if not self.take(")"):
                self.error("expected ')'", start)
            return node
        if c.isdigit() or c == ".":
            return self.number()
        if c.isalpha() or c == "_":
            return self.identifier()
        if c == "":
            self.error("unexpected end of input")
        self.error(f"unexpected character {c!r}")

    def number(self) -> Num:
        start = self.pos
        src = self.src
        n = len(src)
        while self.pos < n and src[self.pos].isdigit():
            self.pos += 1
        if self.pos < n and src[self.pos] == ".":
            self.pos += 1
            while self.pos < n and src[self.pos].isdigit():
                self.pos += 1
        if self.pos < n and src[self.pos] in "eE":
            mark = self.pos
            self.pos += 1
            if self.pos < n and src[self.pos] in "+-":
                self.pos += 1
            if self.pos < n and src[self.pos].isdigit():
                while self.pos < n and src[self.pos].isdigit():
                    self.pos += 1
            else:
                self.pos = mark  # the e belongs to something else; stop the number
        text = src[start:self.pos]
        try:
            return Num(float(text))
        except ValueError:
            self.error(f"bad number {text!r}", start)

    def identifier(self) -> Expr:
        start = self.pos
        src = self.src
        while self.pos < len(src) and (src[self.pos].isalnum() or src[self.pos] == "_"):
            self.pos += 1
        name = src[start:self.pos]
        if name == "pi":
            return Num(math.pi)
        if name in VARIABLES:
            return Var(name)
        if name in FUNCTIONS:
            if not self.take("("):
                self.error(f"function {name!r} requires parentheses", start)
            node = self.expr()
            if not self.take(")"):
                self.error("expected ')'", start)
            return Call(name, node)
        self.error(f"unknown identifier {name!r}", start)


def parse_expression(source: str) -> Expr:
    """Parse the field mini-language; raises ParseError with a byte offset."""
    return _Parser(source).parse()


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _prec(node: Expr) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _PREC["neg"]
    return 9


def to_source(node: Expr) -> str:
    """Pretty-print a parser-shaped AST (literals non-negative, as the parser
    produces); reparsing yields a structurally identical tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        inner = to_source(node.arg)
        if _prec(node.arg) < _PREC["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    if isinstance(node, BinOp):
        p = _PREC[node.op]
        lhs = to_source(node.lhs)
        rhs = to_source(node.rhs)
        # '^' is right-associative and binds above unary minus: parenthesize a
        # left operand of equal or lower precedence.  The others parse
        # left-associative, so an equal-precedence right child needs parens
        # to keep the tree shape (not just the value) through a reparse.
        if _prec(node.lhs) < p or (node.op == "^" and _prec(node.lhs) <= p):
            lhs = f"({lhs})"
        if _prec(node.rhs) < p or (node.op != "^" and _prec(node.rhs) == p):
            rhs = f"({rhs})"
        return f"{lhs}{node.op}{rhs}"
    raise TypeError(f"not an expression node: {node!r}")


_OPCODE = {"+": engine.OP_ADD, "-": engine.OP_SUB, "*": engine.OP_MUL,
           "/": engine.OP_DIV, "^": engine.OP_POW}
_FUNC_OP = {"sin": engine.OP_SIN, "cos": engine.OP_COS, "tan": engine.OP_TAN,
            "exp": engine.OP_EXP, "sqrt": engine.OP_SQRT, "abs": engine.OP_ABS}
_VAR_OP = {"t": engine.OP_T, "x": engine.OP_X, "y": engine.OP_Y}


def compile_expression(node: Expr) -> tuple[np.ndarray, np.ndarray, int]:
    """Lower an AST to the engine's stack program: (codes, consts, max_depth)."""
    codes: list[int] = []
    consts: list[float] = []

    def emit(n: Expr) -> int:
        if isinstance(n, Num):
            codes.extend((engine.OP_CONST, len(consts)))
            consts.append(n.value)
            return 1
        if isinstance(n, Var):
            codes.extend((_VAR_OP[n.name], 0))
            return 1
        if isinstance(n, Neg):
            d = emit(n.arg)
            codes.extend((engine.OP_NEG, 0))
            return d
        if isinstance(n, Call):
            d = emit(n.arg)
            codes.extend((_FUNC_OP[n.func], 0))
            return d
        if isinstance(n, BinOp):
            dl = emit(n.lhs)
            dr = emit(n.rhs)
            codes.extend((_OPCODE[n.op], 0))
            return max(dl, dr + 1)
        raise TypeError(f"not an expression node: {n!r}")

    depth = emit(node)
    if depth > engine.VM_STACK_SIZE:
        raise ParseError(0, f"expression too deep (stack {depth} > {engine.VM_STACK_SIZE})")
    return (np.asarray(codes, dtype=np.int32),
            np.asarray(consts, dtype=np.float64), depth)


def uses_time(node: Expr) -> bool:
    if isinstance(node, Var):
        return node.name == "t"
    if isinstance(node, Neg):
        return uses_time(node.arg)
    if isinstance(node, Call):
        return uses_time(node.arg)
    if isinstance(node, BinOp):
        return uses_time(node.lhs) or uses_time(node.rhs)
    return False


@dataclass(frozen=True)
class ScalarField:
    """A constant or an expression of (t, x, y)."""

    source: str
    expr: Expr | None  # None for constants
    value: float = 0.0

    @staticmethod
    def constant(value: float) -> "ScalarField":
        return ScalarField(source=f"{value:.17g}", expr=None, value=float(value))

    @staticmethod
    def parse(source: str) -> "ScalarField":
        expr = parse_expression(source)
        if isinstance(expr, Num):  # constant-fold a bare literal
            return ScalarField(source=source, expr=None, value=expr.value)
        return ScalarField(source=source, expr=expr)

    @property
    def is_const(self) -> bool:
        return self.expr is None

    @property
    def time_dependent(self) -> bool:
        return self.expr is not None and uses_time(self.expr)


def as_field(value) -> ScalarField:
    if isinstance(value, ScalarField):
        return value
    if isinstance(value, str):
        return ScalarField.parse(value)
    return ScalarField.constant(value)


_EMPTY_I = np.zeros(0, dtype=np.int32)
_EMPTY_D = np.zeros(0, dtype=np.float64)


def field_program(field: ScalarField, name: str = ""):
    """The engine-side program for this field."""
    if field.is_const:
        return engine.FieldProgram(True, field.value, _EMPTY_I, _EMPTY_D, name)
    codes, consts, _ = compile_expression(field.expr)
    return engine.FieldProgram(False, 0.0, np.ascontiguousarray(codes),
                               np.ascontiguousarray(consts), name)


def eval_field(field: ScalarField, t: float, p: AerialPoint) -> float:
    """Evaluate at (t, p); deterministic, raises EvalError on domain errors."""
    prog = field_program(field, field.source)
    return prog.value(t, p[0], p[1])


def eval_expression(node: Expr, t: float = 0.0, x: float = 0.0, y: float = 0.0) -> float:
    codes, consts, _ = compile_expression(node)
    prog = engine.FieldProgram(False, 0.0, codes, consts, "<expr>")
    return prog.value(t, x, y)


def wind_angle_to_surface(terrain: Terrain, p: AerialPoint, phi: float) -> tuple[float, float]:
    """(cos, sin) of the on-surface angle over the aerial angle phi.

    Implements the two quotient formulas verbatim; they normalize the x and
    y parts separately, so the pair is not exactly unit on steep
    anisotropic slopes (callers may check and warn).
    """
    z1, z2 = gradient(terrain, p)
    return engine.aerial_to_surface(z1, z2, phi)
