"""Scalar expression trees: parse, evaluate, differentiate, substitute, print.

Grammar (no implicit multiplication):

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?        # right-associative, binds tighter than unary minus
    atom   := NUMBER | 'pi' | NAME | NAME '(' expr ')' | '(' expr ')'

so ``-x^2`` parses as ``-(x^2)``.  Known functions: exp, log, sin, cos, tan,
sqrt, abs.  ``a^b`` with a non-integer exponent means exp(b*log(a)) and
requires a > 0; integer exponents follow ordinary powers (negative bases
allowed).

Differentiation returns a closed expression in the same grammar.  The only
simplification performed anywhere is constant folding: subtrees without free
variables collapse to literals, everything else is left alone.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping

__all__ = [
    "Expression",
    "Num",
    "Const",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "ExpressionError",
    "ParseError",
    "EvaluationError",
    "UnboundVariableError",
    "DomainError",
    "parse",
    "evaluate",
    "differentiate",
    "substitute",
    "to_source",
    "free_variables",
    "fold_constants",
    "compile_expression",
]

FUNCTIONS = ("exp", "log", "sin", "cos", "tan", "sqrt", "abs")
CONSTANTS = {"pi": math.pi}


class ExpressionError(Exception):
    """Base class for every error raised by this module."""


class ParseError(ExpressionError):
    def __init__(self, message: str, offset: int, expected: tuple[str, ...] = ()):
        detail = f"{message} at offset {offset}"
        if expected:
            detail += " (expected " + ", ".join(sorted(expected)) + ")"
        super().__init__(detail)
        self.offset = offset
        self.expected = frozenset(expected)


class EvaluationError(ExpressionError):
    pass


class UnboundVariableError(EvaluationError):
    def __init__(self, name: str):
        super().__init__(f"unbound variable '{name}'")
        self.name = name


class DomainError(EvaluationError):
    pass


# ---------------------------------------------------------------------------
# AST nodes


class Expression:
    """Base node.  Operator overloads build trees without the parser."""

    __slots__ = ()

    def __add__(self, other):
        return BinOp("+", self, _coerce(other))

    def __radd__(self, other):
        return BinOp("+", _coerce(other), self)

    def __sub__(self, other):
        return BinOp("-", self, _coerce(other))

    def __rsub__(self, other):
        return BinOp("-", _coerce(other), self)

    def __mul__(self, other):
        return BinOp("*", self, _coerce(other))

    def __rmul__(self, other):
        return BinOp("*", _coerce(other), self)

    def __truediv__(self, other):
        return BinOp("/", self, _coerce(other))

    def __rtruediv__(self, other):
        return BinOp("/", _coerce(other), self)

    def __pow__(self, other):
        return BinOp("^", self, _coerce(other))

    def __neg__(self):
        return Neg(self)

    def __str__(self):
        return to_source(self)


def _coerce(value) -> "Expression":
    if isinstance(value, Expression):
        return value
    if isinstance(value, (int, float)):
        return Num(float(value))
    raise TypeError(f"cannot use {value!r} in an expression")


@dataclass(frozen=True, slots=True)
class Num(Expression):
    value: float


@dataclass(frozen=True, slots=True)
class Const(Expression):
    """Named constant (currently only pi)."""

    name: str


@dataclass(frozen=True, slots=True)
class Var(Expression):
    name: str


@dataclass(frozen=True, slots=True)
class Neg(Expression):
    operand: Expression


@dataclass(frozen=True, slots=True)
class BinOp(Expression):
    op: str  # one of + - * / ^
    left: Expression
    right: Expression


@dataclass(frozen=True, slots=True)
class Call(Expression):
    fn: str
    arg: Expression


# ---------------------------------------------------------------------------
# Tokenizer / parser

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        pos = m.end()
        kind = m.lastgroup
        if kind == "ws":
            continue
        tokens.append((kind, m.group(), m.start()))
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, value, offset = self.peek()
        if kind == "op" and value == op:
            return self.advance()
        raise ParseError(f"got {value!r}" if value else "unexpected end of input", offset, (op,))

    def parse(self) -> Expression:
        kind, _, offset = self.peek()
        if kind == "eof":
            raise ParseError("empty input", offset, ("expression",))
        node = self.expr()
        kind, value, offset = self.peek()
        if kind != "eof":
            raise ParseError(f"trailing garbage {value!r}", offset, ("end of input",))
        return node

    def expr(self) -> Expression:
        node = self.term()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "+-":
                self.advance()
                node = BinOp(value, node, self.term())
            else:
                return node

    def term(self) -> Expression:
        node = self.unary()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "*/":
                self.advance()
                node = BinOp(value, node, self.unary())
            else:
                return node

    def unary(self) -> Expression:
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expression:
        base = self.atom()
        kind, value, _ = self.peek()
        if kind == "op" and value == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expression:
        kind, value, offset = self.advance()
        if kind == "number":
            return Num(float(value))
        if kind == "name":
            if value in CONSTANTS:
                return Const(value)
            nkind, nvalue, _ = self.peek()
            if nkind == "op" and nvalue == "(":
                if value not in FUNCTIONS:
                    raise ParseError(f"unknown function {value!r}", offset, FUNCTIONS)
                self.advance()
                arg = self.expr()
                self.expect_op(")")
                return Call(value, arg)
            return Var(value)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        if kind == "eof":
            raise ParseError("unexpected end of input", offset, ("expression",))
        raise ParseError(f"unexpected {value!r}", offset, ("expression",))


def parse(text: str) -> Expression:
    """Parse ``text`` into an expression tree (no folding, no rewriting)."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Evaluation.  The compiled form below calls the very same helpers, so both
# paths perform identical floating-point operations.


def _pow(a: float, b: float) -> float:
    if float(b).is_integer():
        if a == 0.0 and b < 0:
            raise DomainError("0 raised to a negative power")
        return a ** b
    if a <= 0.0:
        raise DomainError(f"{a} raised to non-integer power {b}")
    return math.exp(b * math.log(a))


def _div(a: float, b: float) -> float:
    if b == 0.0:
        raise DomainError("division by zero")
    return a / b


def _log(a: float) -> float:
    if a <= 0.0:
        raise DomainError(f"log of non-positive value {a}")
    return math.log(a)


def _sqrt(a: float) -> float:
    if a < 0.0:
        raise DomainError(f"sqrt of negative value {a}")
    return math.sqrt(a)


_CALL_TABLE: dict[str, Callable[[float], float]] = {
    "exp": math.exp,
    "log": _log,
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "sqrt": _sqrt,
    "abs": abs,
}


def evaluate(expr: Expression, bindings: Mapping[str, float] | None = None) -> float:
    """Evaluate ``expr`` with variable ``bindings``.

    Unbound variables and domain violations (log of non-positive, sqrt of
    negative, zero division, non-integer power of a non-positive base) raise,
    they never return NaN silently.
    """
    bindings = bindings or {}
    return _eval(expr, bindings)


def _eval(expr: Expression, bindings: Mapping[str, float]) -> float:
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Var):
        try:
            return float(bindings[expr.name])
        except KeyError:
            raise UnboundVariableError(expr.name) from None
    if isinstance(expr, Const):
        return CONSTANTS[expr.name]
    if isinstance(expr, Neg):
        return -_eval(expr.operand, bindings)
    if isinstance(expr, BinOp):
        a = _eval(expr.left, bindings)
        b = _eval(expr.right, bindings)
        if expr.op == "+":
            return a + b
        if expr.op == "-":
            return a - b
        if expr.op == "*":
            return a * b
        if expr.op == "/":
            return _div(a, b)
        return _pow(a, b)
    if isinstance(expr, Call):
        arg = _eval(expr.arg, bindings)
        try:
            return _CALL_TABLE[expr.fn](arg)
        except (ValueError, OverflowError) as exc:
            raise DomainError(f"{expr.fn}({arg}): {exc}") from None
    raise TypeError(f"not an expression node: {expr!r}")


def free_variables(expr: Expression) -> frozenset[str]:
    if isinstance(expr, Var):
        return frozenset((expr.name,))
    if isinstance(expr, (Num, Const)):
        return frozenset()
    if isinstance(expr, Neg):
        return free_variables(expr.operand)
    if isinstance(expr, Call):
        return free_variables(expr.arg)
    if isinstance(expr, BinOp):
        return free_variables(expr.left) | free_variables(expr.right)
    raise TypeError(f"not an expression node: {expr!r}")


# ---------------------------------------------------------------------------
# Differentiation and substitution


def fold_constants(expr: Expression) -> Expression:
    """Collapse variable-free subtrees to literals; no other rewriting.

    Subtrees whose evaluation fails (e.g. log(-1)) are left intact so the
    error surfaces at evaluation time with its proper context.
    """
    if isinstance(expr, (Num, Var, Const)):
        if isinstance(expr, Const):
            return Num(CONSTANTS[expr.name])
        return expr
    if isinstance(expr, Neg):
        inner = fold_constants(expr.operand)
        folded = Neg(inner)
    elif isinstance(expr, Call):
        folded = Call(expr.fn, fold_constants(expr.arg))
    elif isinstance(expr, BinOp):
        folded = BinOp(expr.op, fold_constants(expr.left), fold_constants(expr.right))
    else:
        raise TypeError(f"not an expression node: {expr!r}")
    if not free_variables(folded):
        try:
            return Num(_eval(folded, {}))
        except EvaluationError:
            return folded
    return folded


def differentiate(expr: Expression, var: str, order: int = 1) -> Expression:
    """Symbolic derivative of ``expr`` w.r.t. ``var``, applied ``order`` times.

    The result is a closed expression in the same grammar with constant
    subtrees folded.
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    node = expr
    for _ in range(order):
        node = fold_constants(_diff(node, var))
    return node


def _diff(expr: Expression, var: str) -> Expression:
    if isinstance(expr, (Num, Const)):
        return Num(0.0)
    if isinstance(expr, Var):
        return Num(1.0) if expr.name == var else Num(0.0)
    if isinstance(expr, Neg):
        return Neg(_diff(expr.operand, var))
    if isinstance(expr, BinOp):
        a, b = expr.left, expr.right
        da, db = _diff(a, var), _diff(b, var)
        if expr.op == "+":
            return BinOp("+", da, db)
        if expr.op == "-":
            return BinOp("-", da, db)
        if expr.op == "*":
            return BinOp("+", BinOp("*", da, b), BinOp("*", a, db))
        if expr.op == "/":
            num = BinOp("-", BinOp("*", da, b), BinOp("*", a, db))
            return BinOp("/", num, BinOp("^", b, Num(2.0)))
        # power rules: constant exponent, constant base, then the general form
        if not free_variables(b):
            dpow = BinOp("*", b, BinOp("^", a, BinOp("-", b, Num(1.0))))
            return BinOp("*", dpow, da)
        if not free_variables(a):
            return BinOp("*", BinOp("*", expr, Call("log", a)), db)
        bracket = BinOp("+", BinOp("*", db, Call("log", a)), BinOp("/", BinOp("*", b, da), a))
        return BinOp("*", expr, bracket)
    if isinstance(expr, Call):
        a = expr.arg
        da = _diff(a, var)
        if expr.fn == "exp":
            return BinOp("*", expr, da)
        if expr.fn == "log":
            return BinOp("/", da, a)
        if expr.fn == "sin":
            return BinOp("*", Call("cos", a), da)
        if expr.fn == "cos":
            return BinOp("*", Neg(Call("sin", a)), da)
        if expr.fn == "tan":
            return BinOp("*", BinOp("+", Num(1.0), BinOp("^", expr, Num(2.0))), da)
        if expr.fn == "sqrt":
            return BinOp("/", da, BinOp("*", Num(2.0), expr))
        # abs: a/|a| * a', undefined at 0 like the derivative itself
        return BinOp("*", BinOp("/", a, expr), da)
    raise TypeError(f"not an expression node: {expr!r}")


def substitute(expr: Expression, var: str, replacement: Expression) -> Expression:
    """Replace every occurrence of ``var`` by ``replacement``.

    Expressions have no binding constructs, so the substitution is trivially
    capture-free.
    """
    if isinstance(expr, Var):
        return replacement if expr.name == var else expr
    if isinstance(expr, (Num, Const)):
        return expr
    if isinstance(expr, Neg):
        return Neg(substitute(expr.operand, var, replacement))
    if isinstance(expr, Call):
        return Call(expr.fn, substitute(expr.arg, var, replacement))
    if isinstance(expr, BinOp):
        return BinOp(
            expr.op,
            substitute(expr.left, var, replacement),
            substitute(expr.right, var, replacement),
        )
    raise TypeError(f"not an expression node: {expr!r}")


# ---------------------------------------------------------------------------
# Printing.  Emits exactly the parens required so parse(to_source(e)) == e.

_PREC_ADD = 1
_PREC_MUL = 2
_PREC_NEG = 3
_PREC_POW = 4
_PREC_ATOM = 5


def _precedence(expr: Expression) -> int:
    if isinstance(expr, Num):
        return _PREC_ATOM if expr.value >= 0 else _PREC_NEG
    if isinstance(expr, (Var, Const, Call)):
        return _PREC_ATOM
    if isinstance(expr, Neg):
        return _PREC_NEG
    if expr.op in "+-":
        return _PREC_ADD
    if expr.op in "*/":
        return _PREC_MUL
    return _PREC_POW


def _format_number(value: float) -> str:
    if value != value or value in (float("inf"), float("-inf")):
        raise ExpressionError(f"cannot print non-finite literal {value}")
    return repr(value)


def to_source(expr: Expression) -> str:
    """Render the tree; ``parse(to_source(e))`` returns a structurally equal tree
    (named constants print as literals once folded, never the other way)."""
    return _print(expr)


def _print(expr: Expression) -> str:
    if isinstance(expr, Num):
        return _format_number(expr.value)
    if isinstance(expr, Const):
        return expr.name
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Neg):
        inner = _print_child(expr.operand, _PREC_NEG, allow_equal=False)
        return "-" + inner
    if isinstance(expr, Call):
        return f"{expr.fn}({_print(expr.arg)})"
    if isinstance(expr, BinOp):
        if expr.op in "+-":
            left = _print_child(expr.left, _PREC_ADD, allow_equal=True)
            right = _print_child(expr.right, _PREC_ADD, allow_equal=False)
            return f"{left} {expr.op} {right}"
        if expr.op in "*/":
            left = _print_child(expr.left, _PREC_MUL, allow_equal=True)
            right = _print_child(expr.right, _PREC_MUL, allow_equal=False)
            return f"{left} {expr.op} {right}"
        # '^' is right-associative and binds above unary minus; the base must
        # be atomic for the string to re-parse to the same tree.
        left = _print_child(expr.left, _PREC_ATOM, allow_equal=True)
        right = _print_child(expr.right, _PREC_NEG, allow_equal=True)
        return f"{left}^{right}"
    raise TypeError(f"not an expression node: {expr!r}")


def _print_child(child: Expression, parent_prec: int, allow_equal: bool) -> str:
    text = _print(child)
    prec = _precedence(child)
    if prec > parent_prec or (prec == parent_prec and allow_equal):
        return text
    return f"({text})"


# ---------------------------------------------------------------------------
# Compilation to a plain Python callable.  Generated code invokes the same
# helper functions as ``evaluate`` in the same order, so results are
# bit-identical; this only exists because tensor assembly evaluates the same
# derivative trees at many thousands of points.


def compile_expression(expr: Expression, arg_names: tuple[str, ...]) -> Callable[..., float]:
    missing = free_variables(expr) - set(arg_names)
    if missing:
        raise UnboundVariableError(sorted(missing)[0])
    body = _emit(expr)
    source = f"def _compiled({', '.join(arg_names)}):\n    return {body}\n"
    namespace = {
        "_pow": _pow,
        "_div": _div,
        "_call_exp": math.exp,
        "_call_log": _log,
        "_call_sin": math.sin,
        "_call_cos": math.cos,
        "_call_tan": math.tan,
        "_call_sqrt": _sqrt,
        "_call_abs": abs,
        "_PI": math.pi,
    }
    code = compile(source, "<expression>", "exec")
    exec(code, namespace)
    return namespace["_compiled"]


def _emit(expr: Expression) -> str:
    if isinstance(expr, Num):
        return f"({float(expr.value)!r})"
    if isinstance(expr, Const):
        return "_PI"
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Neg):
        return f"(-{_emit(expr.operand)})"
    if isinstance(expr, BinOp):
        a, b = _emit(expr.left), _emit(expr.right)
        if expr.op in "+-*":
            return f"({a} {expr.op} {b})"
        if expr.op == "/":
            return f"_div({a}, {b})"
        return f"_pow({a}, {b})"
    if isinstance(expr, Call):
        return f"_call_{expr.fn}({_emit(expr.arg)})"
    raise TypeError(f"not an expression node: {expr!r}")
