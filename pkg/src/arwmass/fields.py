"""Scalar fields on a coordinate chart with exact partial derivatives.

Tensor assembly needs metric components together with first and second
coordinate derivatives (and occasionally third, for validation ratios).  Two
sources supply them: symbolic expressions in the chart coordinates, and
functions of the time coordinate alone whose derivatives are known in closed
form (the Schwarzschild-AdS profile is carried that way because its time
coordinate has no closed-form inverse).  Both are wrapped here behind one
small interface.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Mapping

from .expr import (
    Expression,
    Num,
    UnboundVariableError,
    compile_expression,
    differentiate,
    free_variables,
)

#: Chart coordinate names, time first.  Index 0 is always tau.
COORD_NAMES = ("tau", "theta1", "theta2", "theta3")


class ScalarField(ABC):
    """A scalar function of the chart coordinates with exact partials."""

    @abstractmethod
    def partial(self, event, axes: tuple[int, ...] = ()) -> float:
        """Mixed partial derivative along coordinate ``axes`` at ``event``.

        ``axes`` is a tuple of coordinate indices (possibly with repeats);
        the empty tuple returns the value itself.  Order of axes does not
        matter.
        """

    def value(self, event) -> float:
        return self.partial(event, ())


class ExprField(ScalarField):
    """Field backed by an expression; partials are symbolic, then compiled."""

    def __init__(self, expr: Expression, dim: int):
        names = COORD_NAMES[:dim]
        unknown = free_variables(expr) - set(names)
        if unknown:
            raise UnboundVariableError(sorted(unknown)[0])
        self.dim = dim
        self._names = names
        self._exprs: dict[tuple[int, ...], Expression] = {(): expr}
        self._compiled = {(): compile_expression(expr, names)}

    def _expression(self, key: tuple[int, ...]) -> Expression:
        found = self._exprs.get(key)
        if found is None:
            base = self._expression(key[:-1])
            found = differentiate(base, self._names[key[-1]])
            self._exprs[key] = found
        return found

    def partial(self, event, axes: tuple[int, ...] = ()) -> float:
        key = tuple(sorted(axes))
        fn = self._compiled.get(key)
        if fn is None:
            fn = compile_expression(self._expression(key), self._names)
            self._compiled[key] = fn
        return fn(*event[: self.dim])


class ConstField(ScalarField):
    def __init__(self, value: float):
        self._value = float(value)

    def partial(self, event, axes: tuple[int, ...] = ()) -> float:
        return self._value if not axes else 0.0


class SumField(ScalarField):
    def __init__(self, *parts: ScalarField):
        self._parts = parts

    def partial(self, event, axes: tuple[int, ...] = ()) -> float:
        return sum(part.partial(event, axes) for part in self._parts)


# ---------------------------------------------------------------------------
# Functions of the time coordinate


class TimeFunction(ABC):
    """Scalar function of tau with derivatives up to the stated order."""

    max_order: int = 3

    @abstractmethod
    def derivative(self, tau: float, order: int) -> float: ...

    def value(self, tau: float) -> float:
        return self.derivative(tau, 0)


class ExprTimeFunction(TimeFunction):
    """Time profile backed by an expression in tau (any derivative order)."""

    max_order = 6

    def __init__(self, expr: Expression):
        unknown = free_variables(expr) - {"tau"}
        if unknown:
            raise UnboundVariableError(sorted(unknown)[0])
        self.expr = expr
        self._exprs = [expr]
        self._compiled = [compile_expression(expr, ("tau",))]

    def derivative(self, tau: float, order: int) -> float:
        while len(self._compiled) <= order:
            nxt = differentiate(self._exprs[-1], "tau")
            self._exprs.append(nxt)
            self._compiled.append(compile_expression(nxt, ("tau",)))
        return self._compiled[order](tau)


class ShiftedScaledTimeFunction(TimeFunction):
    """g(tau) = base(tau / time_scale) + shift.

    Used by the normalization map, which rescales the time coordinate while
    shifting the profile by a constant.
    """

    def __init__(self, base: TimeFunction, time_scale: float, shift: float):
        if time_scale <= 0:
            raise ValueError("time_scale must be positive")
        self.base = base
        self.time_scale = float(time_scale)
        self.shift = float(shift)
        self.max_order = base.max_order

    def derivative(self, tau: float, order: int) -> float:
        inner = self.base.derivative(tau / self.time_scale, order)
        result = inner / self.time_scale**order
        if order == 0:
            result += self.shift
        return result


class TimeField(ScalarField):
    """Adapter presenting a TimeFunction as a field constant in the angles."""

    def __init__(self, tf: TimeFunction):
        self.tf = tf

    def partial(self, event, axes: tuple[int, ...] = ()) -> float:
        if any(axis != 0 for axis in axes):
            return 0.0
        return self.tf.derivative(event[0], len(axes))


def as_time_function(profile) -> TimeFunction:
    """Accept an Expression, a source string, or a TimeFunction."""
    if isinstance(profile, TimeFunction):
        return profile
    if isinstance(profile, Expression):
        return ExprTimeFunction(profile)
    if isinstance(profile, str):
        from .expr import parse

        return ExprTimeFunction(parse(profile))
    if isinstance(profile, (int, float)):
        return ExprTimeFunction(Num(float(profile)))
    raise TypeError(f"cannot interpret {profile!r} as a time profile")


def as_expression(source) -> Expression:
    if isinstance(source, Expression):
        return source
    if isinstance(source, str):
        from .expr import parse

        return parse(source)
    if isinstance(source, (int, float)):
        return Num(float(source))
    raise TypeError(f"cannot interpret {source!r} as an expression")
