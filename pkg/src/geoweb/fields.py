"""Scalar fields with exact first and second derivatives.

Every check in :mod:`geoweb.webcheck` and :mod:`geoweb.euler` consumes a
field through ``jet(p) -> (value, gradient, hessian)``.  Closed-form web
functions are wrapped by :class:`ExprField`; implicitly defined solutions
are provided by :class:`geoweb.euler.SolvedField`.
"""
from __future__ import annotations

from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from . import expr as E

__all__ = ["ScalarField", "ExprField", "as_field", "dimension_of"]


@runtime_checkable
class ScalarField(Protocol):
    n: int

    def value(self, p: Sequence[float]) -> float: ...

    def jet(self, p: Sequence[float]) -> tuple[float, np.ndarray, np.ndarray]: ...


def dimension_of(e: E.Expr) -> int:
    idx = [int(v[1:]) for v in E.variables(e) if v.startswith("x")]
    return max(idx, default=1)


class ExprField:
    def __init__(self, f: E.Expr, n: int | None = None):
        self.expr = f
        self.n = dimension_of(f) if n is None else n
        if dimension_of(f) > self.n:
            raise ValueError(f"expression uses more than {self.n} coordinates")
        grad = E.gradient(f, self.n)
        hess = E.hessian(f, self.n)
        self._upper = [(i, j) for i in range(self.n) for j in range(i, self.n)]
        self._fn = E.compile_exprs((f, *grad, *(hess[i][j] for i, j in self._upper)))
        self._value_fn = E.compile_exprs((f,))

    def value(self, p):
        return self._value_fn(p)[0]

    def jet(self, p):
        vals = self._fn(p)
        n = self.n
        g = np.array(vals[1:1 + n])
        h = np.empty((n, n))
        for (i, j), v in zip(self._upper, vals[1 + n:]):
            h[i, j] = h[j, i] = v
        return vals[0], g, h

    def __repr__(self):
        return f"ExprField({E.to_string(self.expr)!r}, n={self.n})"


def as_field(f, n: int | None = None) -> ScalarField:
    if isinstance(f, E.Expr):
        return ExprField(f, n)
    if isinstance(f, str):
        if n is None:
            raise ValueError("dimension required to parse a string")
        return ExprField(E.parse(f, n, names=()), n)
    return f
