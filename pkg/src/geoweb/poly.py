"""Exact multivariate polynomials with rational coefficients.

A monomial is a tuple of ``(variable, exponent)`` pairs sorted by variable
rank (x1 < x2 < ... < C < t); the polynomial is a dict from monomial to a
nonzero Fraction.  Two polynomials are equal iff their tables are equal.
"""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache, reduce

from . import expr as E

__all__ = ["Poly", "NotPolynomialError", "expand_to_poly"]


class NotPolynomialError(ValueError):
    pass


def _rank(name: str):
    if name.startswith("x"):
        return (0, int(name[1:]))
    return (1, name)


def _mono_mul(a: tuple, b: tuple) -> tuple:
    if not a:
        return b
    if not b:
        return a
    exps = dict(a)
    for v, k in b:
        exps[v] = exps.get(v, 0) + k
    return tuple(sorted(exps.items(), key=lambda p: _rank(p[0])))


def _mono_div(a: tuple, b: tuple):
    """a / b as a monomial, or None if b does not divide a."""
    exps = dict(a)
    for v, k in b:
        have = exps.get(v, 0)
        if have < k:
            return None
        if have == k:
            del exps[v]
        else:
            exps[v] = have - k
    return tuple(sorted(exps.items(), key=lambda p: _rank(p[0])))


def _mono_str(m: tuple) -> str:
    return "*".join(v if k == 1 else f"{v}^{k}" for v, k in m)


class Poly:
    __slots__ = ("terms", "_hash")

    def __init__(self, terms: dict | None = None):
        clean = {}
        for m, c in (terms or {}).items():
            c = Fraction(c)
            if c != 0:
                clean[m] = c
        self.terms = clean
        self._hash = None

    # -- construction -----------------------------------------------------
    @classmethod
    def const(cls, c) -> "Poly":
        return cls({(): Fraction(c)})

    @classmethod
    def var(cls, name: str) -> "Poly":
        return cls({((name, 1),): Fraction(1)})

    @classmethod
    def parse(cls, text: str, n: int) -> "Poly":
        return expand_to_poly(E.parse(text, n))

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        other = _as_poly(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0) + c
        return Poly(out)

    __radd__ = __add__

    def __neg__(self):
        return Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __rsub__(self, other):
        return _as_poly(other) - self

    def __mul__(self, other):
        other = _as_poly(other)
        out: dict = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = _mono_mul(m1, m2)
                out[m] = out.get(m, 0) + c1 * c2
        return Poly(out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power")
        result = Poly.const(1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Poly.const(other)
        if not isinstance(other, Poly):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    # -- inspection -------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(m == () for m in self.terms)

    def constant_term(self) -> Fraction:
        return self.terms.get((), Fraction(0))

    def variables(self) -> list[str]:
        names = {v for m in self.terms for v, _ in m}
        return sorted(names, key=_rank)

    def degree(self, name: str | None = None) -> int:
        """Total degree, or degree in one variable.  The zero polynomial has degree -1."""
        if not self.terms:
            return -1
        if name is None:
            return max(sum(k for _, k in m) for m in self.terms)
        return max(dict(m).get(name, 0) for m in self.terms)

    def coefficients_in(self, name: str) -> dict[int, "Poly"]:
        """Split as sum_k coeff_k * name^k; coefficients are free of ``name``."""
        out: dict[int, dict] = {}
        for m, c in self.terms.items():
            exps = dict(m)
            k = exps.pop(name, 0)
            rest = tuple(sorted(exps.items(), key=lambda p: _rank(p[0])))
            out.setdefault(k, {})[rest] = c
        return {k: Poly(t) for k, t in out.items()}

    def _order_key(self, vars_):
        def key(m):
            exps = dict(m)
            return (sum(exps.values()), tuple(exps.get(v, 0) for v in vars_))
        return key

    def sorted_terms(self, vars_=None) -> list[tuple[tuple, Fraction]]:
        """Terms in graded-lex order, highest first."""
        vars_ = vars_ or self.variables()
        return sorted(self.terms.items(), key=lambda mc: self._order_key(vars_)(mc[0]),
                      reverse=True)

    def content(self) -> Fraction:
        """Positive rational gcd of the coefficients (0 for the zero polynomial)."""
        if not self.terms:
            return Fraction(0)
        nums = reduce(math.gcd, (c.numerator for c in self.terms.values()))
        dens = reduce(lambda a, b: a * b // math.gcd(a, b),
                      (c.denominator for c in self.terms.values()))
        return Fraction(abs(nums), dens)

    def monomial_content(self) -> tuple:
        """Largest monomial dividing every term."""
        if not self.terms:
            return ()
        common = None
        for m in self.terms:
            exps = dict(m)
            if common is None:
                common = exps
            else:
                common = {v: min(k, exps[v]) for v, k in common.items() if v in exps}
        return tuple(sorted(((v, k) for v, k in common.items() if k > 0),
                            key=lambda p: _rank(p[0])))

    def primitive(self) -> "Poly":
        """Scale to integer coefficients with gcd 1 and a positive leading term.

        Two polynomials define the same zero set up to a nonzero constant
        factor iff their primitive forms are equal.
        """
        if not self.terms:
            return self
        lead = self.sorted_terms()[0][1]
        scale = 1 / self.content()
        if lead < 0:
            scale = -scale
        return self * scale

    def exact_div(self, d: "Poly") -> "Poly | None":
        """Quotient q with self == q*d, or None if d does not divide self."""
        if d.is_zero():
            raise ZeroDivisionError("division by the zero polynomial")
        vars_ = sorted(set(self.variables()) | set(d.variables()), key=_rank)
        key = self._order_key(vars_)
        d_lead = max(d.terms, key=key)
        d_coef = d.terms[d_lead]
        rem = self
        quotient: dict = {}
        while not rem.is_zero():
            r_lead = max(rem.terms, key=key)
            m = _mono_div(r_lead, d_lead)
            if m is None:
                return None
            c = rem.terms[r_lead] / d_coef
            quotient[m] = quotient.get(m, 0) + c
            rem = rem - Poly({m: c}) * d
        return Poly(quotient)

    def evaluate(self, values: dict[str, float]) -> float:
        total = 0.0
        for m, c in self.terms.items():
            term = float(c)
            for v, k in m:
                term *= values[v] ** k
            total += term
        return total

    def to_expr(self) -> E.Expr:
        out = E.Const(0)
        for m, c in self.sorted_terms():
            term: E.Expr = E.Const(abs(c))
            for v, k in m:
                term = E.mul(term, E.power(E.Var(v), k))
            out = E.sub(out, term) if c < 0 else E.add(out, term)
        return out

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for i, (m, c) in enumerate(self.sorted_terms()):
            sign = "-" if c < 0 else "+"
            mag = abs(c)
            if m == ():
                body = str(mag)
            elif mag == 1:
                body = _mono_str(m)
            else:
                body = f"{mag}*{_mono_str(m)}"
            if i == 0:
                parts.append(body if sign == "+" else f"-{body}")
            else:
                parts.append(f" {sign} {body}")
        return "".join(parts)

    def __repr__(self):
        return f"Poly({str(self)!r})"


def _as_poly(x) -> Poly:
    if isinstance(x, Poly):
        return x
    if isinstance(x, (int, Fraction)):
        return Poly.const(x)
    if isinstance(x, float):
        return Poly.const(Fraction(x))
    raise TypeError(f"cannot use {type(x).__name__} as a polynomial")


def expand_to_poly(e: E.Expr) -> Poly:
    """Expand a radical-free expression (division only by constants) into canonical form."""
    return _expand(e)


@lru_cache(maxsize=None)
def _expand(e: E.Expr) -> Poly:
    if isinstance(e, E.Const):
        return Poly.const(Fraction(e.value))
    if isinstance(e, E.Var):
        return Poly.var(e.name)
    if isinstance(e, E.Neg):
        return -_expand(e.arg)
    if isinstance(e, E.Sqrt):
        raise NotPolynomialError(f"radical in polynomial context: {e}")
    if isinstance(e, E.Pow):
        return _expand(e.base) ** e.exp
    if isinstance(e, E.Div):
        den = _expand(e.right)
        if not den.is_constant():
            raise NotPolynomialError(f"non-constant denominator: {e.right}")
        return _expand(e.left) * (1 / den.constant_term())
    a, b = _expand(e.left), _expand(e.right)
    if isinstance(e, E.Add):
        return a + b
    if isinstance(e, E.Sub):
        return a - b
    return a * b
