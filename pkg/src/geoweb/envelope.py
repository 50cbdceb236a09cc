"""Level-set plane families of radical web functions and their envelopes.

A web function of the form (P + S*sqrt(q)) / R, with P, S, q, R polynomials,
has level sets f = C given by (R*C - P)^2 - S^2*q = 0 (or R*C - P = 0 when no
radical is present).  Factors free of C that every coefficient shares are
stripped, and the result is a polynomial family a*C^2 + b*C + c.  For a
quadratic family the envelope is the discriminant b^2 - 4*a*c.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from . import expr as E
from .poly import Poly, expand_to_poly

__all__ = [
    "PlaneFamily", "PatternError", "LinearFamilyError", "TangencyReport",
    "family_from_web_function", "envelope_of", "verify_tangency", "same_zero_set",
]

C = E.PARAM


class PatternError(ValueError):
    """The web function is not of the supported radical/rational shape."""


class LinearFamilyError(ValueError):
    """A family linear in C has no envelope."""


# --------------------------------------------------------------------------
# quadratic surds (P + S*sqrt(q)) / R

@dataclass(frozen=True)
class _Surd:
    p: Poly
    s: Poly
    q: Poly | None
    r: Poly

    @staticmethod
    def poly(p: Poly) -> "_Surd":
        return _Surd(p, Poly(), None, Poly.const(1))


def _same_q(a: _Surd, b: _Surd):
    if a.q is None or a.s.is_zero():
        return b.q if not b.s.is_zero() else (a.q or b.q)
    if b.q is None or b.s.is_zero() or a.q == b.q:
        return a.q
    raise PatternError("more than one distinct radical")


def _s_add(a: _Surd, b: _Surd, sign=1) -> _Surd:
    q = _same_q(a, b)
    if a.r == b.r:
        return _Surd(a.p + sign * b.p, a.s + sign * b.s, q, a.r)
    return _Surd(a.p * b.r + sign * b.p * a.r, a.s * b.r + sign * b.s * a.r, q, a.r * b.r)


def _s_mul(a: _Surd, b: _Surd) -> _Surd:
    q = _same_q(a, b)
    qq = q if q is not None else Poly()
    return _Surd(a.p * b.p + a.s * b.s * qq, a.p * b.s + a.s * b.p, q, a.r * b.r)


def _s_inv(a: _Surd) -> _Surd:
    if a.s.is_zero():
        if a.p.is_zero():
            raise PatternError("division by zero polynomial")
        return _Surd(a.r, Poly(), a.q, a.p)
    # rationalize: 1/(P + S sqrt q) = (P - S sqrt q)/(P^2 - S^2 q)
    den = a.p * a.p - a.s * a.s * a.q
    return _Surd(a.r * a.p, -(a.r * a.s), a.q, den)


def _to_surd(e: E.Expr) -> _Surd:
    if isinstance(e, (E.Const, E.Var)):
        return _Surd.poly(expand_to_poly(e))
    if isinstance(e, E.Neg):
        a = _to_surd(e.arg)
        return _Surd(-a.p, -a.s, a.q, a.r)
    if isinstance(e, E.Sqrt):
        inner = _to_surd(e.arg)
        if not inner.s.is_zero() or not inner.r.is_constant():
            raise PatternError(f"radicand must be polynomial: {e.arg}")
        q = inner.p * (1 / inner.r.constant_term())
        return _Surd(Poly(), Poly.const(1), q, Poly.const(1))
    if isinstance(e, E.Pow):
        out = _Surd.poly(Poly.const(1))
        base = _to_surd(e.base)
        for _ in range(e.exp):
            out = _s_mul(out, base)
        return out
    a, b = _to_surd(e.left), _to_surd(e.right)
    if isinstance(e, E.Add):
        return _s_add(a, b)
    if isinstance(e, E.Sub):
        return _s_add(a, b, -1)
    if isinstance(e, E.Mul):
        return _s_mul(a, b)
    return _s_mul(a, _s_inv(b))


def _has_radical(e: E.Expr) -> bool:
    if isinstance(e, E.Sqrt):
        return True
    if isinstance(e, (E.Const, E.Var)):
        return False
    if isinstance(e, (E.Neg,)):
        return _has_radical(e.arg)
    if isinstance(e, E.Pow):
        return _has_radical(e.base)
    return _has_radical(e.left) or _has_radical(e.right)


# --------------------------------------------------------------------------
# families

@dataclass(frozen=True)
class PlaneFamily:
    """a*C^2 + b*C + c = 0 with a, b, c polynomials in x1..xn.

    ``squared_level`` marks families obtained from f = g^2 by clearing g = C,
    i.e. the level value of f itself is C^2.
    """
    a: Poly
    b: Poly
    c: Poly
    squared_level: bool = False
    stripped: tuple[str, ...] = ()

    @classmethod
    def from_poly(cls, poly: Poly, **kw) -> "PlaneFamily":
        parts = poly.coefficients_in(C)
        if any(k > 2 for k in parts):
            raise PatternError(f"family has degree {max(parts)} in C")
        return cls(parts.get(2, Poly()), parts.get(1, Poly()), parts.get(0, Poly()), **kw)

    @property
    def degree(self) -> int:
        if not self.a.is_zero():
            return 2
        if not self.b.is_zero():
            return 1
        return 0

    def polynomial(self) -> Poly:
        cv = Poly.var(C)
        return self.a * cv * cv + self.b * cv + self.c

    def member(self, value) -> Poly:
        """The level surface for one parameter value, as a polynomial in x."""
        v = Fraction(value) if not isinstance(value, float) else Fraction(repr(value))
        return self.a * (v * v) + self.b * v + self.c

    def is_planar(self) -> bool:
        return all(p.degree() <= 1 for p in (self.a, self.b, self.c))

    def linear_kind(self) -> str:
        """For a linear family: 'parallel' if the normal does not move with C, else 'pencil'."""
        if self.degree != 1:
            raise ValueError("not a linear family")
        return "parallel" if self.b.degree() <= 0 else "pencil"

    def __str__(self):
        return f"{self.polynomial()} = 0"


def _strip(poly: Poly, denominator: Poly) -> tuple[Poly, list[str]]:
    stripped = []
    mono = tuple((v, k) for v, k in poly.monomial_content() if v != C)
    if mono:
        poly = poly.exact_div(Poly({mono: 1}))
        stripped.append("*".join(v if k == 1 else f"{v}^{k}" for v, k in mono))
    if not denominator.is_constant():
        den = denominator.primitive()
        while True:
            q = poly.exact_div(den)
            if q is None or q.degree(C) < poly.degree(C):
                break
            poly = q
            stripped.append(f"({den})")
    prim = poly.primitive()
    if not poly.is_zero():
        factor = next(iter(poly.terms.values())) / next(iter(prim.terms.values()))
        if factor != 1:
            stripped.append(str(factor))
    return prim, stripped


def family_from_web_function(f: E.Expr) -> PlaneFamily:
    """Clear radicals and denominators from f = C (or g = C when f = g^2)."""
    squared = isinstance(f, E.Pow) and f.exp == 2 and _has_radical(f.base)
    g = f.base if squared else f
    surd = _to_surd(g)
    cv = Poly.var(C)
    lhs = surd.r * cv - surd.p
    if surd.s.is_zero():
        poly = lhs
    else:
        poly = lhs * lhs - surd.s * surd.s * surd.q
    if poly.is_zero():
        raise PatternError("level-set equation vanishes identically")
    poly, stripped = _strip(poly, surd.r)
    return PlaneFamily.from_poly(poly, squared_level=squared, stripped=tuple(stripped))


def envelope_of(fam: PlaneFamily) -> Poly:
    """Discriminant b^2 - 4ac: eliminates C from F = 0, dF/dC = 0."""
    if fam.degree < 2:
        kind = fam.linear_kind() if fam.degree == 1 else "constant"
        raise LinearFamilyError(f"family is linear in C ({kind}); no envelope")
    return fam.b * fam.b - fam.a * fam.c * 4


def same_zero_set(p: Poly, q: Poly) -> bool:
    """Equal up to a nonzero rational factor (exact coefficient comparison)."""
    return p.primitive() == q.primitive()


# --------------------------------------------------------------------------
# tangency

@dataclass
class TangencyReport:
    tolerance: float
    points: list[tuple[float, ...]] = field(default_factory=list)
    parameters: list[float] = field(default_factory=list)
    max_defect: float = 0.0
    max_env_residual: float = 0.0
    max_plane_residual: float = 0.0
    misses: list[float] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.points and self.max_defect <= self.tolerance
                and self.max_env_residual <= 1e-10 and self.max_plane_residual <= 1e-10)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "points": len(self.points),
            "max_defect": self.max_defect,
            "max_env_residual": self.max_env_residual,
            "max_plane_residual": self.max_plane_residual,
            "missed_parameters": list(self.misses),
        }


def _dimension(*polys: Poly) -> int:
    idx = [int(v[1:]) for p in polys for v in p.variables() if v.startswith("x")]
    return max(idx, default=1)


def verify_tangency(fam: PlaneFamily, env: Poly, samples: int = 8, seed: int = 0,
                    lines_per_plane: int = 3, tol: float = 1e-8,
                    params=None) -> TangencyReport:
    """Check that members of the family touch the envelope surface.

    For each seeded parameter value, seeded lines inside the plane are
    searched for the critical point of env along the line (1D root of the
    directional derivative).  There env must vanish and grad env must be
    parallel to the plane normal; the defect is the length of the component
    of the unit gradient orthogonal to the unit normal.
    """
    if env.is_constant():
        raise ValueError("envelope polynomial is constant; no surface to touch")
    if not fam.is_planar():
        raise ValueError("family members are not planes")
    n = _dimension(fam.a, fam.b, fam.c, env)
    names = [f"x{i}" for i in range(1, n + 1)]
    env_expr = env.to_expr()
    env_fn = E.compile_exprs((env_expr, *E.gradient(env_expr, n)))
    rng = np.random.default_rng(seed)
    if params is None:
        params = np.round(rng.uniform(-2.0, 2.0, samples), 6)
    report = TangencyReport(tol)

    for cval in params:
        plane = fam.member(float(cval))
        normal = np.array([float(plane.terms.get(((v, 1),), 0)) for v in names])
        offset = float(plane.constant_term())
        nn = float(normal @ normal)
        if nn == 0.0:
            report.misses.append(float(cval))
            continue
        base = -offset * normal / nn
        basis = np.linalg.svd(normal[None, :])[2][1:]     # orthonormal rows spanning the plane
        nhat = normal / np.sqrt(nn)
        found = False
        for _ in range(lines_per_plane):
            x0 = base + basis.T @ rng.normal(size=n - 1)
            d = basis.T @ rng.normal(size=n - 1)
            d /= np.linalg.norm(d)

            def slope(tau):
                return float(np.array(env_fn(x0 + tau * d)[1:]) @ d)

            lo, hi = -1.0, 1.0
            while slope(lo) * slope(hi) > 0 and hi < 1e6:
                lo, hi = 2 * lo, 2 * hi
            if slope(lo) * slope(hi) > 0:
                continue
            if slope(lo) == 0.0 and slope(hi) == 0.0:
                continue
            tau = brentq(slope, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
            x = x0 + tau * d
            vals = env_fn(x)
            grad = np.array(vals[1:])
            gnorm = np.linalg.norm(grad)
            if abs(vals[0]) > 1e-10 * (1.0 + gnorm) or gnorm < 1e-12:
                continue
            ghat = grad / gnorm
            defect = float(np.linalg.norm(ghat - (ghat @ nhat) * nhat))
            plane_res = abs(plane.evaluate(dict(zip(names, x))))
            report.points.append(tuple(float(v) for v in x))
            report.parameters.append(float(cval))
            report.max_defect = max(report.max_defect, defect)
            report.max_env_residual = max(report.max_env_residual, abs(float(vals[0])))
            report.max_plane_residual = max(report.max_plane_residual, float(plane_res))
            found = True
        if not found:
            report.misses.append(float(cval))
    return report
