"""Flex operator and the totally-geodesic residual systems.

All residuals are reported in cleared form: the general condition for a pair
(i, j) is multiplied through by f_i^2 f_j^2, which leaves

    Flex(f)_ij - sum_k [G_ii^k f_k f_j^2 + G_jj^k f_k f_i^2 - (G_ij^k + G_ji^k) f_k f_i f_j]

with Flex(f)_ij = f_j^2 f_ii - 2 f_i f_j f_ij + f_i^2 f_jj.  Pass/fail compares
the residual divided by max(1, |f_j^2 f_ii| + |2 f_i f_j f_ij| + |f_i^2 f_jj|)
against the tolerance.  Indices in the public API are 1-based.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import expr as E
from .fields import ExprField, ScalarField, as_field
from .geometry import Connection, Geometry, integrate_geodesic
from .sampling import CheckResult, SamplePlan

__all__ = [
    "ResidualSample", "WebSpec", "WebReport",
    "flex", "geodesic_residual", "constant_curvature_residual", "hypersurface_residual",
    "hyperplanarity_check", "ratio_independence_check", "pair_implication_check",
    "geodesic_web_check", "geodesic_oracle_check", "residual_for_geometry",
    "SINGULAR_GRADIENT_TOL", "DEFAULT_TOLERANCE",
]

SINGULAR_GRADIENT_TOL = 1e-8
DEFAULT_TOLERANCE = 1e-9

OK, EXCLUDED, EVAL_ERROR = "ok", "excluded-singular", "eval-error"


@dataclass
class ResidualSample:
    point: tuple[float, ...]
    pair: tuple[int, int]
    value: float | None
    status: str
    scale: float = 1.0

    @property
    def normalized(self) -> float | None:
        if self.value is None:
            return None
        return self.value / max(1.0, self.scale)


# --------------------------------------------------------------------------
# pointwise kernels (0-based indices on a precomputed jet)

def _flex(g, h, i, j) -> tuple[float, float]:
    if i == j:
        return 0.0, 0.0
    if i > j:
        i, j = j, i
    a = g[j] * g[j] * h[i, i]
    b = 2.0 * g[i] * g[j] * h[i, j]
    c = g[i] * g[i] * h[j, j]
    return a - b + c, abs(a) + abs(b) + abs(c)


def _weighted(g, m, i, j) -> float:
    """f_j^2 m_ii - 2 f_i f_j m_ij + f_i^2 m_jj for a symmetric matrix m."""
    return g[j] * g[j] * m[i, i] - 2.0 * g[i] * g[j] * m[i, j] + g[i] * g[i] * m[j, j]


def _singular(g, i, j, tol=SINGULAR_GRADIENT_TOL) -> bool:
    lim = tol * (1.0 + float(np.linalg.norm(g)))
    return min(abs(g[i]), abs(g[j])) < lim


def _connection_kernel(conn: Connection):
    def kernel(p, g, h, i, j):
        gam = conn.at(p)
        fl, scale = _flex(g, h, i, j)
        rhs = (g[j] ** 2 * (gam[i, i] @ g) + g[i] ** 2 * (gam[j, j] @ g)
               - (gam[i, j] + gam[j, i]) @ g * g[i] * g[j])
        return fl - rhs, scale
    return kernel


def _constant_curvature_kernel(kappa):
    kappa = float(kappa)

    def kernel(p, g, h, i, j):
        p = np.asarray(p, dtype=float)
        den = 1.0 + kappa * float(p @ p)
        if den == 0.0:
            raise E.DivisionByZeroError("conformal factor pole")
        fl, scale = _flex(g, h, i, j)
        return fl - 2.0 * kappa * (g[i] ** 2 + g[j] ** 2) * float(p @ g) / den, scale
    return kernel


def _hypersurface_kernel(u: E.Expr, m: int):
    ufield = ExprField(u, m)

    def kernel(p, g, h, i, j):
        _, ug, uh = ufield.jet(p)
        fl, scale = _flex(g, h, i, j)
        factor = float(ug @ g) / (1.0 + float(ug @ ug))
        return fl - factor * _weighted(g, uh, i, j), scale
    return kernel


def _flat_kernel(p, g, h, i, j):
    return _flex(g, h, i, j)


def residual_for_geometry(geometry: Geometry, n: int) -> Callable:
    """Pointwise cleared-residual kernel ``(p, grad, hess, i, j) -> (value, scale)``."""
    if geometry.kind == "flat":
        return _flat_kernel
    if geometry.kind == "constant_curvature":
        return _constant_curvature_kernel(geometry.kappa)
    if geometry.kind == "hypersurface":
        return _hypersurface_kernel(geometry.u, n)
    return _connection_kernel(geometry.connection_for(n))


def _sample(field_: ScalarField, kernel, i, j, p,
            guard: float | None = SINGULAR_GRADIENT_TOL) -> ResidualSample:
    pt = tuple(float(v) for v in p)
    pair = (i, j)
    try:
        _, g, h = field_.jet(p)
        if guard and _singular(g, i - 1, j - 1, guard):
            return ResidualSample(pt, pair, None, EXCLUDED)
        value, scale = kernel(p, g, h, i - 1, j - 1)
    except E.EvalError:
        return ResidualSample(pt, pair, None, EVAL_ERROR)
    if not math.isfinite(value):
        return ResidualSample(pt, pair, None, EVAL_ERROR)
    return ResidualSample(pt, pair, value, OK, scale)


# --------------------------------------------------------------------------
# public pointwise operations

def flex(f, i: int, j: int, p: Sequence[float]) -> float:
    """(Flex f)_ij at p with exact derivatives.  Symmetric in (i, j); zero for i == j."""
    field_ = as_field(f, len(p))
    _, g, h = field_.jet(p)
    return _flex(g, h, i - 1, j - 1)[0]


def geodesic_residual(f, conn: Connection, i: int, j: int, p) -> ResidualSample:
    """Cleared residual of the general totally-geodesic condition for the pair (i, j)."""
    return _sample(as_field(f, conn.n), _connection_kernel(conn), i, j, p)


def constant_curvature_residual(f, kappa, i: int, j: int, p) -> ResidualSample:
    """Flex_ij - 2 kappa (f_i^2 + f_j^2)(sum x_k f_k) / (1 + kappa |x|^2)."""
    return _sample(as_field(f, len(p)), _constant_curvature_kernel(kappa), i, j, p)


def hypersurface_residual(f, u: E.Expr, i: int, j: int, p) -> ResidualSample:
    """Flex_ij minus the graph-curvature term for the hypersurface x_{m+1} = u."""
    m = len(p)
    return _sample(as_field(f, m), _hypersurface_kernel(u, m), i, j, p)


# --------------------------------------------------------------------------
# checks over a sample plan

def _pairs(n: int):
    return list(itertools.combinations(range(1, n + 1), 2))


def _run_pairs(field_, kernel, plan: SamplePlan, tol, name) -> dict:
    out = {pair: CheckResult(f"{name}[{pair[0]},{pair[1]}]", tol) for pair in _pairs(field_.n)}
    for p in plan.points():
        for (i, j), res in out.items():
            s = _sample(field_, kernel, i, j, p, plan.exclusion_tol)
            if s.status == OK:
                res.add(s.value, s.scale, s.point)
            elif s.status == EXCLUDED:
                res.exclude()
            else:
                res.error()
    return out


def _combine(results: dict, name: str, tol: float) -> CheckResult:
    total = CheckResult(name, tol)
    for r in results.values():
        total = total.merge(r)
    total.name = name
    return total


def _point_regularity(field_, plan: SamplePlan, name, min_fraction) -> CheckResult:
    """Counts points where the field evaluates with a non-vanishing gradient."""
    res = CheckResult(name, math.inf, min_regular_fraction=min_fraction)
    for p in plan.points():
        try:
            _, g, _ = field_.jet(p)
        except E.EvalError:
            res.error()
            continue
        if np.linalg.norm(g) <= plan.exclusion_tol:
            res.exclude()
        else:
            res.add(0.0)
    return res


def hyperplanarity_check(f, plan: SamplePlan, tol: float = DEFAULT_TOLERANCE,
                         min_regular_fraction: float = 0.0) -> CheckResult:
    """Max |Flex(f)_st| over all pairs s < t and all regular plan points.

    A point is excluded only where the gradient vanishes: Flex is already
    polynomial in the derivatives, so no per-pair guard is needed.
    """
    field_ = as_field(f, plan.n)
    regular = _point_regularity(field_, plan, "regular", 0.0)
    res = CheckResult("hyperplanarity", tol, min_regular_fraction=min_regular_fraction)
    pairs = _pairs(field_.n)
    for p in plan.points():
        # counted once per pair so the regular fraction is per point
        try:
            _, g, h = field_.jet(p)
        except E.EvalError:
            for _ in pairs:
                res.error()
            continue
        if np.linalg.norm(g) <= plan.exclusion_tol:
            for _ in pairs:
                res.exclude()
            continue
        for i, j in pairs:
            value, scale = _flex(g, h, i - 1, j - 1)
            res.add(value, scale, p)
    res.notes.append(f"regular points {regular.n_ok}/{regular.n_total}")
    return res


def _denominators(geometry: Geometry, n: int):
    """D_ij for the i,j-independence identity."""
    if geometry.kind == "constant_curvature":
        return lambda p, g, i, j: g[i] ** 2 + g[j] ** 2
    if geometry.kind == "hypersurface":
        ufield = ExprField(geometry.u, n)

        def d(p, g, i, j):
            return _weighted(g, ufield.jet(p)[2], i, j)
        return d
    raise ValueError("ratio independence is defined for constant_curvature and hypersurface")


def ratio_independence_check(f, geometry: Geometry, plan: SamplePlan,
                             tol: float = DEFAULT_TOLERANCE) -> CheckResult:
    """Flex_ij D_kl == Flex_kl D_ij for all pairs of pairs, after verifying that
    f solves the geodesic system of ``geometry`` on the plan."""
    field_ = as_field(f, plan.n)
    kernel = residual_for_geometry(geometry, field_.n)
    pre = _combine(_run_pairs(field_, kernel, plan, tol, "geodesic"), "geodesic", tol)
    res = CheckResult("ratio_independence", tol)
    if not pre.passed:
        res.notes.append(f"precondition failed: geodesic residual {pre.max_scaled:.3e}")
        res.error()
        return res
    dfun = _denominators(geometry, field_.n)
    pairs = [(i - 1, j - 1) for i, j in _pairs(field_.n)]
    if len(pairs) < 2:
        res.notes.append("single pair: identity holds vacuously")
    for p in plan.points():
        try:
            _, g, h = field_.jet(p)
            flexes = {q: _flex(g, h, *q) for q in pairs}
            dens = {q: dfun(p, g, *q) for q in pairs}
        except E.EvalError:
            res.error()
            continue
        if np.linalg.norm(g) <= plan.exclusion_tol:
            res.exclude()
            continue
        if len(pairs) < 2:
            res.add(0.0)
        for a, b in itertools.combinations(pairs, 2):
            (fa, sa), (fb, sb) = flexes[a], flexes[b]
            value = fa * dens[b] - fb * dens[a]
            scale = sa * abs(dens[b]) + sb * abs(dens[a])
            res.add(value, scale, p)
    return res


def pair_implication_check(f, plan: SamplePlan, base: tuple[int, int] = (1, 2),
                           tol: float = DEFAULT_TOLERANCE) -> CheckResult:
    """Where Flex for the ``base`` pair vanishes, every other pair must vanish too."""
    field_ = as_field(f, plan.n)
    i0, j0 = base[0] - 1, base[1] - 1
    res = CheckResult(f"pair_implication[{base[0]},{base[1]}]", tol)
    for p in plan.points():
        try:
            _, g, h = field_.jet(p)
        except E.EvalError:
            res.error()
            continue
        v0, s0 = _flex(g, h, i0, j0)
        if abs(v0) / max(1.0, s0) > tol:
            res.exclude()
            continue
        for i, j in _pairs(field_.n):
            value, scale = _flex(g, h, i - 1, j - 1)
            res.add(value, scale, p)
    return res


# --------------------------------------------------------------------------
# webs

@dataclass
class WebSpec:
    functions: dict[str, object]
    geometry: Geometry
    n: int

    def __post_init__(self):
        if not self.functions:
            raise ValueError("a web needs at least one function")
        self.fields = {name: as_field(f, self.n) for name, f in self.functions.items()}

    @property
    def d(self) -> int:
        return len(self.functions)


@dataclass
class WebReport:
    pairs: dict[str, dict[tuple[int, int], CheckResult]] = field(default_factory=dict)
    regularity: dict[str, CheckResult] = field(default_factory=dict)

    def function_passed(self, name: str) -> bool:
        return self.regularity[name].passed and all(r.passed for r in self.pairs[name].values())

    @property
    def passed(self) -> bool:
        return all(self.function_passed(name) for name in self.pairs)

    def to_dict(self) -> dict:
        return {
            name: {
                "passed": self.function_passed(name),
                "regular": self.regularity[name].to_dict(),
                "pairs": {f"{i},{j}": r.to_dict() for (i, j), r in self.pairs[name].items()},
            }
            for name in self.pairs
        }


def geodesic_web_check(web: WebSpec, plan: SamplePlan, tol: float = DEFAULT_TOLERANCE,
                       min_regular_fraction: float = 0.9) -> WebReport:
    """Run the residual matching the web's geometry for every function, pair and point."""
    kernel = residual_for_geometry(web.geometry, web.n)
    report = WebReport()
    for name, field_ in web.fields.items():
        report.regularity[name] = _point_regularity(field_, plan, f"{name}:regular",
                                                    min_regular_fraction)
        report.pairs[name] = _run_pairs(field_, kernel, plan, tol, name)
    return report


def geodesic_oracle_check(f, geometry: Geometry, plan: SamplePlan, *, launches: int = 5,
                          T: float = 1.0, steps: int = 1000, speed: float | None = None,
                          tol: float = 1e-6, seed: int = 0) -> CheckResult:
    """Integrate geodesics tangent to level sets and measure the drift of f.

    Launch points are taken from the plan in order (skipping singular ones);
    directions are seeded random unit vectors orthogonal to grad f.  The
    drift is |f(x(t)) - f(x(0))| / (1 + |f(x(0))|) along the whole path.
    """
    field_ = as_field(f, plan.n)
    conn = geometry.connection_for(field_.n)
    rng = np.random.default_rng(seed)
    if speed is None:
        speed = 0.25 * min(hi - lo for lo, hi in plan.box)
    res = CheckResult("geodesic_oracle", tol)
    for p in plan.points():
        if res.n_ok >= launches:
            break
        try:
            f0, g, _ = field_.jet(p)
        except E.EvalError:
            continue
        if np.linalg.norm(g) <= plan.exclusion_tol:
            continue
        w = rng.normal(size=field_.n)
        w -= (w @ g) / (g @ g) * g
        v0 = speed * w / np.linalg.norm(w)
        path = integrate_geodesic(conn, p, v0, T, steps)
        try:
            drift = max(abs(field_.value(x) - f0) for x in path.points)
        except E.EvalError:
            res.error()
            continue
        if path.truncated:
            res.error()
            res.notes.append(f"path from {tuple(p)} truncated: {path.error}")
            continue
        res.add(drift / (1.0 + abs(f0)), 1.0, p)
    return res
