"""Hyperplanar web functions from initial data.

A field is defined implicitly by

    f = u0(x_n + Psi_{n-1}(f) x_{n-1} + ... + Psi_1(f) x_1)

with u0 and the Psi_s given as one-variable expressions in ``t``.  Writing
G(x, t) for the right-hand side with f replaced by t, the field solves
t - G(x, t) = 0 and its derivatives follow from the implicit function
theorem:

    f_i  = G_i / (1 - G_t)
    f_ij = (G_ij + G_it f_j + G_jt f_i + G_tt f_i f_j) / (1 - G_t)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import expr as E
from .fields import as_field
from .sampling import CheckResult, SamplePlan
from .webcheck import SINGULAR_GRADIENT_TOL

__all__ = [
    "EulerSpec", "SolvedField", "SolveInfo", "ConvergenceError", "PsiReconstruction",
    "implicit_solve", "euler_system_residual", "first_integral_check",
    "commutator_check", "reconstruct_psi", "closed_form_check", "derivative_cross_check",
]

T = E.PLACEHOLDER
FD_STEP = np.finfo(float).eps ** (1 / 3)


class ConvergenceError(E.EvalError):
    pass


@dataclass(frozen=True)
class EulerSpec:
    u0: E.Expr
    psi: tuple[E.Expr, ...]

    def __post_init__(self):
        for e in (self.u0, *self.psi):
            extra = E.variables(e) - {T}
            if extra:
                raise ValueError(f"initial data must depend on t only, found {sorted(extra)}")
        if not self.psi:
            raise ValueError("need at least one Psi function (dimension >= 2)")

    @classmethod
    def parse(cls, u0: str, psi: Sequence[str]) -> "EulerSpec":
        return cls(E.parse(u0, 0, names=(T,)), tuple(E.parse(s, 0, names=(T,)) for s in psi))

    @property
    def n(self) -> int:
        return len(self.psi) + 1

    def argument(self) -> E.Expr:
        """x_n + sum_s Psi_s(t) x_s"""
        z: E.Expr = E.Var(f"x{self.n}")
        for s, ps in enumerate(self.psi, start=1):
            z = E.add(z, E.mul(ps, E.Var(f"x{s}")))
        return z

    def implicit_rhs(self) -> E.Expr:
        """G(x, t) = u0(argument)."""
        return E.substitute(self.u0, {T: self.argument()})

    def check_nonvanishing(self, ts: Sequence[float], tol: float = 1e-12) -> list[float]:
        """Sampled t-values where some Psi_s is (numerically) zero."""
        fn = E.compile_exprs(self.psi)
        bad = []
        for t in ts:
            try:
                if min(abs(v) for v in fn((), t=t)) <= tol:
                    bad.append(float(t))
            except E.EvalError:
                bad.append(float(t))
        return bad


class _Kernel:
    """Compiled G and its partial derivatives for one spec."""

    def __init__(self, spec: EulerSpec):
        n = spec.n
        G = spec.implicit_rhs()
        Gt = E.diff(G, T)
        Gx = [E.diff(G, i) for i in range(1, n + 1)]
        Gtt = E.diff(Gt, T)
        Gxt = [E.diff(g, T) for g in Gx]
        self.upper = [(i, j) for i in range(n) for j in range(i, n)]
        Gxx = [E.diff(Gx[i], j + 1) for i, j in self.upper]
        self.n = n
        self.residual = E.compile_exprs((G, Gt))
        self.jet = E.compile_exprs((G, Gt, Gtt, *Gx, *Gxt, *Gxx))
        self.psi = E.compile_exprs(spec.psi)


@dataclass
class SolveInfo:
    value: float
    iterations: int
    defect: float
    method: str


def _solve(kernel: _Kernel, p, guess: float, tol: float, max_iter: int) -> SolveInfo:
    def F(t):
        g, gt = kernel.residual(p, t=t)
        return t - g, 1.0 - gt, g

    f = float(guess)
    r, d, g = F(f)
    method = "newton"
    for it in range(max_iter + 1):
        if not math.isfinite(r):
            raise ConvergenceError(f"non-finite defect at {tuple(p)}")
        if abs(r) <= tol * (1.0 + abs(f)):
            return SolveInfo(float(f), it, float(abs(r)), method)
        if it == max_iter:
            break
        if abs(d) > 1e-14 * (1.0 + abs(g)):
            step = -r / d
        else:
            # derivative singular: damped fixed-point step f <- f + lam (G - f)
            step = g - f
            method = "newton+fixed-point"
        lam = 1.0
        accepted = None
        while lam >= 1e-4:
            trial = f + lam * step
            try:
                rt, dt, gt_ = F(trial)
            except E.EvalError:
                lam *= 0.5
                continue
            if math.isfinite(rt) and abs(rt) < abs(r):
                accepted = (trial, rt, dt, gt_)
                break
            lam *= 0.5
        if accepted is None:
            # floor reached without decrease: take the smallest step if it evaluates
            trial = f + 1e-4 * step
            try:
                accepted = (trial, *F(trial))
            except E.EvalError as exc:
                raise ConvergenceError(f"damping failed at {tuple(p)}: {exc}") from exc
        f, r, d, g = accepted
    raise ConvergenceError(
        f"no convergence at {tuple(p)} after {max_iter} iterations (defect {abs(r):.3e})")


def implicit_solve(spec: EulerSpec, p: Sequence[float], guess: float = 0.0,
                   tol: float = 1e-12, max_iter: int = 200) -> float:
    """Solve f = u0(x_n + sum Psi_s(f) x_s) at p by damped Newton from ``guess``.

    Falls back to damped fixed-point steps where the Newton derivative
    vanishes.  Raises ConvergenceError, or EvalError if u0/Psi cannot be
    evaluated at the guess.
    """
    return _solve(_kernel_for(spec), p, guess, tol, max_iter).value


_KERNELS: dict[EulerSpec, _Kernel] = {}


def _kernel_for(spec: EulerSpec) -> _Kernel:
    k = _KERNELS.get(spec)
    if k is None:
        k = _KERNELS[spec] = _Kernel(spec)
    return k


class SolvedField:
    """Scalar field f(p) obtained by solving the implicit equation on demand.

    ``guess`` pins the branch: a number, an expression in x1..xn, or a
    callable of the point.  Values are cached per point together with the
    solver metadata.  Instances are not meant to be shared across threads.
    """

    def __init__(self, spec: EulerSpec, guess=0.0, tol: float = 1e-12, max_iter: int = 200):
        self.spec = spec
        self.n = spec.n
        self.tol = tol
        self.max_iter = max_iter
        self._kernel = _kernel_for(spec)
        if isinstance(guess, E.Expr):
            fn = E.compile_exprs((guess,))
            self._guess = lambda p: fn(p)[0]
        elif callable(guess):
            self._guess = guess
        else:
            self._guess = lambda p, g=float(guess): g
        self.cache: dict[tuple, SolveInfo] = {}

    def info(self, p, guess: float | None = None) -> SolveInfo:
        key = tuple(float(v) for v in p)
        if guess is None and key in self.cache:
            return self.cache[key]
        g0 = self._guess(p) if guess is None else guess
        info = _solve(self._kernel, p, g0, self.tol, self.max_iter)
        if guess is None:
            self.cache[key] = info
        return info

    def value(self, p, guess: float | None = None) -> float:
        return self.info(p, guess).value

    def solve_along(self, points) -> list[float]:
        """Sweep with continuation: each solve starts from the previous value."""
        out, prev = [], None
        for p in points:
            try:
                v = self.value(p, prev) if prev is not None else self.value(p)
            except E.EvalError:
                v = self.value(p)
            out.append(v)
            prev = v
        return out

    def jet(self, p):
        f = self.value(p)
        n = self.n
        vals = self._kernel.jet(p, t=f)
        _, Gt, Gtt = vals[:3]
        Gx = np.array(vals[3:3 + n])
        Gxt = np.array(vals[3 + n:3 + 2 * n])
        den = 1.0 - Gt
        if den == 0.0:
            raise E.DivisionByZeroError("implicit function theorem denominator vanishes")
        grad = Gx / den
        h = np.empty((n, n))
        for (i, j), gij in zip(self._kernel.upper, vals[3 + 2 * n:]):
            h[i, j] = h[j, i] = (gij + Gxt[i] * grad[j] + Gxt[j] * grad[i]
                                 + Gtt * grad[i] * grad[j]) / den
        return f, grad, h

    def gradient(self, p) -> np.ndarray:
        return self.jet(p)[1]

    def fd_gradient(self, p, step: float = FD_STEP) -> np.ndarray:
        """Central differences of the solved values, each stencil solve started at f(p)."""
        p = np.asarray(p, dtype=float)
        f0 = self.value(p)
        g = np.empty(self.n)
        for i in range(self.n):
            h = max(1.0, abs(p[i])) * step
            e = np.zeros(self.n)
            e[i] = h
            g[i] = (self.value(p + e, f0) - self.value(p - e, f0)) / (2 * h)
        return g

    def psi_at(self, f: float) -> tuple[float, ...]:
        return self._kernel.psi((), t=f)

    def stats(self) -> dict:
        infos = list(self.cache.values())
        return {
            "solves": len(infos),
            "max_iterations": max((i.iterations for i in infos), default=0),
            "max_defect": max((i.defect for i in infos), default=0.0),
            "fixed_point_fallbacks": sum(i.method != "newton" for i in infos),
        }


def euler_system_residual(field_: SolvedField, s: int, p, method: str = "fd") -> float:
    """|df/dx_s - Psi_s(f) df/dx_n| at p; ``method`` is "fd" or "ift"."""
    f = field_.value(p)
    if method == "fd":
        g = field_.fd_gradient(p)
    elif method == "ift":
        g = field_.gradient(p)
    else:
        raise ValueError(f"unknown method {method!r}")
    psi = field_.psi_at(f)[s - 1]
    return abs(g[s - 1] - psi * g[-1])


# --------------------------------------------------------------------------
# distribution X_s = d_s - A_s d_{s+1},  A_s = f_s / f_{s+1}

def _xa_cleared(g, h, s, t):
    """X_s(A_t) multiplied by f_{s+1} f_{t+1}^2 (0-based s, t); returns (value, scale)."""
    a = g[s + 1] * (h[t, s] * g[t + 1])
    b = g[s + 1] * (g[t] * h[t + 1, s])
    c = g[s] * (h[t, s + 1] * g[t + 1])
    d = g[s] * (g[t] * h[t + 1, s + 1])
    return (a - b) - (c - d), abs(a) + abs(b) + abs(c) + abs(d)


def _guarded(g, idx, tol=SINGULAR_GRADIENT_TOL) -> bool:
    lim = tol * (1.0 + float(np.linalg.norm(g)))
    return any(abs(g[k]) < lim for k in idx)


def first_integral_check(f, plan: SamplePlan, tol: float = 1e-9) -> CheckResult:
    """max |X_s(A_t)| and |X_s(f)| (cleared of denominators) over the plan."""
    field_ = as_field(f, plan.n)
    n = field_.n
    res = CheckResult("first_integrals", tol)
    for p in plan.points():
        try:
            _, g, h = field_.jet(p)
        except E.EvalError:
            res.error()
            continue
        if _guarded(g, range(1, n), plan.exclusion_tol):
            res.exclude()
            continue
        for s in range(n - 1):
            # X_s(f) * f_{s+1}
            xf = g[s] * g[s + 1] - g[s] * g[s + 1]
            res.add(xf, abs(g[s] * g[s + 1]), p)
            for t in range(n - 1):
                res.add(*_xa_cleared(g, h, s, t), p)
    return res


def commutator_check(f, plan: SamplePlan, tol: float = 1e-9) -> CheckResult:
    """[X_s, X_t] = X_t(A_s) d_{s+1} - X_s(A_t) d_{t+1}, components cleared."""
    field_ = as_field(f, plan.n)
    n = field_.n
    res = CheckResult("commutators", tol)
    if n < 3:
        res.notes.append("n = 2: a single vector field, commutator vacuous")
    for p in plan.points():
        try:
            _, g, h = field_.jet(p)
        except E.EvalError:
            res.error()
            continue
        if _guarded(g, range(1, n), plan.exclusion_tol):
            res.exclude()
            continue
        if n < 3:
            res.add(0.0)
        for s in range(n - 1):
            for t in range(s + 1, n - 1):
                res.add(*_xa_cleared(g, h, t, s), p)
                res.add(*_xa_cleared(g, h, s, t), p)
    return res


# --------------------------------------------------------------------------
# recovering Psi from a field

@dataclass
class PsiReconstruction:
    samples: list[tuple[float, tuple[float, ...]]] = field(default_factory=list)
    max_dependence_defect: float = 0.0
    max_expected_error: float | None = None
    pairs_compared: int = 0
    counterexample: tuple | None = None
    passed: bool = True

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "samples": len(self.samples),
            "pairs_compared": self.pairs_compared,
            "max_dependence_defect": self.max_dependence_defect,
            "max_expected_error": self.max_expected_error,
            "counterexample": None if self.counterexample is None else [
                list(map(float, self.counterexample[0])), list(map(float, self.counterexample[1]))],
        }


def _level_partner(field_, p, f0, g0, w, delta, tol):
    """A point near p + delta*w with the same f-value (Newton along grad f(p))."""
    q = p + delta * w
    for _ in range(30):
        fq, gq, _ = field_.jet(q)
        r = fq - f0
        if abs(r) <= tol * (1.0 + abs(f0)):
            return q
        q = q - r / float(gq @ g0) * g0
    return None


def reconstruct_psi(f, plan: SamplePlan, expected: Sequence[E.Expr] | None = None,
                    tol_f: float = 1e-9, tol_psi: float = 1e-6, seed: int = 0,
                    step: float | None = None) -> PsiReconstruction:
    """Recover Psi_s(f) = f_s / f_n on the plan and test that it depends on f alone.

    Two kinds of equal-f pairs are compared: each plan point with a partner on
    its own level set (found by Newton projection from a seeded tangent
    offset), and plan points whose f-values happen to agree within ``tol_f``.
    """
    field_ = as_field(f, plan.n)
    n = field_.n
    rng = np.random.default_rng(seed)
    if step is None:
        step = 0.05 * min(hi - lo for lo, hi in plan.box)
    psi_expected = E.compile_exprs(tuple(expected)) if expected else None
    out = PsiReconstruction()

    def ratios(g):
        return tuple(float(g[s] / g[-1]) for s in range(n - 1))

    def compare(pa, ra, pb, rb):
        out.pairs_compared += 1
        for a, b in zip(ra, rb):
            defect = float(abs(a - b) / (1.0 + abs(a)))
            out.max_dependence_defect = max(out.max_dependence_defect, defect)
            if defect > tol_psi and out.counterexample is None:
                out.counterexample = (tuple(pa), tuple(pb))

    for p in plan.points():
        p = np.asarray(p, dtype=float)
        try:
            f0, g0, _ = field_.jet(p)
        except E.EvalError:
            continue
        if _guarded(g0, [n - 1], plan.exclusion_tol):
            continue
        r0 = ratios(g0)
        out.samples.append((float(f0), r0))
        if psi_expected is not None:
            want = psi_expected((), t=f0)
            err = max(abs(a - b) / (1.0 + abs(b)) for a, b in zip(r0, want))
            out.max_expected_error = max(out.max_expected_error or 0.0, float(err))
        w = rng.normal(size=n)
        w -= (w @ g0) / (g0 @ g0) * g0
        w /= np.linalg.norm(w)
        try:
            q = _level_partner(field_, p, f0, g0, w, step, tol_f)
            if q is None:
                continue
            _, gq, _ = field_.jet(q)
        except E.EvalError:
            continue
        if _guarded(gq, [n - 1], plan.exclusion_tol):
            continue
        compare(p, r0, q, ratios(gq))

    # plan points sharing an f-value
    order = sorted(range(len(out.samples)), key=lambda k: out.samples[k][0])
    pts = plan.points()
    for a, b in zip(order, order[1:]):
        fa, ra = out.samples[a]
        fb, rb = out.samples[b]
        if abs(fa - fb) <= tol_f * (1.0 + abs(fa)):
            compare(pts[a], ra, pts[b], rb)

    out.passed = bool(out.counterexample is None and out.pairs_compared > 0
                  and (out.max_expected_error is None or out.max_expected_error <= tol_psi))
    return out


# --------------------------------------------------------------------------
# agreement checks

TRANSFORMS: dict[str, Callable[[float], float]] = {
    "identity": lambda v: v,
    "neg": lambda v: -v,
    "square": lambda v: v * v,
}


def closed_form_check(field_: SolvedField, closed: E.Expr, plan: SamplePlan,
                      transform: str = "identity", tol: float = 1e-9) -> CheckResult:
    """Relative difference between transform(solved value) and a closed-form expression."""
    tf = TRANSFORMS[transform]
    fn = E.compile_exprs((closed,))
    res = CheckResult(f"closed_form[{transform}]", tol)
    for p in plan.points():
        try:
            want = fn(p)[0]
            got = tf(field_.value(p))
        except E.EvalError:
            res.error()
            continue
        res.add((got - want) / max(abs(want), 1e-300), 1.0, p)
    return res


def derivative_cross_check(field_: SolvedField, plan: SamplePlan, tol: float = 1e-6) -> CheckResult:
    """Implicit-function-theorem gradient against central finite differences."""
    res = CheckResult("ift_vs_fd", tol)
    for p in plan.points():
        try:
            exact = field_.gradient(p)
            approx = field_.fd_gradient(p)
        except E.EvalError:
            res.error()
            continue
        for a, b in zip(exact, approx):
            res.add(a - b, abs(a), p)
    return res
