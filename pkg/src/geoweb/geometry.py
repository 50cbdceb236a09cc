"""Metrics, connections and a geodesic integrator.

Connection tables are indexed ``gamma[i][j][k]`` = Gamma_ij^k with 0-based
indices; the numeric array returned by :meth:`Connection.at` uses the same
layout.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import expr as E

__all__ = [
    "Metric", "Connection", "Geometry", "GeodesicPath", "SamplingError",
    "christoffel_from_metric", "constant_curvature_connection",
    "hypersurface_connection", "integrate_geodesic",
]

SYMBOLIC_INVERSE_MAX_DIM = 4


class SamplingError(ValueError):
    """A sample point lies outside the region where the geometry is valid."""


def _x(i: int) -> E.Var:
    return E.Var(f"x{i}")


def _exact(value) -> E.Const:
    if isinstance(value, float) and value.is_integer():
        return E.Const(Fraction(int(value)))
    if isinstance(value, float):
        return E.Const(Fraction(repr(value)))
    return E.Const(value)


def _sum(terms) -> E.Expr:
    out: E.Expr = E.Const(0)
    for t in terms:
        out = E.add(out, t)
    return out


def _radius2(n: int) -> E.Expr:
    return _sum(E.power(_x(k), 2) for k in range(1, n + 1))


@dataclass(frozen=True)
class Metric:
    entries: tuple[tuple[E.Expr, ...], ...]

    def __post_init__(self):
        n = len(self.entries)
        for i in range(n):
            if len(self.entries[i]) != n:
                raise ValueError("metric must be square")
            for j in range(i):
                if self.entries[i][j] != self.entries[j][i]:
                    raise ValueError(f"metric not symmetric at ({i + 1},{j + 1})")

    @property
    def n(self) -> int:
        return len(self.entries)

    @classmethod
    def from_rows(cls, rows) -> "Metric":
        return cls(tuple(tuple(r) for r in rows))

    @classmethod
    def flat(cls, n: int) -> "Metric":
        return cls.from_rows([[E.Const(int(i == j)) for j in range(n)] for i in range(n)])

    @classmethod
    def constant_curvature(cls, kappa, n: int) -> "Metric":
        """(dx1^2 + ... + dxn^2) / (1 + kappa*|x|^2)^2"""
        conf = E.div(E.Const(1), E.power(E.add(E.Const(1), E.mul(_exact(kappa), _radius2(n))), 2))
        zero = E.Const(0)
        return cls.from_rows([[conf if i == j else zero for j in range(n)] for i in range(n)])

    @classmethod
    def hypersurface(cls, u: E.Expr, m: int) -> "Metric":
        """Metric induced on the graph x_{m+1} = u(x1..xm): delta_ij + u_i u_j."""
        grad = E.gradient(u, m)
        rows = [[E.add(E.Const(int(i == j)), E.mul(grad[i], grad[j])) for j in range(m)]
                for i in range(m)]
        # make the off-diagonal pairs structurally identical
        for i in range(m):
            for j in range(i):
                rows[i][j] = rows[j][i]
        return cls.from_rows(rows)

    def at(self, p: Sequence[float]) -> np.ndarray:
        flat = E.compile_exprs(tuple(e for row in self.entries for e in row))(p)
        return np.array(flat, dtype=float).reshape(self.n, self.n)

    def check_positive_definite(self, p: Sequence[float]) -> None:
        g = self.at(p)
        for k in range(1, self.n + 1):
            if np.linalg.det(g[:k, :k]) <= 0:
                raise SamplingError(f"metric not positive definite at {tuple(p)}")


@dataclass(frozen=True)
class Connection:
    n: int
    gamma: tuple | None = None
    torsion_free: bool = True
    numeric: Callable[[Sequence[float]], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.gamma is None and self.numeric is None:
            raise ValueError("connection needs a symbolic table or a numeric evaluator")

    @classmethod
    def flat(cls, n: int) -> "Connection":
        z = E.Const(0)
        return cls(n, tuple(tuple(tuple(z for _ in range(n)) for _ in range(n)) for _ in range(n)))

    @classmethod
    def from_strings(cls, table, n: int, torsion_free: bool | None = None) -> "Connection":
        """Build from a nested list ``table[i][j][k]`` of expression strings."""
        gamma = tuple(tuple(tuple(E.parse(s, n, names=()) if isinstance(s, str) else E.Const(s)
                                  for s in row) for row in plane) for plane in table)
        if len(gamma) != n or any(len(r) != n or any(len(c) != n for c in r) for r in gamma):
            raise ValueError(f"connection table must be {n}x{n}x{n}")
        conn = cls(n, gamma, torsion_free=True)
        if torsion_free is None:
            torsion_free = conn.is_structurally_symmetric()
        return cls(n, gamma, torsion_free=torsion_free)

    def is_structurally_symmetric(self) -> bool:
        g = self.gamma
        return all(g[i][j][k] == g[j][i][k]
                   for i in range(self.n) for j in range(self.n) for k in range(self.n))

    def _compiled(self):
        return E.compile_exprs(tuple(e for plane in self.gamma for row in plane for e in row))

    def at(self, p: Sequence[float]) -> np.ndarray:
        if self.gamma is None:
            return np.asarray(self.numeric(p), dtype=float)
        vals = self._compiled()(p)
        return np.array(vals, dtype=float).reshape(self.n, self.n, self.n)


@dataclass(frozen=True)
class Geometry:
    """Which connection the web functions are checked against.

    ``kind`` is one of "flat", "constant_curvature", "hypersurface", "explicit".
    For "hypersurface" the web functions live in the m = n-1 graph coordinates.
    """
    kind: str
    kappa: float | Fraction | None = None
    u: E.Expr | None = None
    connection: Connection | None = None

    @classmethod
    def flat(cls):
        return cls("flat")

    @classmethod
    def constant_curvature(cls, kappa):
        return cls("constant_curvature", kappa=kappa)

    @classmethod
    def hypersurface(cls, u: E.Expr):
        return cls("hypersurface", u=u)

    @classmethod
    def explicit(cls, conn: Connection):
        return cls("explicit", connection=conn)

    def connection_for(self, n: int) -> Connection:
        if self.kind == "flat":
            return Connection.flat(n)
        if self.kind == "constant_curvature":
            return constant_curvature_connection(self.kappa, n)
        if self.kind == "hypersurface":
            return hypersurface_connection(self.u, n)
        if self.kind == "explicit":
            if self.connection.n != n:
                raise ValueError("connection dimension does not match")
            return self.connection
        raise ValueError(f"unknown geometry {self.kind!r}")


# --------------------------------------------------------------------------
# Christoffel symbols

def _det(m: list[list[E.Expr]]) -> E.Expr:
    n = len(m)
    if n == 1:
        return m[0][0]
    if n == 2:
        return E.sub(E.mul(m[0][0], m[1][1]), E.mul(m[0][1], m[1][0]))
    total: E.Expr = E.Const(0)
    for j in range(n):
        if m[0][j] == E.Const(0):
            continue
        minor = [row[:j] + row[j + 1:] for row in m[1:]]
        term = E.mul(m[0][j], _det(minor))
        total = E.add(total, term) if j % 2 == 0 else E.sub(total, term)
    return total


def _symbolic_inverse(m: list[list[E.Expr]]) -> list[list[E.Expr]]:
    n = len(m)
    det = _det(m)
    if n == 1:
        return [[E.div(E.Const(1), det)]]
    inv = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [row[:i] + row[i + 1:] for k, row in enumerate(m) if k != j]
            cof = _det(minor)
            if (i + j) % 2:
                cof = E.neg(cof)
            inv[i][j] = E.div(cof, det)
    # symmetric input gives symmetric inverse; share the entries
    for i in range(n):
        for j in range(i):
            inv[i][j] = inv[j][i]
    return inv


def christoffel_from_metric(g: Metric) -> Connection:
    """Levi-Civita connection: Gamma_ij^k = 1/2 g^{kl} (d_j g_li + d_i g_lj - d_l g_ij)."""
    n = g.n
    dg = [[[E.diff(g.entries[a][b], c + 1) for c in range(n)] for b in range(n)] for a in range(n)]

    if n > SYMBOLIC_INVERSE_MAX_DIM:
        return _numeric_christoffel(g, dg)

    ginv = _symbolic_inverse([list(r) for r in g.entries])
    half = E.Const(Fraction(1, 2))
    table = [[[None] * n for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            for k in range(n):
                s = _sum(E.mul(ginv[k][l],
                               E.sub(E.add(dg[l][i][j], dg[l][j][i]), dg[i][j][l]))
                         for l in range(n))
                table[i][j][k] = table[j][i][k] = E.mul(half, s)
    return Connection(n, tuple(tuple(tuple(r) for r in plane) for plane in table))


def _numeric_christoffel(g: Metric, dg) -> Connection:
    n = g.n
    flat = tuple(dg[a][b][c] for a in range(n) for b in range(n) for c in range(n))
    dg_fn = E.compile_exprs(flat)

    def evaluate(p):
        ginv = np.linalg.inv(g.at(p))
        d = np.array(dg_fn(p)).reshape(n, n, n)  # d[l, i, j] = d_j g_li
        # lower[l, i, j] = d_j g_li + d_i g_lj - d_l g_ij
        lower = d + d.transpose(0, 2, 1) - d.transpose(2, 1, 0)
        return 0.5 * np.einsum("kl,lij->ijk", ginv, lower)

    return Connection(n, None, numeric=evaluate)


def constant_curvature_connection(kappa, n: int) -> Connection:
    """Closed-form Gamma for (sum dx_k^2)/(1 + kappa|x|^2)^2.

    Gamma_ii^k = 2 kappa x_k b (k != i), Gamma_ii^i = -2 kappa x_i b,
    Gamma_ij^i = -2 kappa x_j b (i != j), all others zero; b = 1/(1 + kappa|x|^2).
    """
    k2 = E.mul(E.Const(2), _exact(kappa))
    b = E.div(E.Const(1), E.add(E.Const(1), E.mul(_exact(kappa), _radius2(n))))
    zero = E.Const(0)

    def term(idx):  # 2 kappa x_idx b
        return E.mul(E.mul(k2, _x(idx + 1)), b)

    table = [[[zero] * n for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for k in range(n):
            table[i][i][k] = term(k) if k != i else E.neg(term(i))
        for j in range(n):
            if j != i:
                table[i][j][i] = E.neg(term(j))
                table[i][j][j] = E.neg(term(i))
    return Connection(n, tuple(tuple(tuple(r) for r in plane) for plane in table))


def hypersurface_connection(u: E.Expr, m: int, shifted_denominator: bool = False) -> Connection:
    """Levi-Civita connection of the graph x_{m+1} = u(x1..xm).

    Gamma_ij^k = u_k u_ij / (1 + |grad u|^2).  ``shifted_denominator=True``
    uses 1 + sum(1 + u_k^2) instead; that variant does not match the connection
    derived from the induced metric and is kept only for comparison.
    """
    grad = E.gradient(u, m)
    hess = E.hessian(u, m)
    sq = _sum(E.power(gk, 2) for gk in grad)
    extra = E.Const(m) if shifted_denominator else E.Const(0)
    den = E.add(E.add(E.Const(1), extra), sq)
    table = [[[E.div(E.mul(grad[k], hess[i][j]), den) for k in range(m)]
              for j in range(m)] for i in range(m)]
    for i in range(m):
        for j in range(i):
            table[i][j] = table[j][i]
    return Connection(m, tuple(tuple(tuple(r) for r in plane) for plane in table))


# --------------------------------------------------------------------------
# geodesics

@dataclass
class GeodesicPath:
    times: np.ndarray
    points: np.ndarray
    velocities: np.ndarray
    truncated: bool = False
    error: str | None = None

    @property
    def endpoint(self) -> np.ndarray:
        return self.points[-1]


def integrate_geodesic(conn: Connection, x0, v0, T: float, steps: int) -> GeodesicPath:
    """Fixed-step classical RK4 for x''^k + Gamma_ij^k x'^i x'^j = 0.

    If the connection cannot be evaluated mid-path, or the state overflows,
    the path is cut at the last good point and flagged ``truncated``.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x = np.asarray(x0, dtype=float).copy()
    v = np.asarray(v0, dtype=float).copy()
    h = T / steps

    def accel(p, w):
        gamma = conn.at(p)
        return -np.einsum("ijk,i,j->k", gamma, w, w)

    pts, vels = [x.copy()], [v.copy()]

    def cut(reason):
        return GeodesicPath(h * np.arange(len(pts)), np.array(pts), np.array(vels), True, reason)

    for _ in range(steps):
        try:
            with np.errstate(over="raise", invalid="raise"):
                a1 = accel(x, v)
                x2, v2 = x + 0.5 * h * v, v + 0.5 * h * a1
                a2 = accel(x2, v2)
                x3, v3 = x + 0.5 * h * v2, v + 0.5 * h * a2
                a3 = accel(x3, v3)
                x4, v4 = x + h * v3, v + h * a3
                a4 = accel(x4, v4)
                x = x + h / 6 * (v + 2 * v2 + 2 * v3 + v4)
                v = v + h / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
        except (E.EvalError, ValueError, FloatingPointError) as exc:
            return cut(str(exc))
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            return cut("non-finite state")
        pts.append(x.copy())
        vels.append(v.copy())
    return GeodesicPath(h * np.arange(steps + 1), np.array(pts), np.array(vels))
