"""Deterministic evaluation points and the per-check result record."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.stats import qmc

from . import expr as E

__all__ = ["SamplePlan", "CheckResult", "default_grid_count"]

MAX_GRID_POINTS = 1000


def default_grid_count(n: int) -> int:
    """Points per axis: 10 per axis, reduced so the grid stays within 1000 points."""
    k = 10
    while k > 1 and k ** n > MAX_GRID_POINTS:
        k -= 1
    return k


@dataclass(frozen=True)
class SamplePlan:
    """A box, a tensor grid inside it, plus seeded scrambled-Halton points.

    ``constraints`` are expressions that must be strictly positive at a point
    for it to be kept (e.g. the radicand of a web function); rejected points
    are counted in ``n_rejected``, never dropped silently.  ``exclusion_tol``
    is the relative gradient size below which a point or pair counts as
    singular and is excluded from a residual check.
    """
    box: tuple[tuple[float, float], ...]
    grid: int | tuple[int, ...] | None = None
    n_random: int = 100
    seed: int = 0
    constraints: tuple[E.Expr, ...] = ()
    exclusion_tol: float = 1e-8

    @property
    def n(self) -> int:
        return len(self.box)

    def _grid_counts(self) -> tuple[int, ...]:
        if self.grid is None:
            return (default_grid_count(self.n),) * self.n
        if isinstance(self.grid, int):
            return (self.grid,) * self.n
        return tuple(self.grid)

    def candidates(self) -> np.ndarray:
        lo = np.array([b[0] for b in self.box], dtype=float)
        hi = np.array([b[1] for b in self.box], dtype=float)
        parts = []
        counts = self._grid_counts()
        if all(c > 0 for c in counts):
            axes = [np.linspace(l, h, c) if c > 1 else np.array([(l + h) / 2])
                    for l, h, c in zip(lo, hi, counts)]
            mesh = np.meshgrid(*axes, indexing="ij")
            parts.append(np.stack([m.ravel() for m in mesh], axis=1))
        if self.n_random > 0:
            sampler = qmc.Halton(d=self.n, scramble=True, seed=self.seed)
            parts.append(qmc.scale(sampler.random(self.n_random), lo, hi))
        if not parts:
            return np.empty((0, self.n))
        return np.concatenate(parts, axis=0)

    @cached_property
    def _filtered(self):
        pts = self.candidates()
        if not self.constraints:
            return pts, 0
        fn = E.compile_exprs(tuple(self.constraints))
        keep = []
        for p in pts:
            try:
                keep.append(all(v > 0 for v in fn(p)))
            except E.EvalError:
                keep.append(False)
        keep = np.array(keep, dtype=bool)
        return pts[keep], int((~keep).sum())

    def points(self) -> np.ndarray:
        return self._filtered[0]

    @property
    def n_rejected(self) -> int:
        return self._filtered[1]

    def with_seed(self, seed: int) -> "SamplePlan":
        return dataclasses.replace(self, seed=seed)


@dataclass
class CheckResult:
    """Residual statistics for one check (one function, one pair or one family).

    ``max_abs`` is the largest raw (cleared) residual, ``max_scaled`` the
    largest residual divided by its magnitude scale; ``passed`` compares the
    scaled value against ``tolerance``.
    """
    name: str
    tolerance: float
    n_ok: int = 0
    n_excluded: int = 0
    n_error: int = 0
    max_abs: float = 0.0
    max_scaled: float = 0.0
    sum_abs: float = 0.0
    min_regular_fraction: float = 0.0
    worst_point: tuple[float, ...] | None = None
    notes: list[str] = field(default_factory=list)

    def add(self, value: float, scale: float = 1.0, point=None) -> None:
        a = abs(float(value))
        scale = float(scale)
        self.n_ok += 1
        self.sum_abs += a
        self.max_abs = max(self.max_abs, a)
        s = a / max(1.0, scale)
        if point is not None and (self.worst_point is None or s > self.max_scaled):
            self.worst_point = tuple(float(v) for v in point)
        self.max_scaled = max(self.max_scaled, s)

    def exclude(self) -> None:
        self.n_excluded += 1

    def error(self) -> None:
        self.n_error += 1

    @property
    def n_total(self) -> int:
        return self.n_ok + self.n_excluded + self.n_error

    @property
    def mean_abs(self) -> float:
        return self.sum_abs / self.n_ok if self.n_ok else 0.0

    @property
    def regular_fraction(self) -> float:
        return self.n_ok / self.n_total if self.n_total else 0.0

    @property
    def passed(self) -> bool:
        return (self.n_ok > 0 and math.isfinite(self.max_scaled)
                and self.max_scaled <= self.tolerance
                and self.regular_fraction >= self.min_regular_fraction)

    def merge(self, other: "CheckResult") -> "CheckResult":
        out = CheckResult(self.name, self.tolerance,
                          min_regular_fraction=self.min_regular_fraction)
        out.n_ok = self.n_ok + other.n_ok
        out.n_excluded = self.n_excluded + other.n_excluded
        out.n_error = self.n_error + other.n_error
        out.sum_abs = self.sum_abs + other.sum_abs
        out.max_abs = max(self.max_abs, other.max_abs)
        worst = self if self.max_scaled >= other.max_scaled else other
        out.max_scaled = worst.max_scaled
        out.worst_point = worst.worst_point
        out.notes = self.notes + other.notes
        return out

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "tolerance": self.tolerance,
            "max_abs": self.max_abs,
            "max_scaled": self.max_scaled,
            "mean_abs": self.mean_abs,
            "n_ok": self.n_ok,
            "n_excluded": self.n_excluded,
            "n_error": self.n_error,
            "worst_point": list(self.worst_point) if self.worst_point else None,
            "notes": list(self.notes),
        }
