import math

import numpy as np
import pytest

from geoweb import expr as E
from geoweb.sampling import CheckResult, SamplePlan, default_grid_count


@pytest.mark.parametrize("n,k", [(1, 10), (2, 10), (3, 10), (4, 5), (6, 3)])
def test_default_grid_stays_under_a_thousand_points(n, k):
    assert default_grid_count(n) == k
    assert k ** n <= 1000


def test_plan_is_deterministic_and_seeded():
    plan = SamplePlan(((0, 1), (2, 3)), grid=3, n_random=10, seed=7)
    a, b = plan.candidates(), plan.candidates()
    assert np.array_equal(a, b) and a.shape == (19, 2)
    assert not np.array_equal(a, plan.with_seed(8).candidates())
    assert np.all((a[:, 1] >= 2) & (a[:, 1] <= 3))


def test_grid_comes_first_in_plan_order():
    plan = SamplePlan(((0, 1), (0, 1)), grid=2, n_random=0)
    assert plan.points().tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]


def test_constraints_reject_and_count():
    c = E.parse("1 - x1^2 - x2^2", 2)
    plan = SamplePlan(((-1, 1), (-1, 1)), grid=5, n_random=0, constraints=(c,))
    pts = plan.points()
    assert plan.n_rejected + len(pts) == 25
    assert np.all(pts[:, 0] ** 2 + pts[:, 1] ** 2 < 1)


def test_constraint_that_cannot_be_evaluated_rejects():
    plan = SamplePlan(((-1, 1),), grid=3, n_random=0, constraints=(E.parse("1/x1", 1),))
    assert plan.points().ravel().tolist() == [1.0]
    assert plan.n_rejected == 2


def test_check_result_bookkeeping():
    r = CheckResult("demo", 1e-9)
    r.add(1e-12, 10.0, (1.0, 2.0))
    r.add(-5e-10, 1.0, (3.0, 4.0))
    r.exclude()
    r.error()
    assert r.n_total == 4 and r.n_ok == 2
    assert r.max_abs == 5e-10 and r.max_scaled == 5e-10
    assert r.worst_point == (3.0, 4.0)
    assert r.passed
    r.add(1.0)
    assert not r.passed
    d = r.to_dict()
    assert d["n_excluded"] == 1 and d["passed"] is False


def test_empty_or_non_finite_results_fail():
    assert not CheckResult("empty", 1.0).passed
    r = CheckResult("nan", 1.0)
    r.add(math.inf)
    assert not r.passed


def test_regular_fraction_threshold():
    r = CheckResult("x", 1.0, min_regular_fraction=0.9)
    for _ in range(8):
        r.add(0.0)
    r.exclude()
    r.exclude()
    assert r.regular_fraction == 0.8 and not r.passed


def test_merge_keeps_the_worse_side():
    a, b = CheckResult("a", 1e-3), CheckResult("b", 1e-3)
    a.add(1e-5, 1.0, (0.0,))
    b.add(1e-4, 1.0, (1.0,))
    b.exclude()
    m = a.merge(b)
    assert m.n_ok == 2 and m.n_excluded == 1 and m.worst_point == (1.0,)
