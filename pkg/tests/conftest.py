from fractions import Fraction

import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from geoweb import expr as E

settings.register_profile("ci", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")


def expressions(n=3, max_leaves=8, radicals=True, division=True):
    """Random expression trees in x1..xn that stay finite on the box [0.5, 1.5]^n.

    Denominators and radicands are kept away from zero by construction.
    """
    leaves = st.one_of(
        st.integers(1, n).map(lambda i: E.var(f"x{i}")),
        st.integers(-4, 4).map(lambda k: E.const(Fraction(k))),
    )

    def extend(children):
        ops = [
            st.tuples(children, children).map(lambda ab: E.add(*ab)),
            st.tuples(children, children).map(lambda ab: E.sub(*ab)),
            st.tuples(children, children).map(lambda ab: E.mul(*ab)),
            st.tuples(children, st.integers(0, 3)).map(lambda ak: E.power(*ak)),
            children.map(E.neg),
        ]
        if division:
            # 2 + a^2 never vanishes
            ops.append(st.tuples(children, children).map(
                lambda ab: E.div(ab[0], E.add(E.const(2), E.power(ab[1], 2)))))
        if radicals:
            ops.append(children.map(lambda a: E.sqrt(E.add(E.const(1), E.power(a, 2)))))
        return st.one_of(*ops)

    return st.recursive(leaves, extend, max_leaves=max_leaves)


def points(n=3, lo=0.5, hi=1.5):
    return st.lists(st.floats(lo, hi), min_size=n, max_size=n).map(tuple)


def rel_close(a, b, rtol, atol=0.0):
    return abs(a - b) <= atol + rtol * max(abs(a), abs(b), 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance gate bookkeeping: tests append (number, title, passed, detail)
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, ok, detail in sorted(ACCEPTANCE_LINES):
        line = f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {title}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
