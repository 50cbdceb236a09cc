import pytest
from hypothesis import given, strategies as st

from geoweb import expr as E
from geoweb.envelope import (LinearFamilyError, PatternError, PlaneFamily, envelope_of,
                             family_from_web_function, same_zero_set, verify_tangency)
from geoweb.poly import Poly

CONE_PLUS = "(x2 - 1 + sqrt((x2 - 1)^2 - 4*x1*x3)) / (2*x1)"
CONE_MINUS = "(x2 - 1 - sqrt((x2 - 1)^2 - 4*x1*x3)) / (2*x1)"
CYL_PLUS = "((1 + sqrt(1 - 4*x2*(x1 + x3))) / (2*x2))^2"
CYL_MINUS = "((1 - sqrt(1 - 4*x2*(x1 + x3))) / (2*x2))^2"
HYP3 = "((1 - sqrt(1 - 4*x1*(x2 + x3))) / (2*x1))^2"
PENCIL = "x3 / (1 - x1 - x2)"


def fam(text):
    return family_from_web_function(E.parse(text, 3))


def poly(text):
    return Poly.parse(text, 3)


@pytest.mark.parametrize("text", [CONE_PLUS, CONE_MINUS])
def test_cone_family_coefficients(text):
    f = fam(text)
    assert (f.a, f.b, f.c) == (poly("x1"), poly("1 - x2"), poly("x3"))
    assert not f.squared_level
    assert str(f.polynomial()) == "x1*C^2 - x2*C + x3 + C"


@pytest.mark.parametrize("text", [CONE_PLUS, CONE_MINUS])
def test_cone_envelope_exact(text):
    env = envelope_of(fam(text))
    assert env == poly("x2^2 - 4*x1*x3 - 2*x2 + 1")


@pytest.mark.parametrize("text", [CYL_PLUS, CYL_MINUS])
def test_cylinder_family_in_square_root_of_level(text):
    f = fam(text)
    assert f.squared_level
    assert (f.a, f.b, f.c) == (poly("x2"), poly("-1"), poly("x1 + x3"))


@pytest.mark.parametrize("text", [CYL_PLUS, CYL_MINUS])
def test_cylinder_envelope(text):
    env = envelope_of(fam(text))
    assert env == poly("1 - 4*x1*x2 - 4*x2*x3")
    assert env.primitive() == poly("4*x1*x2 + 4*x2*x3 - 1")
    assert same_zero_set(env, poly("4*x1*x2 + 4*x2*x3 - 1"))


def test_third_cylinder():
    assert envelope_of(fam(HYP3)).primitive() == poly("4*x1*x2 + 4*x1*x3 - 1")


def test_pencil_family_is_linear():
    f = fam(PENCIL)
    assert f.degree == 1
    assert str(f.polynomial()) == "x1*C + x2*C + x3 - C"
    # the normal (C, C, 1) turns with C, so the planes are not parallel
    assert f.linear_kind() == "pencil"
    with pytest.raises(LinearFamilyError):
        envelope_of(f)


def test_parallel_family_detected():
    f = family_from_web_function(E.parse("x1 + 2*x2 - x3", 3))
    assert f.linear_kind() == "parallel"


def test_non_algebraic_level_set_rejected():
    with pytest.raises(PatternError):
        family_from_web_function(E.parse("sqrt(x1 + sqrt(x2))", 2))


def test_constant_discriminant():
    f = PlaneFamily(Poly.const(1), Poly(), Poly.const(-1))
    env = envelope_of(f)
    assert env.is_constant() and env.constant_term() == 4
    with pytest.raises(ValueError):
        verify_tangency(f, env)


@pytest.mark.parametrize("text,plane", [
    (CONE_PLUS, "x1 - x2 + x3 + 1"),
    (CYL_MINUS, "x1 + x2 + x3 - 1"),
])
def test_member_at_one_touches_envelope(text, plane):
    f = fam(text)
    assert f.member(1) == poly(plane)
    rep = verify_tangency(f, envelope_of(f), params=[1.0])
    assert rep.passed and rep.max_defect <= 1e-8 and not rep.misses


@pytest.mark.parametrize("text", [CONE_PLUS, CYL_PLUS, HYP3])
def test_seeded_tangency(text):
    f = fam(text)
    rep = verify_tangency(f, envelope_of(f), samples=8, seed=4)
    assert rep.passed and len(rep.points) >= 8


def test_wrong_envelope_is_not_tangent():
    f = fam(CONE_PLUS)
    rep = verify_tangency(f, poly("x1^2 + x2^2 + x3^2 - 1"), samples=6, seed=1)
    assert not rep.passed


@given(st.integers(-5, 5).filter(bool), st.integers(-5, 5))
def test_discriminant_vanishes_on_double_roots(a, r):
    # a (C - r)^2 expanded in C has discriminant zero
    f = PlaneFamily(Poly.const(a), Poly.const(-2 * a * r), Poly.const(a * r * r))
    assert envelope_of(f).is_zero()
