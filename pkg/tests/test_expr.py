import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from stochext import expr as ex
from stochext.errors import (
    DomainError, ParseError, UnknownIdentifierError, VariableIndexError,
)
from stochext.scenario import bundled_path, bundled_scenarios


def ev(src, n=0, **point):
    return ex.evaluate(ex.parse(src, n), point)


# -- examples ---------------------------------------------------------------

def test_parse_power():
    e = ex.parse("t^2")
    assert e == ex.Pow(ex.Var("t"), 2)
    assert ex.evaluate(e, {"t": 3.0}) == 9.0


def test_parse_minimum_point():
    assert ev("1 + (t-0.5)^2 + (w1-0.4)^2", 1, t=0.5, w1=0.4) == pytest.approx(1.0, abs=1e-15)


def test_parse_sine_with_pi():
    assert ev("sin(2*pi*t)", t=0.25) == pytest.approx(1.0, abs=1e-12)


def test_diff_examples():
    assert ex.evaluate(ex.diff(ex.parse("t^2"), "t", 1), {"t": 3.0}) == 6.0
    assert ex.evaluate(ex.diff(ex.parse("sin(2*pi*t)"), "t", 2), {"t": 0.0}) == pytest.approx(0.0, abs=1e-12)
    d3 = ex.diff(ex.parse("(t-0.5)^3"), "t", 3)
    for t in (-2.0, 0.1, 0.5, 7.0):
        assert ex.evaluate(d3, {"t": t}) == pytest.approx(6.0, rel=1e-14)


def test_eval_examples():
    assert ev("exp(t)", t=0.0) == 1.0
    assert ev("t*w1", 1, t=2.0, w1=3.0) == 6.0
    with pytest.raises(DomainError):
        ev("1/t", t=0.0)


@pytest.mark.parametrize("src, point", [
    ("log(t)", {"t": 0.0}),
    ("log(t)", {"t": -1.0}),
    ("sqrt(t)", {"t": -1e-3}),
    ("exp(t)", {"t": 1e4}),
])
def test_domain_errors(src, point):
    with pytest.raises(DomainError):
        ev(src, **point)


def test_precedence_and_associativity():
    assert ev("2^3^2") == 512.0
    assert ev("-2^2") == -4.0
    assert ev("2*3+4/2-1") == 7.0
    assert ev("(1+2)*3") == 9.0
    assert ev("2^-1") == 0.5


@pytest.mark.parametrize("src, exc, pos", [
    ("t +* 2", ParseError, 3),
    ("(t + 1", ParseError, 6),
    ("foo(t)", UnknownIdentifierError, 0),
    ("t + x", UnknownIdentifierError, 4),
    ("t^0.5", ParseError, None),
    ("t^w1", ParseError, None),
])
def test_parse_errors_carry_position(src, exc, pos):
    with pytest.raises(exc) as info:
        ex.parse(src, 1)
    if pos is not None:
        assert info.value.position == pos


def test_variable_index_out_of_range():
    with pytest.raises(VariableIndexError):
        ex.parse("t + w2", 1)
    with pytest.raises(VariableIndexError):
        ex.ProcessSpec(ex.parse("w1", 1), (0, 1), 0)


def test_vectorized_evaluation_matches_scalar():
    e = ex.parse("1+(t-0.5)^2+sin(3*w1)*t", 1)
    t = np.linspace(0, 1, 11)
    w = np.linspace(-1, 1, 11)
    vec = ex.evaluate(e, {"t": t, "w1": w})
    for i in range(11):
        assert vec[i] == ex.evaluate(e, {"t": t[i], "w1": w[i]})


def test_simplification_keeps_derivatives_small():
    d = ex.diff(ex.parse("(t-0.5)^3"), "t", 3)
    assert isinstance(d, ex.Const)
    assert ex.diff(ex.parse("w1^2", 1), "t", 1) == ex.ZERO


def test_flatexp_derivative_and_guard():
    e = ex.parse("flatexp(t)")
    assert ex.evaluate(e, {"t": 0.0}) == 0.0
    assert ex.evaluate(e, {"t": -1.0}) == 0.0
    assert ex.evaluate(e, {"t": 0.5}) == pytest.approx(math.exp(-2.0), rel=1e-15)
    d = ex.diff(e, "t", 1)
    assert ex.evaluate(d, {"t": 0.5}) == pytest.approx(4 * math.exp(-2.0), rel=1e-14)
    assert ex.evaluate(ex.parse("flatexp(t, 2)"), {"t": 0.5}) == pytest.approx(4 * math.exp(-2.0))


def test_process_nonnegativity_check():
    ex.ProcessSpec.from_formula("t^2", (-1, 1)).check_nonnegative()
    with pytest.raises(ValueError):
        ex.ProcessSpec.from_formula("t - 0.5", (0, 1)).check_nonnegative()


# -- properties -------------------------------------------------------------

def _bundled_formulas():
    out = []
    for name in bundled_scenarios():
        doc = json.loads(bundled_path(name).read_text())
        out.append((doc["process"]["formula"], doc["process"].get("omega_dim", 0)))
    out += [("0.5+0.25*sin(2*pi*t)", 0), ("t+0.2*sin(t)", 0), ("exp(-t)*cos(3*t)/(2+t^2)", 0),
            ("sqrt(1+t^2)*log(2+w1^2)", 1)]
    return out


def _fd4(e, var, point, h=1e-3):
    def at(s):
        p = dict(point)
        p[var] = point[var] + s * h
        return ex.evaluate(e, p)
    return (-at(2) + 8 * at(1) - 8 * at(-1) + at(-2)) / (12 * h)


@pytest.mark.parametrize("formula, n", _bundled_formulas())
def test_derivative_matches_finite_differences(formula, n):
    e = ex.parse(formula, n)
    rng = np.random.default_rng(7)
    names = ["t"] + [f"w{i + 1}" for i in range(n)]
    for _ in range(100):
        point = {v: float(rng.uniform(-1, 1)) for v in names}
        for var in names:
            exact = ex.evaluate(ex.diff(e, var, 1), point)
            approx = _fd4(e, var, point)
            assert abs(exact - approx) <= 1e-6 * max(1.0, abs(exact))


_leaf = st.one_of(
    st.just(ex.Var("t")), st.just(ex.Var("w1")),
    st.floats(-3, 3, allow_nan=False).map(ex.Const),
)


def _grow(lowest_power):
    def grow(children):
        bin_ops = st.sampled_from([ex.Add, ex.Sub, ex.Mul])
        return st.one_of(
            st.builds(lambda op, a, b: op(a, b), bin_ops, children, children),
            st.builds(lambda a, b: ex.Div(a, ex.Add(ex.Const(2.0), ex.Func("sin", b))),
                      children, children),
            st.builds(lambda a, k: ex.Pow(a, k), children, st.integers(lowest_power, 4)),
            st.builds(ex.Neg, children),
            st.builds(ex.Func, st.sampled_from(["sin", "cos"]), children),
        )
    return grow


exprs = st.recursive(_leaf, _grow(-2), max_leaves=12)
# negative powers near zero make finite differences meaningless, not the derivative wrong
smooth_exprs = st.recursive(_leaf, _grow(0), max_leaves=12)
points = st.fixed_dictionaries({"t": st.floats(-1, 1), "w1": st.floats(-1, 1)})


def _value(e, p):
    try:
        v = ex.evaluate(e, p)
    except DomainError:
        assume(False)
    assume(abs(v) < 1e8)
    return v


@settings(max_examples=200, deadline=None)
@given(exprs, points)
def test_print_parse_round_trip(e, p):
    v = _value(e, p)
    back = ex.parse(ex.to_string(e), 1)
    assert ex.evaluate(back, p) == pytest.approx(v, rel=1e-14, abs=1e-14)


@settings(max_examples=100, deadline=None)
@given(smooth_exprs, points)
def test_symbolic_derivative_property(e, p):
    _value(e, p)
    d = ex.diff(e, "t", 1)
    try:
        exact = ex.evaluate(d, p)
        approx = _fd4(e, "t", p, h=1e-4)
    except DomainError:
        assume(False)
    assume(abs(exact) < 1e4)
    assert abs(exact - approx) <= 1e-5 * max(1.0, abs(exact))
