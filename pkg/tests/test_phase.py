import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import gamma

from stochext import expr as ex
from stochext.bump import BumpSpec
from stochext.errors import (
    MultipleStationaryPointsError, NonPositiveDensityError, NoStationaryPointError,
    SingularHessianError, UnclassifiedPointError, UnsupportedModelError,
)
from stochext.oscint import oscillatory_integral
from stochext.phase import (
    StationaryPoint, asymptotic_sum, cm_constant, find_stationary_points, theorem2_asymptotic,
)
from stochext.prob import Box, Deterministic, Discrete, MonteCarlo

P = ex.ProcessSpec.from_formula
UNIT = BumpSpec(0.0, 1.0, 0.1)
BOX = Box(((0.0, 1.0),))


def test_quadratic_point():
    (p,) = find_stationary_points(ex.parse("t^2"), (), (-0.5, 0.5))
    assert p.t_star == pytest.approx(0.0, abs=1e-12)
    assert p.order == 2 and p.mth_derivative == pytest.approx(2.0)
    assert p.verified


def test_sine_points():
    pts = find_stationary_points(ex.parse("0.5+0.25*sin(2*pi*t)"), (), (0, 1))
    assert [p.t_star for p in pts] == pytest.approx([0.25, 0.75], abs=1e-12)
    assert [p.order for p in pts] == [2, 2]
    assert [p.phase_value for p in pts] == pytest.approx([0.75, 0.25], abs=1e-14)
    assert pts[0].mth_derivative < 0 < pts[1].mth_derivative


def test_cubic_point():
    (p,) = find_stationary_points(ex.parse("0.5+(t-0.5)^3"), (), (0, 1))
    assert p.t_star == pytest.approx(0.5, abs=1e-6)
    assert p.order == 3 and p.mth_derivative == pytest.approx(6.0, rel=1e-9)
    # f_t touches zero without changing sign
    assert not p.verified


def test_newton_polish_reaches_tight_residual():
    f = ex.parse("0.3+(t-0.123456789)^2+0.1*sin(t)")
    (p,) = find_stationary_points(f, (), (-1, 1))
    ft = ex.diff(f, "t")
    assert abs(ex.evaluate(ft, {"t": p.t_star})) <= 1e-12


def test_omega_dependent_phase():
    f = ex.parse("(t-w1)^2", 1)
    (p,) = find_stationary_points(f, (0.3,), (0, 1))
    assert p.t_star == pytest.approx(0.3, abs=1e-12)
    assert p.omega_star == (0.3,)


def test_high_order_is_unclassified():
    (p,) = find_stationary_points(ex.parse("(t-0.5)^8"), (), (0, 1))
    assert p.order is None
    with pytest.raises(UnclassifiedPointError):
        asymptotic_sum([p], [1.0], 100.0)


def test_no_points_for_monotone_phase():
    assert find_stationary_points(ex.parse("t"), (), (0, 1)) == []


@pytest.mark.parametrize("m", range(2, 7))
def test_cm_constant_gamma_oracle(m):
    assert cm_constant(m) == pytest.approx(2 * gamma(1 + 1 / m), rel=1e-10)


def test_cm_constant_examples():
    assert cm_constant(2) == pytest.approx(math.sqrt(math.pi), abs=1e-10)
    assert cm_constant(4) == pytest.approx(1.8128049, abs=1e-7)
    with pytest.raises(ValueError):
        cm_constant(7)


def test_asymptotic_even_example():
    p = StationaryPoint(0.0, (), 2, 2.0, 0.0)
    val = asymptotic_sum([p], [1.0], 400.0)
    assert val == pytest.approx(math.sqrt(math.pi / 400) * cmath.exp(1j * math.pi / 4), rel=1e-10)
    assert abs(val - (0.06267 + 0.06267j)) < 1e-5


def test_asymptotic_odd_example():
    p = StationaryPoint(0.5, (), 3, 6.0, 0.5)
    k = 3000.0
    amp = cm_constant(3) * (6 / (k * 6)) ** (1 / 3) * math.cos(math.pi / 6)
    assert asymptotic_sum([p], [1.0], k) == pytest.approx(amp * cmath.exp(1j * k * 0.5), rel=1e-12)


def test_asymptotic_negative_curvature_sign():
    p = StationaryPoint(0.0, (), 2, -2.0, 0.0)
    val = asymptotic_sum([p], [1.0], 100.0)
    assert cmath.phase(val) == pytest.approx(-math.pi / 4)


@given(st.floats(1.0, 1e4), st.floats(-3, 3), st.floats(-3, 3))
def test_asymptotic_sum_is_linear_and_conjugate_symmetric(k, f1, f2):
    a = StationaryPoint(0.1, (), 2, 3.0, f1)
    b = StationaryPoint(0.7, (), 2, -5.0, f2)
    both = asymptotic_sum([a, b], [1.0, 0.5], k)
    assert both == pytest.approx(asymptotic_sum([a], [1.0], k) + asymptotic_sum([b], [0.5], k),
                                 rel=1e-12, abs=1e-15)
    assert asymptotic_sum([a, b], [1.0, 0.5], -k) == both.conjugate()


def test_asymptotic_rejects_zero_k():
    with pytest.raises(ValueError):
        asymptotic_sum([], [], 0.0)


@pytest.mark.parametrize("formula, bump, m", [
    ("t^2", BumpSpec(-0.5, 0.5, 0.25), 2),
    ("0.5+(t-0.5)^3", UNIT, 3),
    ("0.5+0.25*sin(2*pi*t)", UNIT, 2),
])
def test_remainder_bounded_as_k_doubles(formula, bump, m):
    f = ex.parse(formula)
    pts = find_stationary_points(f, (), bump.support)
    phis = [1.0] * len(pts)
    scaled = []
    for j in range(5):
        k = 200.0 * 2 ** j
        q = oscillatory_integral(f, (), bump, k)
        scaled.append(abs(q - asymptotic_sum(pts, phis, k)) * k ** (2 / m))
    # bounded: never exceeds its starting size by more than a small factor
    assert max(scaled) <= 2 * scaled[0] + 1e-12


# -- joint critical points --------------------------------------------------

def test_joint_asymptotic_quadratic():
    pr = P("1+(t-0.5)^2+(w1-0.4)^2", (0, 1), 1)
    val, rep = theorem2_asymptotic(pr, BOX, UNIT, 400.0)
    assert (rep.t_star, rep.omega_star[0]) == pytest.approx((0.5, 0.4), abs=1e-10)
    assert rep.det == pytest.approx(4.0)
    assert rep.signature == 2
    assert rep.predicted_limit == pytest.approx(1.0, abs=1e-14)
    assert rep.leading_amplitude == pytest.approx((2 * math.pi / 400) / 2, rel=1e-12)
    assert abs(val) == pytest.approx(rep.leading_amplitude)
    assert abs(rep.signature) <= 2 and (rep.signature - 2) % 2 == 0


def test_joint_asymptotic_saddle():
    pr = P("2+(t-0.5)^2-(w1-0.5)^2", (0, 1), 1)
    val, rep = theorem2_asymptotic(pr, BOX, UNIT, 400.0)
    assert rep.signature == 0
    assert rep.det == pytest.approx(-4.0)
    assert val == pytest.approx(rep.leading_amplitude * cmath.exp(1j * 400 * 2.0), rel=1e-12)


def test_joint_asymptotic_against_tensor_quadrature():
    from stochext.extremum import CharacteristicFunction
    pr = P("1+(t-0.5)^2+(w1-0.4)^2", (0, 1), 1)
    k = 800.0
    val, _ = theorem2_asymptotic(pr, BOX, UNIT, k)
    direct = CharacteristicFunction(pr, BOX, UNIT, k_max=k)(np.array([k]))[0]
    assert abs(direct - val) / abs(val) <= 0.05


def test_joint_asymptotic_deterministic_matches_one_dimensional_formula():
    pr = P("1+(t-0.5)^2", (0, 1))
    val, rep = theorem2_asymptotic(pr, Deterministic(), UNIT, 300.0)
    (p,) = find_stationary_points(pr.expr, (), UNIT.support)
    assert val == pytest.approx(asymptotic_sum([p], [1.0], 300.0), rel=1e-10)
    assert rep.density_value == 1.0


def test_joint_asymptotic_density_weighting():
    pr = P("1+(t-0.5)^2+(w1-0.25)^2", (0, 1), 1)
    model = Box(((0.0, 1.0),), "2*w1")
    _, rep = theorem2_asymptotic(pr, model, UNIT, 100.0)
    assert rep.density_value == pytest.approx(0.5, rel=1e-10)


def test_joint_asymptotic_errors():
    with pytest.raises(NoStationaryPointError):
        theorem2_asymptotic(P("1+t+(w1-0.4)^2", (0, 1), 1), BOX, UNIT, 100.0)
    with pytest.raises(MultipleStationaryPointsError):
        theorem2_asymptotic(P("1+0.1*cos(4*pi*t)+(w1-0.4)^2", (0, 1), 1), BOX, UNIT, 100.0)
    with pytest.raises(SingularHessianError):
        theorem2_asymptotic(P("1+(t-0.5)^2+(w1-0.4)^4", (0, 1), 1), BOX, UNIT, 100.0)
    with pytest.raises(NonPositiveDensityError):
        theorem2_asymptotic(P("1+(t-0.5)^2+(w1-0.5)^2", (0, 1), 1),
                            Box(((0.0, 1.0),), "4*(w1-0.5)^2*3"), UNIT, 100.0)
    with pytest.raises(UnsupportedModelError):
        theorem2_asymptotic(P("1+(t-0.5)^2+w1", (0, 1), 1), Discrete((((0.2,), 1.0),)), UNIT, 1.0)
    with pytest.raises(UnsupportedModelError):
        theorem2_asymptotic(P("1+(t-0.5)^2+w1", (0, 1), 1), MonteCarlo(((0, 1),)), UNIT, 1.0)
