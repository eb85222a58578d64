import threading

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stochext.errors import DomainError, ModelError, UnsupportedModelError
from stochext.prob import (
    Box, Deterministic, Discrete, MonteCarlo, density_at, integrate_over_omega,
)

UNIFORM = Box(((0.0, 1.0),))


def test_deterministic_constant():
    assert integrate_over_omega(lambda w: 2.5, Deterministic()) == 2.5
    seen = []
    integrate_over_omega(lambda w: seen.append(w.shape) or 0.0, Deterministic())
    assert seen == [(0,)]


def test_discrete_average():
    g = lambda w: w[0] ** 2  # noqa: E731
    model = Discrete((((0.2,), 0.5), ((0.6,), 0.5)))
    assert integrate_over_omega(g, model) == pytest.approx((0.04 + 0.36) / 2, rel=1e-15)


def test_box_second_moment():
    assert integrate_over_omega(lambda w: w[0] ** 2, UNIFORM) == pytest.approx(1 / 3, abs=1e-12)


@pytest.mark.parametrize("model", [
    Discrete((((0.1, 0.2), 0.25), ((0.3, 0.4), 0.75))),
    Box(((0.0, 1.0),)),
    Box(((-1.0, 1.0), (0.0, 2.0)), "0.25"),
    Box(((0.0, 1.0),), "2*w1"),
    Box(((0.0, 1.0), (0.0, 1.0)), "4*w1*w2"),
])
def test_total_mass_is_one(model):
    assert integrate_over_omega(lambda w: 1.0, model) == pytest.approx(1.0, abs=1e-10)


def test_monte_carlo_mass_within_three_sigma():
    mc = MonteCarlo(((0.0, 1.0),), "2*w1", samples=4096, seed=3)
    _, wts = mc.rule()
    est = float(wts.sum())
    sigma = float(np.std(wts * mc.samples)) / np.sqrt(mc.samples)
    assert abs(est - 1.0) <= 3 * sigma


def test_monte_carlo_is_reproducible():
    a = MonteCarlo(((0.0, 1.0), (0.0, 2.0)), "0.5", samples=500, seed=11)
    b = MonteCarlo(((0.0, 1.0), (0.0, 2.0)), "0.5", samples=500, seed=11)
    g = lambda w: np.cos(3 * w[0]) * w[1]  # noqa: E731
    assert integrate_over_omega(g, a) == integrate_over_omega(g, b)
    assert integrate_over_omega(g, a, threads=4) == integrate_over_omega(g, a)
    c = MonteCarlo(((0.0, 1.0), (0.0, 2.0)), "0.5", samples=500, seed=12)
    assert integrate_over_omega(g, c) != integrate_over_omega(g, a)


def test_threads_agree_bit_for_bit():
    g = lambda w: np.exp(1j * 40 * w[0] ** 2)  # noqa: E731
    assert integrate_over_omega(g, UNIFORM, threads=4) == integrate_over_omega(g, UNIFORM)


def test_non_finite_integrand_reports_omega():
    with pytest.raises(DomainError, match=r"w=\[0\.5\]"):
        integrate_over_omega(lambda w: np.nan if w[0] == 0.5 else 1.0,
                             Discrete((((0.2,), 0.5), ((0.5,), 0.5))))


def test_box_node_doubling_is_stable():
    g = lambda w: np.exp(1j * 30 * (w[0] - 0.4) ** 2)  # noqa: E731
    a = integrate_over_omega(g, Box(((0.0, 1.0),), nodes=64))
    b = integrate_over_omega(g, Box(((0.0, 1.0),), nodes=128))
    assert abs(a - b) < 1e-8


def test_frequency_adapted_rule_integrates_oscillation():
    k = 800.0
    g = lambda w: np.exp(1j * k * w[0])  # noqa: E731
    exact = (np.exp(1j * k) - 1) / (1j * k)
    assert abs(integrate_over_omega(g, UNIFORM, frequency=k) - exact) < 1e-12
    pts, _ = UNIFORM.rule(frequency=k)
    assert len(pts) > UNIFORM.nodes


def test_density_examples():
    assert density_at(UNIFORM, 0.4) == pytest.approx(1.0)
    assert density_at(Box(((0.0, 1.0),), "2*w1"), 0.25) == pytest.approx(0.5)
    with pytest.raises(ModelError):
        density_at(UNIFORM, 1.5)


@pytest.mark.parametrize("model", [Deterministic(), Discrete((((0.1,), 1.0),)),
                                   MonteCarlo(((0.0, 1.0),))])
def test_density_unsupported(model):
    with pytest.raises(UnsupportedModelError):
        density_at(model, 0.5)


@pytest.mark.parametrize("kwargs", [
    {"atoms": ((((0.1,), 0.5), ((0.2,), 0.4)))},
    {"atoms": ((((0.1,), 1.5), ((0.2,), -0.5)))},
    {"atoms": ((((0.1,), 0.5), ((0.2, 0.3), 0.5)))},
    {"atoms": ()},
])
def test_discrete_validation(kwargs):
    with pytest.raises(ModelError):
        Discrete(**kwargs)


def test_box_validation():
    with pytest.raises(ModelError):
        Box(((0, 1),), "2")  # mass 2
    with pytest.raises(ModelError):
        Box(((0, 1),), "2*w1-0.5")  # negative near 0
    with pytest.raises(ModelError):
        Box(((0, 1), (0, 1), (0, 1)))
    with pytest.raises(ModelError):
        Box(((1, 0),))
    with pytest.raises(ModelError):
        Box(((0, 1),), "t")


def test_box_renormalizes_small_mass_defect():
    b = Box(((0.0, 1.0),), "1.0005")
    assert integrate_over_omega(lambda w: 1.0, b) == pytest.approx(1.0, abs=1e-12)
    assert density_at(b, 0.3) == pytest.approx(1.0, abs=1e-12)


@given(st.lists(st.floats(0.01, 10), min_size=1, max_size=6), st.floats(-5, 5))
def test_discrete_weighted_sum(raw, c):
    total = sum(raw)
    atoms = tuple(((float(i),), r / total) for i, r in enumerate(raw))
    atoms = atoms[:-1] + ((atoms[-1][0], 1.0 - sum(w for _, w in atoms[:-1])),)
    model = Discrete(atoms)
    expect = sum(w * (p[0] + c) for p, w in model.atoms)
    assert integrate_over_omega(lambda w: w[0] + c, model) == pytest.approx(expect, rel=1e-12, abs=1e-12)


def test_models_are_immutable_and_shareable():
    errors = []

    def worker():
        try:
            for _ in range(20):
                UNIFORM.rule(frequency=100.0)
        except Exception as exc:  # pragma: no cover
            errors.append(exc)

    threads = [threading.Thread(target=worker) for _ in range(4)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    assert not errors
    with pytest.raises(Exception):
        UNIFORM.nodes = 3
