import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ddoco.costs import (
    CostPair,
    CostSchedule,
    equilibrium_schedule,
    ogd_step,
    quadratic_tracking,
    validate_schedule,
)
from ddoco.errors import InfeasibleError, InvalidInputError

vec = arrays(np.float64, 3, elements=st.floats(-1e3, 1e3))


def test_quadratic_values_and_gradients(rng):
    c = quadratic_tracking([1.0, -1.0], [2.0])
    assert c.value([1.0, -1.0], [2.0]) == 0.0
    assert c.value([0.0, 0.0], [0.0]) == pytest.approx(3.0)
    u = rng.standard_normal(2)
    h = 1e-6
    fd = np.array([(c.f_u(u + h * e) - c.f_u(u - h * e)) / (2 * h) for e in np.eye(2)])
    np.testing.assert_allclose(c.grad_u(u), fd, atol=1e-8)
    np.testing.assert_array_equal(c.hess_u, np.eye(2))


def test_minimizers_are_frozen():
    c = quadratic_tracking([1.0], [2.0])
    with pytest.raises(ValueError):
        c.eta[0] = 3.0


def test_lipschitz_over_box():
    c = quadratic_tracking([0.5], [0.0], u_box=(-1.0, 1.0), y_box=(-2.0, 2.0))
    assert c.lipschitz_u == pytest.approx(1.5)
    assert c.lipschitz_y == pytest.approx(2.0)


def test_cost_pair_constant_check():
    with pytest.raises(InvalidInputError):
        CostPair(abs, abs, abs, abs, np.zeros(1), np.zeros(1), alpha_u=2.0, l_u=1.0)
    with pytest.raises(InvalidInputError):
        quadratic_tracking([np.nan], [0.0])


@given(vec, vec, st.floats(1e-3, 1.0))
@settings(max_examples=200)
def test_ogd_contraction(z, target, gamma):
    c = quadratic_tracking(target, [0.0])
    step = ogd_step(z, c.grad_u(z), gamma, c.alpha_u, c.l_u)
    assert np.linalg.norm(step - target) <= (1 - gamma) * np.linalg.norm(z - target) + 1e-9


def test_ogd_warns_on_large_step():
    with pytest.warns(UserWarning):
        ogd_step(np.ones(2), np.ones(2), 1.5, alpha=1.0, l=1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ogd_step(np.ones(2), np.ones(2), 1.0, alpha=1.0, l=1.0)
    with pytest.raises(InvalidInputError):
        ogd_step(np.ones(2), np.ones(3), 0.5)


def test_schedule_lookup():
    a, b = quadratic_tracking([0.0], [0.0]), quadratic_tracking([1.0], [2.0])
    s = CostSchedule((0, 3), (a, b), horizon=5)
    assert [s.at(t) is b for t in range(6)] == [False, False, False, True, True, True]
    etas, thetas = s.minimizers()
    assert etas.shape == (6, 1) and thetas[-1, 0] == 2.0
    assert s.with_horizon(2).costs == (a,)
    with pytest.raises(InvalidInputError):
        s.at(6)


@pytest.mark.parametrize(
    "times, horizon",
    [((1, 3), 5), ((0, 0), 5), ((0, 3), -1)],
)
def test_schedule_validation(times, horizon):
    c = quadratic_tracking([0.0], [0.0])
    with pytest.raises(InvalidInputError):
        CostSchedule(times, (c, c), horizon)


def test_equilibrium_schedule_and_validation(scalar_plant):
    s = equilibrium_schedule(scalar_plant.steady_output, [0, 4], [[1.0], [-0.5]], 10)
    assert s.costs[1].theta == pytest.approx([-1.0])
    validate_schedule(s, lambda u, y: abs(2 * u[0] - y[0]))
    bad = CostSchedule((0,), (quadratic_tracking([1.0], [1.0]),), 3)
    with pytest.raises(InfeasibleError):
        validate_schedule(bad, lambda u, y: abs(2 * u[0] - y[0]))
