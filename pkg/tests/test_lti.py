import numpy as np
import pytest

from ddoco.costs import quadratic_tracking
from ddoco.errors import InvalidInputError, InvalidSystemError, NoSteadyStateError
from ddoco.lti import (
    LtiSystem,
    SystemSpec,
    controllability_index,
    model_steady_state,
    random_system,
    solve_hindsight,
    stabilizing_gain,
    toeplitz_matrix,
)

from .conftest import make_plant
from .oracles import condensed_hindsight


def test_step_returns_output_before_advancing(scalar_plant):
    scalar_plant.x = np.array([1.0])
    assert scalar_plant.step([2.0]) == pytest.approx([1.0])
    assert scalar_plant.x == pytest.approx([2.5])


def test_toeplitz_matches_simulation(plant, rng):
    u = rng.standard_normal((6, plant.m))
    sim = plant.copy().simulate(u)
    T = toeplitz_matrix(plant.A, plant.B, plant.C, plant.D, 6)
    np.testing.assert_allclose(T @ u.ravel(), sim.y.ravel(), atol=1e-12)


def test_rejects_uncontrollable_and_unobservable():
    with pytest.raises(InvalidSystemError):
        LtiSystem(np.eye(2), [[1.0], [0.0]], [[1.0, 1.0]], [[0.0]])
    with pytest.raises(InvalidSystemError):
        LtiSystem([[0.5, 0.0], [1.0, 0.3]], [[1.0], [0.0]], [[0.0, 0.0]], [[0.0]])
    with pytest.raises(InvalidInputError):
        LtiSystem(np.eye(2), np.ones((3, 1)), np.ones((1, 2)), np.zeros((1, 1)))


def test_steady_output_scalar(scalar_plant):
    assert scalar_plant.steady_output(np.array([1.5])) == pytest.approx([3.0])
    u, x = model_steady_state(scalar_plant, [3.0], [0.0])
    assert u == pytest.approx([1.5]) and x == pytest.approx([3.0])


def test_model_steady_state_is_equilibrium_and_closest(plant, rng):
    y = rng.standard_normal(plant.p)
    v = rng.standard_normal(plant.m)
    u, x = model_steady_state(plant, y, v)
    np.testing.assert_allclose(plant.A @ x + plant.B @ u, x, atol=1e-10)
    np.testing.assert_allclose(plant.C @ x + plant.D @ u, y, atol=1e-10)
    # any other equilibrium with the same output is farther from v
    G = plant.C @ np.linalg.solve(np.eye(plant.n) - plant.A, plant.B) + plant.D
    null = np.linalg.svd(G)[2][plant.p :].T
    for _ in range(10):
        other = u + null @ rng.standard_normal(null.shape[1])
        assert np.linalg.norm(other - v) >= np.linalg.norm(u - v) - 1e-12


def test_no_steady_state_when_m_below_p():
    sys = random_system(3, 1, 2, np.random.default_rng(0), require_steady_outputs=False)
    assert not sys.has_steady_outputs()
    with pytest.raises(NoSteadyStateError):
        model_steady_state(sys, [1.0, 0.0], [0.0])


def test_controllability_index():
    A = np.diag([0.1, 0.2, 0.3, 0.4])
    assert controllability_index(LtiSystem(A, np.ones((4, 1)), np.ones((1, 4)), [[0.0]])) == 4
    B = np.array([[1.0, 0], [0, 1.0], [1.0, 0], [0, 1.0]])
    assert controllability_index(LtiSystem(A, B, np.ones((1, 4)), [[0.0, 0.0]])) == 2


def test_random_system_properties_and_determinism():
    a = random_system(5, 2, 1, np.random.default_rng(3))
    b = random_system(5, 2, 1, np.random.default_rng(3))
    np.testing.assert_array_equal(a.A, b.A)
    assert a.is_controllable() and a.is_observable() and a.has_steady_outputs()
    assert np.abs(a.A).max() <= 1.0
    z = random_system(4, 2, 2, np.random.default_rng(0), zero_feedthrough=True)
    assert not z.D.any()


def test_system_spec_explicit_defaults_zero_feedthrough():
    sys = SystemSpec(mode="explicit", A=[[0.5]], B=[[1.0]], C=[[1.0]]).build()
    assert sys.D.shape == (1, 1) and sys.D[0, 0] == 0.0
    with pytest.raises(InvalidInputError):
        SystemSpec(mode="other")


def test_stabilizing_gain_is_schur(plant):
    K = stabilizing_gain(plant)
    assert np.abs(np.linalg.eigvals(plant.A + plant.B @ K)).max() < 1.0


@pytest.mark.parametrize("seed", range(4))
def test_hindsight_matches_condensed_oracle(seed):
    sys = make_plant(seed, n=4, m=2, p=2)
    rng = np.random.default_rng(seed)
    L = 12  # condensing squares the conditioning of unstable plants; keep it short
    etas = rng.standard_normal((L, 2))
    thetas = rng.standard_normal((L, 2))
    x0 = rng.standard_normal(4)
    costs = [quadratic_tracking(e, th) for e, th in zip(etas, thetas)]
    traj, total = solve_hindsight(sys, costs, x0)
    u_ref, y_ref = condensed_hindsight(sys, etas, thetas, x0)
    scale = 1 + np.abs(u_ref).max()
    np.testing.assert_allclose(traj.u, u_ref, atol=1e-8 * scale)
    np.testing.assert_allclose(traj.y, y_ref, atol=1e-8 * (1 + np.abs(y_ref).max()))
    ref_total = sum(c.value(u, y) for c, u, y in zip(costs, u_ref, y_ref))
    assert total == pytest.approx(ref_total, rel=1e-9)
    assert total <= ref_total * (1 + 1e-12)


def test_hindsight_perturbations_do_not_improve(scalar_plant, rng):
    costs = [quadratic_tracking([0.5], [1.0])] * 8
    traj, best = solve_hindsight(scalar_plant, costs, [0.0])
    for _ in range(20):
        u = traj.u + 1e-3 * rng.standard_normal(traj.u.shape)
        sim = scalar_plant.copy()
        sim.x = np.zeros(1)
        y = sim.simulate(u).y
        assert sum(c.value(a, b) for c, a, b in zip(costs, u, y)) >= best - 1e-12


def test_hindsight_at_equilibrium_is_free(scalar_plant):
    # starting at the equilibrium of the cost minimizers, holding it costs nothing
    costs = [quadratic_tracking([1.0], [2.0])] * 5
    traj, total = solve_hindsight(scalar_plant, costs, [2.0])
    assert total == pytest.approx(0.0, abs=1e-20)
    np.testing.assert_allclose(traj.u, 1.0)


def test_hindsight_requires_quadratic(scalar_plant):
    with pytest.raises(InvalidInputError):
        solve_hindsight(scalar_plant, [], [0.0])
