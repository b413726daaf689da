import numpy as np
import pytest

from conftest import random_stable_system
from swsysid.errors import InvalidInputError
from swsysid.estimators import (
    STATUS_INSUFFICIENT,
    STATUS_OK,
    STATUS_RANK_DEFICIENT,
    EstimatorState,
    batch_fit,
    covariance_extremes,
    recursive_fit,
    recursive_step,
    state_to_dict,
)
from swsysid.models import SwitchedSystem, Trajectory, replay, simulate
from swsysid.noise import NoiseModel


def normal_equations_oracle(states, switches, mode):
    """Independent per-mode least squares: solve sum x x^T A^T = sum x y^T with numpy."""
    states, switches = np.asarray(states), np.asarray(switches)
    xs = states[:-1][switches == mode]
    ys = states[1:][switches == mode]
    return np.linalg.solve(xs.T @ xs, xs.T @ ys).T


def test_scalar_batch_fit(scalar_system):
    traj = replay(scalar_system, [0, 0, 0], [[1.0], [-1.0], [2.0]])
    state = batch_fit(traj)
    # sum x_{t+1} x_t = -1.375, sum x_t^2 = 1.25
    assert float(state.a_hat[0, 0, 0]) == pytest.approx(-1.375 / 1.25, rel=1e-14)
    assert int(state.visits[0]) == 3


def test_noiseless_scalar_recovers_a():
    sys = SwitchedSystem.create([[[0.5]]], [1.0], [1.0])
    traj = replay(sys, [0] * 6, np.zeros((6, 1)))
    np.testing.assert_array_equal(np.asarray(traj.states).ravel()[:3], [1.0, 0.5, 0.25])
    assert float(batch_fit(traj).a_hat[0, 0, 0]) == pytest.approx(0.5, rel=1e-15)
    assert float(recursive_fit(traj).a_hat[0, 0, 0]) == pytest.approx(0.5, rel=1e-14)


def test_unvisited_mode_is_flagged():
    sys = SwitchedSystem.create([[[0.5]], [[0.1]]], [0.5, 0.5])
    traj = replay(sys, [0, 0, 0, 0], [[1.0], [0.3], [-0.2], [0.4]])
    state = batch_fit(traj)
    assert state.status(1) == STATUS_INSUFFICIENT
    assert state.status(0) == STATUS_OK
    assert np.all(np.asarray(state.a_hat[1]) == 0.0)
    np.testing.assert_allclose(state.a_hat[0], normal_equations_oracle(traj.states, traj.switches, 0))


def test_rank_deficient_mode_uses_minimum_norm_solution():
    sys = SwitchedSystem.create([np.eye(2) * 0.5], [1.0])
    traj = replay(sys, [0, 0], [[1.0, 0.0], [0.0, 0.0]])
    state = batch_fit(traj)
    assert state.status(0) == STATUS_RANK_DEFICIENT
    assert state.mode(0).x_cov_inv is None
    # only x_1 = (1, 0) is informative: min-norm solution puts x_2 = (0.5, 0) in the first column
    np.testing.assert_allclose(state.a_hat[0], [[0.5, 0.0], [0.0, 0.0]], atol=1e-15)


def test_recursive_step_zero_residual_keeps_estimate():
    state = EstimatorState.warm_start([[[0.5, 0.1], [0.0, 0.3]]], [np.eye(2)])
    x = np.array([1.0, -2.0])
    new = recursive_step(state, x, 0, np.asarray(state.a_hat[0]) @ x)
    np.testing.assert_allclose(new.a_hat[0], state.a_hat[0], atol=1e-15)
    np.testing.assert_allclose(new.x_cov[0], np.eye(2) + np.outer(x, x))


def test_recursive_step_warm_started_scalar():
    state = EstimatorState.warm_start([[0.0]], [[1.0]])
    new = recursive_step(state, [1.0], 0, [1.0])
    assert float(new.a_hat[0, 0, 0]) == 0.5
    assert float(new.x_cov[0, 0, 0]) == 2.0
    assert int(new.t) == 1


def test_warm_started_modes_are_ok_before_any_visit():
    state = EstimatorState.warm_start([[[0.5]], [[0.2]]], [[[1.0]], [[2.0]]])
    assert [state.status(i) for i in range(2)] == [STATUS_OK, STATUS_OK]
    exported = state_to_dict(state)
    assert [m["status"] for m in exported["modes"]] == [STATUS_OK, STATUS_OK]


def test_recursive_step_only_touches_active_mode():
    state = EstimatorState.create(k=2, n=1)
    state = recursive_step(state, [1.0], 1, [0.4])
    assert int(state.visits[0]) == 0 and int(state.visits[1]) == 1
    assert float(state.x_cov[0, 0, 0]) == 0.0
    assert float(state.a_hat[1, 0, 0]) == pytest.approx(0.4)


def test_recursive_step_rejects_bad_input():
    state = EstimatorState.create(k=2, n=2)
    with pytest.raises(InvalidInputError):
        recursive_step(state, [1.0], 0, [1.0, 0.0])
    with pytest.raises(InvalidInputError):
        recursive_step(state, [1.0, 0.0], 2, [1.0, 0.0])


@pytest.mark.parametrize("seed", range(200))
def test_recursive_matches_batch(seed):
    rng = np.random.default_rng(seed)
    n, k = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    T = int(rng.choice([50, 100, 200, 500]))
    sys = random_stable_system(rng, n, k)
    traj = simulate(sys, NoiseModel.create(np.eye(n)), T, seed=seed)
    batch = batch_fit(traj)
    rec = recursive_fit(traj)
    assert int(rec.t) == T == int(np.sum(rec.visits))
    for i in range(k):
        if rec.status(i) == STATUS_OK:
            np.testing.assert_allclose(rec.a_hat[i], batch.a_hat[i], rtol=0, atol=1e-8)
            np.testing.assert_allclose(
                np.asarray(rec.x_cov[i]) @ np.asarray(rec.x_cov_inv[i]), np.eye(n), atol=1e-6
            )


@pytest.mark.parametrize("seed", range(50))
def test_single_mode_is_ordinary_least_squares(seed):
    rng = np.random.default_rng(1000 + seed)
    n = int(rng.integers(1, 4))
    sys = random_stable_system(rng, n, 1)
    traj = simulate(sys, NoiseModel.create(np.eye(n)), 300, seed=seed)
    np.testing.assert_allclose(
        batch_fit(traj).a_hat[0], normal_equations_oracle(traj.states, traj.switches, 0), atol=1e-10
    )


def test_relabeling_modes_permutes_estimates():
    rng = np.random.default_rng(5)
    sys = random_stable_system(rng, 2, 3)
    traj = simulate(sys, NoiseModel.create(np.eye(2)), 400, seed=5)
    perm = np.array([2, 0, 1])
    relabeled = Trajectory(
        states=traj.states,
        switches=perm[np.asarray(traj.switches)],
        noises=traj.noises,
        n_modes=3,
    )
    original, permuted = batch_fit(traj), batch_fit(relabeled)
    for i in range(3):
        np.testing.assert_allclose(permuted.a_hat[perm[i]], original.a_hat[i], rtol=1e-10)


def test_mode_estimate_uses_only_its_pairs():
    rng = np.random.default_rng(8)
    sys = random_stable_system(rng, 2, 2)
    traj = simulate(sys, NoiseModel.create(np.eye(2)), 400, seed=8)
    s = np.asarray(traj.switches)
    x = np.asarray(traj.states)
    for i in range(2):
        idx = np.flatnonzero(s == i)
        xs, ys = x[idx], x[idx + 1]
        oracle = np.linalg.solve(xs.T @ xs, xs.T @ ys).T
        np.testing.assert_allclose(batch_fit(traj).a_hat[i], oracle, atol=1e-10)


def test_covariance_is_monotone():
    rng = np.random.default_rng(3)
    sys = random_stable_system(rng, 2, 2)
    traj = simulate(sys, NoiseModel.create(np.eye(2)), 200, seed=3)
    _, snaps = recursive_fit(traj, checkpoints=list(range(1, 201)))
    lam_min = np.linalg.eigvalsh(np.asarray(snaps.x_cov))[..., 0]
    assert np.all(np.diff(lam_min, axis=0) >= -1e-9)


def test_covariance_extremes():
    state = EstimatorState.create(k=2, n=2)
    assert covariance_extremes(state, 0) == (0.0, 0.0, 0)
    state = recursive_step(state, [1.0, 0.0], 0, [0.3, 0.1])
    assert covariance_extremes(state, 0) == pytest.approx((0.0, 1.0, 1))
    with pytest.raises(InvalidInputError):
        covariance_extremes(state, 2)


def test_warmup_step_and_export():
    sys = SwitchedSystem.create([np.eye(2) * 0.5], [1.0])
    traj = replay(sys, [0, 0, 0], [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    state = recursive_fit(traj)
    # x_0 = 0 adds nothing, x_1 = (1, 0), x_2 = (0.5, 1) makes X invertible at T = 3
    assert state.mode(0).warmup_step == 3
    exported = state_to_dict(state)
    assert exported["modes"][0]["mode"] == 1
    assert exported["modes"][0]["warmup_step"] == 3
    assert exported["modes"][0]["status"] == STATUS_OK


def test_ridge_starts_invertible():
    state = EstimatorState.create(k=1, n=2, ridge=0.1)
    assert state.status(0) == STATUS_OK
    state = recursive_step(state, [1.0, 1.0], 0, [0.5, 0.5])
    expected = np.outer([0.5, 0.5], [1.0, 1.0]) @ np.linalg.inv(0.1 * np.eye(2) + np.ones((2, 2)))
    np.testing.assert_allclose(state.a_hat[0], expected, rtol=1e-12)


def test_theta_hat_stacks_modes():
    state = EstimatorState.warm_start(
        [[[1.0, 2.0], [3.0, 4.0]], [[5.0, 6.0], [7.0, 8.0]]], [np.eye(2), np.eye(2)]
    )
    np.testing.assert_array_equal(state.theta_hat, [[1, 2, 5, 6], [3, 4, 7, 8]])
