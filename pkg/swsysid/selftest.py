"""Hand-worked oracle examples, runnable without pytest via ``swsysid selftest``."""
import math

import numpy as np
from absl import logging

from swsysid import analysis, matops
from swsysid.estimators import EstimatorState, batch_fit, recursive_step
from swsysid.models import SwitchedSystem, replay

TWO_MODE_A2 = [[0.01, 0.1], [0.1, 0.1]]


def _scalar_trajectory():
    sys = SwitchedSystem.create([[[0.5]]], [1.0], [0.0])
    return sys, replay(sys, [0, 0, 0], [[1.0], [-1.0], [2.0]])


def _scalar_estimate():
    _, traj = _scalar_trajectory()
    return float(batch_fit(traj).a_hat[0, 0, 0])


def _warm_started_step():
    state = EstimatorState.warm_start([[0.0]], [[1.0]])
    state = recursive_step(state, [1.0], 0, [1.0])
    return float(state.a_hat[0, 0, 0]), float(state.x_cov[0, 0, 0])


def _cross_term_ratio():
    sys, traj = _scalar_trajectory()
    return analysis.appendix_diagnostics(traj, sys, checkpoints=[2]).cross_term_ratios[0]


# symmetric 2x2 eigenvalues: tr/2 +- sqrt((tr/2)^2 - det)
_A2_SIGMA = 0.055 + math.sqrt(0.055**2 + 0.009)

CHECKS = [
    ("spectral norm of two-mode A2", lambda: matops.spectral_norm(TWO_MODE_A2), _A2_SIGMA, 1e-12),
    ("eig extremes [[2,1],[1,2]]", lambda: matops.sym_eig_extremes([[2.0, 1.0], [1.0, 2.0]]), (1.0, 3.0), 1e-12),
    ("spectral radius of rotation", lambda: matops.max_abs_eig([[0.0, 1.0], [-1.0, 0.0]]), 1.0, 1e-12),
    (
        "kron of diagonals",
        lambda: tuple(np.diag(np.asarray(matops.kron(np.diag([1.5, 0.2]), np.diag([1.5, 0.2]))))),
        (2.25, 0.30, 0.30, 0.04),
        1e-12,
    ),
    ("Sherman-Morrison scalar", lambda: float(matops.sherman_morrison_inv_update([[1.0]], [1.0])[0, 0]), 0.5, 0.0),
    (
        "Sherman-Morrison axis update",
        lambda: tuple(np.asarray(matops.sherman_morrison_inv_update(np.eye(2), [1.0, 0.0])).ravel()),
        (0.5, 0.0, 0.0, 1.0),
        0.0,
    ),
    ("scalar least squares", _scalar_estimate, -1.1, 1e-12),
    ("warm-started recursive step", _warm_started_step, (0.5, 2.0), 0.0),
    ("data dependent bound (10, 10)", lambda: analysis.data_dependent_bound(10.0, 10.0), math.sqrt(math.log(10) / 10), 1e-12),
    ("data independent bounds", lambda: analysis.data_independent_bounds(100, 25, 0.25), (math.sqrt(math.log(100) / 25),) * 2, 1e-12),
    ("cross-term ratio", _cross_term_ratio, 1.0, 1e-12),
]


def _close(value, expected, tol):
    value, expected = np.atleast_1d(np.asarray(value, dtype=float)), np.atleast_1d(np.asarray(expected, dtype=float))
    return value.shape == expected.shape and bool(np.all(np.abs(value - expected) <= tol))


def run_selftest():
    """Returns a list of ``(name, passed, value, expected)``."""
    results = []
    for name, fn, expected, tol in CHECKS:
        try:
            value = fn()
            passed = _close(value, expected, tol)
        except Exception as e:  # a crashing check is a failed check
            value, passed = repr(e), False
        if not passed:
            logging.warning("selftest %s failed: got %s, expected %s", name, value, expected)
        results.append((name, passed, value, expected))
    return results
