import numpy as np
import pytest

import swsysid  # noqa: F401  (enables float64)
from swsysid.models import SwitchedSystem
from swsysid.noise import NoiseModel

TWO_MODE_A1 = [[1.5, 0.0], [0.0, 0.2]]
TWO_MODE_A2 = [[0.01, 0.1], [0.1, 0.1]]


def random_stable_system(rng, n, k, norm=0.9):
    """k random n x n modes rescaled to spectral norm ``norm``, random pmf bounded away from 0."""
    modes = []
    for _ in range(k):
        a = rng.standard_normal((n, n))
        modes.append(norm * a / np.linalg.norm(a, 2))
    pmf = rng.uniform(0.5, 1.5, size=k)
    pmf = pmf / pmf.sum()
    pmf[-1] = 1.0 - pmf[:-1].sum()
    return SwitchedSystem.create(np.stack(modes), pmf)


@pytest.fixture
def two_mode_system():
    return SwitchedSystem.create([TWO_MODE_A1, TWO_MODE_A2], [0.75, 0.25])


@pytest.fixture
def unit_noise():
    return NoiseModel.create(np.eye(2))


@pytest.fixture
def scalar_system():
    return SwitchedSystem.create([[[0.5]]], [1.0], [0.0])


@pytest.fixture
def two_mode_config_dict():
    return {
        "name": "fig1",
        "system": {"modes": [TWO_MODE_A1, TWO_MODE_A2], "switch_pmf": [0.75, 0.25]},
        "noise": {"kind": "gaussian_iid", "covariance": [[1.0, 0.0], [0.0, 1.0]]},
        "horizon": 30000,
        "runs": 30,
        "master_seed": 0,
    }
