import math

import numpy as np
import pytest

from swsysid import matops
from swsysid.errors import InvalidInputError, NumericalFailureError


def _sym2_eigs(a, b, c):
    """Eigenvalues of [[a, b], [b, c]] from the characteristic polynomial."""
    half_tr = 0.5 * (a + c)
    disc = math.sqrt(half_tr**2 - (a * c - b * b))
    return half_tr - disc, half_tr + disc


def test_spectral_norm_examples():
    assert matops.spectral_norm(np.eye(3)) == pytest.approx(1.0, rel=1e-12)
    assert matops.spectral_norm(np.diag([1.5, 0.2])) == pytest.approx(1.5, rel=1e-12)
    lo, hi = _sym2_eigs(0.01, 0.1, 0.1)
    expected = max(abs(lo), abs(hi))
    assert expected == pytest.approx(0.16466, abs=1e-5)
    assert matops.spectral_norm([[0.01, 0.1], [0.1, 0.1]]) == pytest.approx(expected, rel=1e-10)


def test_spectral_norm_rejects_non_finite():
    with pytest.raises(InvalidInputError):
        matops.spectral_norm([[1.0, np.nan], [0.0, 1.0]])
    with pytest.raises(InvalidInputError):
        matops.spectral_norm([[np.inf]])


def test_sym_eig_extremes_examples():
    assert matops.sym_eig_extremes(np.eye(2)) == pytest.approx((1.0, 1.0))
    assert matops.sym_eig_extremes(np.diag([2.25, 0.30, 0.30, 0.04])) == pytest.approx((0.04, 2.25))
    assert matops.sym_eig_extremes([[2.0, 1.0], [1.0, 2.0]]) == pytest.approx(_sym2_eigs(2.0, 1.0, 2.0))


def test_sym_eig_extremes_rejects_asymmetric():
    with pytest.raises(InvalidInputError):
        matops.sym_eig_extremes([[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(InvalidInputError):
        matops.sym_eig_extremes([[1.0, 0.0, 0.0]])


def test_symmetry_tolerance_is_relative():
    small = np.array([[1e-6, 1e-7], [1e-7 + 1e-14, 1e-6]])
    assert not matops.is_symmetric(small)
    assert matops.is_symmetric(np.array([[1.0, 0.1], [0.1 + 1e-10, 1.0]]))
    assert matops.is_symmetric(np.zeros((2, 2)))
    with pytest.raises(InvalidInputError):
        matops.sym_eig_extremes(small)
    assert matops.sym_eig_extremes(np.zeros((2, 2))) == (0.0, 0.0)


def test_max_abs_eig_examples():
    assert matops.max_abs_eig([[0.0, 1.0], [0.0, 0.0]]) == pytest.approx(0.0, abs=1e-12)
    assert matops.max_abs_eig(np.diag([0.5, -0.9])) == pytest.approx(0.9)
    # lambda^2 + 1 = 0
    assert matops.max_abs_eig([[0.0, 1.0], [-1.0, 0.0]]) == pytest.approx(1.0)
    with pytest.raises(InvalidInputError):
        matops.max_abs_eig(np.ones((2, 3)))


def test_kron_examples():
    np.testing.assert_array_equal(matops.kron(np.eye(2), np.eye(2)), np.eye(4))
    np.testing.assert_array_equal(matops.kron([[2.0]], [[3.0]]), [[6.0]])
    d = np.diag([1.5, 0.2])
    np.testing.assert_allclose(matops.kron(d, d), np.diag([2.25, 0.30, 0.30, 0.04]), atol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_kron_eigenvalues_are_pairwise_products(seed):
    rng = np.random.default_rng(seed)
    da, db = rng.uniform(-2, 2, 3), rng.uniform(-2, 2, 2)
    eigs = np.sort(np.diag(np.asarray(matops.kron(np.diag(da), np.diag(db)))))
    np.testing.assert_allclose(eigs, np.sort(np.outer(da, db).ravel()), rtol=1e-14)


def test_sherman_morrison_examples():
    np.testing.assert_array_equal(matops.sherman_morrison_inv_update(np.eye(2), [0.0, 0.0]), np.eye(2))
    np.testing.assert_array_equal(matops.sherman_morrison_inv_update([[1.0]], [1.0]), [[0.5]])
    np.testing.assert_array_equal(
        matops.sherman_morrison_inv_update(np.eye(2), [1.0, 0.0]), np.diag([0.5, 1.0])
    )


@pytest.mark.parametrize("seed", range(20))
def test_sherman_morrison_inverts_rank_one_update(seed):
    rng = np.random.default_rng(seed)
    n = rng.integers(1, 5)
    g = rng.standard_normal((n + 2, n))
    x = g.T @ g
    v = rng.standard_normal(n)
    updated = np.asarray(matops.sherman_morrison_inv_update(np.linalg.inv(x), v))
    np.testing.assert_allclose(updated @ (x + np.outer(v, v)), np.eye(n), atol=1e-8)
    np.testing.assert_array_equal(updated, updated.T)


def test_sherman_morrison_rejects_broken_inverse():
    with pytest.raises(NumericalFailureError):
        matops.sherman_morrison_inv_update([[-1.0]], [1.0])
    with pytest.raises(InvalidInputError):
        matops.sherman_morrison_inv_update(np.eye(2), [1.0])


def test_max_abs_entry_examples():
    assert matops.max_abs_entry(np.zeros((2, 2))) == 0.0
    assert matops.max_abs_entry([[1.0, -3.0], [2.0, 0.0]]) == 3.0
    assert matops.max_abs_entry([[0.01, 0.1], [0.1, 0.1]]) == 0.1


@pytest.mark.parametrize("seed", range(20))
def test_spectral_norm_dominates_spectral_radius(seed):
    rng = np.random.default_rng(seed)
    n = rng.integers(1, 6)
    m = rng.standard_normal((n, n))
    assert matops.spectral_norm(m) >= matops.max_abs_eig(m) - 1e-12


@pytest.mark.parametrize("seed", range(10))
def test_gram_matrix_has_nonnegative_spectrum(seed):
    rng = np.random.default_rng(seed)
    vs = rng.standard_normal((6, 3))
    lam_min, lam_max = matops.sym_eig_extremes(sum(np.outer(v, v) for v in vs))
    assert 0.0 <= lam_min <= lam_max
