"""Small dense linear-algebra kernels.

Every kernel takes array-likes, validates them eagerly and returns ``jax.numpy``
results in float64. Nothing here is randomized, so reruns are bit-identical.
"""
import numpy as np
import jax
import jax.numpy as jnp

from swsysid.errors import InvalidInputError, NumericalFailureError

SYMMETRY_RTOL = 1e-9


def as_matrix(m, name="matrix"):
    """Converts ``m`` to a finite 2-D float64 array or raises InvalidInputError."""
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidInputError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return jnp.asarray(arr)


def as_vector(v, name="vector"):
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return jnp.asarray(arr)


def _check_square(m, name):
    if m.shape[0] != m.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {m.shape}")


def spectral_norm(m):
    """Largest singular value, sigma_max(m) = sqrt(lambda_max(m^T m))."""
    m = as_matrix(m)
    return float(jnp.linalg.norm(m, ord=2))


def is_symmetric(m, rtol=SYMMETRY_RTOL):
    m = np.asarray(m)
    if m.size == 0:
        return True
    scale = max(float(np.max(np.abs(m))), np.finfo(np.float64).tiny)
    return float(np.max(np.abs(m - m.T))) <= rtol * scale


def sym_eig_extremes(m):
    """Returns ``(lambda_min, lambda_max)`` of a symmetric matrix."""
    m = as_matrix(m)
    _check_square(m, "matrix")
    if not is_symmetric(m):
        raise InvalidInputError(
            f"matrix is not symmetric within relative tolerance {SYMMETRY_RTOL}"
        )
    eigs = jnp.linalg.eigvalsh(m)
    return float(eigs[0]), float(eigs[-1])


def max_abs_eig(m):
    """Spectral radius of a (possibly asymmetric) square matrix."""
    m = as_matrix(m)
    _check_square(m, "matrix")
    return float(jnp.max(jnp.abs(jnp.linalg.eigvals(m))))


def kron(a, b):
    return jnp.kron(as_matrix(a, "a"), as_matrix(b, "b"))


@jax.jit
def rank_one_inverse_update(inv, v):
    """Traceable Sherman-Morrison core; returns the updated inverse and denominator.

    The result is re-symmetrized since ``inv`` is the inverse of a Gram matrix.
    """
    inv_v = inv @ v
    denom = 1.0 + v @ inv_v
    updated = inv - jnp.outer(inv_v, inv_v) / denom
    return 0.5 * (updated + updated.T), denom


def sherman_morrison_inv_update(inv, v):
    """Returns (X + v v^T)^-1 given inv = X^-1."""
    inv = as_matrix(inv, "inv")
    _check_square(inv, "inv")
    v = as_vector(v, "v")
    if v.shape[0] != inv.shape[0]:
        raise InvalidInputError(
            f"vector of length {v.shape[0]} does not match inverse of shape {inv.shape}"
        )
    updated, denom = rank_one_inverse_update(inv, v)
    if not float(denom) > 0.0:
        raise NumericalFailureError(
            f"Sherman-Morrison denominator is {float(denom)}, the inverse is not positive definite"
        )
    return updated


def max_abs_entry(m):
    """Element-wise max-abs norm ||m||_inf."""
    return float(jnp.max(jnp.abs(as_matrix(m))))
