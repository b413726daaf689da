"""Noise processes w_t driving the switched system.

All three kinds are martingale difference sequences with finite moments of some
order above two and a positive definite long-run covariance.
"""
import numpy as np
import jax
import jax.numpy as jnp
from flax import struct
from tensorflow_probability.substrates import jax as tfp

from swsysid.errors import InvalidInputError
from swsysid.matops import as_matrix, is_symmetric

tfd = tfp.distributions

NOISE_KINDS = ("gaussian_iid", "student_t_iid", "scheduled_gaussian")
DEFAULT_DOF = 5.0


@struct.dataclass
class NoiseModel:
    """Zero-mean noise with covariance ``covariance`` (scaled per step when scheduled)."""

    covariance: jnp.ndarray
    scale_tril: jnp.ndarray
    dof: jnp.ndarray
    schedule: jnp.ndarray
    kind: str = struct.field(pytree_node=False, default="gaussian_iid")

    @classmethod
    def create(cls, covariance, kind="gaussian_iid", dof=DEFAULT_DOF, schedule=None):
        if kind not in NOISE_KINDS:
            raise InvalidInputError(
                f"'{kind}' is not a noise kind. use one of below. \n {NOISE_KINDS}"
            )
        cov = as_matrix(covariance, "noise covariance")
        if cov.shape[0] != cov.shape[1] or not is_symmetric(cov):
            raise InvalidInputError("noise covariance must be square and symmetric")
        cov_np = np.asarray(cov)
        if not np.all(np.linalg.eigvalsh(cov_np) > 0):
            raise InvalidInputError("noise covariance must be positive definite")
        chol = np.linalg.cholesky(cov_np)
        if kind == "student_t_iid" and not float(dof) > 2.0:
            raise InvalidInputError(f"student_t dof must exceed 2, got {dof}")
        if schedule is None:
            schedule = [1.0]
        sched = np.asarray(schedule, dtype=np.float64).reshape(-1)
        if kind != "scheduled_gaussian" and not np.all(sched == 1.0):
            raise InvalidInputError(f"a schedule only applies to scheduled_gaussian, not {kind}")
        if sched.size == 0 or not np.all(np.isfinite(sched)) or not np.all(sched > 0):
            raise InvalidInputError("schedule scalings must be finite and strictly positive")
        return cls(
            covariance=cov,
            scale_tril=jnp.asarray(chol),
            dof=jnp.asarray(float(dof)),
            schedule=jnp.asarray(sched),
            kind=kind,
        )

    @property
    def n(self):
        return self.covariance.shape[0]

    def scaling(self, t):
        """Covariance scaling at step ``t``; constant 1 unless scheduled."""
        return self.schedule[jnp.mod(t, self.schedule.shape[0])]

    def long_run_covariance(self):
        """The limit of (1/T) sum w_t w_t^T, i.e. the matrix C of the noise assumption."""
        return jnp.mean(self.schedule) * self.covariance

    def to_dict(self):
        d = {"kind": self.kind, "covariance": np.asarray(self.covariance).tolist()}
        if self.kind == "student_t_iid":
            d["dof"] = float(self.dof)
        if self.kind == "scheduled_gaussian":
            d["schedule"] = np.asarray(self.schedule).tolist()
        return d

    @classmethod
    def from_dict(cls, d, n=None):
        cov = d.get("covariance")
        if cov is None:
            if n is None:
                raise InvalidInputError("noise covariance missing and state dimension unknown")
            cov = np.eye(n)
        try:
            cov = [[float(e) for e in row] for row in cov]
            dof = float(d.get("dof", DEFAULT_DOF))
        except (ValueError, TypeError) as e:
            raise InvalidInputError(f"noise config has a non-numeric entry: {e}") from e
        return cls.create(
            cov,
            kind=d.get("kind", "gaussian_iid"),
            dof=dof,
            schedule=d.get("schedule"),
        )


def sample_noise(noise, t, key):
    """Draws w_t from the per-step stream ``fold_in(key, t)``."""
    k_gauss, k_mix = jax.random.split(jax.random.fold_in(key, t))
    n = noise.covariance.shape[0]
    z = tfd.MultivariateNormalTriL(
        loc=jnp.zeros(n), scale_tril=noise.scale_tril
    ).sample(seed=k_gauss)
    if noise.kind == "student_t_iid":
        # w = z * sqrt((dof - 2) / chi2) has covariance exactly C
        g = tfd.Chi2(df=noise.dof).sample(seed=k_mix)
        return z * jnp.sqrt((noise.dof - 2.0) / g)
    if noise.kind == "scheduled_gaussian":
        return z * jnp.sqrt(noise.scaling(t))
    return z


def sample_noises(noise, horizon, key):
    """Noises w_0 .. w_{horizon-1}; row t equals ``sample_noise(noise, t, key)``."""
    return jax.vmap(lambda t: sample_noise(noise, t, key))(jnp.arange(horizon))
