"""Switched linear system x_{t+1} = A_{s_t} x_t + w_t, its simulation and stability measures."""
import hashlib
from functools import reduce

import numpy as np
import jax
import jax.numpy as jnp
from absl import logging
from flax import struct
from tensorflow_probability.substrates import jax as tfp

from swsysid import matops
from swsysid.errors import InstabilityError, InvalidInputError
from swsysid.noise import sample_noises

tfd = tfp.distributions

OVERFLOW_LIMIT = 1e150
PMF_ATOL = 1e-12


@struct.dataclass
class SwitchedSystem:
    """The true model: mode matrices A_1..A_k, i.i.d. switching pmf p and initial state x0."""

    modes: jnp.ndarray  # (k, n, n)
    switch_pmf: jnp.ndarray  # (k,)
    x0: jnp.ndarray  # (n,)

    @classmethod
    def create(cls, modes, switch_pmf, x0=None):
        modes = np.asarray(modes, dtype=np.float64)
        if modes.ndim != 3 or modes.shape[1] != modes.shape[2] or modes.shape[1] < 1:
            raise InvalidInputError(
                f"modes must be a list of k square n x n matrices, got shape {modes.shape}"
            )
        if not np.all(np.isfinite(modes)):
            raise InvalidInputError("mode matrices have non-finite entries")
        k, n, _ = modes.shape
        pmf = np.asarray(switch_pmf, dtype=np.float64).reshape(-1)
        if pmf.shape != (k,):
            raise InvalidInputError(f"switch_pmf must have {k} entries, got {pmf.shape[0]}")
        if not np.all(pmf > 0):
            raise InvalidInputError(f"every switching probability must be positive, got {pmf.tolist()}")
        if abs(pmf.sum() - 1.0) > PMF_ATOL:
            raise InvalidInputError(f"switch_pmf sums to {pmf.sum()!r}, not 1")
        x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=np.float64).reshape(-1)
        if x0.shape != (n,) or not np.all(np.isfinite(x0)):
            raise InvalidInputError(f"x0 must be a finite vector of length {n}")
        return cls(modes=jnp.asarray(modes), switch_pmf=jnp.asarray(pmf), x0=jnp.asarray(x0))

    @property
    def n(self):
        return self.modes.shape[1]

    @property
    def k(self):
        return self.modes.shape[0]

    def fingerprint(self):
        h = hashlib.sha256()
        for arr in (self.modes, self.switch_pmf, self.x0):
            h.update(np.ascontiguousarray(np.asarray(arr, dtype=np.float64)).tobytes())
        return h.hexdigest()[:16]

    def to_dict(self):
        return {
            "modes": np.asarray(self.modes).tolist(),
            "switch_pmf": np.asarray(self.switch_pmf).tolist(),
            "x0": np.asarray(self.x0).tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        try:
            modes = [[[float(e) for e in row] for row in m] for m in d["modes"]]
            pmf = [float(p) for p in d["switch_pmf"]]
            x0 = d.get("x0")
            if x0 is not None:
                x0 = [float(e) for e in x0]
        except KeyError as e:
            raise InvalidInputError(f"system config is missing {e}") from e
        except (ValueError, TypeError) as e:
            raise InvalidInputError(f"system config has a non-numeric entry: {e}") from e
        return cls.create(modes, pmf, x0)


@struct.dataclass
class Trajectory:
    """A realized run: states x_0..x_T, 0-based modes s_0..s_{T-1} and noises w_0..w_{T-1}."""

    states: jnp.ndarray  # (T + 1, n)
    switches: jnp.ndarray  # (T,)
    noises: jnp.ndarray  # (T, n)
    n_modes: int = struct.field(pytree_node=False, default=1)
    system_hash: str = struct.field(pytree_node=False, default="")
    seed: int = struct.field(pytree_node=False, default=None)

    @property
    def horizon(self):
        return self.switches.shape[0]

    @property
    def n(self):
        return self.states.shape[1]


@jax.jit
def _propagate(modes, x0, switches, noises):
    def step(x, inputs):
        s, w = inputs
        x_next = modes[s] @ x + w
        return x_next, x_next

    _, xs = jax.lax.scan(step, x0, (switches, noises))
    return jnp.concatenate([x0[None, :], xs], axis=0)


def _first_overflow(states):
    bad = ~jnp.all(jnp.isfinite(states) & (jnp.abs(states) <= OVERFLOW_LIMIT), axis=1)
    if not bool(jnp.any(bad)):
        return None
    return int(jnp.argmax(bad))


def replay(sys, switches, noises, seed=None):
    """Runs the recursion on given 0-based ``switches`` and ``noises``."""
    switches = np.asarray(switches).astype(np.int32).reshape(-1)
    noises = np.asarray(noises, dtype=np.float64).reshape(switches.shape[0], sys.n)
    if switches.shape[0] < 1:
        raise InvalidInputError("a trajectory needs at least one step")
    if np.any(switches < 0) or np.any(switches >= sys.k):
        raise InvalidInputError(f"mode indices must lie in 1..{sys.k}")
    states = _propagate(sys.modes, sys.x0, jnp.asarray(switches), jnp.asarray(noises))
    step = _first_overflow(states)
    if step is not None:
        raise InstabilityError(
            f"state exceeded {OVERFLOW_LIMIT:g} at step {step} "
            f"(assumption-2 margin {assumption2_margin(sys):.4f})",
            step=step,
        )
    return Trajectory(
        states=states,
        switches=jnp.asarray(switches),
        noises=jnp.asarray(noises),
        n_modes=sys.k,
        system_hash=sys.fingerprint(),
        seed=seed,
    )


def sample_switches(sys, horizon, key):
    """I.i.d. 0-based mode indices drawn from the switching pmf."""
    return tfd.Categorical(probs=sys.switch_pmf).sample(horizon, seed=key).astype(jnp.int32)


def simulate(sys, noise, horizon, seed):
    """Simulates ``horizon`` steps; a deterministic function of ``seed``."""
    if int(horizon) != horizon or horizon < 1:
        raise InvalidInputError(f"horizon must be a positive integer, got {horizon}")
    if noise.n != sys.n:
        raise InvalidInputError(
            f"noise dimension {noise.n} does not match state dimension {sys.n}"
        )
    key = jax.random.PRNGKey(seed)
    k_switch, k_noise = jax.random.split(key)
    switches = sample_switches(sys, int(horizon), k_switch)
    noises = sample_noises(noise, int(horizon), k_noise)
    logging.debug("simulating %d steps of system %s (seed %d)", horizon, sys.fingerprint(), seed)
    return replay(sys, switches, noises, seed=seed)


def transition_product(modes, sys, t, tau):
    """Phi(t, tau) = A_{s_t} ... A_{s_tau}, the identity when t < tau."""
    if t < tau:
        return jnp.eye(sys.n)
    if tau < 0 or t >= len(modes):
        raise InvalidInputError(
            f"indices ({t}, {tau}) out of range for a mode sequence of length {len(modes)}"
        )
    return reduce(
        lambda acc, s: sys.modes[int(s)] @ acc,
        (modes[j] for j in range(tau, t + 1)),
        jnp.eye(sys.n),
    )


def assumption2_margin(sys):
    """prod_i sigma_max(A_i)^{p_i}; the system satisfies the stability assumption when < 1."""
    sigmas = jnp.asarray([matops.spectral_norm(a) for a in sys.modes])
    return float(jnp.prod(sigmas ** sys.switch_pmf))


def mss_radius(sys):
    """lambda_max(sum_i p_i A_i (x) A_i); mean square stable when < 1."""
    lifted = sum(p * matops.kron(a, a) for p, a in zip(sys.switch_pmf, sys.modes))
    return matops.max_abs_eig(lifted)


def switch_frequencies(traj):
    """Empirical |T_{i,T}| / T per mode."""
    counts = jnp.bincount(traj.switches, length=traj.n_modes)
    return counts / traj.horizon


def noise_covariance(traj):
    """Empirical (1/T) sum_t w_t w_t^T."""
    return traj.noises.T @ traj.noises / traj.horizon
