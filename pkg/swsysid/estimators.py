"""Switched least squares: per-mode batch normal equations and the recursive rank-one form.

Each estimate A_hat_i acts on the left, so predictions read x_hat_{t+1} = A_hat_i x_t and
mode i only ever sees the pairs (x_t, x_{t+1}) with s_t = i.
"""
from dataclasses import dataclass
from functools import partial
from typing import Optional

import numpy as np
import jax
import jax.numpy as jnp
from absl import logging
from flax import struct

from swsysid import matops
from swsysid.errors import InvalidInputError

# X_i counts as invertible once lambda_min > RANK_RTOL * lambda_max
RANK_RTOL = 1e-12

STATUS_OK = "ok"
STATUS_RANK_DEFICIENT = "rank-deficient"
STATUS_INSUFFICIENT = "insufficient-data"


@dataclass(frozen=True)
class ModeEstimate:
    a_hat: np.ndarray
    x_cov: np.ndarray
    x_cov_inv: Optional[np.ndarray]
    visits: int
    status: str
    warmup_step: Optional[int]


@struct.dataclass
class EstimatorState:
    """Running switched least squares estimates for all k modes, stacked along axis 0.

    ``x_cov`` is the unnormalized covariate Gram matrix X_i (plus ``ridge * I`` when a
    ridge is configured), ``cross`` accumulates x_{t+1} x_t^T, and ``x_cov_inv`` is only
    meaningful where ``ready`` is set.
    """

    a_hat: jnp.ndarray
    x_cov: jnp.ndarray
    x_cov_inv: jnp.ndarray
    cross: jnp.ndarray
    visits: jnp.ndarray
    ready: jnp.ndarray
    warmup_step: jnp.ndarray
    t: jnp.ndarray
    ridge: float = struct.field(pytree_node=False, default=0.0)

    @classmethod
    def create(cls, k, n, ridge=0.0):
        if ridge is None:
            ridge = 0.0
        if ridge < 0:
            raise InvalidInputError(f"ridge must be non-negative, got {ridge}")
        eye = jnp.broadcast_to(jnp.eye(n), (k, n, n))
        return cls(
            a_hat=jnp.zeros((k, n, n)),
            x_cov=ridge * eye,
            x_cov_inv=eye / ridge if ridge > 0 else jnp.zeros((k, n, n)),
            cross=jnp.zeros((k, n, n)),
            visits=jnp.zeros(k, dtype=jnp.int32),
            ready=jnp.full(k, ridge > 0),
            warmup_step=jnp.full(k, 0 if ridge > 0 else -1, dtype=jnp.int32),
            t=jnp.asarray(0, dtype=jnp.int32),
            ridge=float(ridge),
        )

    @classmethod
    def warm_start(cls, a_hat, x_cov):
        """State whose modes start from given estimates and invertible Gram matrices."""
        a_hat = np.asarray(a_hat, dtype=np.float64)
        x_cov = np.asarray(x_cov, dtype=np.float64)
        if a_hat.ndim == 2:
            a_hat, x_cov = a_hat[None], x_cov[None]
        if a_hat.shape != x_cov.shape or a_hat.shape[1] != a_hat.shape[2]:
            raise InvalidInputError("warm start needs matching stacks of square matrices")
        k = a_hat.shape[0]
        return cls(
            a_hat=jnp.asarray(a_hat),
            x_cov=jnp.asarray(x_cov),
            x_cov_inv=jnp.asarray(np.linalg.inv(x_cov)),
            cross=jnp.asarray(a_hat @ x_cov),
            visits=jnp.zeros(k, dtype=jnp.int32),
            ready=jnp.ones(k, dtype=bool),
            warmup_step=jnp.zeros(k, dtype=jnp.int32),
            t=jnp.asarray(0, dtype=jnp.int32),
        )

    @property
    def k(self):
        return self.a_hat.shape[0]

    @property
    def n(self):
        return self.a_hat.shape[1]

    @property
    def theta_hat(self):
        """The stacked n x nk estimate [A_hat_1, ..., A_hat_k]."""
        return jnp.concatenate(list(self.a_hat), axis=1)

    def status(self, mode):
        if bool(self.ready[mode]):
            return STATUS_OK
        if int(self.visits[mode]) == 0:
            return STATUS_INSUFFICIENT
        return STATUS_RANK_DEFICIENT

    def mode(self, mode):
        ready = bool(self.ready[mode])
        step = int(self.warmup_step[mode])
        return ModeEstimate(
            a_hat=np.asarray(self.a_hat[mode]),
            x_cov=np.asarray(self.x_cov[mode]),
            x_cov_inv=np.asarray(self.x_cov_inv[mode]) if ready else None,
            visits=int(self.visits[mode]),
            status=self.status(mode),
            warmup_step=step if step >= 0 else None,
        )

    @property
    def per_mode(self):
        return [self.mode(i) for i in range(self.k)]


def _is_full_rank(cov):
    eigs = jnp.linalg.eigvalsh(cov)
    return (eigs[-1] > 0) & (eigs[0] > RANK_RTOL * eigs[-1])


def _update(state, x, s, y):
    """One switched least squares step for the pair (x_t, x_{t+1}) observed in mode s."""
    cov = state.x_cov[s] + jnp.outer(x, x)
    cross = state.cross[s] + jnp.outer(y, x)
    clock = state.t + 1

    def rank_one(_):
        inv = state.x_cov_inv[s]
        a = state.a_hat[s]
        gain = inv @ x
        a_new = a + jnp.outer(y - a @ x, gain) / (1.0 + x @ gain)
        inv_new, _ = matops.rank_one_inverse_update(inv, x)
        return a_new, inv_new, jnp.asarray(True), state.warmup_step[s]

    def warm_up(_):
        # pairs are held in cov/cross until X_i becomes invertible
        full = _is_full_rank(cov)
        inv = jnp.linalg.inv(jnp.where(full, cov, jnp.eye(cov.shape[0])))
        a_new = jnp.where(full, cross @ inv, cross @ jnp.linalg.pinv(cov))
        inv = jnp.where(full, inv, jnp.zeros_like(inv))
        step = jnp.where(full, clock, -1).astype(state.warmup_step.dtype)
        return a_new, inv, full, step

    a_new, inv_new, ready, step = jax.lax.cond(state.ready[s], rank_one, warm_up, None)
    return state.replace(
        a_hat=state.a_hat.at[s].set(a_new),
        x_cov=state.x_cov.at[s].set(cov),
        x_cov_inv=state.x_cov_inv.at[s].set(inv_new),
        cross=state.cross.at[s].set(cross),
        visits=state.visits.at[s].add(1),
        ready=state.ready.at[s].set(ready),
        warmup_step=state.warmup_step.at[s].set(step),
        t=clock,
    )


_update_jit = jax.jit(_update)


def recursive_step(state, x_t, s_t, x_next):
    """Feeds one pair observed in 0-based mode ``s_t``; other modes are untouched."""
    x_t = matops.as_vector(x_t, "x_t")
    x_next = matops.as_vector(x_next, "x_next")
    if x_t.shape[0] != state.n or x_next.shape[0] != state.n:
        raise InvalidInputError(
            f"state vectors must have length {state.n}, got {x_t.shape[0]} and {x_next.shape[0]}"
        )
    if int(s_t) != s_t or not 0 <= s_t < state.k:
        raise InvalidInputError(f"mode index {s_t} outside 0..{state.k - 1}")
    return _update_jit(state, x_t, jnp.asarray(s_t, dtype=jnp.int32), x_next)


@struct.dataclass
class Snapshots:
    """Estimator quantities captured after T pairs, for each checkpoint T."""

    checkpoints: jnp.ndarray  # (C,)
    a_hat: jnp.ndarray  # (C, k, n, n)
    x_cov: jnp.ndarray  # (C, k, n, n)
    visits: jnp.ndarray  # (C, k)


@partial(jax.jit, static_argnames=("keep_history",))
def _scan(init, states, switches, keep_history=False):
    def step(state, inputs):
        x, s, y = inputs
        state = _update(state, x, s, y)
        out = (state.a_hat, state.x_cov, state.visits) if keep_history else None
        return state, out

    return jax.lax.scan(step, init, (states[:-1], switches, states[1:]))


def _log_warm_up(state):
    steps = [int(s) for s in state.warmup_step]
    logging.info(
        "recursive fit over %d pairs, modes 1..%d full rank from step %s",
        int(state.t),
        state.k,
        ["never" if s < 0 else s for s in steps],
    )


def recursive_fit(traj, ridge=0.0, checkpoints=None):
    """Runs the recursive estimator over a whole trajectory.

    Returns the final state, or ``(state, Snapshots)`` when ``checkpoints`` is given.
    """
    init = EstimatorState.create(traj.n_modes, traj.n, ridge=ridge)
    if checkpoints is None:
        state, _ = _scan(init, traj.states, traj.switches)
        _log_warm_up(state)
        return state
    idx = np.asarray(checkpoints, dtype=np.int64)
    if idx.size and (idx.min() < 1 or idx.max() > traj.horizon):
        raise InvalidInputError(f"checkpoints must lie in [1, {traj.horizon}]")
    state, (a_hist, cov_hist, visit_hist) = _scan(
        init, traj.states, traj.switches, keep_history=True
    )
    _log_warm_up(state)
    take = jnp.asarray(idx - 1)
    return state, Snapshots(
        checkpoints=jnp.asarray(idx),
        a_hat=a_hist[take],
        x_cov=cov_hist[take],
        visits=visit_hist[take],
    )


def batch_fit(traj, ridge=0.0):
    """Solves the per-mode normal equations A_hat_i X_i = sum_{s_t = i} x_{t+1} x_t^T.

    Rank-deficient modes get the minimum-norm solution; unvisited modes keep a zero estimate
    and are reported as ``insufficient-data``.
    """
    if traj.horizon < 1:
        raise InvalidInputError("batch_fit needs at least one step")
    k, n = traj.n_modes, traj.n
    xs, ys = traj.states[:-1], traj.states[1:]
    ridge = 0.0 if ridge is None else float(ridge)
    x_cov = jax.ops.segment_sum(
        jnp.einsum("ti,tj->tij", xs, xs), traj.switches, num_segments=k
    ) + ridge * jnp.eye(n)
    cross = jax.ops.segment_sum(
        jnp.einsum("ti,tj->tij", ys, xs), traj.switches, num_segments=k
    )
    visits = jnp.bincount(traj.switches, length=k).astype(jnp.int32)

    a_hat, inv, ready = [], [], []
    for i in range(k):
        full = bool(_is_full_rank(x_cov[i]))
        if full:
            a_hat.append(jnp.linalg.solve(x_cov[i], cross[i].T).T)
            inv.append(jnp.linalg.inv(x_cov[i]))
        else:
            if int(visits[i]) == 0:
                logging.warning("mode %d was never visited", i + 1)
            else:
                logging.warning(
                    "mode %d Gram matrix is rank deficient after %d visits, using pseudo-inverse",
                    i + 1,
                    int(visits[i]),
                )
            a_hat.append(cross[i] @ jnp.linalg.pinv(x_cov[i]))
            inv.append(jnp.zeros((n, n)))
        ready.append(full)

    return EstimatorState(
        a_hat=jnp.stack(a_hat),
        x_cov=x_cov,
        x_cov_inv=jnp.stack(inv),
        cross=cross,
        visits=visits,
        ready=jnp.asarray(ready),
        warmup_step=jnp.full(k, -1, dtype=jnp.int32),
        t=jnp.asarray(traj.horizon, dtype=jnp.int32),
        ridge=ridge,
    )


def covariance_extremes(state, mode):
    """(lambda_min(X_i), lambda_max(X_i), |T_i|) for a 0-based mode."""
    if not 0 <= mode < state.k:
        raise InvalidInputError(f"mode index {mode} outside 0..{state.k - 1}")
    lam_min, lam_max = matops.sym_eig_extremes(state.x_cov[mode])
    return lam_min, lam_max, int(state.visits[mode])


def state_to_dict(state):
    """JSON-ready export of every mode's estimate, 1-based mode labels."""
    modes = []
    for i, est in enumerate(state.per_mode):
        lam_min, lam_max, visits = covariance_extremes(state, i)
        modes.append(
            {
                "mode": i + 1,
                "a_hat": est.a_hat.tolist(),
                "visits": visits,
                "lambda_min": lam_min,
                "lambda_max": lam_max,
                "status": est.status,
                "warmup_step": est.warmup_step,
            }
        )
    return {"t": int(state.t), "ridge": state.ridge, "modes": modes}
