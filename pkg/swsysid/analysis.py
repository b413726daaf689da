"""Error metrics, convergence-rate bounds, rate-exponent fits and stability diagnostics.

The bounds are the raw rate expressions with unit constants:

    data dependent     sqrt(log(max(lambda_max(X_i), e)) / lambda_min(X_i))
    by visits          sqrt(log(T) / |T_i|)
    by pmf             sqrt(log(T) / (p_i T))
"""
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import jax
import jax.numpy as jnp

from swsysid import matops
from swsysid.errors import InvalidInputError, NotIdentifiableError
from swsysid.estimators import covariance_extremes

DYADIC_START_EXPONENT = 7
EPS = float(np.finfo(np.float64).eps)


def dyadic_checkpoints(horizon, start_exponent=DYADIC_START_EXPONENT, include_horizon=True):
    """[2^start, 2^(start+1), ...] strictly below ``horizon``, then ``horizon`` itself."""
    points = []
    t = 2**start_exponent
    while t < horizon:
        points.append(t)
        t *= 2
    if include_horizon or not points:
        points.append(int(horizon))
    return points


def error_inf(estimate, truth):
    """||estimate - truth||_inf, the element-wise max-abs error."""
    estimate = matops.as_matrix(estimate, "estimate")
    truth = matops.as_matrix(truth, "truth")
    if estimate.shape != truth.shape:
        raise InvalidInputError(f"shape mismatch: {estimate.shape} vs {truth.shape}")
    return matops.max_abs_entry(estimate - truth)


def data_dependent_bound(lambda_min, lambda_max):
    if not lambda_min > 0:
        raise NotIdentifiableError(
            f"lambda_min = {lambda_min}: the Gram matrix is not invertible yet"
        )
    if lambda_max < lambda_min:
        raise InvalidInputError(f"lambda_max {lambda_max} is below lambda_min {lambda_min}")
    return math.sqrt(math.log(max(lambda_max, math.e)) / lambda_min)


def data_independent_bounds(T, visits, p_i):
    """Returns ``(by_visits, by_pmf)``; both coincide when visits = p_i * T."""
    if T < 2:
        raise InvalidInputError(f"T must be at least 2, got {T}")
    if not 0 < p_i <= 1:
        raise InvalidInputError(f"p_i must lie in (0, 1], got {p_i}")
    if visits < 1:
        raise NotIdentifiableError("the mode has not been visited yet")
    log_t = math.log(T)
    return math.sqrt(log_t / visits), math.sqrt(log_t / (p_i * T))


def average_energy(traj):
    """(1/T) sum_{tau < T} ||x_tau||^2."""
    return float(jnp.sum(traj.states[:-1] ** 2) / traj.horizon)


@dataclass(frozen=True)
class ModeBounds:
    error_inf: float
    dd_bound: Optional[float]
    di_bound_visits: Optional[float]
    di_bound_pmf: Optional[float]
    lambda_min: float
    lambda_max: float
    visits: int


@dataclass(frozen=True)
class BoundsReport:
    T: int
    per_mode: List[ModeBounds]
    global_error: float
    global_di_bound: Optional[float]
    p_star: float

    def to_dict(self):
        return {
            "T": self.T,
            "global_error": self.global_error,
            "global_di_bound": self.global_di_bound,
            "p_star": self.p_star,
            "modes": [dict(mode=i + 1, **vars(m)) for i, m in enumerate(self.per_mode)],
        }


def bounds_report(state, sys):
    """Per-mode errors and bounds of an estimator state against the true system."""
    T = int(state.t)
    pmf = np.asarray(sys.switch_pmf)
    per_mode = []
    for i in range(sys.k):
        lam_min, lam_max, visits = covariance_extremes(state, i)
        dd = None
        if lam_min > sys.n * EPS * lam_max:
            dd = data_dependent_bound(lam_min, lam_max)
        by_visits = by_pmf = None
        if T >= 2:
            by_pmf = math.sqrt(math.log(T) / (float(pmf[i]) * T))
            if visits > 0:
                by_visits, by_pmf = data_independent_bounds(T, visits, float(pmf[i]))
        per_mode.append(
            ModeBounds(
                error_inf=error_inf(state.a_hat[i], sys.modes[i]),
                dd_bound=dd,
                di_bound_visits=by_visits,
                di_bound_pmf=by_pmf,
                lambda_min=lam_min,
                lambda_max=lam_max,
                visits=visits,
            )
        )
    p_star = float(pmf.min())
    return BoundsReport(
        T=T,
        per_mode=per_mode,
        global_error=max(m.error_inf for m in per_mode),
        global_di_bound=math.sqrt(math.log(T) / (p_star * T)) if T >= 2 else None,
        p_star=p_star,
    )


CURVE_FIELDS = (
    "error_inf",
    "dd_bound",
    "di_visits",
    "di_pmf",
    "lambda_min",
    "lambda_max",
    "visits",
    "p3_ratio",
)


@jax.jit
def _curves(a_hat, x_cov, visits, checkpoints, modes, pmf):
    err = jnp.max(jnp.abs(a_hat - modes[None]), axis=(-2, -1))
    eigs = jnp.linalg.eigvalsh(x_cov)
    lam_min, lam_max = eigs[..., 0], eigs[..., -1]
    # numerical rank as in numpy.linalg.matrix_rank, looser than the warm-up test
    invertible = (lam_max > 0) & (lam_min > x_cov.shape[-1] * EPS * lam_max)
    safe_min = jnp.where(invertible, lam_min, 1.0)
    dd = jnp.where(
        invertible, jnp.sqrt(jnp.log(jnp.maximum(lam_max, jnp.e)) / safe_min), jnp.nan
    )
    T = checkpoints[:, None].astype(jnp.float64)
    n_vis = visits.astype(jnp.float64)
    defined = T >= 2
    di_visits = jnp.where(
        defined & (n_vis > 0), jnp.sqrt(jnp.log(T) / jnp.maximum(n_vis, 1.0)), jnp.nan
    )
    di_pmf = jnp.where(defined, jnp.sqrt(jnp.log(T) / (pmf[None] * T)), jnp.nan)
    p3 = jnp.where(n_vis > 0, lam_min / jnp.maximum(n_vis, 1.0), jnp.nan)
    return jnp.stack([err, dd, di_visits, di_pmf, lam_min, lam_max, n_vis, p3], axis=-1)


def checkpoint_curves(snapshots, sys):
    """Array of shape (checkpoints, k, len(CURVE_FIELDS)); undefined bounds are NaN."""
    return _curves(
        snapshots.a_hat,
        snapshots.x_cov,
        snapshots.visits,
        snapshots.checkpoints,
        sys.modes,
        sys.switch_pmf,
    )


@dataclass(frozen=True)
class RateFit:
    horizons: List[int]
    median_errors: List[float]
    exponent: float
    intercept: float
    r_squared: float

    def to_dict(self):
        return vars(self).copy()


def rate_exponent_fit(horizons, median_errors):
    """Fits log(error) = c + exponent * log(sqrt(log T / T)); exponent 1 matches the rate."""
    T = np.asarray(horizons, dtype=np.float64)
    err = np.asarray(median_errors, dtype=np.float64)
    if T.ndim != 1 or T.shape != err.shape or T.size < 4:
        raise InvalidInputError("need at least 4 horizons with one error each")
    if np.any(np.diff(T) <= 0) or T[0] < 2:
        raise InvalidInputError("horizons must be strictly increasing and at least 2")
    if not np.all(np.isfinite(err)) or np.any(err <= 0):
        raise InvalidInputError("median errors must be finite and positive")
    x = jnp.log(jnp.sqrt(jnp.log(T) / T))
    y = jnp.log(err)
    slope, intercept = jnp.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(jnp.sum((y - jnp.mean(y)) ** 2))
    ss_res = float(jnp.sum(resid**2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(
        horizons=[int(t) for t in T],
        median_errors=[float(e) for e in err],
        exponent=float(slope),
        intercept=float(intercept),
        r_squared=r_squared,
    )


@dataclass(frozen=True)
class AppendixDiagnostics:
    """Running sums behind the summability and cross-term arguments.

    ``summability_sums[j]`` is sum_{1 <= tau <= T} ||x_tau||^2 / tau^2 and
    ``cross_term_ratios[j]`` is ||sum_{tau <= T} (A x w^T + w x^T A^T)||_2 / T, T = checkpoints[j].
    """

    checkpoints: List[int] = field(default_factory=list)
    summability_sums: List[float] = field(default_factory=list)
    cross_term_ratios: List[float] = field(default_factory=list)

    def to_dict(self):
        return vars(self).copy()


@jax.jit
def _appendix_terms(states, switches, noises, modes):
    tau = jnp.arange(1, states.shape[0], dtype=jnp.float64)
    summable = jnp.cumsum(jnp.sum(states[1:] ** 2, axis=1) / tau**2)
    drift = jnp.einsum("tij,tj->ti", modes[switches], states[:-1])
    outer = jnp.einsum("ti,tj->tij", drift, noises)
    running = jnp.cumsum(outer + jnp.swapaxes(outer, 1, 2), axis=0)
    return summable, jnp.linalg.norm(running, ord=2, axis=(1, 2))


def appendix_diagnostics(traj, sys, checkpoints=None):
    """Summability partial sums and cross-term ratios at checkpoints T < horizon."""
    if checkpoints is None:
        checkpoints = (
            dyadic_checkpoints(traj.horizon - 1, include_horizon=False)
            if traj.horizon > 1
            else []
        )
    idx = np.asarray(checkpoints, dtype=np.int64)
    if idx.size and (idx.min() < 1 or idx.max() > traj.horizon - 1):
        raise InvalidInputError(f"diagnostic checkpoints must lie in [1, {traj.horizon - 1}]")
    summable, cross_norms = _appendix_terms(traj.states, traj.switches, traj.noises, sys.modes)
    return AppendixDiagnostics(
        checkpoints=[int(t) for t in idx],
        summability_sums=[float(summable[t - 1]) for t in idx],
        cross_term_ratios=[float(cross_norms[t] / t) for t in idx],
    )
