"""Seeded Monte Carlo experiments over switched least squares and stability reports."""
import hashlib
import json
import os
import warnings
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from absl import logging
from astropy.stats import mad_std
from tqdm.auto import tqdm

from swsysid import analysis
from swsysid.errors import (
    ConfigError,
    ExperimentDivergedError,
    InstabilityError,
    InvalidInputError,
)
from swsysid.estimators import recursive_fit
from swsysid.models import (
    SwitchedSystem,
    assumption2_margin,
    mss_radius,
    noise_covariance,
    simulate,
    switch_frequencies,
)
from swsysid.noise import NoiseModel

DEFAULT_RUNS = 30
DEFAULT_QUANTILES = (0.25, 0.5, 0.75)
DIVERGENCE_TOLERANCE = 0.2


@dataclass(frozen=True)
class ExperimentConfig:
    system: SwitchedSystem
    noise: NoiseModel
    horizon: int
    checkpoints: Tuple[int, ...]
    runs: int = DEFAULT_RUNS
    master_seed: int = 0
    output_dir: str = "results"
    ridge: Optional[float] = None
    quantiles: Tuple[float, ...] = DEFAULT_QUANTILES
    name: str = "experiment"

    @classmethod
    def from_dict(cls, d):
        try:
            system = SwitchedSystem.from_dict(d["system"])
            noise = NoiseModel.from_dict(d.get("noise", {}), n=system.n)
        except KeyError as e:
            raise ConfigError(f"config is missing {e}") from e
        except InvalidInputError as e:
            raise ConfigError(str(e)) from e
        if noise.n != system.n:
            raise ConfigError(f"noise dimension {noise.n} does not match state dimension {system.n}")
        horizon = d.get("horizon")
        if not isinstance(horizon, int) or horizon < 1:
            raise ConfigError(f"horizon must be a positive integer, got {horizon!r}")
        checkpoints = d.get("checkpoints")
        if checkpoints is None:
            checkpoints = analysis.dyadic_checkpoints(horizon)
        options = d.get("options", {})
        try:
            config = cls(
                system=system,
                noise=noise,
                horizon=horizon,
                checkpoints=tuple(int(t) for t in checkpoints),
                runs=int(d.get("runs", DEFAULT_RUNS)),
                master_seed=int(d.get("master_seed", 0)),
                output_dir=d.get("output_dir", "results"),
                ridge=None if options.get("ridge") is None else float(options["ridge"]),
                quantiles=tuple(float(q) for q in options.get("quantiles", DEFAULT_QUANTILES)),
                name=d.get("name", "experiment"),
            )
        except (ValueError, TypeError) as e:
            raise ConfigError(f"config has a non-numeric entry: {e}") from e
        config.validate()
        return config

    @classmethod
    def from_json(cls, path):
        try:
            with open(path, "r") as f:
                d = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from e
        return cls.from_dict(d)

    def validate(self):
        if self.runs < 1:
            raise ConfigError(f"runs must be at least 1, got {self.runs}")
        cp = np.asarray(self.checkpoints)
        if cp.size and (cp.min() < 1 or cp.max() > self.horizon):
            raise ConfigError(f"checkpoints must lie in [1, {self.horizon}]")
        if cp.size and np.any(np.diff(cp) <= 0):
            raise ConfigError("checkpoints must be strictly increasing")
        if not all(0 < q < 1 for q in self.quantiles):
            raise ConfigError(f"quantiles must lie in (0, 1), got {list(self.quantiles)}")
        if self.ridge is not None and self.ridge < 0:
            raise ConfigError(f"ridge must be non-negative, got {self.ridge}")

    def replace(self, **changes):
        d = self.to_dict()
        if "horizon" in changes and "checkpoints" not in changes:
            d["checkpoints"] = None
        for key, value in changes.items():
            if key in ("ridge", "quantiles"):
                d["options"][key] = value
            else:
                d[key] = value
        return ExperimentConfig.from_dict(d)

    def to_dict(self):
        return {
            "name": self.name,
            "system": self.system.to_dict(),
            "noise": self.noise.to_dict(),
            "horizon": self.horizon,
            "checkpoints": list(self.checkpoints),
            "runs": self.runs,
            "master_seed": self.master_seed,
            "output_dir": self.output_dir,
            "options": {"ridge": self.ridge, "quantiles": list(self.quantiles)},
        }

    def config_hash(self):
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def run_seed(master_seed, run_index):
    """Stable per-run seed: sha256 of ``"<master_seed>:<run_index>"``, first 31 bits."""
    digest = hashlib.sha256(f"{master_seed}:{run_index}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big") & 0x7FFFFFFF


@dataclass(frozen=True)
class StabilityReport:
    assumption2_margin: float
    mss_radius: float

    @property
    def assumption2_holds(self):
        return self.assumption2_margin < 1.0

    @property
    def mss_holds(self):
        return self.mss_radius < 1.0

    @property
    def quadrant(self):
        return {
            (True, True): "both",
            (True, False): "assumption2-only",
            (False, True): "mss-only",
            (False, False): "neither",
        }[(self.assumption2_holds, self.mss_holds)]

    def to_dict(self):
        return {
            "assumption2_margin": self.assumption2_margin,
            "assumption2_holds": self.assumption2_holds,
            "mss_radius": self.mss_radius,
            "mss_holds": self.mss_holds,
            "quadrant": self.quadrant,
        }


def stability_report(config):
    """Assumption-2 margin, mean-square radius and their quadrant for a config or system."""
    system = config.system if isinstance(config, ExperimentConfig) else config
    return StabilityReport(
        assumption2_margin=assumption2_margin(system),
        mss_radius=mss_radius(system),
    )


@dataclass
class RunRecord:
    run_index: int
    seed: int
    diverged: bool = False
    diverged_step: Optional[int] = None
    curves: Optional[np.ndarray] = None  # (checkpoints, k, len(CURVE_FIELDS))
    average_energy: Optional[float] = None
    switch_frequencies: Optional[np.ndarray] = None
    noise_covariance: Optional[np.ndarray] = None
    appendix: Optional[analysis.AppendixDiagnostics] = None


def run_single(config, run_index):
    """Simulates one run and feeds it through the recursive estimator."""
    seed = run_seed(config.master_seed, run_index)
    try:
        traj = simulate(config.system, config.noise, config.horizon, seed)
    except InstabilityError as e:
        logging.warning("run %d (seed %d) diverged at step %s", run_index, seed, e.step)
        return RunRecord(run_index=run_index, seed=seed, diverged=True, diverged_step=e.step)
    _, snapshots = recursive_fit(traj, ridge=config.ridge, checkpoints=config.checkpoints)
    return RunRecord(
        run_index=run_index,
        seed=seed,
        curves=np.asarray(analysis.checkpoint_curves(snapshots, config.system)),
        average_energy=analysis.average_energy(traj),
        switch_frequencies=np.asarray(switch_frequencies(traj)),
        noise_covariance=np.asarray(noise_covariance(traj)),
        appendix=analysis.appendix_diagnostics(traj, config.system),
    )


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    quantile_curves: np.ndarray  # (quantiles, checkpoints, k, fields)
    mean_curves: np.ndarray  # (checkpoints, k, fields)
    median_curves: np.ndarray  # (checkpoints, k, fields)
    rate_fits: List[Optional[analysis.RateFit]]
    stability: StabilityReport
    energy_quantiles: Dict[str, float]
    diagnostics: Dict[str, object]
    provenance: Dict[str, object]
    diverged_runs: List[int] = field(default_factory=list)

    @property
    def checkpoints(self):
        return list(self.config.checkpoints)

    @property
    def quantiles(self):
        return list(self.config.quantiles)

    def curve(self, name, statistic="median"):
        """(checkpoints, k) slice of one curve field for ``median``, ``mean`` or a quantile."""
        j = analysis.CURVE_FIELDS.index(name)
        if statistic == "median":
            return self.median_curves[..., j]
        if statistic == "mean":
            return self.mean_curves[..., j]
        return self.quantile_curves[self.quantiles.index(statistic), ..., j]

    def summary(self):
        return {
            "name": self.config.name,
            "rate_fits": [None if f is None else f.to_dict() for f in self.rate_fits],
            "stability": self.stability.to_dict(),
            "average_energy_quantiles": self.energy_quantiles,
            "diagnostics": self.diagnostics,
            "provenance": self.provenance,
            "diverged_runs": self.diverged_runs,
        }


def _nan_aggregate(fn, stack, *args):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=RuntimeWarning)
        return fn(stack, *args, axis=0)


def _rate_fits(config, median_curves):
    err_j = analysis.CURVE_FIELDS.index("error_inf")
    cp = np.asarray(config.checkpoints)
    fits = []
    for i in range(config.system.k):
        errs = median_curves[:, i, err_j] if cp.size else np.zeros(0)
        keep = (cp >= 2) & np.isfinite(errs) & (errs > 0)
        if keep.sum() < 4:
            logging.info("mode %d: fewer than 4 usable checkpoints, no rate fit", i + 1)
            fits.append(None)
            continue
        fits.append(analysis.rate_exponent_fit(cp[keep], errs[keep]))
    return fits


def _appendix_medians(records):
    diags = [r.appendix for r in records if r.appendix is not None and r.appendix.checkpoints]
    if not diags:
        return {"checkpoints": [], "summability_sums": [], "cross_term_ratios": []}
    return {
        "checkpoints": diags[0].checkpoints,
        "summability_sums": np.median([d.summability_sums for d in diags], axis=0).tolist(),
        "cross_term_ratios": np.median([d.cross_term_ratios for d in diags], axis=0).tolist(),
    }


def run_experiment(config, workers=None, progress=True):
    """Runs ``config.runs`` independent seeded runs and aggregates their checkpoint curves.

    Runs are dispatched to a thread pool and re-sorted by run index before aggregation,
    so results do not depend on ``workers``.
    """
    config.validate()
    workers = workers or os.cpu_count() or 1
    logging.info(
        "experiment %s: %d runs, horizon %d, %d checkpoints, %d workers",
        config.name,
        config.runs,
        config.horizon,
        len(config.checkpoints),
        workers,
    )
    records = {}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_single, config, r) for r in range(config.runs)]
        for fut in tqdm(as_completed(futures), total=config.runs, disable=not progress):
            rec = fut.result()
            records[rec.run_index] = rec
    ordered = [records[r] for r in range(config.runs)]

    stability = stability_report(config)
    diverged = [r.run_index for r in ordered if r.diverged]
    if len(diverged) > DIVERGENCE_TOLERANCE * config.runs:
        raise ExperimentDivergedError(
            f"{len(diverged)} of {config.runs} runs diverged; "
            f"assumption-2 margin {stability.assumption2_margin:.4f}, "
            f"mss radius {stability.mss_radius:.4f} ({stability.quadrant})",
            diverged=len(diverged),
            runs=config.runs,
            margin=stability.assumption2_margin,
        )
    good = [r for r in ordered if not r.diverged]

    k, n_fields = config.system.k, len(analysis.CURVE_FIELDS)
    stack = np.stack([r.curves for r in good]) if good else np.full(
        (1, len(config.checkpoints), k, n_fields), np.nan
    )
    quantile_curves = _nan_aggregate(np.nanquantile, stack, list(config.quantiles))
    median_curves = _nan_aggregate(np.nanmedian, stack)
    mean_curves = _nan_aggregate(np.nanmean, stack)

    energies = np.asarray([r.average_energy for r in good])
    energy_quantiles = {
        f"{q:g}": float(np.quantile(energies, q)) if energies.size else None
        for q in config.quantiles
    }
    err_j = analysis.CURVE_FIELDS.index("error_inf")
    diagnostics = {
        "switch_frequencies": np.mean([r.switch_frequencies for r in good], axis=0).tolist()
        if good
        else [],
        "noise_covariance": np.mean([r.noise_covariance for r in good], axis=0).tolist()
        if good
        else [],
        "configured_noise_covariance": np.asarray(
            config.noise.long_run_covariance()
        ).tolist(),
        "p3_ratio_median": median_curves[..., analysis.CURVE_FIELDS.index("p3_ratio")].tolist(),
        "final_error_mad_std": [
            float(mad_std(stack[:, -1, i, err_j], ignore_nan=True))
            if len(config.checkpoints) and good
            else None
            for i in range(k)
        ],
        "appendix": _appendix_medians(good),
    }
    provenance = {
        "config_hash": config.config_hash(),
        "master_seed": config.master_seed,
        "run_seeds": [r.seed for r in ordered],
        "diverged": len(diverged),
        "runs": config.runs,
    }
    logging.info(
        "experiment %s finished: %d/%d runs diverged", config.name, len(diverged), config.runs
    )
    return ExperimentResult(
        config=config,
        quantile_curves=quantile_curves,
        mean_curves=mean_curves,
        median_curves=median_curves,
        rate_fits=_rate_fits(config, median_curves),
        stability=stability,
        energy_quantiles=energy_quantiles,
        diagnostics=diagnostics,
        provenance=provenance,
        diverged_runs=diverged,
    )
