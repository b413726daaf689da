import csv
import hashlib
import json
import math
import os
import subprocess

import numpy as np
import jax.numpy as jnp
from absl import logging

from swsysid.analysis import CURVE_FIELDS
from swsysid.errors import ArtifactIOError, InvalidInputError
from swsysid.models import Trajectory

CURVES_COLUMNS = ("T", "mode", "quantile") + tuple(
    f for f in CURVE_FIELDS if f != "p3_ratio"
)
FIG1_COLUMNS = ("T", "mode", "quantile", "error_inf", "mean")

PLOT_STUB = '''"""Re-draws the estimation error figure from fig1_data.csv (needs matplotlib)."""
import csv
import sys
from collections import defaultdict

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "fig1_data.csv"
rows = defaultdict(lambda: defaultdict(dict))
with open(path) as f:
    for row in csv.DictReader(f):
        rows[int(row["mode"])][float(row["quantile"])][int(row["T"])] = float(row["error_inf"])

for mode, by_q in sorted(rows.items()):
    qs = sorted(by_q)
    lo, mid, hi = by_q[qs[0]], by_q[qs[len(qs) // 2]], by_q[qs[-1]]
    T = sorted(mid)
    (line,) = plt.loglog(T, [mid[t] for t in T], label=f"mode {mode}")
    plt.fill_between(T, [lo[t] for t in T], [hi[t] for t in T], color=line.get_color(), alpha=0.3)

plt.xlabel("T")
plt.ylabel("estimation error")
plt.legend()
plt.savefig("fig1.png")
'''


def create_folder(folder_path="results"):
    try:
        if not os.path.exists(folder_path):
            os.makedirs(folder_path)
            logging.info("Folder created: %s", folder_path)
    except OSError as e:
        raise ArtifactIOError(f"{folder_path}: cannot create folder ({e})") from e


def get_git_commit_version():
    """Git commit of the working tree, used to tag experiments; None outside a checkout."""
    try:
        return (
            subprocess.check_output(["git", "rev-parse", "HEAD"], stderr=subprocess.DEVNULL)
            .decode("utf-8")
            .strip()
        )
    except (subprocess.CalledProcessError, OSError):
        return None


def _fmt(value):
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    return "nan" if math.isnan(value) else repr(value)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.ndarray, jnp.ndarray)):
        return _jsonable(np.asarray(obj).tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return None if not math.isfinite(float(obj)) else float(obj)
    return obj


def write_json(path, obj):
    try:
        with open(path, "w") as f:
            json.dump(_jsonable(obj), f, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as e:
        raise ArtifactIOError(f"{path}: {e}") from e


def write_csv(path, header, rows):
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
    except OSError as e:
        raise ArtifactIOError(f"{path}: {e}") from e


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _curves_rows(result):
    cols = [CURVE_FIELDS.index(c) for c in CURVES_COLUMNS[3:]]
    for j, T in enumerate(result.checkpoints):
        for i in range(result.config.system.k):
            for qi, q in enumerate(result.quantiles):
                values = result.quantile_curves[qi, j, i]
                yield [T, i + 1, q] + [values[c] for c in cols]


def _fig1_rows(result):
    err = CURVE_FIELDS.index("error_inf")
    for i in range(result.config.system.k):
        for j, T in enumerate(result.checkpoints):
            for qi, q in enumerate(result.quantiles):
                yield [T, i + 1, q, result.quantile_curves[qi, j, i, err], result.mean_curves[j, i, err]]


def emit_artifacts(result, dir):
    """Writes curves.csv, fig1_data.csv, summary.json and plot_fig1.py into ``dir``.

    Returns the manifest ``{file name: sha256}``.
    """
    create_folder(dir)
    paths = {
        "curves.csv": os.path.join(dir, "curves.csv"),
        "fig1_data.csv": os.path.join(dir, "fig1_data.csv"),
        "summary.json": os.path.join(dir, "summary.json"),
        "plot_fig1.py": os.path.join(dir, "plot_fig1.py"),
    }
    write_csv(paths["curves.csv"], CURVES_COLUMNS, _curves_rows(result))
    write_csv(paths["fig1_data.csv"], FIG1_COLUMNS, _fig1_rows(result))
    summary = result.summary()
    summary["provenance"] = dict(summary["provenance"], commit=get_git_commit_version())
    write_json(paths["summary.json"], summary)
    try:
        with open(paths["plot_fig1.py"], "w") as f:
            f.write(PLOT_STUB)
    except OSError as e:
        raise ArtifactIOError(f"{paths['plot_fig1.py']}: {e}") from e
    manifest = {name: file_sha256(path) for name, path in paths.items()}
    logging.info("artifacts written to %s", dir)
    return manifest


def write_trajectory_csv(traj, path):
    """Columns t, s_t, x_1..x_n, w_1..w_n with 1-based modes; the last row holds x_T only."""
    n = traj.n
    header = ["t", "s_t"] + [f"x_{j + 1}" for j in range(n)] + [f"w_{j + 1}" for j in range(n)]
    states = np.asarray(traj.states)
    switches = np.asarray(traj.switches)
    noises = np.asarray(traj.noises)
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for t in range(traj.horizon):
                writer.writerow(
                    [t, int(switches[t]) + 1]
                    + [_fmt(v) for v in states[t]]
                    + [_fmt(v) for v in noises[t]]
                )
            writer.writerow([traj.horizon, ""] + [_fmt(v) for v in states[-1]] + [""] * n)
    except OSError as e:
        raise ArtifactIOError(f"{path}: {e}") from e


def read_trajectory_csv(path, n_modes=None):
    """Inverse of ``write_trajectory_csv``; ``n_modes`` defaults to the largest mode seen."""
    try:
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise ArtifactIOError(f"{path}: {e}") from e
    if len(rows) < 3:
        raise InvalidInputError(f"{path}: a trajectory needs a header and at least two rows")
    header, body = rows[0], rows[1:]
    n = sum(1 for c in header if c.startswith("x_"))
    if header[:2] != ["t", "s_t"] or n < 1 or len(header) != 2 + 2 * n:
        raise InvalidInputError(f"{path}: unexpected header {header}")
    try:
        states = np.asarray([[float(v) for v in row[2 : 2 + n]] for row in body])
        switches = np.asarray([int(row[1]) - 1 for row in body[:-1]], dtype=np.int32)
        noises = np.asarray([[float(v) for v in row[2 + n :]] for row in body[:-1]])
        times = [int(row[0]) for row in body]
    except ValueError as e:
        raise InvalidInputError(f"{path}: malformed row ({e})") from e
    if times != list(range(len(body))):
        raise InvalidInputError(f"{path}: time indices must be 0..T without duplicates")
    k = int(n_modes) if n_modes else int(switches.max()) + 1
    if np.any(switches < 0) or np.any(switches >= k):
        raise InvalidInputError(f"{path}: mode labels must lie in 1..{k}")
    return Trajectory(
        states=jnp.asarray(states),
        switches=jnp.asarray(switches),
        noises=jnp.asarray(noises.reshape(-1, n)),
        n_modes=k,
    )


def log_to_wandb(result, manifest_dir, project, name=None):
    """Mirrors an experiment into a Weights & Biases run: config, curves and artifacts."""
    import wandb

    wandb.init(project=project, name=name or result.config.name)
    config = wandb.config
    config.update(result.config.to_dict())
    config.update(result.provenance)
    config.commit_version = get_git_commit_version()

    err = CURVE_FIELDS.index("error_inf")
    dd = CURVE_FIELDS.index("dd_bound")
    di = CURVE_FIELDS.index("di_pmf")
    for j, T in enumerate(result.checkpoints):
        metrics = {}
        for i in range(result.config.system.k):
            metrics[f"error_mode_{i + 1}"] = float(result.median_curves[j, i, err])
            metrics[f"dd_bound_mode_{i + 1}"] = float(result.median_curves[j, i, dd])
            metrics[f"di_bound_mode_{i + 1}"] = float(result.median_curves[j, i, di])
        wandb.log(metrics, step=int(T))

    artifact = wandb.Artifact(f"{wandb.run.id}-results", type="results")
    for file_name in ("summary.json", "fig1_data.csv", "curves.csv"):
        artifact.add_file(os.path.join(manifest_dir, file_name))
    wandb.log_artifact(artifact)
    wandb.finish()
