"""Reproduces the two-mode numerical example: error curves, bounds and rate fits.

Usage:
    python scripts/fig1_montecarlo.py --config configs/fig1.json --runs 30 --project swsysid
"""
import os
import sys

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import wandb

from absl import app
from absl import flags

from swsysid.analysis import CURVE_FIELDS
from swsysid.experiment import ExperimentConfig, run_experiment
from swsysid.utils import create_folder, emit_artifacts, get_git_commit_version

flags.DEFINE_string("config", "configs/fig1.json", "Experiment config to run")
flags.DEFINE_integer("runs", None, "Number of independent runs, e.g.: 20, 30")
flags.DEFINE_integer("seed", None, "Master seed override")
flags.DEFINE_integer("workers", None, "Number of parallel runs")
flags.DEFINE_string("project", None, "Name of the W&B project, e.g.: 'swsysid-fig1'")
flags.DEFINE_string("name", "fig1", "Name for the experiment, e.g.: 'fig1-30-runs'")
flags.DEFINE_string("output_dir", "results/fig1", "Folder where to store the artifacts.")

FLAGS = flags.FLAGS


def save_error_plot(folder_path, result, file_name="fig1.png"):
    """Median error per mode with the quantile band, plus the pmf-based rate line."""
    err = CURVE_FIELDS.index("error_inf")
    di = CURVE_FIELDS.index("di_pmf")
    T = np.asarray(result.checkpoints)
    lo, hi = result.quantiles[0], result.quantiles[-1]

    fig, ax = plt.subplots(figsize=(6, 4))
    for i in range(result.config.system.k):
        (line,) = ax.loglog(T, result.median_curves[:, i, err], label=f"mode {i + 1}")
        ax.fill_between(
            T,
            result.curve("error_inf", lo)[:, i],
            result.curve("error_inf", hi)[:, i],
            color=line.get_color(),
            alpha=0.3,
        )
        ax.loglog(T, result.median_curves[:, i, di], "--", color=line.get_color(), lw=0.8)
    ax.set_xlabel("T")
    ax.set_ylabel(r"$\|\hat{A}_{i,T} - A_i\|_\infty$")
    ax.legend()
    fig.tight_layout()

    file_path = os.path.join(folder_path, file_name)
    fig.savefig(file_path)
    if wandb.run is not None:
        wandb.log({file_name.split(".")[0]: wandb.Image(fig)})
    plt.close(fig)
    print(f"Plot saved as {file_path}")


def main(_):
    config = ExperimentConfig.from_json(FLAGS.config)
    overrides = {}
    if FLAGS.runs is not None:
        overrides["runs"] = FLAGS.runs
    if FLAGS.seed is not None:
        overrides["master_seed"] = FLAGS.seed
    if overrides:
        config = config.replace(**overrides)

    if FLAGS.project:
        wandb.login()
        wandb.init(project=FLAGS.project, name=FLAGS.name)
        wandb.config.update(config.to_dict())
        wandb.config.commit_version = get_git_commit_version()

    result = run_experiment(config, workers=FLAGS.workers)

    err = CURVE_FIELDS.index("error_inf")
    for j, T in enumerate(result.checkpoints):
        line = ", ".join(
            f"mode {i + 1}: {result.median_curves[j, i, err]:.4f}"
            for i in range(config.system.k)
        )
        print(f"T: {T}, median error {line}")
        if wandb.run is not None:
            wandb.log(
                {f"error_mode_{i + 1}": float(result.median_curves[j, i, err]) for i in range(config.system.k)},
                step=int(T),
            )

    for i, fit in enumerate(result.rate_fits):
        if fit is not None:
            print(f"mode {i + 1}: rate exponent {fit.exponent:.3f} (r^2 = {fit.r_squared:.3f})")

    stability = result.stability
    print(
        f"assumption-2 margin {stability.assumption2_margin:.4f}, "
        f"mss radius {stability.mss_radius:.4f} ({stability.quadrant})"
    )

    create_folder(FLAGS.output_dir)
    manifest = emit_artifacts(result, FLAGS.output_dir)
    save_error_plot(FLAGS.output_dir, result)
    for file_name, digest in manifest.items():
        print(f"{file_name}: {digest}")

    if wandb.run is not None:
        wandb.finish()


if __name__ == "__main__":
    app.FLAGS(sys.argv)
    app.run(main)
