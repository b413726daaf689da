"""Command line entry point.

    swsysid simulate   --config CFG [--seed N] [--horizon T] [--out DIR]
    swsysid fit        --trajectory CSV [--modes K] [--recursive] [--out DIR]
    swsysid stability  --config CFG
    swsysid montecarlo --config CFG [--seed N] [--runs N] [--workers N] [--out DIR]
    swsysid selftest

Exit codes: 0 success, 1 validation error, 2 instability failure, 3 IO error.
"""
import json
import os
import sys

from absl import app
from absl import flags
from absl import logging

from swsysid.errors import ArtifactIOError, InstabilityError, InvalidInputError, SwsysidError
from swsysid.estimators import batch_fit, recursive_fit, state_to_dict
from swsysid.experiment import ExperimentConfig, run_experiment, stability_report
from swsysid.models import simulate
from swsysid.selftest import run_selftest
from swsysid.utils import (
    create_folder,
    emit_artifacts,
    log_to_wandb,
    read_trajectory_csv,
    write_json,
    write_trajectory_csv,
)

flags.DEFINE_string("config", None, "Path to the experiment config JSON.")
flags.DEFINE_integer("seed", None, "Overrides the config's master seed.")
flags.DEFINE_integer("runs", None, "Overrides the config's number of Monte Carlo runs.")
flags.DEFINE_integer("horizon", None, "Overrides the config's horizon (simulate only).")
flags.DEFINE_string("out", None, "Output directory; defaults to $SWSYSID_OUT, then the config's output_dir.")
flags.DEFINE_integer("workers", None, "Parallel runs; defaults to the number of cores.")
flags.DEFINE_string("trajectory", None, "Trajectory CSV to identify from (fit only).")
flags.DEFINE_integer("modes", None, "Number of modes k of the trajectory (fit only).")
flags.DEFINE_boolean("recursive", False, "Use the recursive estimator instead of the batch solve (fit only).")
flags.DEFINE_boolean("progress", True, "Show a progress bar over Monte Carlo runs.")
flags.DEFINE_string("wandb_project", None, "If set, mirror montecarlo results to this W&B project.")
flags.DEFINE_string("wandb_name", None, "Name of the W&B run, e.g.: 'fig1-30-runs'")

FLAGS = flags.FLAGS

EXIT_OK, EXIT_INVALID, EXIT_UNSTABLE, EXIT_IO = 0, 1, 2, 3
COMMANDS = ("simulate", "fit", "stability", "montecarlo", "selftest")


def _load_config():
    if not FLAGS.config:
        raise InvalidInputError("--config is required")
    config = ExperimentConfig.from_json(FLAGS.config)
    overrides = {}
    if FLAGS.seed is not None:
        overrides["master_seed"] = FLAGS.seed
    if FLAGS.runs is not None:
        overrides["runs"] = FLAGS.runs
    return config.replace(**overrides) if overrides else config


def _output_dir(config=None):
    out = FLAGS.out or os.environ.get("SWSYSID_OUT")
    if out is None:
        out = config.output_dir if config is not None else "results"
    create_folder(out)
    return out


def _simulate():
    config = _load_config()
    traj = simulate(
        config.system,
        config.noise,
        FLAGS.horizon or config.horizon,
        config.master_seed,
    )
    path = os.path.join(_output_dir(config), "trajectory.csv")
    write_trajectory_csv(traj, path)
    print(json.dumps({"trajectory": path, "horizon": traj.horizon, "seed": traj.seed}))


def _fit():
    if not FLAGS.trajectory:
        raise InvalidInputError("--trajectory is required")
    traj = read_trajectory_csv(FLAGS.trajectory, n_modes=FLAGS.modes)
    state = recursive_fit(traj) if FLAGS.recursive else batch_fit(traj)
    estimate = state_to_dict(state)
    write_json(os.path.join(_output_dir(), "estimate.json"), estimate)
    print(json.dumps(estimate, indent=2))


def _stability():
    print(json.dumps(stability_report(_load_config()).to_dict(), indent=2, sort_keys=True))


def _montecarlo():
    config = _load_config()
    result = run_experiment(config, workers=FLAGS.workers, progress=FLAGS.progress)
    out = _output_dir(config)
    manifest = emit_artifacts(result, out)
    if FLAGS.wandb_project:
        log_to_wandb(result, out, FLAGS.wandb_project, FLAGS.wandb_name)
    print(json.dumps({"dir": out, "files": manifest}, indent=2, sort_keys=True))


def _selftest():
    results = run_selftest()
    for name, passed, value, expected in results:
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {value} (expected {expected})")
    return EXIT_OK if all(r[1] for r in results) else EXIT_INVALID


def main(argv):
    if len(argv) < 2 or argv[1] not in COMMANDS:
        print(f"usage: swsysid {{{','.join(COMMANDS)}}} [flags]", file=sys.stderr)
        return EXIT_INVALID
    command = argv[1]
    try:
        status = {
            "simulate": _simulate,
            "fit": _fit,
            "stability": _stability,
            "montecarlo": _montecarlo,
            "selftest": _selftest,
        }[command]()
    except InstabilityError as e:
        logging.error("%s: %s", command, e)
        return EXIT_UNSTABLE
    except (ArtifactIOError, OSError) as e:
        logging.error("%s: %s", command, e)
        return EXIT_IO
    except SwsysidError as e:
        logging.error("%s: %s", command, e)
        return EXIT_INVALID
    return EXIT_OK if status is None else status


def run():
    app.run(main)


if __name__ == "__main__":
    run()
