# coding=utf-8

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, designs, experiments, fisher, options, records, sampling
from .config import RunConfig, resolve
from .options import ConfigError
from .states import RANK_TOL, eigen_chart, random_rank_r_state
from .workers import SAMPLE_STREAM, STATE_STREAM, derive_seed

logger = logging.getLogger("tomofisher")

_handler = None

DESCRIPTIONS = {
    "sweep": "Asymptotic MSE of random Pauli designs under a fixed sample budget.",
    "mle-compare": "Maximum-likelihood MSE against the Fisher prediction.",
    "haar-concentration": "Whitened Fisher spectrum of random Haar bases.",
    "pauli-re": "Relative error of random Pauli designs against all settings.",
    "min-eig": "Minimum whitened eigenvalue of the full Pauli design.",
    "coarse-compare": "Asymptotic MSE of random sets of Pauli observables.",
    "fisher": "Fisher information and asymptotic MSE of one design at one state.",
    "counts": "Synthetic outcome counts of one setting.",
}

HELP = {
    "n": "Number of qubits.",
    "d": "Hilbert space dimension.",
    "r": "Rank of the state.",
    "ranks": "Grid of ranks, e.g. 1..5.",
    "k": "Grid of design sizes, e.g. 10..81:10. Defaults to every size.",
    "n_grid": "Grid of qubit numbers.",
    "N": "Total sample budget.",
    "m": "Repetitions of the setting.",
    "states": "Random states per rank.",
    "designs": "Random designs per design size.",
    "reps": "Monte-Carlo replicates per design.",
    "replacement": "Draw settings with replacement.",
    "rotate": "Rotate equal-eigenvalue states by a Haar-random unitary.",
    "stretch": "Allow more than 6 qubits.",
    "compare_fine": "Add the full fine Pauli design at the same budget.",
    "max_iters": "Iteration cap of the estimator.",
    "conv_tol": "Convergence tolerance of the estimator.",
    "dilution": "Dilution of the estimator in (0, 1].",
    "state_seed": "Seed of a random state.",
    "state_diag": "Diagonal state, e.g. 1,0.",
    "settings": "Comma separated Pauli setting labels, e.g. x,y.",
    "setting": "Pauli setting label, e.g. zz.",
    "print_mse": "Print only the asymptotic MSE.",
}


def configure_logging(level):
    global _handler
    logger.setLevel(level)
    if _handler is None:
        _handler = logging.StreamHandler()
        formatter = logging.Formatter("%(asctime)s %(levelname)s: %(message)s", "%H:%M:%S")
        _handler.setFormatter(formatter)
        logger.addHandler(_handler)


def _flag(name):
    return "--" + name.replace("_", "-")


def _add_parameter(parser, name):
    kind = options.PARAMETERS[name]
    if kind is bool:
        parser.add_argument(
            _flag(name), nargs="?", const="true", metavar="BOOL", help=HELP.get(name)
        )
    else:
        parser.add_argument(_flag(name), metavar=name.upper(), help=HELP.get(name))


def build_parser():
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--seed", help="Master seed.")
    common.add_argument("--workers", help="Number of worker processes.")
    common.add_argument("--output", "-o", metavar="PATH", help="Output directory.")
    common.add_argument(
        "--config",
        "-c",
        type=Path,
        metavar="PATH",
        help="Key/value config file, or a manifest.json to replay.",
    )
    common.add_argument("--verbose", "-v", action="store_true", help="Log debug messages.")
    common.add_argument("--quiet", "-q", action="store_true", help="Log warnings only.")

    parser = argparse.ArgumentParser(
        prog="tomofisher",
        description="Fisher information and maximum-likelihood studies of quantum state tomography.",
        parents=[common],
        allow_abbrev=False,
    )
    parser.add_argument("--version", action="version", version=__version__)
    subparsers = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    subparsers.required = True
    for subcommand in options.SUBCOMMANDS:
        subparser = subparsers.add_parser(
            subcommand,
            help=DESCRIPTIONS[subcommand],
            description=DESCRIPTIONS[subcommand],
            parents=[common],
            argument_default=argparse.SUPPRESS,
            allow_abbrev=False,
        )
        for name in options.SUBCOMMAND_PARAMETERS[subcommand]:
            _add_parameter(subparser, name)
    return parser


def _run_config(args):
    """ Builds the RunConfig from parsed arguments; a manifest given as --config is replayed. """
    values = vars(args)
    subcommand = values.pop("subcommand")
    config_path = values.pop("config", None)
    for name in ("verbose", "quiet"):
        values.pop(name, None)
    flags = {name: options.parse_value(name, text) for name, text in values.items()}

    if config_path is not None and config_path.suffix == ".json":
        try:
            manifest = records.read_manifest(config_path)
        except (OSError, ValueError) as e:
            raise ConfigError("Cannot read manifest {}: {}".format(config_path, e))
        config = RunConfig.from_dict(manifest["config"])
        if config.subcommand != subcommand:
            raise ConfigError(
                "Manifest is for {}, not {}".format(config.subcommand, subcommand)
            )
        if "output" in flags:
            config.output_dir = flags["output"]
        if "workers" in flags:
            config.workers = flags["workers"]
        logger.info("Replaying {}".format(config_path))
        return config
    return resolve(subcommand, flags, config_path)


def _state(config):
    """
    Returns (rho, rank, state_seed) of the fisher and counts subcommands.  A
    diagonal state has the rank of its non-zero entries and no seed.
    """
    p = config.parameters
    if p["state_diag"] is not None:
        diag = np.array(p["state_diag"], dtype=float)
        return np.diag(diag).astype(complex), int(np.sum(diag > RANK_TOL)), None
    state_seed = p["state_seed"]
    if state_seed is None:
        state_seed = derive_seed(config.seed, STATE_STREAM, p["r"], 0)
    return random_rank_r_state(2 ** p["n"], p["r"], state_seed), p["r"], state_seed


def _run_fisher(config):
    p = config.parameters
    rho, r, state_seed = _state(config)
    chart = eigen_chart(rho, r)
    labels = p["settings"]
    design = designs.pauli_design(labels, replacement=len(set(labels)) != len(labels))
    info = fisher.fisher_design(chart, design, config.workers)
    weight = fisher.weight_matrix(chart)
    m = sampling.repetitions_for_budget(p["N"], len(design))
    mse = fisher.asymptotic_mse(info, weight, m * len(design))
    _, low, high = fisher.whiten(info, weight, fisher.weight_inverse_sqrt(chart))
    record = experiments.make_record(
        "fisher",
        "asymptotic_mse",
        mse,
        n=p["n"],
        d=2 ** p["n"],
        r=r,
        state_seed=state_seed,
        design=design.descriptor(),
        N=p["N"],
        m=m,
        aux={"fisher": info, "whitened_min": low, "whitened_max": high},
    )
    record.index = 0
    record.timestamp = config.timestamp
    files = records.write_records(config.output_dir, record.kind, [record])
    if p["print_mse"]:
        print(records.format_float(record.value) if record.value is not None else record.status)
    else:
        print(
            "fisher: asymptotic_mse={} status={} written to {}".format(
                records.format_float(record.value), record.status, config.output_dir
            )
        )
    return [Path(path).name for path in files], 1


def _run_counts(config):
    p = config.parameters
    rho, _, _ = _state(config)
    design = designs.pauli_design([p["setting"]])
    table = sampling.sample_counts(
        rho, design, p["m"], derive_seed(config.seed, SAMPLE_STREAM)
    )
    Path(config.output_dir).mkdir(parents=True, exist_ok=True)
    files = table.to_csv(Path(config.output_dir) / "counts.csv")
    print(
        "counts: setting {} m={} counts={}".format(
            p["setting"], p["m"], ",".join(str(c) for c in table.counts[0])
        )
    )
    return [path.name for path in files], 1


def _run_experiment(config):
    experiment = experiments.create(
        config.subcommand,
        config.parameters,
        seed=config.seed,
        workers=config.workers,
        timestamp=config.timestamp,
    )
    output = experiment.run()
    files = records.write_records(config.output_dir, experiment.kind, output)
    statuses = [record.status for record in output]
    print(
        "{}: {} records ({} ok, {} non-identifiable, {} failed) written to {}".format(
            experiment.kind,
            len(output),
            statuses.count(records.STATUS_OK),
            statuses.count(records.STATUS_NON_IDENTIFIABLE),
            statuses.count(records.STATUS_FAILED),
            config.output_dir,
        )
    )
    return [Path(path).name for path in files], len(output)


def execute(config):
    """ Runs a RunConfig and writes its manifest. Returns the manifest path. """
    if config.subcommand == "fisher":
        files, count = _run_fisher(config)
    elif config.subcommand == "counts":
        files, count = _run_counts(config)
    else:
        files, count = _run_experiment(config)
    manifest = {
        "config": config.to_dict(),
        "version": __version__,
        "records": count,
        "files": files,
    }
    path = records.write_manifest(config.output_dir, manifest)
    logger.info("Manifest written to {}".format(path))
    return path


def run(argv=None):
    """
    Parses argv, runs the subcommand and returns the exit status.

    Returns:
        0 on success, 2 on a configuration error, 1 on a runtime or output error.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    if getattr(args, "verbose", False):
        configure_logging(logging.DEBUG)
    elif getattr(args, "quiet", False):
        configure_logging(logging.WARNING)
    else:
        configure_logging(logging.INFO)

    try:
        config = _run_config(args)
    except ConfigError as e:
        logger.error(e.args[0])
        print("tomofisher: {}".format(e.args[0]), file=sys.stderr)
        return 2

    try:
        execute(config)
    except (OSError, ValueError, ArithmeticError) as e:
        logger.error("{} failed: {}".format(config.subcommand, e))
        print("tomofisher: {}".format(e), file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
