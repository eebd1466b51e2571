"""Command-line entry point.

Subcommands ``reconstruct``, ``convergence`` and ``noisy-demo`` run the
harness with the matching experiment kind and write CSV/JSON artifacts to
the output directory.  A JSON config file can prefill any flag; explicit
flags override it.  Exit codes: 0 success, 2 configuration error, 3 solver
non-convergence in a single-run mode.
"""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import ExperimentConfig, SolverDidNotConverge, run_experiment

_EXPERIMENT_BY_COMMAND = {
    "reconstruct": "reconstruct",
    "convergence": "convergence",
    "noisy-demo": "noisy_demo",
}

_DEFAULTS = {
    "order": 2,
    "cutoff": 3,
    "grid": "16",
    "lam": 1e-7,
    "sigma": 0.0,
    "knots": 2,
    "trials": 1,
    "seed": 0,
    "solver": "admm",
    "out_dir": ".",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tvspline",
        description="Periodic spline reconstruction from low-frequency Fourier data",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command in _EXPERIMENT_BY_COMMAND:
        p = sub.add_parser(command)
        p.add_argument("--order", type=int, help="derivative order M >= 1")
        p.add_argument("--cutoff", type=int, help="largest observed frequency")
        p.add_argument("--grid", type=str, help="grid size, or comma list of sizes")
        p.add_argument("--lambda", dest="lam", type=float, help="regularization weight")
        p.add_argument("--sigma", type=float, help="noise standard deviation")
        p.add_argument("--knots", type=int, help="ground-truth knot count")
        p.add_argument("--trials", type=int, help="Monte-Carlo trial count")
        p.add_argument("--seed", type=int, help="run seed")
        p.add_argument("--solver", choices=["admm", "fw"], help="solver backend")
        p.add_argument("--out-dir", dest="out_dir", type=str, help="artifact directory")
        p.add_argument("--config", type=str, help="JSON file prefilling the flags above")
    return parser


def _parse_grid(text: str) -> tuple:
    try:
        return tuple(int(part) for part in str(text).split(","))
    except ValueError as exc:
        raise ValueError(f"invalid --grid value {text!r}") from exc


def _merge_config(args: argparse.Namespace) -> ExperimentConfig:
    values = dict(_DEFAULTS)
    if args.config:
        with open(args.config) as fh:
            file_values = json.load(fh)
        if not isinstance(file_values, dict):
            raise ValueError("config file must hold a JSON object")
        aliases = {"lambda": "lam", "out-dir": "out_dir"}
        for key, val in file_values.items():
            key = aliases.get(key, key)
            if key not in values:
                raise ValueError(f"unknown config key {key!r}")
            values[key] = val
    for key in values:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return ExperimentConfig(
        experiment=_EXPERIMENT_BY_COMMAND[args.command],
        order=int(values["order"]),
        cutoff=int(values["cutoff"]),
        grid_points=_parse_grid(values["grid"]),
        lam=float(values["lam"]),
        noise_sigma=float(values["sigma"]),
        n_knots=int(values["knots"]),
        n_trials=int(values["trials"]),
        seed=int(values["seed"]),
        solver=str(values["solver"]),
        out_dir=str(values["out_dir"]),
    )


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _merge_config(args)
        if config.experiment == "convergence" and len(config.grid_points) < 3:
            raise ValueError("convergence needs --grid with at least 3 sizes")
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        summary = run_experiment(config)
    except SolverDidNotConverge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    results = summary["results"]
    if config.experiment == "convergence":
        print(f"slope={results['slope']:.4f} (see {config.out_dir}/convergence.csv)")
    else:
        print(
            f"raw_knots={results['raw_knots']} merged_knots={results['merged_knots']} "
            f"linf_error={results['linf_error']:.6g}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
