"""Command-line entry point.

Subcommands
-----------
solve-human   solve the human policy, print solver + reach statistics,
              write trajectory_human-alone.csv
optimize      tune automation cost parameters for the configured preset,
              print and write the optimum
simulate      Monte-Carlo sample the requested controllers, write
              trajectory_mc_<label>.csv files
report        build all requested controllers, write metrics.csv and
              trajectory_<label>.csv, print a summary table
verify        report-style build plus Monte-Carlo cross-check of every
              controller, write verify_report.txt
reproduce     report + verify for a bundled scenario (example1|example2)

Common flags: --config PATH, --seed N, --out DIR, --samples N,
--controllers LIST (comma-separated subset of human-alone,
lqr-benchmark, hvroc-highvar, hvroc-lowvar).

Seed precedence: --seed beats the HVROC_SEED environment variable,
which beats the config's optimizer.seed/mc.seed keys (default 0).

Exit codes: 0 success, 1 usage or config error, 2 solver failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import bench
from .config import (
    BUNDLED_CONFIGS,
    CONTROLLER_LABELS,
    ConfigError,
    load_bundled_config,
    load_config,
)
from .hvroc_opt import OptimizationFailedError, human_baseline
from .lqg_automation import DegenerateCostError
from .lqs_human import SolverDegenerateError
from .model import InvalidCostError, InvalidTaskError
from .moments import propagate_coupled

_USAGE_ERRORS = (ConfigError, InvalidTaskError, InvalidCostError)
_SOLVER_ERRORS = (SolverDegenerateError, DegenerateCostError,
                  OptimizationFailedError, np.linalg.LinAlgError,
                  FloatingPointError)

ENV_SEED = "HVROC_SEED"


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(sub, config=True, samples=False, controllers=False):
    if config:
        sub.add_argument("--config", metavar="PATH",
                         help="scenario config file (default: bundled "
                              "example1 values)")
    sub.add_argument("--seed", type=int, metavar="N",
                     help="override optimizer and Monte-Carlo seeds")
    sub.add_argument("--out", metavar="DIR",
                     help="output directory (default: config run.out_dir)")
    if samples:
        sub.add_argument("--samples", type=int, metavar="N",
                         help="Monte-Carlo trajectory count "
                              "(default: config mc.samples)")
    if controllers:
        sub.add_argument("--controllers", metavar="LIST",
                         help="comma-separated controller labels "
                              "(default: config run.controllers)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hvroc",
                     description="Stochastic human-machine reach "
                                 "simulation and automation tuning")
    subs = parser.add_subparsers(dest="command", required=True)

    _add_common(subs.add_parser(
        "solve-human", help="solve and summarize the human policy"))
    _add_common(subs.add_parser(
        "optimize", help="tune automation cost parameters"))
    _add_common(subs.add_parser(
        "simulate", help="sample controllers, write ensemble CSVs"),
        samples=True, controllers=True)
    _add_common(subs.add_parser(
        "report", help="write metrics.csv and trajectory CSVs"),
        controllers=True)
    _add_common(subs.add_parser(
        "verify", help="Monte-Carlo cross-check of analytic moments"),
        samples=True, controllers=True)
    repro = subs.add_parser(
        "reproduce", help="report + verify for a bundled scenario")
    repro.add_argument("scenario", choices=BUNDLED_CONFIGS)
    _add_common(repro, config=False, samples=True, controllers=True)
    return parser


def _resolve_seed(args) -> int | None:
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be >= 0")
        return args.seed
    env = os.environ.get(ENV_SEED)
    if env is not None:
        try:
            seed = int(env)
        except ValueError:
            raise ConfigError(f"{ENV_SEED}: not an integer: {env!r}") from None
        if seed < 0:
            raise ConfigError(f"{ENV_SEED} must be >= 0")
        return seed
    return None


def _resolve_controllers(args):
    raw = getattr(args, "controllers", None)
    if raw is None:
        return None
    labels = tuple(p.strip() for p in raw.split(","))
    for label in labels:
        if label not in CONTROLLER_LABELS:
            raise ConfigError(f"--controllers: unknown label {label!r}; "
                              f"expected subset of {CONTROLLER_LABELS}")
    return labels


def _out_dir(config, args) -> Path:
    out = Path(args.out if args.out is not None else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_solve_human(config, args, seed):
    plant, human, report, _ = bench.solve_scenario_human(config)
    if not report.converged:
        print(f"solver failed to converge after {report.iterations} "
              f"iterations (gain delta {report.gain_delta:.3e})",
              file=sys.stderr)
        return 2
    baseline = human_baseline(plant, human,
                              band_fraction=config.settling_band)
    out = _out_dir(config, args)
    bench.write_trajectory_csv(baseline.trajectory,
                               out / "trajectory_human-alone.csv")
    rows = bench.metrics_rows("human-alone", baseline.trajectory, plant,
                              config.settling_band)
    print(f"converged in {report.iterations} iterations "
          f"(gain delta {report.gain_delta:.3e})")
    print(f"expected cost {report.expected_cost:.6e}")
    if report.regularized:
        print("note: innovation covariance was regularized")
    print(bench.format_metrics_table(rows))
    return 0


def _cmd_optimize(config, args, seed):
    plant, human, report, _ = bench.solve_scenario_human(config)
    if not report.converged:
        print("human solver failed to converge", file=sys.stderr)
        return 2
    baseline = human_baseline(plant, human,
                              band_fraction=config.settling_band)
    label = f"hvroc-{config.hvroc_preset}"
    opt_seed = config.optimizer_seed if seed is None else seed
    policy, result = bench.build_controller(label, plant, human, baseline,
                                            config, opt_seed)
    traj = propagate_coupled(plant, human, policy)
    rows = bench.metrics_rows(label, traj, plant, config.settling_band)
    out = _out_dir(config, args)
    lines = [
        f"preset = {config.hvroc_preset}",
        f"J_star = {bench.fmt_float(result.J_star)}",
        f"evaluations = {result.evaluations}",
        "q_star = " + ", ".join(bench.fmt_float(v) for v in result.q_star),
        "r_star = " + ", ".join(bench.fmt_float(v) for v in result.r_star),
    ]
    (out / f"optimization_{config.hvroc_preset}.txt").write_text(
        "\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    print(bench.format_metrics_table(rows))
    return 0


def _cmd_simulate(config, args, seed):
    controllers = _resolve_controllers(args)
    scenario = bench.run_simulate(config, out_dir=args.out, seed=seed,
                                  samples=args.samples,
                                  controllers=controllers)
    for label, message in scenario.failures:
        print(f"{label}: {message}", file=sys.stderr)
    return 2 if scenario.failures else 0


def _cmd_report(config, args, seed):
    controllers = _resolve_controllers(args)
    scenario, table = bench.run_report(config, out_dir=args.out, seed=seed,
                                       controllers=controllers)
    print(table)
    for label, message in scenario.failures:
        print(f"{label}: {message}", file=sys.stderr)
    return 2 if scenario.failures else 0


def _print_outcomes(outcomes):
    for outcome in outcomes:
        print(f"{outcome.label}: {'PASS' if outcome.passed else 'FAIL'} "
              f"(max var rel err {outcome.max_var_rel_err:.4f}, "
              f"means within 4 stderr {100 * outcome.mean_within_frac:.2f}%)")


def _cmd_verify(config, args, seed):
    controllers = _resolve_controllers(args)
    scenario, outcomes, passed = bench.run_verify(
        config, out_dir=args.out, seed=seed, samples=args.samples,
        controllers=controllers)
    _print_outcomes(outcomes)
    for label, message in scenario.failures:
        print(f"{label}: {message}", file=sys.stderr)
    if scenario.failures:
        return 2
    return 0 if passed else 3


def _cmd_reproduce(config, args, seed):
    controllers = _resolve_controllers(args)
    scenario, table = bench.run_report(config, out_dir=args.out, seed=seed,
                                       controllers=controllers)
    print(table)
    for label, message in scenario.failures:
        print(f"{label}: {message}", file=sys.stderr)
    if scenario.failures:
        return 2
    _, outcomes, passed = bench.run_verify(
        config, out_dir=args.out, seed=seed, samples=args.samples,
        controllers=controllers, scenario=scenario)
    _print_outcomes(outcomes)
    return 0 if passed else 3


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        seed = _resolve_seed(args)
        if args.command == "reproduce":
            config = load_bundled_config(args.scenario)
        else:
            config = load_config(args.config)
        handler = {
            "solve-human": _cmd_solve_human,
            "optimize": _cmd_optimize,
            "simulate": _cmd_simulate,
            "report": _cmd_report,
            "verify": _cmd_verify,
            "reproduce": _cmd_reproduce,
        }[args.command]
        return handler(config, args, seed)
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except _SOLVER_ERRORS as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
