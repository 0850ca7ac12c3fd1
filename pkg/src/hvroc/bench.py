"""Scenario orchestration: build controllers, extract metrics, emit files.

A scenario (ScenarioConfig) describes one reach task plus up to four
controllers:

    human-alone     the stochastic human model acting by itself
    lqr-benchmark   deterministic LQR automation with a fixed cost
    hvroc-highvar   tuned automation, mid-movement spread preserved
    hvroc-lowvar    tuned automation, mid-movement spread suppressed

`run_report` writes metrics.csv plus one trajectory CSV per controller
and prints a summary table.  `run_verify` replays every controller
through the Monte-Carlo sampler and checks the analytic moments against
the ensemble.  All numeric CSV fields use the shortest round-tripping
decimal representation, so outputs are byte-stable for fixed inputs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import CONTROLLER_LABELS, ScenarioConfig
from .hvroc_opt import (
    HumanBaseline,
    ObjectiveWeights,
    OptimizationResult,
    human_baseline,
    optimize,
    resolve_preset,
)
from .lqg_automation import AutomationParams, AutomationPolicy, build_automation
from .lqs_human import HumanPolicy, SolverReport, solve_lqs
from .mc_oracle import EnsembleStats, simulate
from .model import (
    CostSpec,
    IDX_POS,
    IDX_REF,
    PlantModel,
    build_point_mass_plant,
    materialize_reference_cost,
)
from .moments import MomentTrajectory, position_stats, propagate_coupled, \
    propagate_human_alone, settling_time

AXES = ("x", "y")


@dataclass(frozen=True)
class MetricsRow:
    """One controller, one axis: the summary metrics of a reach."""

    controller: str
    axis: str
    cov_mid: float
    cov_end: float
    mean_err_end: float
    settling: int | None


@dataclass(frozen=True)
class ControllerRun:
    label: str
    automation: AutomationPolicy | None
    optimization: OptimizationResult | None
    trajectory: MomentTrajectory
    rows: tuple


@dataclass(frozen=True)
class ScenarioRuns:
    plant: PlantModel
    human: HumanPolicy
    human_report: SolverReport
    human_cost: CostSpec
    baseline: HumanBaseline
    runs: tuple  # ControllerRun, in requested order
    failures: tuple  # (label, message)


@dataclass(frozen=True)
class VerifyOutcome:
    label: str
    passed: bool
    max_var_rel_err: float
    mean_within_frac: float
    n_samples: int


def solve_scenario_human(config: ScenarioConfig):
    """Build the plant and solve the human policy for a scenario."""
    plant = build_point_mass_plant(config.task)
    Q_seq = materialize_reference_cost(config.human_q_weights,
                                       terminal_only=config.human_terminal_only,
                                       N=config.task.N)
    cost = CostSpec(Q_seq=Q_seq,
                    R=np.diag([config.human_r] * plant.m_H))
    human, report = solve_lqs(plant, cost)
    return plant, human, report, cost


def _hvroc_weights(label: str, config: ScenarioConfig,
                   baseline: HumanBaseline) -> ObjectiveWeights:
    preset = label.split("-", 1)[1]
    if config.hvroc_weights is not None and preset == config.hvroc_preset:
        return ObjectiveWeights(*config.hvroc_weights)
    return resolve_preset(preset, baseline, config.scalarization)


def build_controller(label: str, plant: PlantModel, human: HumanPolicy,
                     baseline: HumanBaseline, config: ScenarioConfig,
                     seed: int):
    """Assemble one controller: (automation policy, optimization result)."""
    if label == "human-alone":
        return None, None
    if label == "lqr-benchmark":
        params = AutomationParams(q_A=config.benchmark_q,
                                  r_A=(config.benchmark_r,) * plant.m_A)
        policy = build_automation(
            plant, params,
            observer_intensity=config.benchmark_observer_intensity)
        return policy, None
    if label in ("hvroc-highvar", "hvroc-lowvar"):
        weights = _hvroc_weights(label, config, baseline)
        result = optimize(
            plant, human, baseline, weights,
            init=AutomationParams(q_A=config.hvroc_init_q,
                                  r_A=config.hvroc_init_r),
            max_evals=config.optimizer_max_evals,
            restarts=config.optimizer_restarts,
            seed=seed,
            scalarization=config.scalarization,
            observer_intensity=config.hvroc_observer_intensity)
        return result.policy, result
    raise ValueError(f"unknown controller label {label!r}")


def metrics_rows(label: str, traj: MomentTrajectory, plant: PlantModel,
                 band_fraction: float) -> tuple:
    """Per-axis summary metrics at t = N//2 and t = N."""
    mid = plant.N // 2
    mid_stats = position_stats(traj, mid)
    end_stats = position_stats(traj, plant.N)
    p_ref = plant.x0_mean[list(IDX_REF)]
    rows = []
    for a, axis in enumerate(AXES):
        rows.append(MetricsRow(
            controller=label,
            axis=axis,
            cov_mid=float(mid_stats.cov[a, a]),
            cov_end=float(end_stats.cov[a, a]),
            mean_err_end=float(abs(end_stats.mean[a] - p_ref[a])),
            settling=settling_time(traj, p_ref[a],
                                   band_fraction=band_fraction, axis=a),
        ))
    return tuple(rows)


def run_scenario(config: ScenarioConfig, seed: int | None = None,
                 controllers=None) -> ScenarioRuns:
    """Solve the scenario and assemble every requested controller."""
    labels = tuple(controllers) if controllers is not None else config.controllers
    for label in labels:
        if label not in CONTROLLER_LABELS:
            raise ValueError(f"unknown controller label {label!r}")
    opt_seed = config.optimizer_seed if seed is None else seed
    plant, human, report, cost = solve_scenario_human(config)
    baseline = human_baseline(plant, human,
                              band_fraction=config.settling_band)
    runs = []
    failures = []
    for label in labels:
        try:
            automation, result = build_controller(
                label, plant, human, baseline, config, opt_seed)
            if automation is None:
                traj = baseline.trajectory
            else:
                traj = propagate_coupled(plant, human, automation)
            rows = metrics_rows(label, traj, plant, config.settling_band)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            failures.append((label, f"{type(exc).__name__}: {exc}"))
            continue
        runs.append(ControllerRun(label=label, automation=automation,
                                  optimization=result, trajectory=traj,
                                  rows=rows))
    return ScenarioRuns(plant=plant, human=human, human_report=report,
                        human_cost=cost, baseline=baseline,
                        runs=tuple(runs), failures=tuple(failures))


def fmt_float(value) -> str:
    """Shortest decimal that round-trips the float."""
    return repr(float(value))


def _settling_str(settling) -> str:
    return "none" if settling is None else str(int(settling))


def write_metrics_csv(rows, path: Path):
    lines = ["controller,axis,cov_mid,cov_end,mean_err_end,settling_t"]
    for row in rows:
        lines.append(",".join([
            row.controller, row.axis, fmt_float(row.cov_mid), fmt_float(row.cov_end),
            fmt_float(row.mean_err_end), _settling_str(row.settling)]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_trajectory_csv(traj: MomentTrajectory, path: Path):
    ix, iy = IDX_POS
    lines = ["t,E_px,E_py,cov_pxpx,cov_pypy,cov_pxpy"]
    for t in range(traj.N + 1):
        mean = traj.means[t]
        cov = traj.covs[t]
        lines.append(",".join([
            str(t), fmt_float(mean[ix]), fmt_float(mean[iy]), fmt_float(cov[ix, ix]),
            fmt_float(cov[iy, iy]), fmt_float(cov[ix, iy])]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_ensemble_csv(stats: EnsembleStats, path: Path):
    ix, iy = IDX_POS
    lines = ["t,E_px,E_py,cov_pxpx,cov_pypy,cov_pxpy"]
    for t in range(stats.N + 1):
        mean = stats.state_mean(t)
        cov = stats.state_cov(t)
        lines.append(",".join([
            str(t), fmt_float(mean[ix]), fmt_float(mean[iy]), fmt_float(cov[ix, ix]),
            fmt_float(cov[iy, iy]), fmt_float(cov[ix, iy])]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def format_metrics_table(rows) -> str:
    header = (f"{'controller':<15} {'axis':<4} {'cov_mid':>12} "
              f"{'cov_end':>12} {'err_end_mm':>10} {'settling':>8}")
    out = [header, "-" * len(header)]
    for row in rows:
        out.append(
            f"{row.controller:<15} {row.axis:<4} {row.cov_mid:>12.4e} "
            f"{row.cov_end:>12.4e} {1e3 * row.mean_err_end:>10.3f} "
            f"{_settling_str(row.settling):>8}")
    return "\n".join(out)


def run_report(config: ScenarioConfig, out_dir=None, seed: int | None = None,
               controllers=None):
    """Assemble controllers, write metrics.csv + trajectory CSVs.

    Returns (ScenarioRuns, table text).  Controller failures are
    collected in the result rather than raised, so one bad controller
    does not lose the remaining rows.
    """
    out = Path(out_dir if out_dir is not None else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scenario = run_scenario(config, seed=seed, controllers=controllers)
    all_rows = [row for run in scenario.runs for row in run.rows]
    write_metrics_csv(all_rows, out / "metrics.csv")
    for run in scenario.runs:
        write_trajectory_csv(run.trajectory, out / f"trajectory_{run.label}.csv")
    return scenario, format_metrics_table(all_rows)


def verify_controller(plant, human, run: ControllerRun, n_samples: int,
                      seed: int) -> VerifyOutcome:
    """Monte-Carlo check of one controller's analytic moments.

    Variance criterion: every stacked-covariance diagonal entry with
    analytic value > 1e-9 matches within 5% relative.  Mean criterion:
    at least 99% of (entry, t) pairs lie within 4 standard errors.
    """
    stats = simulate(plant, human, run.automation, n_samples=n_samples,
                     seed=seed)
    traj = run.trajectory
    an_var = np.array([np.diag(c) for c in traj.covs])
    mc_var = np.array([np.diag(c) for c in stats.covs])
    mask = an_var > 1e-9
    if mask.any():
        var_rel = float(np.max(np.abs(mc_var[mask] - an_var[mask])
                               / an_var[mask]))
    else:
        var_rel = 0.0
    stderr = np.maximum(stats.stderr_mean, 1e-12)
    z = np.abs(stats.means - traj.means) / stderr
    within = float((z < 4.0).mean())
    passed = var_rel <= 0.05 and within >= 0.99
    return VerifyOutcome(label=run.label, passed=passed,
                         max_var_rel_err=var_rel, mean_within_frac=within,
                         n_samples=n_samples)


def run_verify(config: ScenarioConfig, out_dir=None, seed: int | None = None,
               samples: int | None = None, controllers=None, scenario=None):
    """Monte-Carlo oracle pass over every requested controller.

    Writes verify_report.txt; returns (ScenarioRuns, outcomes, passed).
    Pass a ScenarioRuns as `scenario` to reuse already-built controllers.
    """
    out = Path(out_dir if out_dir is not None else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_samples = config.mc_samples if samples is None else samples
    mc_seed = config.mc_seed if seed is None else seed
    if scenario is None:
        scenario = run_scenario(config, seed=seed, controllers=controllers)
    outcomes = []
    lines = []
    t0 = time.perf_counter()
    for run in scenario.runs:
        outcome = verify_controller(scenario.plant, scenario.human, run,
                                    n_samples, mc_seed)
        outcomes.append(outcome)
        lines.append(
            f"{outcome.label}: {'PASS' if outcome.passed else 'FAIL'} "
            f"(max variance rel err {outcome.max_var_rel_err:.4f}, "
            f"means within 4 stderr {100 * outcome.mean_within_frac:.2f}%, "
            f"{outcome.n_samples} samples)")
    for label, message in scenario.failures:
        lines.append(f"{label}: ERROR ({message})")
    passed = (bool(outcomes) and all(o.passed for o in outcomes)
              and not scenario.failures)
    lines.append(f"overall: {'PASS' if passed else 'FAIL'} "
                 f"({time.perf_counter() - t0:.1f}s)")
    (out / "verify_report.txt").write_text("\n".join(lines) + "\n",
                                           encoding="utf-8")
    return scenario, tuple(outcomes), passed


def run_simulate(config: ScenarioConfig, out_dir=None, seed: int | None = None,
                 samples: int | None = None, controllers=None):
    """Sample every requested controller; write ensemble trajectory CSVs."""
    out = Path(out_dir if out_dir is not None else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_samples = config.mc_samples if samples is None else samples
    mc_seed = config.mc_seed if seed is None else seed
    scenario = run_scenario(config, seed=seed, controllers=controllers)
    for run in scenario.runs:
        stats = simulate(scenario.plant, scenario.human, run.automation,
                         n_samples=n_samples, seed=mc_seed)
        write_ensemble_csv(stats, out / f"trajectory_mc_{run.label}.csv")
    return scenario
