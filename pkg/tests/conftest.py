"""Shared fixtures and independent reference implementations.

The classical_* helpers below are deliberately separate, textbook
implementations of the finite-horizon LQR and Kalman recursions; the
solver tests compare package output against them rather than against
the package's own code paths.
"""

import time
from dataclasses import replace
from types import SimpleNamespace

import numpy as np
import pytest

from hvroc import (
    AutomationPolicy,
    PlantModel,
    build_point_mass_plant,
    human_baseline,
    load_bundled_config,
    propagate_coupled,
    propagate_human_alone,
)
from hvroc.bench import (
    ControllerRun,
    build_controller,
    metrics_rows,
    solve_scenario_human,
)
from hvroc.lqs_human import HumanPolicy


@pytest.fixture(scope="session")
def ex1_config():
    return load_bundled_config("example1")


@pytest.fixture(scope="session")
def ex2_config():
    return load_bundled_config("example2")


@pytest.fixture(scope="session")
def ex1_human(ex1_config):
    """(plant, human policy, solver report, cost) for the hand reach."""
    return solve_scenario_human(ex1_config)


@pytest.fixture(scope="session")
def ex2_human(ex2_config):
    return solve_scenario_human(ex2_config)


def timed_scenario(config):
    """Build every configured controller, recording per-label wall time.

    Mirrors bench.run_scenario but keeps the runs in a dict and times
    each controller build (the optimizations dominate), so acceptance
    tests can check both metrics and runtime budgets from one build.
    """
    plant, human, report, cost = solve_scenario_human(config)
    baseline = human_baseline(plant, human, band_fraction=config.settling_band)
    runs = {}
    times = {}
    for label in config.controllers:
        t0 = time.perf_counter()
        automation, result = build_controller(
            label, plant, human, baseline, config, config.optimizer_seed)
        if automation is None:
            traj = baseline.trajectory
        else:
            traj = propagate_coupled(plant, human, automation)
        times[label] = time.perf_counter() - t0
        runs[label] = ControllerRun(
            label=label, automation=automation, optimization=result,
            trajectory=traj,
            rows=metrics_rows(label, traj, plant, config.settling_band))
    return SimpleNamespace(plant=plant, human=human, report=report,
                           cost=cost, baseline=baseline, runs=runs,
                           times=times)


@pytest.fixture(scope="session")
def ex1_scenario(ex1_config):
    """All four example-1 controllers (runs the two optimizations once)."""
    return timed_scenario(ex1_config)


@pytest.fixture(scope="session")
def ex2_scenario(ex2_config):
    return timed_scenario(ex2_config)


def classical_lqr(plant, Q_seq, R, B):
    """Textbook backward Riccati pass; returns the gain schedule."""
    Z = np.asarray(Q_seq[plant.N], dtype=float).copy()
    A = plant.A
    gains = [None] * plant.N
    for t in reversed(range(plant.N)):
        G = R + B.T @ Z @ B
        L = np.linalg.solve(G, B.T @ Z @ A)
        Z = Q_seq[t] + A.T @ Z @ (A - B @ L)
        Z = 0.5 * (Z + Z.T)
        gains[t] = L
    return tuple(gains)


def classical_kalman(plant):
    """Textbook predictive Kalman recursion for the human's channel."""
    A, H = plant.A, plant.H_H
    W, V = plant.Omega_xi, plant.Omega_omega
    P = plant.Omega0.copy()
    gains = []
    for _ in range(plant.N):
        S = H @ P @ H.T + V
        K = A @ P @ H.T @ np.linalg.inv(S)
        P = A @ P @ A.T + W - K @ S @ K.T
        P = 0.5 * (P + P.T)
        gains.append(K)
    return tuple(gains)


def random_stable_plant(rng):
    """Small random plant with multiplicative noise on both channels."""
    n = int(rng.integers(3, 7))
    m_h = int(rng.integers(1, 3))
    m_a = int(rng.integers(1, 3))
    r_h = int(rng.integers(1, n + 1))
    r_a = int(rng.integers(1, n + 1))
    A = rng.normal(size=(n, n))
    radius = max(np.abs(np.linalg.eigvals(A)))
    A *= 0.9 / max(radius, 1e-9)
    F0 = 0.3 * rng.normal(size=(n, n))
    plant = PlantModel(
        A=A,
        B_H=rng.normal(size=(n, m_h)),
        B_A=rng.normal(size=(n, m_a)),
        H_H=rng.normal(size=(r_h, n)),
        H_A=rng.normal(size=(r_a, n)),
        C=tuple(0.2 * rng.normal(size=(n, m_h))
                for _ in range(rng.integers(0, 3))),
        D=tuple(0.2 * rng.normal(size=(r_h, n))
                for _ in range(rng.integers(0, 3))),
        Sigma_xi=0.1 * rng.normal(size=(n, n)),
        Sigma_omega=0.1 * rng.normal(size=(r_h, r_h)),
        x0_mean=rng.normal(size=n),
        Omega0=F0 @ F0.T,
        N=int(rng.integers(3, 9)),
        dt=0.01,
    )
    human = HumanPolicy(
        L_seq=tuple(0.3 * rng.normal(size=(m_h, n)) for _ in range(plant.N)),
        K_seq=tuple(0.3 * rng.normal(size=(n, r_h)) for _ in range(plant.N)),
    )
    return plant, human


def zero_automation(plant):
    zl = np.zeros((plant.m_A, plant.n))
    zk = np.zeros((plant.n, plant.r_A))
    return AutomationPolicy(L_seq=(zl,) * plant.N, K_seq=(zk,) * plant.N)


def zero_automation_max_deviation(n_plants, seed=0):
    """Worst blockwise gap between coupled-with-zero-gains and human-alone.

    The gap is measured relative to the magnitude of the moments involved
    (floored at 1.0) so the tolerance reads as float precision rather than
    an absolute unit that would tighten or loosen with state scale.  Also
    returns the most negative covariance eigenvalue seen, so the same
    sweep doubles as a PSD fuzz check.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    min_eig = np.inf
    for _ in range(n_plants):
        plant, human = random_stable_plant(rng)
        alone = propagate_human_alone(plant, human)
        coupled = propagate_coupled(plant, human, zero_automation(plant))
        d = 2 * plant.n
        mean_scale = max(1.0, np.max(np.abs(alone.means)))
        cov_scale = max(1.0, np.max(np.abs(alone.covs)))
        worst = max(
            worst,
            np.max(np.abs(coupled.means[:, :d] - alone.means)) / mean_scale,
            np.max(np.abs(coupled.covs[:, :d, :d] - alone.covs)) / cov_scale,
        )
        for traj in (alone, coupled):
            for cov in traj.covs:
                min_eig = min(min_eig, np.linalg.eigvalsh(cov).min())
    return worst, min_eig


def no_multiplicative_noise(plant):
    return replace(plant, C=(), D=())


@pytest.fixture(scope="session")
def small_task_plant():
    """Short-horizon variant of the reach plant for fast solver tests."""
    cfg = load_bundled_config("example1")
    task = replace(cfg.task, N=12)
    return build_point_mass_plant(task)
