"""Exact moment propagation of the closed loops."""

import numpy as np
import pytest

from hvroc import (
    IDX_POS,
    IDX_REF,
    MomentTrajectory,
    position_stats,
    propagate_coupled,
    propagate_human_alone,
    reference_error,
    settling_time,
)

from conftest import zero_automation, zero_automation_max_deviation


def test_human_alone_layout(ex1_human):
    plant, human, _, _ = ex1_human
    traj = propagate_human_alone(plant, human)
    assert traj.layout == "human_alone"
    assert traj.N == plant.N
    assert traj.stacked_dim == 2 * plant.n
    assert traj.means.shape == (plant.N + 1, 2 * plant.n)
    assert traj.covs.shape == (plant.N + 1, 2 * plant.n, 2 * plant.n)
    # exact initial knowledge: state and estimate start together
    np.testing.assert_allclose(traj.means[0, : plant.n], plant.x0_mean)
    np.testing.assert_allclose(traj.means[0, plant.n :], plant.x0_mean)
    np.testing.assert_allclose(traj.covs[0], 0.0, atol=1e-300)


def test_coupled_layout(ex1_scenario):
    run = ex1_scenario.runs["lqr-benchmark"]
    plant = ex1_scenario.plant
    traj = run.trajectory
    assert traj.layout == "coupled"
    assert traj.stacked_dim == 3 * plant.n
    assert traj.means.shape == (plant.N + 1, 3 * plant.n)


def test_covariances_symmetric_and_psd(ex1_human):
    plant, human, _, _ = ex1_human
    traj = propagate_human_alone(plant, human)
    for cov in traj.covs:
        np.testing.assert_allclose(cov, cov.T, rtol=0, atol=1e-14)
        assert np.linalg.eigvalsh(cov).min() >= -1e-9


def test_zero_automation_reduces_to_human_alone():
    worst, min_eig = zero_automation_max_deviation(100, seed=2026)
    assert worst <= 1e-12
    assert min_eig >= -1e-9


def test_horizon_mismatch_rejected(ex1_human):
    plant, human, _, _ = ex1_human
    short = zero_automation(plant)
    short = type(short)(L_seq=short.L_seq[:-1], K_seq=short.K_seq[:-1])
    with pytest.raises(ValueError):
        propagate_coupled(plant, human, short)


def test_position_stats(ex1_human):
    plant, human, _, _ = ex1_human
    traj = propagate_human_alone(plant, human)
    stats = position_stats(traj, plant.N)
    np.testing.assert_allclose(stats.mean,
                               traj.state_mean(plant.N)[list(IDX_POS)])
    cov = traj.state_cov(plant.N)
    np.testing.assert_allclose(stats.cov,
                               cov[np.ix_(IDX_POS, IDX_POS)])
    assert stats.cov.shape == (2, 2)
    # symmetric task: the two axes behave identically
    assert stats.mean[0] == pytest.approx(stats.mean[1], rel=1e-9)
    assert stats.cov[0, 0] == pytest.approx(stats.cov[1, 1], rel=1e-9)


def _synthetic_trajectory(px_path):
    """Human-alone-shaped trajectory with a prescribed x-position mean."""
    steps = len(px_path)
    n = 10
    means = np.zeros((steps, 2 * n))
    means[:, IDX_POS[0]] = px_path
    means[:, IDX_REF[0]] = 0.1
    covs = np.zeros((steps, 2 * n, 2 * n))
    return MomentTrajectory(layout="human_alone", n=n, means=means, covs=covs)


def test_settling_time_first_entry_that_stays():
    ref = 0.1
    path = [0.0, 0.02, 0.0996, 0.085, 0.097, 0.1, 0.0999]
    traj = _synthetic_trajectory(path)
    # enters the 5% band at t=2 but leaves at t=3; settles from t=4 on
    assert settling_time(traj, ref, band_fraction=0.05, axis=0) == 4


def test_settling_time_never():
    path = [0.0, 0.2, 0.2, 0.2]
    traj = _synthetic_trajectory(path)
    assert settling_time(traj, 0.1, band_fraction=0.05, axis=0) is None


def test_settling_time_zero_reference_rejected():
    traj = _synthetic_trajectory([0.0, 0.1])
    with pytest.raises(ValueError):
        settling_time(traj, 0.0, band_fraction=0.05, axis=0)


def test_reference_error_axes(ex1_human):
    plant, human, _, _ = ex1_human
    traj = propagate_human_alone(plant, human)
    end = traj.state_mean(plant.N)
    ex = abs(end[IDX_POS[0]] - end[IDX_REF[0]])
    ey = abs(end[IDX_POS[1]] - end[IDX_REF[1]])
    assert reference_error(traj, axis=0) == pytest.approx(ex, rel=1e-12)
    assert reference_error(traj, axis=1) == pytest.approx(ey, rel=1e-12)
    assert reference_error(traj) == pytest.approx(np.hypot(ex, ey), rel=1e-12)
