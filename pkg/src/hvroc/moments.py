"""Exact mean and covariance propagation for the closed loops.

Both the human-alone loop and the coupled human-machine loop are linear
in the stacked state once the gain schedules are fixed, so their first
two moments obey exact forward recursions: the stacked mean evolves
through the closed-loop matrix, and the stacked covariance picks up
three additive terms per step (additive process noise, filter-injected
observation noise, and the signal-dependent contributions, whose
covariances depend on the current uncentered second moments).

Stacked layouts:

    human-alone:  [x; xhat_H]           (2n)
    coupled:      [x; xhat_H; xhat_A]   (3n)

Estimates start at the initial mean, so the initial stacked covariance
has Omega0 in the x block and zeros elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lqg_automation import AutomationPolicy
from .lqs_human import HumanPolicy
from .model import IDX_POS, IDX_REF, PlantModel


@dataclass(frozen=True)
class MomentTrajectory:
    """Means and covariances of a stacked closed-loop state, t = 0..N."""

    layout: str  # "human_alone" or "coupled"
    n: int
    means: np.ndarray  # (N+1, stacked_dim)
    covs: np.ndarray  # (N+1, stacked_dim, stacked_dim)

    @property
    def N(self):
        return self.means.shape[0] - 1

    @property
    def stacked_dim(self):
        return self.means.shape[1]

    def state_mean(self, t):
        """Mean of the true plant state x at step t."""
        return self.means[t, : self.n]

    def state_cov(self, t):
        """Covariance of the true plant state x at step t."""
        return self.covs[t, : self.n, : self.n]


@dataclass(frozen=True)
class PositionStats:
    mean: np.ndarray  # 2-vector
    cov: np.ndarray  # 2x2

    def __post_init__(self):
        if not np.allclose(self.cov, self.cov.T):
            raise ValueError("position covariance must be symmetric")


def _signal_dependent_cov(mats, gain, second_moment):
    """sum_i M_i G S G' M_i' for the C/D noise contributions."""
    out = None
    for Mi in mats:
        term = Mi @ gain @ second_moment @ gain.T @ Mi.T
        out = term if out is None else out + term
    return out


def _propagate(plant: PlantModel, human: HumanPolicy,
               automation: AutomationPolicy | None) -> MomentTrajectory:
    A, B_H, B_A = plant.A, plant.B_H, plant.B_A
    H, H_A = plant.H_H, plant.H_A
    N, n = plant.N, plant.n
    W_xi, W_om = plant.Omega_xi, plant.Omega_omega
    blocks = 2 if automation is None else 3
    dim = blocks * n
    mean = np.concatenate([plant.x0_mean] * blocks)
    cov = np.zeros((dim, dim))
    cov[:n, :n] = plant.Omega0
    means = np.empty((N + 1, dim))
    covs = np.empty((N + 1, dim, dim))
    means[0] = mean
    covs[0] = cov
    sl_x = slice(0, n)
    sl_h = slice(n, 2 * n)
    sl_a = slice(2 * n, 3 * n)
    for t in range(N):
        L, K = human.L_seq[t], human.K_seq[t]
        T = np.zeros((dim, dim))
        T[sl_x, sl_x] = A
        T[sl_x, sl_h] = -B_H @ L
        T[sl_h, sl_x] = K @ H
        T[sl_h, sl_h] = A - B_H @ L - K @ H
        if automation is not None:
            L_A, K_A = automation.L_seq[t], automation.K_seq[t]
            T[sl_x, sl_a] = -B_A @ L_A
            T[sl_a, sl_x] = K_A @ H_A
            T[sl_a, sl_a] = A - B_A @ L_A - K_A @ H_A
        # uncentered second moments feeding the signal-dependent noise
        m_h = mean[sl_h]
        M_hat = cov[sl_h, sl_h] + np.outer(m_h, m_h)
        m_x = mean[sl_x]
        M_x = cov[sl_x, sl_x] + np.outer(m_x, m_x)
        add = np.zeros((dim, dim))
        add[sl_x, sl_x] = W_xi
        if plant.C:
            add[sl_x, sl_x] += _signal_dependent_cov(plant.C, L, M_hat)
        add[sl_h, sl_h] = K @ W_om @ K.T
        if plant.D:
            add[sl_h, sl_h] += _signal_dependent_cov(
                [K @ Di for Di in plant.D], np.eye(n), M_x
            )
        cov = T @ cov @ T.T + add
        cov = 0.5 * (cov + cov.T)
        mean = T @ mean
        means[t + 1] = mean
        covs[t + 1] = cov
    layout = "human_alone" if automation is None else "coupled"
    return MomentTrajectory(layout=layout, n=n, means=means, covs=covs)


def propagate_human_alone(plant: PlantModel, human: HumanPolicy) -> MomentTrajectory:
    """Propagate the 2n-stacked moments of the human-alone loop."""
    if human.N != plant.N:
        raise ValueError("policy horizon does not match plant horizon")
    return _propagate(plant, human, None)


def propagate_coupled(plant: PlantModel, human: HumanPolicy,
                      automation: AutomationPolicy) -> MomentTrajectory:
    """Propagate the 3n-stacked moments of the coupled loop.

    The two estimators run independent corrections: the human filter
    sees only y_H, the automation observer only y_A.  Neither block
    models the other agent's input, so the off-blocks of the transition
    matrix between the estimators are zero.
    """
    if human.N != plant.N or automation.N != plant.N:
        raise ValueError("policy horizon does not match plant horizon")
    return _propagate(plant, human, automation)


def position_stats(traj: MomentTrajectory, t: int) -> PositionStats:
    """Planar position mean and covariance at step t."""
    if not 0 <= t <= traj.N:
        raise IndexError(f"time index {t} outside 0..{traj.N}")
    idx = list(IDX_POS)
    mean = traj.state_mean(t)[idx]
    cov = traj.state_cov(t)[np.ix_(idx, idx)]
    return PositionStats(mean=mean, cov=0.5 * (cov + cov.T))


def settling_time(traj: MomentTrajectory, p_ref, band_fraction=0.05,
                  axis=0):
    """First step from which the mean position stays inside the band.

    Returns the smallest t such that |E{p[tau]} - p_ref| stays strictly
    below band_fraction*|p_ref| for every tau in [t, N] on the given
    axis, or None when even the final step lies outside.
    """
    ref = float(np.asarray(p_ref, dtype=float).reshape(-1)[axis]
                if np.ndim(p_ref) else p_ref)
    if ref == 0.0:
        raise ValueError("settling band undefined for zero reference")
    band = band_fraction * abs(ref)
    pos = traj.means[:, IDX_POS[axis]]
    inside = np.abs(pos - ref) < band
    for t in range(traj.N + 1):
        if inside[t:].all():
            return t
    return None


def reference_error(traj: MomentTrajectory, axis=None) -> float:
    """|E{p_N} - p_ref| at the final step.

    With axis None the Euclidean norm over both axes is returned,
    otherwise the absolute per-axis error.
    """
    mean = traj.state_mean(traj.N)
    err = mean[list(IDX_POS)] - mean[list(IDX_REF)]
    if axis is None:
        return float(np.linalg.norm(err))
    return float(abs(err[axis]))
