"""Monte-Carlo trajectory sampling for the stochastic closed loops.

Provides an independent statistical check of the analytic moment
recursions: trajectories of the full nonlinear-in-noise system (the
multiplicative terms make the covariance state-dependent) are sampled
and reduced to ensemble means and covariances of the stacked state
[x; xhat_H] or [x; xhat_H; xhat_A].

Randomness is organized for parallel determinism.  Every trajectory j
owns a counter-based Philox stream derived from (seed, j) and draws its
entire noise tape in one documented order:

    initial-state normals (n), then per step t = 0..N-1:
    alpha_t (cols of Sigma_xi), beta_t (cols of Sigma_omega),
    eps_t (len(C)), epsilon_t (len(D)),

so the ensemble statistics are a pure function of (inputs, seed) no
matter how trajectories are scheduled or chunked internally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lqg_automation import AutomationPolicy
from .lqs_human import HumanPolicy
from .model import CostSpec, PlantModel

_CHUNK = 2048


@dataclass(frozen=True)
class EnsembleStats:
    """Sample moments of the stacked closed-loop state, t = 0..N."""

    layout: str  # "human_alone" or "coupled"
    n: int
    n_samples: int
    means: np.ndarray  # (N+1, stacked_dim)
    covs: np.ndarray  # (N+1, stacked_dim, stacked_dim), ddof=1
    stderr_mean: np.ndarray  # (N+1, stacked_dim)

    def __post_init__(self):
        if self.n_samples < 2:
            raise ValueError("need at least 2 samples for a covariance")

    @property
    def N(self):
        return self.means.shape[0] - 1

    def state_mean(self, t):
        return self.means[t, : self.n]

    def state_cov(self, t):
        return self.covs[t, : self.n, : self.n]


def _psd_factor(M):
    """Factor F with F F' = M for a PSD matrix (eigh-based, clips tiny
    negative eigenvalues)."""
    w, V = np.linalg.eigh(np.asarray(M, dtype=float))
    return V * np.sqrt(np.clip(w, 0.0, None))


def _trajectory_tape(seed, index, count):
    """The full standard-normal tape of one trajectory."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(ss)).standard_normal(count)


def _ensemble(plant: PlantModel, human: HumanPolicy,
              automation: AutomationPolicy | None,
              n_samples: int, seed: int, cost: CostSpec | None):
    A, B_H, B_A = plant.A, plant.B_H, plant.B_A
    H, H_A = plant.H_H, plant.H_A
    N, n = plant.N, plant.n
    p = plant.Sigma_xi.shape[1]
    q = plant.Sigma_omega.shape[1]
    n_c, n_d = len(plant.C), len(plant.D)
    blocks = 2 if automation is None else 3
    dim = blocks * n
    per_step = p + q + n_c + n_d
    tape_len = n + N * per_step
    F0 = _psd_factor(plant.Omega0)

    sums = np.zeros((N + 1, dim))
    sumsq = np.zeros((N + 1, dim, dim))
    cost_sum = 0.0

    for lo in range(0, n_samples, _CHUNK):
        hi = min(lo + _CHUNK, n_samples)
        tapes = np.stack([_trajectory_tape(seed, j, tape_len)
                          for j in range(lo, hi)])
        S = hi - lo
        z0 = tapes[:, :n]
        steps = tapes[:, n:].reshape(S, N, per_step)
        alpha = steps[:, :, :p]
        beta = steps[:, :, p:p + q]
        eps_c = steps[:, :, p + q:p + q + n_c]
        eps_d = steps[:, :, p + q + n_c:]

        X = plant.x0_mean + z0 @ F0.T
        XH = np.tile(plant.x0_mean, (S, 1))
        XA = None if automation is None else np.tile(plant.x0_mean, (S, 1))
        chunk_cost = np.zeros(S)
        for t in range(N + 1):
            Z = np.hstack([X, XH] if XA is None else [X, XH, XA])
            sums[t] += Z.sum(axis=0)
            sumsq[t] += Z.T @ Z
            if t == N:
                if cost is not None:
                    chunk_cost += np.einsum(
                        "ij,ij->i", X @ cost.Q_seq[N], X)
                break
            L, K = human.L_seq[t], human.K_seq[t]
            u_H = -(XH @ L.T)
            if cost is not None:
                chunk_cost += np.einsum("ij,ij->i", X @ cost.Q_seq[t], X)
                chunk_cost += np.einsum("ij,ij->i", u_H @ cost.R, u_H)
            y = X @ H.T + beta[:, t] @ plant.Sigma_omega.T
            for i, Di in enumerate(plant.D):
                y += eps_d[:, t, i:i + 1] * (X @ Di.T)
            X_next = (X @ A.T + u_H @ B_H.T
                      + alpha[:, t] @ plant.Sigma_xi.T)
            for i, Ci in enumerate(plant.C):
                X_next += eps_c[:, t, i:i + 1] * (u_H @ Ci.T)
            XH = XH @ A.T + u_H @ B_H.T + (y - XH @ H.T) @ K.T
            if XA is not None:
                L_A = automation.L_seq[t]
                K_A = automation.K_seq[t]
                u_A = -(XA @ L_A.T)
                X_next += u_A @ B_A.T
                XA = (XA @ A.T + u_A @ B_A.T
                      + (X @ H_A.T - XA @ H_A.T) @ K_A.T)
            X = X_next
        cost_sum += chunk_cost.sum()

    means = sums / n_samples
    covs = np.empty_like(sumsq)
    for t in range(N + 1):
        centered = sumsq[t] - n_samples * np.outer(means[t], means[t])
        covs[t] = centered / (n_samples - 1)
        covs[t] = 0.5 * (covs[t] + covs[t].T)
    if not (np.isfinite(means).all() and np.isfinite(covs).all()):
        raise FloatingPointError(
            "sampled trajectories diverged to non-finite values")
    stderr = np.sqrt(np.maximum(
        np.diagonal(covs, axis1=1, axis2=2), 0.0) / n_samples)
    layout = "human_alone" if automation is None else "coupled"
    stats = EnsembleStats(layout=layout, n=n, n_samples=n_samples,
                          means=means, covs=covs, stderr_mean=stderr)
    return stats, cost_sum / n_samples


def simulate(plant: PlantModel, human: HumanPolicy,
             automation: AutomationPolicy | None = None,
             n_samples: int = 20000, seed: int = 0) -> EnsembleStats:
    """Sample closed-loop trajectories and return ensemble moments.

    With automation None the human acts alone; otherwise the coupled
    loop is sampled, the automation correcting on the noiseless output
    y_A = H_A x.  Identical inputs and seed give bit-identical output.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    _check_horizons(plant, human, automation)
    stats, _ = _ensemble(plant, human, automation, n_samples, seed, None)
    return stats


def sample_cost(plant: PlantModel, human: HumanPolicy, cost: CostSpec,
                n_samples: int = 20000, seed: int = 0) -> float:
    """Average realized quadratic cost of the human-alone loop.

    Empirical counterpart of the solver's expected cost: mean over
    trajectories of sum_t (x' Q_t x + u_H' R u_H) + x_N' Q_N x_N.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    _check_horizons(plant, human, None)
    _, mean_cost = _ensemble(plant, human, None, n_samples, seed, cost)
    return float(mean_cost)


def _check_horizons(plant, human, automation):
    if human.N != plant.N:
        raise ValueError("policy horizon does not match plant horizon")
    if automation is not None and automation.N != plant.N:
        raise ValueError("automation horizon does not match plant horizon")
