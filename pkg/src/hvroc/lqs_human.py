"""Human gain-schedule solver under signal-dependent noise.

The human acts through u_H[t] = -L_H[t] xhat_H[t] where xhat_H is a
filtered state estimate, xhat_H[t+1] = A xhat_H + B_H u_H +
K_H[t](y_H - H_H xhat_H).  With control-dependent noise (C terms) and
state-dependent observation noise (D terms) the optimal feedback and
filter gains are coupled, so neither a Riccati sweep nor a Kalman sweep
alone is sufficient.  This module computes both schedules by
alternating a backward control pass and a forward filter pass until the
gains stop changing.

Without C and D terms both passes decouple (certainty equivalence) and
the result equals the classical finite-horizon LQG solution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import CostSpec, PlantModel


class SolverDegenerateError(RuntimeError):
    """Raised when a matrix that must be positive definite is not."""


@dataclass(frozen=True)
class HumanPolicy:
    """Feedback gains L_seq[0..N-1] and filter gains K_seq[0..N-1]."""

    L_seq: tuple
    K_seq: tuple

    def __post_init__(self):
        if len(self.L_seq) != len(self.K_seq):
            raise ValueError("gain schedules must have equal length")
        for M in (*self.L_seq, *self.K_seq):
            if not np.isfinite(M).all():
                raise ValueError("gain schedules must be finite")

    @property
    def N(self):
        return len(self.L_seq)


@dataclass(frozen=True)
class SolverReport:
    iterations: int
    converged: bool
    gain_delta: float
    expected_cost: float
    regularized: bool = False


def control_pass(plant: PlantModel, cost: CostSpec, K_seq):
    """Backward sweep for the feedback gains given a filter schedule.

    Two cost-to-go matrices are propagated: Z_x weighs the true state
    and Z_e the estimation error.  The gain at step t solves

        (R + B_H' Z_x B_H + sum_i C_i'(Z_x + Z_e) C_i) L = B_H' Z_x A

    where the left matrix must be positive definite.  Returns the gain
    schedule and the expected cost of running the policy from the
    plant's initial condition.
    """
    A, B, H = plant.A, plant.B_H, plant.H_H
    N, n = plant.N, plant.n
    W_xi, W_om = plant.Omega_xi, plant.Omega_omega
    Zx = cost.Q_seq[N].copy()
    Ze = np.zeros((n, n))
    Ls = [None] * N
    const = 0.0
    for t in range(N - 1, -1, -1):
        G = cost.R + B.T @ Zx @ B
        for Ci in plant.C:
            G = G + Ci.T @ (Zx + Ze) @ Ci
        try:
            np.linalg.cholesky(G)
        except np.linalg.LinAlgError:
            raise SolverDegenerateError(
                f"control inner matrix not positive definite at step {t}"
            )
        L = np.linalg.solve(G, B.T @ Zx @ A)
        K = K_seq[t]
        const += np.trace(Zx @ W_xi) + np.trace(Ze @ (W_xi + K @ W_om @ K.T))
        Zx_next = cost.Q_seq[t] + A.T @ Zx @ (A - B @ L)
        for Di in plant.D:
            Zx_next = Zx_next + Di.T @ K.T @ Ze @ K @ Di
        Ze_next = A.T @ Zx @ B @ L + (A - K @ H).T @ Ze @ (A - K @ H)
        Zx = 0.5 * (Zx_next + Zx_next.T)
        Ze = 0.5 * (Ze_next + Ze_next.T)
        Ls[t] = L
    x0 = plant.x0_mean
    expected_cost = float(
        x0 @ Zx @ x0 + np.trace((Zx + Ze) @ plant.Omega0) + const
    )
    return tuple(Ls), expected_cost


def filter_pass(plant: PlantModel, L_seq, regularization=1e-12):
    """Forward sweep for the filter gains given a feedback schedule.

    Propagates the estimation-error covariance P_e, the uncentered
    second moment of the estimate P_xhat and their cross moment, which
    feed the control- and state-dependent noise contributions.  The
    innovation matrix is regularized by lambda*I when it is singular
    (flagged in the second return value).
    """
    A, B, H = plant.A, plant.B_H, plant.H_H
    N, n = plant.N, plant.n
    W_xi, W_om = plant.Omega_xi, plant.Omega_omega
    Pe = plant.Omega0.copy()
    Px = np.outer(plant.x0_mean, plant.x0_mean)
    Pxe = np.zeros((n, n))
    Ks = [None] * N
    regularized = False
    for t in range(N):
        L = L_seq[t]
        Mx = Pe + Px + Pxe + Pxe.T
        S = H @ Pe @ H.T + W_om
        for Di in plant.D:
            S = S + Di @ Mx @ Di.T
        S = 0.5 * (S + S.T)
        try:
            K = A @ Pe @ H.T @ np.linalg.inv(S)
        except np.linalg.LinAlgError:
            regularized = True
            S = S + regularization * np.eye(S.shape[0])
            K = A @ Pe @ H.T @ np.linalg.inv(S)
        AK = A - K @ H
        AL = A - B @ L
        KWK = K @ W_om @ K.T
        KDK = np.zeros((n, n))
        for Di in plant.D:
            KDK = KDK + K @ Di @ Mx @ Di.T @ K.T
        CLC = np.zeros((n, n))
        for Ci in plant.C:
            CLC = CLC + Ci @ L @ Px @ L.T @ Ci.T
        Pe_next = AK @ Pe @ AK.T + W_xi + CLC + KWK + KDK
        Px_next = (
            AL @ Px @ AL.T
            + AL @ Pxe @ H.T @ K.T
            + K @ H @ Pxe.T @ AL.T
            + K @ H @ Pe @ H.T @ K.T
            + KWK
            + KDK
        )
        Pxe_next = AL @ Pxe @ AK.T + K @ H @ Pe @ AK.T - KWK - KDK
        Pe = 0.5 * (Pe_next + Pe_next.T)
        Px = 0.5 * (Px_next + Px_next.T)
        Pxe = Pxe_next
        Ks[t] = K
    return tuple(Ks), regularized


def solve_lqs(plant: PlantModel, cost: CostSpec, max_iter=500, tol=1e-9):
    """Alternate control and filter passes to a joint fixed point.

    The first filter pass runs with zero feedback gains, giving the
    classical Kalman schedule as a warm start.  Convergence is the
    maximum absolute change over all gain entries between sweeps.
    Non-convergence is reported through the flag, not raised.
    """
    N = plant.N
    L_prev = tuple(np.zeros((plant.m_H, plant.n)) for _ in range(N))
    K_seq, regularized = filter_pass(plant, L_prev)
    delta = np.inf
    expected_cost = np.nan
    iterations = 0
    for it in range(1, max_iter + 1):
        iterations = it
        L_seq, expected_cost = control_pass(plant, cost, K_seq)
        K_next, reg = filter_pass(plant, L_seq)
        regularized = regularized or reg
        delta = max(
            max(abs(l - lp).max() for l, lp in zip(L_seq, L_prev)),
            max(abs(k - kp).max() for k, kp in zip(K_next, K_seq)),
        )
        K_seq, L_prev = K_next, L_seq
        if delta <= tol:
            break
    policy = HumanPolicy(L_seq=L_prev, K_seq=K_seq)
    report = SolverReport(
        iterations=iterations,
        converged=bool(delta <= tol),
        gain_delta=float(delta),
        expected_cost=expected_cost,
        regularized=regularized,
    )
    return policy, report
