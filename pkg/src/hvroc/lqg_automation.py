"""Automation gain schedules: finite-horizon LQR and observer sweeps.

The automation is deterministic from its own point of view: it solves a
standard linear-quadratic regulator for its feedback gains and runs a
linear observer for its state estimate,

    u_A[t]      = -L_A[t] xhat_A[t]
    xhat_A[t+1] = A xhat_A + B_A u_A + K_A[t](y_A - H_A xhat_A).

Because y_A = H_A x carries no measurement noise, the observer design
model decides how strongly the automation reacts to the unmodeled human
input.  With the plant's own additive process noise (zero in the
bundled tasks) the error covariance stays at zero and K_A is zero: the
automation acts purely feedforward.  Supplying a nonzero design
process-noise covariance (for instance scaled B_H B_H', treating the
human channel as an unknown disturbance) plus a measurement-noise floor
yields an observer that tracks the human's effect on the plant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import PlantModel, materialize_reference_cost


class DegenerateCostError(RuntimeError):
    """Raised when the regulator's inner matrix is not positive definite."""


@dataclass(frozen=True)
class AutomationParams:
    """Cost weights the automation is tuned over.

    q_A weighs the six observed physical states (positions, velocities,
    forces); the two activation states stay unweighted because the
    automation has no authority over them.  r_A weighs the automation
    inputs.
    """

    q_A: tuple
    r_A: tuple

    def __post_init__(self):
        q = np.asarray(self.q_A, dtype=float)
        r = np.asarray(self.r_A, dtype=float)
        if q.shape != (6,):
            raise ValueError("q_A must have 6 entries")
        if (q < 0).any():
            raise ValueError("q_A must be nonnegative")
        if (r <= 0).any():
            raise ValueError("r_A must be strictly positive")

    def materialize(self, N: int):
        """Q_seq and R for this parameter set.

        The state cost runs at t = 0..N-1 with a zero terminal matrix;
        the regulator's cost-to-go then already contains the full
        horizon at every gain it produces.
        """
        weights = tuple(self.q_A) + (0.0, 0.0)
        Q = materialize_reference_cost(weights, terminal_only=False, N=N)[0]
        return tuple([Q] * N + [np.zeros_like(Q)]), np.diag(
            np.asarray(self.r_A, dtype=float)
        )


@dataclass(frozen=True)
class AutomationPolicy:
    """Feedback gains L_seq[0..N-1] and observer gains K_seq[0..N-1]."""

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


def solve_lqr(plant: PlantModel, Q_seq, R_A) -> tuple:
    """Backward Riccati sweep for the automation feedback gains.

    The terminal condition seeds the recursion with Q_seq[N]; the gain
    at step t accounts for the running costs Q_seq[t..N-1] through the
    cost-to-go.  (R_A + B_A' Z B_A) must be positive definite.
    """
    A, B, N = plant.A, plant.B_A, plant.N
    Z = Q_seq[N].copy()
    Ls = [None] * N
    for t in range(N - 1, -1, -1):
        G = R_A + B.T @ Z @ B
        try:
            np.linalg.cholesky(G)
        except np.linalg.LinAlgError:
            raise DegenerateCostError(
                f"regulator inner matrix not positive definite at step {t}"
            )
        L = np.linalg.solve(G, B.T @ Z @ A)
        Z_next = Q_seq[t] + A.T @ Z @ (A - B @ L)
        Z = 0.5 * (Z_next + Z_next.T)
        Ls[t] = L
    return tuple(Ls)


def solve_observer(plant: PlantModel, Omega0=None, process_cov=None,
                   meas_cov=None) -> tuple:
    """Forward covariance sweep for the automation observer gains.

    By default the error covariance is driven only by Omega0 and the
    plant's additive process noise, matching the automation's
    deterministic design model; with both zero, every gain is zero.
    process_cov / meas_cov override the design noise model (see module
    docstring).  The innovation matrix H_A P H_A' + meas_cov can be
    singular on the noise-free channel, so its inverse is realized as a
    Moore-Penrose pseudo-inverse with cutoff 1e-12.
    """
    A, H, N = plant.A, plant.H_A, plant.N
    P = (plant.Omega0 if Omega0 is None else Omega0).copy()
    W = plant.Omega_xi if process_cov is None else np.asarray(process_cov, dtype=float)
    V = np.zeros((plant.r_A, plant.r_A)) if meas_cov is None else np.asarray(meas_cov, dtype=float)
    Ks = [None] * N
    for t in range(N):
        S = H @ P @ H.T + V
        S = 0.5 * (S + S.T)
        K = A @ P @ H.T @ np.linalg.pinv(S, rcond=1e-12)
        P_next = A @ P @ A.T + W - K @ S @ K.T
        P = 0.5 * (P_next + P_next.T)
        Ks[t] = K
    return tuple(Ks)


def disturbance_observer(plant: PlantModel, intensity: float) -> tuple:
    """Observer gains that treat the human channel as process noise.

    The design model injects intensity * B_H B_H' per step and assumes
    unit measurement covariance; only their ratio matters.  This is the
    schedule the coupled-loop automation controllers use to track the
    state while a human also acts on the plant.
    """
    W = intensity * (plant.B_H @ plant.B_H.T)
    V = np.eye(plant.r_A)
    return solve_observer(plant, process_cov=W, meas_cov=V)


def build_automation(plant: PlantModel, params: AutomationParams,
                     observer_intensity: float = 0.0) -> AutomationPolicy:
    """Assemble a full automation policy from cost parameters.

    observer_intensity = 0 keeps the default (feedforward) observer;
    positive values use the human-as-disturbance design.
    """
    Q_seq, R_A = params.materialize(plant.N)
    L_seq = solve_lqr(plant, Q_seq, R_A)
    if observer_intensity > 0.0:
        K_seq = disturbance_observer(plant, observer_intensity)
    else:
        K_seq = solve_observer(plant)
    return AutomationPolicy(L_seq=L_seq, K_seq=K_seq)
