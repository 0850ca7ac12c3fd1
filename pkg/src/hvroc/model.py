"""Plant construction for the coupled human-machine reaching model.

The plant is a discrete-time linear system driven by two inputs (a noisy
human channel and a deterministic automation channel) with additive and
signal-dependent Gaussian noise:

    x[t+1] = A x[t] + B_H u_H[t] + B_A u_A[t] + xi[t] + sum_i eps_i[t] C_i u_H[t]
    y_A[t] = H_A x[t]
    y_H[t] = H_H x[t] + omega[t] + sum_i rho_i[t] D_i x[t]

where xi = Sigma_xi alpha, omega = Sigma_omega beta and alpha, beta,
eps_i, rho_i are independent standard normal variables.

The point-mass reaching plant stacks two planar axes plus two constant
reference states:

    [p_x, p_y, pdot_x, pdot_y, f_x, f_y, g_x, g_y, pref_x, pref_y]

p is the hand position, f the force acting on the hand and g the muscle
activation produced by a second-order filter of the neural input u_H.
The reference states carry the target position so that quadratic costs
on (p - p_ref) stay expressible as a constant matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# stacked state layout of the point-mass plant
IDX_POS = (0, 1)
IDX_VEL = (2, 3)
IDX_FORCE = (4, 5)
IDX_ACT = (6, 7)
IDX_REF = (8, 9)
N_PHYSICAL = 8
N_AUGMENTED = 10

# rotation mapping the x-axis control channel onto the y-axis one
ROT90 = np.array([[0.0, 1.0], [-1.0, 0.0]])


class InvalidTaskError(ValueError):
    """Raised when task or plant parameters are inconsistent."""


class InvalidCostError(ValueError):
    """Raised when cost weights violate their sign constraints."""


def _as_matrix(x, shape, name):
    arr = np.asarray(x, dtype=float)
    if arr.shape != shape:
        raise InvalidTaskError(f"{name} must have shape {shape}, got {arr.shape}")
    return arr


@dataclass(frozen=True)
class PlantModel:
    """Immutable description of the coupled linear stochastic plant.

    C holds the control-dependent noise scalings (each n x m_H), D the
    state-dependent observation noise scalings (each r_H x n).  Both
    lists may be empty.  Sigma_xi / Sigma_omega scale the additive
    noise; their outer products are exposed as Omega_xi / Omega_omega.
    """

    A: np.ndarray
    B_H: np.ndarray
    B_A: np.ndarray
    H_H: np.ndarray
    H_A: np.ndarray
    C: tuple = ()
    D: tuple = ()
    Sigma_xi: np.ndarray = None
    Sigma_omega: np.ndarray = None
    x0_mean: np.ndarray = None
    Omega0: np.ndarray = None
    N: int = 0
    dt: float = 0.0

    def __post_init__(self):
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise InvalidTaskError("A must be square")
        if self.B_H.shape[0] != n or self.B_A.shape[0] != n:
            raise InvalidTaskError("input matrices must have n rows")
        if self.H_H.shape[1] != n or self.H_A.shape[1] != n:
            raise InvalidTaskError("output matrices must have n columns")
        for Ci in self.C:
            if Ci.shape != self.B_H.shape:
                raise InvalidTaskError("each C_i must be n x m_H")
        for Di in self.D:
            if Di.shape != (self.H_H.shape[0], n):
                raise InvalidTaskError("each D_i must be r_H x n")
        if self.Sigma_xi.shape[0] != n:
            raise InvalidTaskError("Sigma_xi must have n rows")
        if self.Sigma_omega.shape[0] != self.H_H.shape[0]:
            raise InvalidTaskError("Sigma_omega must have r_H rows")
        if self.x0_mean.shape != (n,):
            raise InvalidTaskError("x0_mean must be an n-vector")
        if self.Omega0.shape != (n, n):
            raise InvalidTaskError("Omega0 must be n x n")
        if not np.allclose(self.Omega0, self.Omega0.T):
            raise InvalidTaskError("Omega0 must be symmetric")
        if np.linalg.eigvalsh(self.Omega0).min() < -1e-10:
            raise InvalidTaskError("Omega0 must be positive semidefinite")
        if self.N < 1:
            raise InvalidTaskError("horizon N must be at least 1")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m_H(self):
        return self.B_H.shape[1]

    @property
    def m_A(self):
        return self.B_A.shape[1]

    @property
    def r_H(self):
        return self.H_H.shape[0]

    @property
    def r_A(self):
        return self.H_A.shape[0]

    @property
    def Omega_xi(self):
        return self.Sigma_xi @ self.Sigma_xi.T

    @property
    def Omega_omega(self):
        return self.Sigma_omega @ self.Sigma_omega.T


@dataclass(frozen=True)
class ReachTask:
    """Physical parameters of one planar point-to-point reach."""

    mass: float = 1.0
    dt: float = 0.01
    tau1: float = 0.04
    tau2: float = 0.04
    sigma_u: float = 0.5
    sigma_omega_diag: tuple = (0.02, 0.02, 0.2, 0.2, 1.0, 1.0)
    p0: tuple = (0.0, 0.0)
    p_ref: tuple = (0.1, 0.1)
    N: int = 42

    def __post_init__(self):
        if self.mass <= 0 or self.dt <= 0 or self.tau1 <= 0 or self.tau2 <= 0:
            raise InvalidTaskError("mass, dt, tau1, tau2 must be positive")
        if self.N < 2:
            raise InvalidTaskError("N must be at least 2")
        if len(self.sigma_omega_diag) != 6:
            raise InvalidTaskError("sigma_omega_diag must have 6 entries")
        if len(self.p0) != 2 or len(self.p_ref) != 2:
            raise InvalidTaskError("p0 and p_ref must be 2-vectors")


@dataclass(frozen=True)
class CostSpec:
    """Quadratic cost: state matrices Q_seq[0..N] plus input weight R."""

    Q_seq: tuple
    R: np.ndarray

    def __post_init__(self):
        for t, Q in enumerate(self.Q_seq):
            if not np.allclose(Q, Q.T):
                raise InvalidCostError(f"Q_seq[{t}] must be symmetric")
            if np.linalg.eigvalsh(Q).min() < -1e-10:
                raise InvalidCostError(f"Q_seq[{t}] must be positive semidefinite")
        if not np.allclose(self.R, self.R.T):
            raise InvalidCostError("R must be symmetric")
        if np.linalg.eigvalsh(self.R).min() <= 0:
            raise InvalidCostError("R must be positive definite")


def build_point_mass_plant(task: ReachTask) -> PlantModel:
    """Construct the 10-state planar reaching plant for a task.

    Per axis the dynamics integrate position from velocity, velocity
    from force scaled by the mass, and pass the neural input u_H
    through the two first-order muscle stages g and f.  The automation
    input u_A adds directly to the force state.  The two reference
    states are constant and unobserved but known exactly through the
    initial estimate, so both estimators track them without error.
    """
    n = N_AUGMENTED
    dt, m = task.dt, task.mass
    A = np.eye(n)
    for ax in range(2):
        p, v, f, g = IDX_POS[ax], IDX_VEL[ax], IDX_FORCE[ax], IDX_ACT[ax]
        A[p, v] = dt
        A[v, f] = dt / m
        A[f, f] = 1.0 - dt / task.tau2
        A[f, g] = dt / task.tau2
        A[g, g] = 1.0 - dt / task.tau1
    B_H = np.zeros((n, 2))
    B_H[IDX_ACT[0], 0] = dt / task.tau1
    B_H[IDX_ACT[1], 1] = dt / task.tau1
    B_A = np.zeros((n, 2))
    B_A[IDX_FORCE[0], 0] = 1.0
    B_A[IDX_FORCE[1], 1] = 1.0
    H = np.zeros((6, n))
    H[:, :6] = np.eye(6)
    C = (task.sigma_u * B_H, task.sigma_u * (B_H @ ROT90))
    x0 = np.zeros(n)
    x0[IDX_POS[0]], x0[IDX_POS[1]] = task.p0
    x0[IDX_REF[0]], x0[IDX_REF[1]] = task.p_ref
    return PlantModel(
        A=A,
        B_H=B_H,
        B_A=B_A,
        H_H=H,
        H_A=H.copy(),
        C=C,
        D=(),
        Sigma_xi=np.zeros((n, 0)),
        Sigma_omega=np.diag(np.asarray(task.sigma_omega_diag, dtype=float)),
        x0_mean=x0,
        Omega0=np.zeros((n, n)),
        N=task.N,
        dt=dt,
    )


def reference_cost_matrix(weights) -> np.ndarray:
    """Build one 10x10 state-cost matrix from 8 per-state weights.

    The two position weights are spread over the (p, ref) pairs so that
    x' Q x = q_p (p - p_ref)^2 per axis; the remaining six weights sit
    on the diagonal of the physical block.
    """
    w = np.asarray(weights, dtype=float)
    if w.shape != (N_PHYSICAL,):
        raise InvalidCostError("expected 8 per-state weights")
    if (w < 0).any():
        raise InvalidCostError("cost weights must be nonnegative")
    Q = np.zeros((N_AUGMENTED, N_AUGMENTED))
    for ax in range(2):
        p, r = IDX_POS[ax], IDX_REF[ax]
        Q[p, p] += w[ax]
        Q[r, r] += w[ax]
        Q[p, r] -= w[ax]
        Q[r, p] -= w[ax]
    for k in range(2, N_PHYSICAL):
        Q[k, k] += w[k]
    return Q


def materialize_reference_cost(weights, terminal_only: bool, N: int):
    """Return the length-(N+1) sequence of reference-deviation cost matrices.

    With terminal_only, every Q_t is zero except Q_N; otherwise the same
    matrix is used at every step including N.
    """
    Q = reference_cost_matrix(weights)
    zero = np.zeros_like(Q)
    if terminal_only:
        return tuple([zero] * N + [Q])
    return tuple([Q] * (N + 1))
