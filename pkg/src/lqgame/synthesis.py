"""Saddle feedback synthesis from a game Riccati solution, plus the
algebraic stationarity checks that verify it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    ContractViolation, GameProblem, TimeGrid, assemble_blocks, block_inverse,
    eval_coeff,
)
from .riccati import RiccatiSolution


@dataclass(frozen=True, eq=False)
class FeedbackLaw:
    """Time-varying gain Theta(t_k) whose first m1 rows drive player 1 and
    last m2 rows drive player 2."""

    grid: TimeGrid
    theta_nodes: np.ndarray   # (n_steps+1, m1+m2, n)
    m1: int
    m2: int

    def __post_init__(self):
        if not np.all(np.isfinite(self.theta_nodes)):
            raise ContractViolation("feedback gains must be finite")
        if self.theta_nodes.shape[0] != self.grid.n_steps + 1:
            raise ContractViolation("one gain per grid node required")

    def theta1_nodes(self) -> np.ndarray:
        return self.theta_nodes[:, :self.m1, :]

    def theta2_nodes(self) -> np.ndarray:
        return self.theta_nodes[:, self.m1:, :]

    def theta_at(self, t: float) -> np.ndarray:
        """Linear interpolation between node gains."""
        s = np.clip(t / self.grid.horizon_T, 0.0, 1.0) * self.grid.n_steps
        i = min(int(np.floor(s)), self.grid.n_steps - 1)
        w = s - i
        return (1.0 - w) * self.theta_nodes[i] + w * self.theta_nodes[i + 1]


@dataclass(frozen=True, eq=False)
class ClosedLoopSystem:
    """Closed-loop drift A + B Theta and diffusion C + D Theta per node."""

    grid: TimeGrid
    drift_nodes: np.ndarray
    diffusion_nodes: np.ndarray

    def drift_at(self, t: float) -> np.ndarray:
        s = np.clip(t / self.grid.horizon_T, 0.0, 1.0) * self.grid.n_steps
        i = min(int(np.floor(s)), self.grid.n_steps - 1)
        w = s - i
        return (1.0 - w) * self.drift_nodes[i] + w * self.drift_nodes[i + 1]


@dataclass(frozen=True, eq=False)
class AdjointTriple:
    """State, costate, and martingale-integrand paths reconstructed from the
    Riccati solution along a state path."""

    X_nodes: np.ndarray
    Y_nodes: np.ndarray
    Z_nodes: np.ndarray


def feedback_gain(problem: GameProblem, sol: RiccatiSolution) -> FeedbackLaw:
    """Theta(t_k) = -(R + D'PD)^{-1} (B'P + D'PC + S) at every node."""
    if sol.kind != "game":
        raise ContractViolation("feedback synthesis needs a game-kind solution")
    if sol.margin1_nodes.min() <= 0 or sol.margin2_nodes.max() >= 0:
        raise ContractViolation("Riccati solution has non-regular nodes")
    m1 = problem.m1
    thetas = []
    for t, P in zip(sol.grid.nodes, sol.P_nodes):
        R_P, S_P, _ = assemble_blocks(problem, P, t)
        R_inv = block_inverse(R_P[:m1, :m1], R_P[:m1, m1:], R_P[m1:, m1:])
        thetas.append(-R_inv @ S_P)
    return FeedbackLaw(grid=sol.grid, theta_nodes=np.array(thetas),
                       m1=problem.m1, m2=problem.m2)


def game_value(sol: RiccatiSolution, x) -> float:
    """Saddle value <P(0) x, x> of the game started at x."""
    if sol.kind != "game":
        raise ContractViolation("value requires a game-kind solution")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float(x @ sol.P0() @ x)


def closed_loop(problem: GameProblem, law: FeedbackLaw) -> ClosedLoopSystem:
    """Form A + B Theta and C + D Theta at every node of the law's grid."""
    drift, diffusion = [], []
    for t, Th in zip(law.grid.nodes, law.theta_nodes):
        A = eval_coeff(problem.dynamics.A, t)
        C = eval_coeff(problem.dynamics.C, t)
        B = np.hstack([eval_coeff(problem.dynamics.B1, t),
                       eval_coeff(problem.dynamics.B2, t)])
        D = np.hstack([eval_coeff(problem.dynamics.D1, t),
                       eval_coeff(problem.dynamics.D2, t)])
        drift.append(A + B @ Th)
        diffusion.append(C + D @ Th)
    return ClosedLoopSystem(grid=law.grid, drift_nodes=np.array(drift),
                            diffusion_nodes=np.array(diffusion))


def mean_state_path(system: ClosedLoopSystem, x) -> np.ndarray:
    """Mean closed-loop flow dX/dt = (A + B Theta) X, integrated by the same
    fixed-step fourth-order scheme as the Riccati solver."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    nodes = system.grid.nodes
    h = system.grid.dt
    path = [x]
    X = x
    for k in range(system.grid.n_steps):
        t0, t1 = nodes[k], nodes[k + 1]
        tm = 0.5 * (t0 + t1)
        f = system.drift_at
        k1 = f(t0) @ X
        k2 = f(tm) @ (X + 0.5 * h * k1)
        k3 = f(tm) @ (X + 0.5 * h * k2)
        k4 = f(t1) @ (X + h * k3)
        X = X + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        path.append(X)
    return np.array(path)


def adjoint_from_state(problem: GameProblem, sol: RiccatiSolution,
                       law: FeedbackLaw, X_path: np.ndarray) -> AdjointTriple:
    """Reconstruct Y = P X and Z = P (C X + D u) with u = Theta X along a
    state path on the solution grid."""
    X_path = np.atleast_2d(np.asarray(X_path, dtype=float))
    if X_path.shape[0] != sol.grid.n_steps + 1:
        raise ContractViolation("state path must live on the solution grid")
    Y, Z = [], []
    for t, P, Th, X in zip(sol.grid.nodes, sol.P_nodes, law.theta_nodes, X_path):
        C = eval_coeff(problem.dynamics.C, t)
        D = np.hstack([eval_coeff(problem.dynamics.D1, t),
                       eval_coeff(problem.dynamics.D2, t)])
        u = Th @ X
        Y.append(P @ X)
        Z.append(P @ (C @ X + D @ u))
    return AdjointTriple(X_nodes=X_path, Y_nodes=np.array(Y), Z_nodes=np.array(Z))


def fbsde_residual(problem: GameProblem, sol: RiccatiSolution,
                   law: FeedbackLaw, X_path: np.ndarray) -> np.ndarray:
    """Per-node norm of the stationarity defect B'Y + D'Z + S X + R u along
    a state path, with Y, Z reconstructed from P.  Vanishes up to rounding
    for the synthesized saddle law."""
    if not sol.grid.same_as(law.grid):
        raise ContractViolation("solution and law grids differ")
    triple = adjoint_from_state(problem, sol, law, X_path)
    out = []
    for t, Th, X, Y, Z in zip(sol.grid.nodes, law.theta_nodes,
                              triple.X_nodes, triple.Y_nodes, triple.Z_nodes):
        B = np.hstack([eval_coeff(problem.dynamics.B1, t),
                       eval_coeff(problem.dynamics.B2, t)])
        D = np.hstack([eval_coeff(problem.dynamics.D1, t),
                       eval_coeff(problem.dynamics.D2, t)])
        S = np.vstack([eval_coeff(problem.cost.S1, t),
                       eval_coeff(problem.cost.S2, t)])
        R = np.block([
            [eval_coeff(problem.cost.R11, t), eval_coeff(problem.cost.R12, t)],
            [eval_coeff(problem.cost.R21, t), eval_coeff(problem.cost.R22, t)],
        ])
        u = Th @ X
        out.append(float(np.linalg.norm(B.T @ Y + D.T @ Z + S @ X + R @ u)))
    return np.array(out)
