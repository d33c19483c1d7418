"""Coefficient containers and small dense linear-algebra kernels.

Everything downstream (Riccati integration, feedback synthesis, simulation)
consumes the types defined here.  All containers are immutable after
construction and every function is pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SYM_RTOL = 1e-12
COND_LIMIT = 1e12


class LqgError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(LqgError):
    """An argument lies outside the domain an operation is defined on."""


class ContractViolation(LqgError):
    """Inputs break a documented precondition (shape, grid, symmetry...)."""


class SingularBlockError(LqgError):
    """A block of a structured matrix is numerically singular."""

    def __init__(self, block: str, cond: float):
        self.block = block
        self.cond = cond
        super().__init__(f"block {block!r} is numerically singular (cond~{cond:.3e})")


def sym(M: np.ndarray) -> np.ndarray:
    """Symmetric part (M + M^T)/2."""
    return 0.5 * (M + M.T)


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


def check_symmetric(M: np.ndarray, name: str, rtol: float = SYM_RTOL) -> None:
    scale = max(1.0, float(np.abs(M).max())) if M.size else 1.0
    if np.abs(M - M.T).max(initial=0.0) > rtol * scale:
        raise ContractViolation(f"{name} is not symmetric within {rtol:g} relative")


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Uniform grid t_k = k*T/n_steps on [0, T]."""

    horizon_T: float
    n_steps: int

    def __post_init__(self):
        if self.horizon_T < 0:
            raise ContractViolation("horizon_T must be nonnegative")
        if self.n_steps < 2:
            raise ContractViolation("n_steps must be >= 2")

    @property
    def dt(self) -> float:
        return self.horizon_T / self.n_steps

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon_T, self.n_steps + 1)

    def same_as(self, other: "TimeGrid") -> bool:
        return self.n_steps == other.n_steps and self.horizon_T == other.horizon_T


@dataclass(frozen=True, eq=False)
class CoefficientPath:
    """A matrix-valued coefficient on [0, T]: constant or uniformly sampled.

    For ``kind == "sampled"``, ``values`` has shape (k, rows, cols) with k >= 2
    samples at uniform times spanning [0, span].  For ``kind == "constant"``,
    ``values`` has shape (rows, cols) and ``span`` is None.
    """

    kind: str
    values: np.ndarray
    span: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        if self.kind == "constant":
            if self.values.ndim != 2:
                raise ContractViolation("constant path needs a 2-d matrix")
        elif self.kind == "sampled":
            if self.values.ndim != 3 or self.values.shape[0] < 2:
                raise ContractViolation("sampled path needs >= 2 stacked matrices")
            if self.span is None or self.span <= 0:
                raise ContractViolation("sampled path needs a positive span")
        else:
            raise ContractViolation(f"unknown path kind {self.kind!r}")

    @classmethod
    def constant(cls, M) -> "CoefficientPath":
        return cls("constant", np.atleast_2d(np.array(M, dtype=float)))

    @classmethod
    def sampled(cls, stack, span: float) -> "CoefficientPath":
        return cls("sampled", np.array(stack, dtype=float), float(span))

    @property
    def rows(self) -> int:
        return self.values.shape[-2]

    @property
    def cols(self) -> int:
        return self.values.shape[-1]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def is_zero(self) -> bool:
        return not np.any(self.values)


def eval_coeff(path: CoefficientPath, t: float) -> np.ndarray:
    """Evaluate a coefficient path at time t.

    Constant paths return the stored matrix; sampled paths return the linear
    interpolation between the bracketing sample nodes (exact at nodes).
    """
    if path.kind == "constant":
        return path.values
    if t < -1e-14 or t > path.span * (1 + 1e-14):
        raise DomainError(f"t={t} outside [0, {path.span}]")
    k = path.values.shape[0] - 1
    s = np.clip(t / path.span, 0.0, 1.0) * k
    i = min(int(np.floor(s)), k - 1)
    w = s - i
    if w == 0.0:
        return path.values[i]
    return (1.0 - w) * path.values[i] + w * path.values[i + 1]


def as_path(x) -> CoefficientPath:
    if isinstance(x, CoefficientPath):
        return x
    return CoefficientPath.constant(x)


@dataclass(frozen=True, eq=False)
class StateDynamics:
    """Coefficients of the controlled linear SDE
    dX = (A X + B1 u1 + B2 u2) dt + (C X + D1 u1 + D2 u2) dW."""

    A: CoefficientPath
    B1: CoefficientPath
    B2: CoefficientPath
    C: CoefficientPath
    D1: CoefficientPath
    D2: CoefficientPath

    def __post_init__(self):
        n = self.A.rows
        m1, m2 = self.B1.cols, self.B2.cols
        if n < 1 or m1 < 1 or m2 < 1:
            raise ContractViolation("need n >= 1, m1 >= 1, m2 >= 1")
        expected = {
            "A": (n, n), "B1": (n, m1), "B2": (n, m2),
            "C": (n, n), "D1": (n, m1), "D2": (n, m2),
        }
        for name, shape in expected.items():
            got = getattr(self, name).shape
            if got != shape:
                raise ContractViolation(f"dynamics.{name} has shape {got}, expected {shape}")

    @property
    def n(self) -> int:
        return self.A.rows

    @property
    def m1(self) -> int:
        return self.B1.cols

    @property
    def m2(self) -> int:
        return self.B2.cols


def _sample_stack(path: CoefficientPath) -> np.ndarray:
    """All raw samples of a path as a (k, rows, cols) stack (k=1 if constant)."""
    if path.kind == "constant":
        return path.values[None, :, :]
    return path.values


@dataclass(frozen=True, eq=False)
class CostWeights:
    """Weights of the quadratic payoff: terminal G plus running blocks
    Q, S1, S2, R11, R12, R21, R22.

    Stored symmetry (G, Q, R11, R22, R21 = R12^T) is validated, never
    silently repaired.
    """

    G: np.ndarray
    Q: CoefficientPath
    S1: CoefficientPath
    S2: CoefficientPath
    R11: CoefficientPath
    R12: CoefficientPath
    R21: CoefficientPath
    R22: CoefficientPath

    def __post_init__(self):
        object.__setattr__(self, "G", _frozen(np.atleast_2d(self.G)))
        check_symmetric(self.G, "G")
        for name in ("Q", "R11", "R22"):
            path = getattr(self, name)
            for k, M in enumerate(_sample_stack(path)):
                check_symmetric(M, f"{name}[{k}]")
        a = _sample_stack(self.R12)
        b = _sample_stack(self.R21)
        if a.shape[0] != b.shape[0]:
            raise ContractViolation("R12 and R21 must share sampling")
        scale = max(1.0, float(np.abs(a).max(initial=0.0)))
        if np.abs(a - np.transpose(b, (0, 2, 1))).max(initial=0.0) > SYM_RTOL * scale:
            raise ContractViolation("R21 must equal R12^T at every sample")

    @property
    def n(self) -> int:
        return self.G.shape[0]

    @property
    def m1(self) -> int:
        return self.R11.rows

    @property
    def m2(self) -> int:
        return self.R22.rows


@dataclass(frozen=True, eq=False)
class GameProblem:
    """The full game tuple: dynamics, cost weights, and horizon."""

    dynamics: StateDynamics
    cost: CostWeights
    horizon_T: float

    def __post_init__(self):
        if self.horizon_T < 0:
            raise ContractViolation("horizon_T must be nonnegative")
        dyn, cost = self.dynamics, self.cost
        if (dyn.n, dyn.m1, dyn.m2) != (cost.n, cost.m1, cost.m2):
            raise ContractViolation(
                f"dynamics dims {(dyn.n, dyn.m1, dyn.m2)} disagree with "
                f"cost dims {(cost.n, cost.m1, cost.m2)}")
        expected = {
            "cost.Q": (dyn.n, dyn.n), "cost.S1": (dyn.m1, dyn.n),
            "cost.S2": (dyn.m2, dyn.n), "cost.R11": (dyn.m1, dyn.m1),
            "cost.R12": (dyn.m1, dyn.m2), "cost.R21": (dyn.m2, dyn.m1),
            "cost.R22": (dyn.m2, dyn.m2),
        }
        for name, shape in expected.items():
            path = getattr(cost, name.split(".")[1])
            if path.shape != shape:
                raise ContractViolation(f"{name} has shape {path.shape}, expected {shape}")
        for holder in (dyn, cost):
            for name in vars(holder):
                path = getattr(holder, name)
                if isinstance(path, CoefficientPath) and path.kind == "sampled":
                    if not np.isclose(path.span, self.horizon_T, rtol=1e-12, atol=1e-12):
                        raise ContractViolation(
                            f"sampled path {name} spans [0,{path.span}], horizon is {self.horizon_T}")

    @property
    def n(self) -> int:
        return self.dynamics.n

    @property
    def m1(self) -> int:
        return self.dynamics.m1

    @property
    def m2(self) -> int:
        return self.dynamics.m2

    def is_deterministic(self) -> bool:
        dyn = self.dynamics
        return dyn.C.is_zero() and dyn.D1.is_zero() and dyn.D2.is_zero()


@dataclass(frozen=True, eq=False)
class AssembledBlocks:
    """Concatenated coefficients at a fixed time: B=[B1|B2], D=[D1|D2],
    S=[S1;S2], R = [[R11,R12],[R21,R22]]."""

    B: np.ndarray
    D: np.ndarray
    S: np.ndarray
    R: np.ndarray
    m1: int
    m2: int

    def __post_init__(self):
        for name in ("B", "D", "S", "R"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))


def stack_blocks(problem: GameProblem, t: float) -> AssembledBlocks:
    """Evaluate and concatenate the two players' coefficients at time t."""
    dyn, cost = problem.dynamics, problem.cost
    B = np.hstack([eval_coeff(dyn.B1, t), eval_coeff(dyn.B2, t)])
    D = np.hstack([eval_coeff(dyn.D1, t), eval_coeff(dyn.D2, t)])
    S = np.vstack([eval_coeff(cost.S1, t), eval_coeff(cost.S2, t)])
    R = np.block([
        [eval_coeff(cost.R11, t), eval_coeff(cost.R12, t)],
        [eval_coeff(cost.R21, t), eval_coeff(cost.R22, t)],
    ])
    return AssembledBlocks(B=B, D=D, S=S, R=R, m1=problem.m1, m2=problem.m2)


def sym_eig_extremes(M: np.ndarray) -> tuple[float, float]:
    """Smallest and largest eigenvalue of a symmetric matrix."""
    M = np.atleast_2d(M)
    check_symmetric(M, "sym_eig_extremes argument")
    if M.shape == (1, 1):
        v = float(M[0, 0])
        return (v, v)
    w = np.linalg.eigvalsh(sym(M))
    return (float(w[0]), float(w[-1]))


def block_inverse(M: np.ndarray, L: np.ndarray, N: np.ndarray,
                  cond_limit: float = COND_LIMIT) -> np.ndarray:
    """Inverse of the 2x2 block matrix [[M, L], [L^T, N]].

    Uses the Schur complement Phi = N - L^T M^-1 L:

        [[M^-1 + (M^-1 L) Phi^-1 (M^-1 L)^T,  -(M^-1 L) Phi^-1],
         [-Phi^-1 (M^-1 L)^T,                  Phi^-1          ]]

    Raises SingularBlockError naming the failing block when M or Phi is
    numerically singular.
    """
    M, L, N = np.atleast_2d(M), np.atleast_2d(L), np.atleast_2d(N)
    if np.linalg.cond(M) > cond_limit:
        raise SingularBlockError("M", float(np.linalg.cond(M)))
    Minv_L = np.linalg.solve(M, L)
    Phi = N - L.T @ Minv_L
    if np.linalg.cond(Phi) > cond_limit:
        raise SingularBlockError("Phi", float(np.linalg.cond(Phi)))
    Phi_inv = np.linalg.inv(Phi)
    M_inv = np.linalg.inv(M)
    top_left = M_inv + Minv_L @ Phi_inv @ Minv_L.T
    top_right = -Minv_L @ Phi_inv
    return np.block([[top_left, top_right], [top_right.T, Phi_inv]])


def assemble_blocks(problem: GameProblem, P: np.ndarray,
                    t: float) -> tuple[np.ndarray, np.ndarray, tuple[float, float]]:
    """Form R_P = R + D^T P D and S_P = B^T P + D^T P C + S at time t.

    Returns (R_P, S_P, margins) where margins = (lambda_min of the player-1
    diagonal block of R_P, lambda_max of the player-2 diagonal block).
    """
    P = np.atleast_2d(P)
    check_symmetric(P, "P", rtol=1e-10)
    blk = stack_blocks(problem, t)
    C = eval_coeff(problem.dynamics.C, t)
    R_P = blk.R + blk.D.T @ P @ blk.D
    S_P = blk.B.T @ P + blk.D.T @ P @ C + blk.S
    m1 = problem.m1
    margin1 = sym_eig_extremes(sym(R_P[:m1, :m1]))[0]
    margin2 = sym_eig_extremes(sym(R_P[m1:, m1:]))[1]
    return R_P, S_P, (margin1, margin2)
