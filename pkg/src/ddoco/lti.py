"""State-space ground truth: data generation and test oracles only.

Nothing in the controller reads these matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    GenerationFailureError,
    InvalidInputError,
    InvalidSystemError,
    NoSteadyStateError,
    NumericalFailureError,
)
from .hankel import Trajectory
from .numerics import numerical_rank


def controllability_matrix(A, B, k: int | None = None) -> np.ndarray:
    n = A.shape[0]
    k = n if k is None else k
    blocks = [B]
    for _ in range(k - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def observability_matrix(A, C, k: int | None = None) -> np.ndarray:
    n = A.shape[0]
    k = n if k is None else k
    blocks = [C]
    for _ in range(k - 1):
        blocks.append(blocks[-1] @ A)
    return np.vstack(blocks)


def toeplitz_matrix(A, B, C, D, k: int) -> np.ndarray:
    """Map from stacked inputs ``u_0..u_{k-1}`` to stacked outputs at zero state."""
    p, m = D.shape
    markov = [D]
    AiB = B
    for _ in range(k - 1):
        markov.append(C @ AiB)
        AiB = A @ AiB
    T = np.zeros((p * k, m * k))
    for i in range(k):
        for j in range(i + 1):
            T[i * p : (i + 1) * p, j * m : (j + 1) * m] = markov[i - j]
    return T


@dataclass
class LtiSystem:
    """``x+ = A x + B u``, ``y = C x + D u`` with a mutable current state ``x``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    x: np.ndarray | None = None
    check: bool = True

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float))
        self.D = np.atleast_2d(np.asarray(self.D, dtype=float))
        n, m, p = self.A.shape[0], self.B.shape[1], self.C.shape[0]
        if self.A.shape != (n, n) or self.B.shape != (n, m) or self.C.shape != (p, n) or self.D.shape != (p, m):
            raise InvalidInputError(
                f"inconsistent shapes A{self.A.shape} B{self.B.shape} C{self.C.shape} D{self.D.shape}"
            )
        self.x = np.zeros(n) if self.x is None else np.asarray(self.x, dtype=float).reshape(n)
        if self.check:
            if not self.is_controllable():
                raise InvalidSystemError("(A, B) is not controllable")
            if not self.is_observable():
                raise InvalidSystemError("(A, C) is not observable")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    def is_controllable(self) -> bool:
        return numerical_rank(controllability_matrix(self.A, self.B), 1e-10) == self.n

    def is_observable(self) -> bool:
        return numerical_rank(observability_matrix(self.A, self.C), 1e-10) == self.n

    def has_steady_outputs(self) -> bool:
        """Every output is reachable as a steady state ([I-A, -B; C, D] full row rank)."""
        M = np.block([[np.eye(self.n) - self.A, -self.B], [self.C, self.D]])
        return numerical_rank(M, 1e-10) == self.n + self.p

    def copy(self) -> "LtiSystem":
        return LtiSystem(self.A.copy(), self.B.copy(), self.C.copy(), self.D.copy(), self.x.copy(), check=False)

    def step(self, u) -> np.ndarray:
        """Apply one input, return the output at the current state, advance the state."""
        u = np.asarray(u, dtype=float).reshape(self.m)
        y = self.C @ self.x + self.D @ u
        self.x = self.A @ self.x + self.B @ u
        return y

    def simulate(self, u) -> Trajectory:
        u = np.asarray(u, dtype=float)
        if u.ndim == 1:
            u = u.reshape(-1, self.m) if self.m > 1 else u[:, None]
        if u.ndim != 2 or u.shape[1] != self.m:
            raise InvalidInputError(f"inputs must have shape (N, {self.m}), got {u.shape}")
        y = np.empty((len(u), self.p))
        for k, uk in enumerate(u):
            y[k] = self.step(uk)
        return Trajectory(u, y)

    def steady_output(self, u) -> np.ndarray:
        """Output of the equilibrium held by constant input ``u``."""
        x = np.linalg.lstsq(np.eye(self.n) - self.A, self.B @ np.asarray(u, dtype=float), rcond=None)[0]
        return self.C @ x + self.D @ u


def controllability_index(sys: LtiSystem) -> int:
    """Smallest k with rank [B, AB, ..., A^{k-1} B] = n."""
    for k in range(1, sys.n + 1):
        if numerical_rank(controllability_matrix(sys.A, sys.B, k), 1e-10) == sys.n:
            return k
    raise InvalidSystemError("(A, B) is not controllable")


def model_steady_state(sys: LtiSystem, y_target, v) -> tuple[np.ndarray, np.ndarray]:
    """Equilibrium ``(u, x)`` producing ``y_target`` with ``u`` closest to ``v``.

    Solves ``min ||u - v||^2`` subject to ``(I - A) x = B u`` and
    ``C x + D u = y_target`` through its KKT system.
    """
    n, m, p = sys.n, sys.m, sys.p
    if not sys.has_steady_outputs():
        raise NoSteadyStateError("[I - A, -B; C, D] does not have full row rank")
    y_target = np.asarray(y_target, dtype=float).reshape(p)
    v = np.asarray(v, dtype=float).reshape(m)
    M = np.block([[np.eye(n) - sys.A, -sys.B], [sys.C, sys.D]])
    # regular: observability rules out (I - A) x = 0, C x = 0 with x != 0
    H = np.zeros((n + m, n + m))
    H[n:, n:] = np.eye(m)
    K = np.block([[H, M.T], [M, np.zeros((n + p, n + p))]])
    rhs = np.concatenate([np.zeros(n), v, np.zeros(n), y_target])
    sol = np.linalg.solve(K, rhs)
    return sol[n : n + m], sol[:n]


# --- hindsight optimal control -------------------------------------------------


def solve_hindsight(sys: LtiSystem, costs: Sequence, x0) -> tuple[Trajectory, float]:
    """Exact minimizer of ``sum_t f_t^u(u_t) + f_t^y(y_t)`` over the horizon.

    ``costs`` must be quadratic (``hess_u``/``hess_y`` set). Variables are the
    stacked states and inputs; the dynamics enter as equality constraints and
    the KKT system is solved with a sparse LU factorization.
    """
    n, m = sys.n, sys.m
    T1 = len(costs)
    if T1 == 0:
        raise InvalidInputError("empty cost sequence")
    x0 = np.asarray(x0, dtype=float).reshape(n)
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    nz = n + m  # per-step block (x_t, u_t)
    nv = nz * T1
    CD = np.hstack([C, D])

    hess_blocks = []
    lin = np.zeros(nv)
    for t, cost in enumerate(costs):
        if cost.hess_u is None or cost.hess_y is None:
            raise InvalidInputError("solve_hindsight needs quadratic costs (hess_u and hess_y)")
        Hu, Hy = np.atleast_2d(cost.hess_u), np.atleast_2d(cost.hess_y)
        blk = CD.T @ Hy @ CD
        blk[n:, n:] += Hu
        hess_blocks.append(blk)
        lin[t * nz : (t + 1) * nz] = -(CD.T @ Hy @ cost.theta)
        lin[t * nz + n : (t + 1) * nz] -= Hu @ cost.eta
    P = sp.block_diag(hess_blocks, format="csc")

    # block row t: x_t - A x_{t-1} - B u_{t-1} = 0, and x_0 = x0 for t = 0
    nc = n * T1
    E = sp.kron(sp.eye(T1), sp.hstack([sp.eye(n), sp.csr_matrix((n, m))])) - sp.kron(
        sp.eye(T1, k=-1), sp.csr_matrix(np.hstack([A, B]))
    )
    b = np.zeros(nc)
    b[:n] = x0

    K = sp.bmat([[P, E.T], [E, None]], format="csc")
    rhs = np.concatenate([-lin, b])
    try:
        sol = spla.splu(K).solve(rhs)
    except RuntimeError as exc:
        raise NumericalFailureError(f"hindsight KKT system is singular: {exc}") from exc
    if not np.all(np.isfinite(sol)):
        raise NumericalFailureError("hindsight KKT solve produced non-finite values")

    z = sol[:nv].reshape(T1, nz)
    x, u = z[:, :n], z[:, n:]
    y = x @ C.T + u @ D.T
    total = float(sum(c.value(u[t], y[t]) for t, c in enumerate(costs)))
    return Trajectory(u, y), total


# --- random systems ------------------------------------------------------------


@dataclass
class SystemSpec:
    """How to obtain a plant: explicit matrices, or a seeded random draw.

    Random draws fix ``B, C, D`` once per seed and resample ``A`` (entries
    uniform on ``[low, high]``) until the pair is controllable and observable
    and every output is a steady-state output.
    """

    mode: Literal["explicit", "random"] = "random"
    n: int = 5
    m: int = 2
    p: int = 1
    low: float = -1.0
    high: float = 1.0
    seed: int | None = None
    A: list | None = None
    B: list | None = None
    C: list | None = None
    D: list | None = None
    zero_feedthrough: bool = False
    max_tries: int = 1000

    def __post_init__(self):
        if min(self.n, self.m, self.p) < 1:
            raise InvalidInputError("n, m and p must be at least 1")
        if self.mode not in ("explicit", "random"):
            raise InvalidInputError(f"unknown system mode {self.mode!r}")

    def build(self, default_seed: int = 0) -> LtiSystem:
        """Construct the plant; ``default_seed`` is used when ``seed`` is unset."""
        if self.mode == "explicit":
            if self.D is None:
                D = np.zeros((np.atleast_2d(self.C).shape[0], np.atleast_2d(self.B).shape[1]))
            else:
                D = self.D
            return LtiSystem(self.A, self.B, self.C, D)
        return random_system(
            self.n, self.m, self.p, np.random.default_rng(default_seed if self.seed is None else self.seed),
            low=self.low, high=self.high, zero_feedthrough=self.zero_feedthrough, max_tries=self.max_tries,
        )


def random_system(
    n: int,
    m: int,
    p: int,
    rng: np.random.Generator,
    low: float = -1.0,
    high: float = 1.0,
    zero_feedthrough: bool = False,
    require_steady_outputs: bool = True,
    max_tries: int = 1000,
) -> LtiSystem:
    B = rng.uniform(low, high, (n, m))
    C = rng.uniform(low, high, (p, n))
    D = np.zeros((p, m)) if zero_feedthrough else rng.uniform(low, high, (p, m))
    for _ in range(max_tries):
        A = rng.uniform(low, high, (n, n))
        sys = LtiSystem(A, B, C, D, check=False)
        if not (sys.is_controllable() and sys.is_observable()):
            continue
        if require_steady_outputs and not sys.has_steady_outputs():
            continue
        return sys
    raise GenerationFailureError(f"no admissible A after {max_tries} draws")


def stabilizing_gain(sys: LtiSystem) -> np.ndarray:
    """LQR gain ``K`` (identity weights) so that ``A + B K`` is Schur stable."""
    P = scipy.linalg.solve_discrete_are(sys.A, sys.B, np.eye(sys.n), np.eye(sys.m))
    return -np.linalg.solve(np.eye(sys.m) + sys.B.T @ P @ sys.B, sys.B.T @ P @ sys.A)
