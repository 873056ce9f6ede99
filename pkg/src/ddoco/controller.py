"""Data-driven online gradient controller for an unknown LTI plant.

Everything that depends on the recorded data is formed once in
:func:`precompute`. The online step :func:`advance` then does two gradient
evaluations and a fixed sequence of matrix-vector products.

Block-row indices below are 1-based, matching :meth:`HankelBlock.rows`.
With ``n`` the order bound and ``mu`` the prediction horizon, the Hankel
depth is ``2n + mu + 1`` and ``mt = n + mu + 1`` is the first terminal block.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .equilibria import SteadyMaps, compute_steady_maps, equilibrium_threshold, is_equilibrium
from .errors import (
    DataTooShortError,
    DdocoError,
    InconsistentWindowError,
    InfeasibleError,
    InfeasibleOutputError,
    InvalidInputError,
)
from .hankel import HankelBlock, Trajectory, build_hankel, require_persistent_excitation
from .numerics import pseudoinverse, weighted_min_norm_operator

Gradient = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ControllerConfig:
    """Tuning of the controller.

    ``mu=None`` uses ``n_bar`` (always satisfies mu >= controllability index).
    ``transient_weight`` and ``regularization`` build the default weight
    ``Q = [w U^{n+1:n+mu}; w Y^{n+1:n+mu}; r I]``; ``Q`` overrides it.
    Feasibility tolerances are relative (``tol * (1 + ||rhs||)``); ``None``
    disables the corresponding check.
    """

    n_bar: int
    gamma_u: float = 0.75
    gamma_y: float = 0.75
    mu: int | None = None
    transient_weight: float = 100.0
    regularization: float = 1.0
    Q: np.ndarray | None = None
    rank_tol: float | None = None
    steady_rank_tol: float | None = None
    pe_tol: float | None = None
    window_tol: float | None = 1e-6
    steady_tol: float | None = 1e-6
    beta_tol: float | None = 1e-6

    def __post_init__(self):
        if self.n_bar < 1:
            raise InvalidInputError("n_bar must be at least 1")
        if not (self.gamma_u > 0 and self.gamma_y > 0):
            raise InvalidInputError("step sizes must be positive")
        if self.mu is not None and self.mu < 1:
            raise InvalidInputError("mu must be at least 1")

    @property
    def horizon(self) -> int:
        return self.n_bar if self.mu is None else self.mu

    @property
    def depth(self) -> int:
        return 2 * self.n_bar + self.horizon + 1


def minimum_data_length(m: int, n_bar: int, mu: int) -> int:
    """Shortest data length that can be persistently exciting of order 3n+mu+1."""
    return (m + 1) * (3 * n_bar + mu + 1) - 1


@dataclass(frozen=True)
class DataMatrices:
    n: int
    mu: int
    m: int
    p: int
    U: HankelBlock
    Y: HankelBlock
    H_alpha: np.ndarray
    H_alpha_pinv: np.ndarray
    H_beta: np.ndarray
    Q: np.ndarray
    W_omega: np.ndarray  # v -> omega
    B_bar: np.ndarray  # g -> beta
    Y_pred: np.ndarray  # Y^{n+mu+1}
    U_term: np.ndarray  # U^{mt:mt+n}
    Y_term: np.ndarray  # Y^{mt:mt+n-1}
    U_plan: np.ndarray  # U^{n+1:n+mu+1}
    steady: SteadyMaps

    @property
    def mu_tilde(self) -> int:
        return self.n + self.mu + 1

    @property
    def columns(self) -> int:
        return self.U.columns


def default_weight(U: HankelBlock, Y: HankelBlock, n: int, mu: int, w: float = 100.0, r: float = 1.0) -> np.ndarray:
    return np.vstack([w * U.rows(n + 1, n + mu), w * Y.rows(n + 1, n + mu), r * np.eye(U.columns)])


def precompute(data: Trajectory, config: ControllerConfig) -> DataMatrices:
    """Form every data-dependent matrix the online step needs.

    Raises:
        DataTooShortError: ``len(data)`` cannot support excitation of order
            ``3 n_bar + mu + 1``.
        InsufficientExcitationError: the data input is not exciting enough.
    """
    n, mu, m, p = config.n_bar, config.horizon, data.m, data.p
    N = len(data)
    N_min = minimum_data_length(m, n, mu)
    if N < N_min:
        raise DataTooShortError(f"data length {N} < {N_min} required for m={m}, n_bar={n}, mu={mu}")
    require_persistent_excitation(data.u, 3 * n + mu + 1, config.pe_tol)

    L = 2 * n + mu + 1
    mt = n + mu + 1
    U = build_hankel(data.u, L)
    Y = build_hankel(data.y, L)
    cols = U.columns

    H_alpha = np.vstack([U.rows(1, n), U.rows(n + 1, mt + n), Y.rows(1, n)])
    H_alpha_pinv = pseudoinverse(H_alpha, config.rank_tol)
    # columns of H_alpha^+ that multiply the constant-input blocks, summed per channel
    input_cols = H_alpha_pinv[:, m * n : m * (n + mt)]
    W_omega = input_cols.reshape(cols, mt, m).sum(axis=1)

    H_beta = np.vstack([U.rows(1, n), U.rows(mt, mt + n), Y.rows(1, n), Y.rows(mt, mt + n - 1)])
    if config.Q is not None:
        Q = np.asarray(config.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[1] != cols:
            raise InvalidInputError(f"Q must have {cols} columns, got shape {Q.shape}")
    else:
        Q = default_weight(U, Y, n, mu, config.transient_weight, config.regularization)
    B_bar = weighted_min_norm_operator(H_beta, Q, config.rank_tol)

    steady = compute_steady_maps(data, n, config.steady_rank_tol, config.pe_tol)
    return DataMatrices(
        n=n,
        mu=mu,
        m=m,
        p=p,
        U=U,
        Y=Y,
        H_alpha=H_alpha,
        H_alpha_pinv=H_alpha_pinv,
        H_beta=H_beta,
        Q=Q,
        W_omega=W_omega,
        B_bar=B_bar,
        Y_pred=Y.rows(mt).copy(),
        U_term=U.rows(mt, mt + n).copy(),
        Y_term=Y.rows(mt, mt + n - 1).copy(),
        U_plan=U.rows(n + 1, n + mu + 1).copy(),
        steady=steady,
    )


@dataclass
class ControllerState:
    """Mutable quantities carried between steps.

    ``pending_u`` is the last applied input, waiting for its measured output
    before both enter the windows.
    """

    v_prev: np.ndarray
    u_hat_prev: np.ndarray
    us_prev: np.ndarray
    u_window: np.ndarray  # (n, m), oldest first
    y_window: np.ndarray  # (n, p)
    t: int = 0
    pending_u: np.ndarray | None = None
    v_cur: np.ndarray | None = None
    alpha_prev: np.ndarray | None = None
    beta_prev: np.ndarray | None = None
    omega_prev: np.ndarray | None = None

    def copy(self) -> "ControllerState":
        return ControllerState(
            **{k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in self.__dict__.items()}
        )


@dataclass(frozen=True)
class StepDiagnostics:
    t: int
    v: np.ndarray
    y_hat: np.ndarray
    y_s: np.ndarray
    u_s: np.ndarray
    omega: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    g: np.ndarray
    u_hat: np.ndarray


def init_state(
    M: DataMatrices,
    warmup: Trajectory,
    v0=None,
    u_hat0=None,
) -> ControllerState:
    """Initial controller state.

    ``warmup`` holds the last ``n`` input/output samples of the plant before
    ``t = 0`` (longer trajectories are truncated to their tail). ``v_{-1}`` is
    set to ``v0`` and ``u^s_{-1}`` to ``v_{-1}``.
    """
    n, m, mu = M.n, M.m, M.mu
    if len(warmup) < n:
        raise InvalidInputError(f"need at least {n} warm-up samples, got {len(warmup)}")
    if warmup.m != m or warmup.p != M.p:
        raise InvalidInputError("warm-up trajectory has the wrong dimensions")
    v0 = np.zeros(m) if v0 is None else np.asarray(v0, dtype=float).reshape(m)
    u_hat0 = np.zeros(m * (mu + 1)) if u_hat0 is None else np.asarray(u_hat0, dtype=float).reshape(m * (mu + 1))
    return ControllerState(
        v_prev=v0.copy(),
        u_hat_prev=u_hat0.copy(),
        us_prev=v0.copy(),
        u_window=warmup.u[-n:].copy(),
        y_window=warmup.y[-n:].copy(),
    )


def _relative_check(residual: float, rhs: np.ndarray, tol: float | None) -> bool:
    return tol is None or residual <= tol * (1.0 + float(np.linalg.norm(rhs)))


def compute_omega(M: DataMatrices, v) -> np.ndarray:
    """Coefficients of the zero-initial-condition trajectory with constant input ``v``."""
    return M.W_omega @ np.asarray(v, dtype=float)


def alpha_rhs(M: DataMatrices, state: ControllerState) -> np.ndarray:
    m = M.m
    return np.concatenate(
        [
            state.u_window.ravel(),
            state.u_hat_prev[m:],
            np.tile(state.us_prev - state.v_prev, M.n + 1),
            state.y_window.ravel(),
        ]
    )


def compute_alpha(M: DataMatrices, state: ControllerState, tol: float | None = 1e-6) -> np.ndarray:
    """Coefficients reproducing the measured window followed by the shifted plan.

    Raises:
        InconsistentWindowError: the window is not a plant trajectory (residual
            above ``tol * (1 + ||rhs||)``).
    """
    rhs = alpha_rhs(M, state)
    alpha = M.H_alpha_pinv @ rhs
    if tol is not None:
        residual = float(np.linalg.norm(M.H_alpha @ alpha - rhs))
        if not _relative_check(residual, rhs, tol):
            raise InconsistentWindowError("measured window is not consistent with the data", residual)
    return alpha


def predict_output(M: DataMatrices, alpha, omega) -> np.ndarray:
    """The output ``mu`` steps ahead along the current plan."""
    return M.Y_pred @ (alpha + omega)


def descend_output(y_hat, grad_y: Gradient | None, gamma_y: float) -> np.ndarray:
    y_hat = np.asarray(y_hat, dtype=float)
    if grad_y is None:
        return y_hat.copy()
    return y_hat - gamma_y * np.asarray(grad_y(y_hat), dtype=float)


def steady_input(M: DataMatrices, v, y_s, tol: float | None = 1e-6) -> np.ndarray:
    """Steady-state input for ``y_s`` closest to ``v``."""
    u = M.steady.P0 @ v - M.steady.S_u_pinv_S_y @ y_s
    if tol is not None:
        r = is_equilibrium(M.steady, u, y_s)
        if r > equilibrium_threshold(u, y_s, tol):
            raise InfeasibleOutputError("desired output is not a steady-state output", r)
    return u


def beta_rhs(M: DataMatrices, combined, u_s, y_s) -> np.ndarray:
    n, m, p = M.n, M.m, M.p
    return np.concatenate(
        [
            np.zeros(m * n),
            np.tile(u_s, n + 1) - M.U_term @ combined,
            np.zeros(p * n),
            np.tile(y_s, n) - M.Y_term @ combined,
        ]
    )


def compute_beta(M: DataMatrices, alpha, omega, u_s, y_s, tol: float | None = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """Correction that steers the plan onto ``(u_s, y_s)`` at the end of the horizon.

    Returns ``(beta, g)`` with ``H_beta beta = g`` and ``||Q beta||`` minimal.
    """
    g = beta_rhs(M, alpha + omega, u_s, y_s)
    beta = M.B_bar @ g
    if tol is not None:
        residual = float(np.linalg.norm(M.H_beta @ beta - g))
        if not _relative_check(residual, g, tol):
            raise InfeasibleError("terminal constraint is infeasible (mu below controllability index?)", residual)
    return beta, g


def advance(
    state: ControllerState,
    M: DataMatrices,
    grad_u_prev: Gradient | None,
    grad_y_prev: Gradient | None,
    y_measured=None,
    config: ControllerConfig | None = None,
) -> tuple[np.ndarray, StepDiagnostics]:
    """One controller step at time ``state.t``.

    Args:
        state: updated in place.
        M: precomputed data matrices.
        grad_u_prev, grad_y_prev: gradients of the cost revealed at ``t - 1``;
            ``None`` means no cost has been revealed yet (zero gradient).
        y_measured: output measured after the previous input. Required for
            every step after the first.
        config: supplies step sizes and tolerances (defaults if omitted).

    Returns:
        The input ``u_t`` to apply and the step's intermediate quantities.
    """
    cfg = config if config is not None else ControllerConfig(n_bar=M.n, mu=M.mu)
    t = state.t
    try:
        if state.pending_u is not None:
            if y_measured is None:
                raise InvalidInputError("the previous output measurement is required")
            y_measured = np.asarray(y_measured, dtype=float).reshape(M.p)
            state.u_window = np.vstack([state.u_window[1:], state.pending_u])
            state.y_window = np.vstack([state.y_window[1:], y_measured])

        v_prev = state.v_prev
        if grad_u_prev is None:
            v = v_prev.copy()
        else:
            v = v_prev - cfg.gamma_u * np.asarray(grad_u_prev(v_prev), dtype=float)

        omega = compute_omega(M, v)
        alpha = compute_alpha(M, state, cfg.window_tol)
        y_hat = predict_output(M, alpha, omega)
        y_s = descend_output(y_hat, grad_y_prev, cfg.gamma_y)
        u_s = steady_input(M, v, y_s, cfg.steady_tol)
        beta, g = compute_beta(M, alpha, omega, u_s, y_s, cfg.beta_tol)

        u_hat = np.concatenate([state.u_hat_prev[M.m :], state.us_prev - v_prev]) + M.U_plan @ beta
        u = u_hat[: M.m] + v
    except DdocoError as exc:
        exc.step = t
        raise

    state.v_cur = v
    state.v_prev = v
    state.us_prev = u_s
    state.u_hat_prev = u_hat
    state.pending_u = u
    state.alpha_prev, state.beta_prev, state.omega_prev = alpha, beta, omega
    state.t = t + 1
    diag = StepDiagnostics(t, v, y_hat, y_s, u_s, omega, alpha, beta, g, u_hat)
    return u, diag


@dataclass
class Controller:
    """Convenience wrapper holding the matrices, config and state together."""

    M: DataMatrices
    config: ControllerConfig
    state: ControllerState
    history: list[StepDiagnostics] = field(default_factory=list)
    keep_history: bool = False
    last: StepDiagnostics | None = None

    @classmethod
    def from_data(cls, data: Trajectory, config: ControllerConfig, warmup: Trajectory, v0=None, **kw) -> "Controller":
        M = precompute(data, config)
        return cls(M, config, init_state(M, warmup, v0), **kw)

    def step(self, grad_u_prev: Gradient | None, grad_y_prev: Gradient | None, y_measured=None) -> np.ndarray:
        u, diag = advance(self.state, self.M, grad_u_prev, grad_y_prev, y_measured, self.config)
        self.last = diag
        if self.keep_history:
            self.history.append(diag)
        return u
