"""Steady states characterized from data alone.

An input/output pair ``(u, y)`` is an equilibrium iff ``S_u u + S_y y = 0``
where ``[S_u S_y] = (H H^+ - I) blockdiag(1 (x) I_m, 1 (x) I_p)`` and ``H``
stacks the depth ``n+1`` Hankel matrices of the data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleOutputError
from .hankel import (
    HankelBlock,
    Trajectory,
    build_hankel,
    require_persistent_excitation,
    trajectory_residual,
)
from .numerics import EPS, RankTolerance, _tolerance, pseudoinverse, svd_split


@dataclass(frozen=True)
class SteadyMaps:
    S_u: np.ndarray
    S_y: np.ndarray
    S_u_pinv: np.ndarray
    P0: np.ndarray  # I_m - S_u^+ S_u
    S_u_pinv_S_y: np.ndarray
    n: int

    @property
    def m(self) -> int:
        return self.S_u.shape[1]

    @property
    def p(self) -> int:
        return self.S_y.shape[1]


def compute_steady_maps(
    data: Trajectory,
    n: int,
    tol: RankTolerance | float | None = None,
    pe_tol: RankTolerance | float | None = None,
) -> SteadyMaps:
    """Build the steady-state maps from a data trajectory.

    Args:
        data: recorded trajectory whose input must be persistently exciting
            of order ``2n + 1``.
        n: system order or an upper bound on it.
        tol: rank tolerance for the pseudoinverses. Noisy output data needs a
            cutoff above the noise floor.
        pe_tol: rank tolerance for the excitation check.

    Raises:
        InsufficientExcitationError: the excitation check fails.
    """
    m, p = data.m, data.p
    require_persistent_excitation(data.u, 2 * n + 1, pe_tol)

    H = np.vstack([build_hankel(data.u, n + 1).matrix, build_hankel(data.y, n + 1).matrix])
    # H H^+ - I = -Z Z^T with Z an orthonormal basis of the left null space of H
    _, s, _, Z, _ = svd_split(H, tol)
    ones = np.ones((n + 1, 1))
    k = m * (n + 1)
    Zu = Z[:k].T @ np.kron(ones, np.eye(m))
    Zy = Z[k:].T @ np.kron(ones, np.eye(p))
    S_u = -Z @ Zu
    S_y = -Z @ Zy
    # Z is only accurate to about eps * cond(H); with n above the true order Zu
    # is rank deficient and its spurious singular values sit at that level
    floor = max(H.shape) * EPS * (s[0] / s[-1]) if s.size else 0.0
    S_u_pinv = -pseudoinverse(Zu, max(_tolerance(tol).cutoff_for(H.shape), floor)) @ Z.T
    P0 = np.eye(m) - S_u_pinv @ S_u
    P0 = 0.5 * (P0 + P0.T)
    return SteadyMaps(S_u, S_y, S_u_pinv, P0, S_u_pinv @ S_y, n)


def is_equilibrium(maps: SteadyMaps, u, y) -> float:
    """Kernel-test residual ``||S_u u + S_y y||``; zero exactly on equilibria."""
    return float(np.linalg.norm(maps.S_u @ np.asarray(u, dtype=float) + maps.S_y @ np.asarray(y, dtype=float)))


def equilibrium_threshold(u, y, tol: float = 1e-6) -> float:
    """Residual bound ``tol * (1 + ||(u, y)||)`` below which a pair counts as an equilibrium."""
    return tol * (1.0 + float(np.linalg.norm(np.concatenate([np.ravel(u), np.ravel(y)]))))


def is_equilibrium_by_definition(
    U: HankelBlock, Y: HankelBlock, u, y, tol: RankTolerance | float | None = None
) -> float:
    """Membership residual of ``(u, y)`` held constant over ``U.depth`` steps."""
    L = U.depth
    u = np.asarray(u, dtype=float).reshape(1, -1)
    y = np.asarray(y, dtype=float).reshape(1, -1)
    return trajectory_residual(Trajectory(np.repeat(u, L, 0), np.repeat(y, L, 0)), U, Y, tol)


def nearest_steady_input(maps: SteadyMaps, v, y, feasibility_tol: float | None = 1e-6) -> np.ndarray:
    """The input closest to ``v`` that makes ``(u, y)`` an equilibrium.

    ``u = P0 v - S_u^+ S_y y``. With ``feasibility_tol=None`` the equilibrium
    check on the result is skipped.

    Raises:
        InfeasibleOutputError: ``y`` is not a steady-state output.
    """
    v = np.asarray(v, dtype=float)
    y = np.asarray(y, dtype=float)
    u = maps.P0 @ v - maps.S_u_pinv_S_y @ y
    if feasibility_tol is not None:
        r = is_equilibrium(maps, u, y)
        if r > equilibrium_threshold(u, y, feasibility_tol):
            raise InfeasibleOutputError("output is not a steady-state output", r)
    return u
