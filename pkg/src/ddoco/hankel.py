"""Hankel matrices of input/output signals and trajectory membership tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InsufficientExcitationError, InvalidDepthError, InvalidIndexError, InvalidInputError
from .numerics import RankTolerance, numerical_rank, pseudoinverse


def _as_signal(z, name: str = "signal") -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if z.ndim != 2:
        raise InvalidInputError(f"{name} must be a (length, dim) array, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return z


@dataclass(frozen=True)
class Trajectory:
    """Paired input/output samples; ``u`` is (N, m), ``y`` is (N, p)."""

    u: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        u = _as_signal(self.u, "inputs")
        y = _as_signal(self.y, "outputs")
        if len(u) != len(y):
            raise InvalidInputError(f"{len(u)} inputs but {len(y)} outputs")
        if u.shape[1] < 1 or y.shape[1] < 1:
            raise InvalidInputError("input and output dimensions must be at least 1")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return len(self.u)

    @property
    def m(self) -> int:
        return self.u.shape[1]

    @property
    def p(self) -> int:
        return self.y.shape[1]

    def window(self, start: int, length: int) -> "Trajectory":
        if start < 0 or start + length > len(self):
            raise InvalidIndexError(f"window [{start}, {start + length}) outside [0, {len(self)})")
        return Trajectory(self.u[start : start + length], self.y[start : start + length])

    def stacked(self) -> np.ndarray:
        """The vector ``[u_0; ...; u_{N-1}; y_0; ...; y_{N-1}]``."""
        return np.concatenate([self.u.ravel(), self.y.ravel()])

    @classmethod
    def from_stacked(cls, w, m: int, p: int) -> "Trajectory":
        w = np.asarray(w, dtype=float)
        length, rem = divmod(w.size, m + p)
        if rem:
            raise InvalidInputError(f"vector of size {w.size} does not split into (m={m}, p={p}) samples")
        return cls(w[: m * length].reshape(length, m), w[m * length :].reshape(length, p))


@dataclass(frozen=True)
class HankelBlock:
    """Depth-``depth`` Hankel matrix of a signal with ``block_size`` channels."""

    depth: int
    block_size: int
    matrix: np.ndarray

    @property
    def columns(self) -> int:
        return self.matrix.shape[1]

    def rows(self, a: int, b: int | None = None) -> np.ndarray:
        """Block rows ``a`` through ``b`` (1-based, inclusive)."""
        return block_rows(self, a, a if b is None else b)


def build_hankel(z, L: int) -> HankelBlock:
    """Stack the length-``L`` windows of ``z`` as columns.

    >>> build_hankel([1.0, 2.0, 3.0], 2).matrix
    array([[1., 2.],
           [2., 3.]])
    """
    z = _as_signal(z)
    N, dim = z.shape
    if not 1 <= L <= N:
        raise InvalidDepthError(f"depth {L} not in [1, {N}]")
    # windows[j] is z[j:j+L] as a (dim, L) view
    windows = sliding_window_view(z, L, axis=0)
    matrix = windows.transpose(2, 1, 0).reshape(L * dim, N - L + 1).copy()
    return HankelBlock(L, dim, matrix)


def block_rows(H: HankelBlock, a: int, b: int) -> np.ndarray:
    if not 1 <= a <= b <= H.depth:
        raise InvalidIndexError(f"block rows {a}:{b} outside 1:{H.depth}")
    k = H.block_size
    return H.matrix[(a - 1) * k : b * k]


def is_persistently_exciting(u, L: int, tol: RankTolerance | float | None = None) -> bool:
    u = _as_signal(u, "inputs")
    N, m = u.shape
    if m * L > N - L + 1:
        return False
    return numerical_rank(build_hankel(u, L).matrix, tol) == m * L


def require_persistent_excitation(u, L: int, tol: RankTolerance | float | None = None) -> None:
    """Raise :class:`InsufficientExcitationError` unless ``u`` is PE of order ``L``."""
    u = _as_signal(u, "inputs")
    N, m = u.shape
    if L > N:
        raise InsufficientExcitationError(L, 0, m * L)
    rank = numerical_rank(build_hankel(u, L).matrix, tol)
    if rank != m * L:
        raise InsufficientExcitationError(L, rank, m * L)


def _check_pair(U: HankelBlock, Y: HankelBlock) -> None:
    if U.depth != Y.depth or U.columns != Y.columns:
        raise InvalidInputError("U and Y must come from the same trajectory at the same depth")


def trajectory_residual(
    candidate: Trajectory, U: HankelBlock, Y: HankelBlock, tol: RankTolerance | float | None = None
) -> float:
    """Distance of ``candidate`` from the column span of ``[U; Y]``.

    Zero (to rounding) exactly when the candidate is a trajectory of the
    system that produced the data, provided the data input is persistently
    exciting of order ``L + n``.
    """
    _check_pair(U, Y)
    if len(candidate) != U.depth or candidate.m != U.block_size or candidate.p != Y.block_size:
        raise InvalidInputError(
            f"candidate of length {len(candidate)} (m={candidate.m}, p={candidate.p}) does not match "
            f"depth {U.depth} (m={U.block_size}, p={Y.block_size})"
        )
    H = np.vstack([U.matrix, Y.matrix])
    w = candidate.stacked()
    alpha = pseudoinverse(H, tol) @ w
    return float(np.linalg.norm(H @ alpha - w))


def expand(alpha, U: HankelBlock, Y: HankelBlock) -> Trajectory:
    """The trajectory ``[U; Y] alpha`` as a length-``depth`` sequence."""
    _check_pair(U, Y)
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (U.columns,):
        raise InvalidInputError(f"alpha must have shape ({U.columns},), got {alpha.shape}")
    L = U.depth
    return Trajectory((U.matrix @ alpha).reshape(L, U.block_size), (Y.matrix @ alpha).reshape(L, Y.block_size))
