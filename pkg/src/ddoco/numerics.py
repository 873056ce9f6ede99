"""Dense linear-algebra primitives: SVD pseudoinverse, numerical rank and the
weighted minimum-norm solve used for the terminal-constraint correction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, InvalidInputError

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class RankTolerance:
    """Singular values below ``relative_cutoff * sigma_max`` count as zero.

    ``relative_cutoff=None`` means ``max(rows, cols) * eps``, resolved per matrix.
    """

    relative_cutoff: float | None = None

    def __post_init__(self):
        if self.relative_cutoff is not None and not self.relative_cutoff > 0:
            raise InvalidInputError("relative_cutoff must be positive")

    def cutoff_for(self, shape: tuple[int, ...]) -> float:
        if self.relative_cutoff is None:
            return max(shape) * EPS
        return self.relative_cutoff


def _tolerance(tol: RankTolerance | float | None) -> RankTolerance:
    if isinstance(tol, RankTolerance):
        return tol
    return RankTolerance(tol)


def _as_finite_matrix(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise InvalidInputError(f"expected a 2-D matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError("matrix has non-finite entries")
    return M


def svd_split(M, tol: RankTolerance | float | None = None):
    """Full SVD split at the numerical rank.

    Returns ``(U_r, s_r, V_r, U_null, V_null)``: the range factors with
    ``M = U_r diag(s_r) V_r^T``, and orthonormal bases of the left and right
    null spaces.
    """
    M = _as_finite_matrix(M)
    U, s, Vt = np.linalg.svd(M, full_matrices=True)
    r = 0 if s.size == 0 or s[0] == 0 else int(np.count_nonzero(s > _tolerance(tol).cutoff_for(M.shape) * s[0]))
    return U[:, :r], s[:r], Vt[:r].T, U[:, r:], Vt[r:].T


def pseudoinverse(M, tol: RankTolerance | float | None = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse through the thin SVD.

    Args:
        M: matrix of shape (r, c).
        tol: rank tolerance; a bare float is read as the relative cutoff.

    Returns:
        Array of shape (c, r).
    """
    M = _as_finite_matrix(M)
    r, c = M.shape
    if M.size == 0:
        return np.zeros((c, r))
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    if s[0] == 0:
        return np.zeros((c, r))
    keep = s > _tolerance(tol).cutoff_for(M.shape) * s[0]
    return (Vt[keep].T / s[keep]) @ U[:, keep].T


def numerical_rank(M, tol: RankTolerance | float | None = None) -> int:
    M = _as_finite_matrix(M)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.count_nonzero(s > _tolerance(tol).cutoff_for(M.shape) * s[0]))


def weighted_min_norm_operator(H, Q, tol: RankTolerance | float | None = None) -> np.ndarray:
    """Linear map ``g -> beta`` minimizing ``||Q beta||`` over ``H beta = g``.

    The map is ``(I - (Q (I - H^+ H))^+ Q) H^+``. It is evaluated with the
    orthonormal null-space basis ``V`` of ``H``: ``I - H^+ H = V V^T`` and
    ``(Q V V^T)^+ = V (Q V)^+``, which keeps rounding noise in the projector
    from inflating the rank of ``Q (I - H^+ H)``.
    """
    H = _as_finite_matrix(H)
    Q = _as_finite_matrix(Q)
    if Q.shape[1] != H.shape[1]:
        raise InvalidInputError(f"Q has {Q.shape[1]} columns, H has {H.shape[1]}")
    U_r, s_r, V_r, _, V_null = svd_split(H, tol)
    H_pinv = (V_r / s_r) @ U_r.T
    if V_null.shape[1] == 0:
        return H_pinv
    QV = Q @ V_null
    return H_pinv - V_null @ (pseudoinverse(QV, tol) @ (Q @ H_pinv))


def weighted_min_norm_solve(
    H,
    g,
    Q,
    tol: RankTolerance | float | None = None,
    feasibility_tol: float = 1e-6,
) -> np.ndarray:
    """Solve ``min ||Q beta|| s.t. H beta = g`` with the weighted pseudoinverse.

    Raises:
        InfeasibleError: if ``||H beta - g|| > feasibility_tol * (1 + ||g||)``.
    """
    g = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(g)):
        raise InvalidInputError("right-hand side has non-finite entries")
    op = weighted_min_norm_operator(H, Q, tol)
    beta = op @ g
    residual = float(np.linalg.norm(np.asarray(H, dtype=float) @ beta - g))
    if residual > feasibility_tol * (1.0 + np.linalg.norm(g)):
        raise InfeasibleError("H beta = g is inconsistent", residual)
    return beta
