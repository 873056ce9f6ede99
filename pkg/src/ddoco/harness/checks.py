"""Closed-loop identities evaluated on a recorded run.

Each function returns one error per step (max-abs over components) so
callers can report the worst case or locate the step where it broke.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..controller import DataMatrices, StepDiagnostics
from ..lti import LtiSystem


def recursive_prediction_errors(M: DataMatrices, diags: list[StepDiagnostics]) -> np.ndarray:
    """``Y^{mt:mt+n-1}(alpha_t + omega_{t-1})`` against ``Y^{mt+1:mt+n}`` of the previous full plan."""
    n, mt = M.n, M.mu_tilde
    Y_now, Y_prev = M.Y.rows(mt, mt + n - 1), M.Y.rows(mt + 1, mt + n)
    errs = [
        np.abs(Y_now @ (cur.alpha + prev.omega) - Y_prev @ (prev.alpha + prev.beta + prev.omega)).max()
        for prev, cur in zip(diags, diags[1:])
    ]
    return np.array(errs)


def terminal_output_errors(M: DataMatrices, diags: list[StepDiagnostics]) -> np.ndarray:
    """Full plan ends at ``y_s`` for its last ``n + 1`` outputs."""
    n, mt = M.n, M.mu_tilde
    Y_term = M.Y.rows(mt, mt + n)
    return np.array([np.abs(Y_term @ (d.alpha + d.beta + d.omega) - np.tile(d.y_s, n + 1)).max() for d in diags])


def terminal_equilibrium_residuals(M: DataMatrices, diags: list[StepDiagnostics]) -> np.ndarray:
    """Kernel-test residual of each step's target pair ``(u_s, y_s)``."""
    S = M.steady
    return np.array([np.linalg.norm(S.S_u @ d.u_s + S.S_y @ d.y_s) for d in diags])


def input_consistency_errors(M: DataMatrices, diags: list[StepDiagnostics], u_applied: np.ndarray) -> np.ndarray:
    """Applied ``u_t`` against the first planned input ``U^{n+1}(alpha + beta + omega)``."""
    U1 = M.U.rows(M.n + 1)
    return np.array([np.abs(U1 @ (d.alpha + d.beta + d.omega) - u).max() for d, u in zip(diags, u_applied)])


def prediction_errors(M: DataMatrices, diags: list[StepDiagnostics], sys: LtiSystem, states: np.ndarray) -> np.ndarray:
    """``y_hat_t`` against simulating the plan's inputs from the true state ``x_t``."""
    n, mu, m = M.n, M.mu, M.m
    U_plan = M.U.rows(n + 1, n + mu + 1)
    errs = []
    for d, x in zip(diags, states):
        plan = (U_plan @ (d.alpha + d.omega)).reshape(mu + 1, m)
        for u in plan[:-1]:
            x = sys.A @ x + sys.B @ u
        y = sys.C @ x + sys.D @ plan[-1]
        errs.append(np.abs(y - d.y_hat).max())
    return np.array(errs)


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.tolerance)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.value:.3e} (tol {self.tolerance:.1e})"


def _worst(errs: np.ndarray) -> float:
    return float(errs.max()) if errs.size else 0.0


def closed_loop_checks(M, diags, sys, states, u_applied, regret_total, total_cost, tol: float = 1e-6) -> list[CheckResult]:
    return [
        CheckResult("recursive_predictions", _worst(recursive_prediction_errors(M, diags)), tol),
        CheckResult("terminal_output", _worst(terminal_output_errors(M, diags)), tol),
        CheckResult("terminal_equilibrium", _worst(terminal_equilibrium_residuals(M, diags)), tol),
        CheckResult("input_consistency", _worst(input_consistency_errors(M, diags, u_applied)), 1e-8),
        CheckResult("prediction_soundness", _worst(prediction_errors(M, diags, sys, states)), tol),
        CheckResult("regret_nonnegative", max(0.0, -regret_total), 1e-6 * (1 + abs(total_cost))),
    ]


def check_run(record, report, system, tol: float = 1e-6) -> list[CheckResult]:
    """Evaluate every identity on a finished run (needs its diagnostics)."""
    return closed_loop_checks(
        record.matrices, record.diagnostics, system, record.states, record.u,
        report.total, float(report.realized.sum()), tol,
    )
