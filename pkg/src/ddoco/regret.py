"""Dynamic regret against the hindsight-optimal trajectory."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .costs import CostSchedule
from .errors import InvalidInputError
from .hankel import Trajectory
from .lti import LtiSystem, solve_hindsight


@dataclass(frozen=True)
class RegretReport:
    realized: np.ndarray  # L_t(u_t, y_t)
    hindsight: np.ndarray  # L_t(u*_t, y*_t)
    cumulative: np.ndarray  # R(tau) for tau = 0..T
    theta_variation: float
    eta_variation: float
    hindsight_trajectory: Trajectory
    equilibrium: np.ndarray  # L_t(eta_t, theta_t), the per-step comparator

    @property
    def total(self) -> float:
        return float(self.cumulative[-1])

    @property
    def equilibrium_regret(self) -> float:
        return float(np.sum(self.realized - self.equilibrium))


def _path_length(points: np.ndarray, first_prev: np.ndarray | None) -> float:
    prev = points[:1] if first_prev is None else np.asarray(first_prev, dtype=float).reshape(1, -1)
    steps = np.diff(np.vstack([prev, points]), axis=0)
    return float(np.sum(np.linalg.norm(steps, axis=1)))


def variation_metrics(schedule: CostSchedule, eta_prev=None, theta_prev=None) -> tuple[float, float]:
    """Path lengths ``(Theta_T, N_T)`` of the output and input minimizers.

    ``theta_prev``/``eta_prev`` stand in for ``theta_{-1}``/``eta_{-1}``; by
    default they equal the first minimizers, so a constant schedule has zero
    variation.
    """
    etas, thetas = schedule.minimizers()
    return _path_length(thetas, theta_prev), _path_length(etas, eta_prev)


def compute_regret(
    realized: Trajectory,
    sys: LtiSystem,
    schedule: CostSchedule,
    x0,
    eta_prev=None,
    theta_prev=None,
) -> RegretReport:
    """Compare a closed-loop trajectory with the optimum computed in hindsight.

    Args:
        realized: applied inputs and true plant outputs for ``t = 0..T``.
        sys: the plant (only its matrices are used).
        schedule: the costs, horizon ``T``.
        x0: plant state at ``t = 0``.
        eta_prev, theta_prev: conventions for the variation metrics.
    """
    T1 = schedule.horizon + 1
    if len(realized) != T1:
        raise InvalidInputError(f"trajectory has {len(realized)} samples, schedule horizon needs {T1}")
    seq = schedule.sequence()
    optimal, _ = solve_hindsight(sys, seq, x0)
    realized_cost = np.array([c.value(realized.u[t], realized.y[t]) for t, c in enumerate(seq)])
    hindsight_cost = np.array([c.value(optimal.u[t], optimal.y[t]) for t, c in enumerate(seq)])
    equilibrium_cost = np.array([c.value(c.eta, c.theta) for c in seq])
    theta_var, eta_var = variation_metrics(schedule, eta_prev, theta_prev)
    return RegretReport(
        realized=realized_cost,
        hindsight=hindsight_cost,
        cumulative=np.cumsum(realized_cost - hindsight_cost),
        theta_variation=theta_var,
        eta_variation=eta_var,
        hindsight_trajectory=optimal,
        equilibrium=equilibrium_cost,
    )
