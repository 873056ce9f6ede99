"""Time-varying separable costs ``L_t(u, y) = f_t^u(u) + f_t^y(y)`` and the
online-gradient-descent step applied to them."""

from __future__ import annotations

import bisect
import itertools
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InfeasibleError, InvalidInputError

Vector = np.ndarray


@dataclass(frozen=True)
class CostPair:
    """One stage cost. ``eta``/``theta`` are the minimizers of the input and
    output parts; quadratic costs also carry their Hessians so the hindsight
    solver can use them."""

    f_u: Callable[[Vector], float]
    f_y: Callable[[Vector], float]
    grad_u: Callable[[Vector], Vector]
    grad_y: Callable[[Vector], Vector]
    eta: Vector
    theta: Vector
    alpha_u: float = 1.0
    alpha_y: float = 1.0
    l_u: float = 1.0
    l_y: float = 1.0
    lipschitz_u: float | None = None
    lipschitz_y: float | None = None
    hess_u: np.ndarray | None = None
    hess_y: np.ndarray | None = None

    def __post_init__(self):
        if not (0 < self.alpha_u <= self.l_u and 0 < self.alpha_y <= self.l_y):
            raise InvalidInputError("need 0 < alpha <= l for both cost parts")

    def value(self, u, y) -> float:
        return float(self.f_u(np.asarray(u, dtype=float)) + self.f_y(np.asarray(y, dtype=float)))


def _box_radius(center: np.ndarray, lo, hi) -> float:
    """Largest distance from ``center`` to a point of the box ``[lo, hi]``."""
    lo = np.broadcast_to(np.asarray(lo, dtype=float), center.shape)
    hi = np.broadcast_to(np.asarray(hi, dtype=float), center.shape)
    return float(np.linalg.norm(np.maximum(np.abs(center - lo), np.abs(hi - center))))


def quadratic_tracking(
    eta,
    theta,
    u_box: tuple | None = None,
    y_box: tuple | None = None,
) -> CostPair:
    """``f^u(u) = 0.5 ||u - eta||^2`` and ``f^y(y) = 0.5 ||y - theta||^2``.

    If operating boxes ``(lo, hi)`` are given, the Lipschitz constants of the
    two parts over those boxes are recorded (diagnostic only).
    """
    eta = np.array(eta, dtype=float).ravel()
    theta = np.array(theta, dtype=float).ravel()
    if not (np.all(np.isfinite(eta)) and np.all(np.isfinite(theta))):
        raise InvalidInputError("targets must be finite")
    eta.setflags(write=False)
    theta.setflags(write=False)
    return CostPair(
        f_u=lambda u: 0.5 * float(np.sum((u - eta) ** 2)),
        f_y=lambda y: 0.5 * float(np.sum((y - theta) ** 2)),
        grad_u=lambda u: np.asarray(u, dtype=float) - eta,
        grad_y=lambda y: np.asarray(y, dtype=float) - theta,
        eta=eta,
        theta=theta,
        lipschitz_u=None if u_box is None else _box_radius(eta, *u_box),
        lipschitz_y=None if y_box is None else _box_radius(theta, *y_box),
        hess_u=np.eye(eta.size),
        hess_y=np.eye(theta.size),
    )


def ogd_step(z, grad, gamma: float, alpha: float | None = None, l: float | None = None) -> np.ndarray:
    """One gradient step ``z - gamma * grad``.

    When the strong-convexity and smoothness constants are supplied, a step
    above ``2 / (l + alpha)`` triggers a warning (contraction no longer
    guaranteed) but is still taken.
    """
    z = np.asarray(z, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if z.shape != grad.shape:
        raise InvalidInputError(f"point {z.shape} and gradient {grad.shape} differ in shape")
    if alpha is not None and l is not None and gamma > 2.0 / (l + alpha):
        warnings.warn(f"step size {gamma} exceeds 2/(l+alpha) = {2.0 / (l + alpha):.4g}", stacklevel=2)
    return z - gamma * grad


@dataclass(frozen=True)
class CostSchedule:
    """Piecewise-constant cost sequence: ``costs[i]`` is active from ``times[i]``
    until the next activation time, over ``t = 0..horizon``."""

    times: tuple[int, ...]
    costs: tuple[CostPair, ...]
    horizon: int

    def __post_init__(self):
        times = tuple(int(t) for t in self.times)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "costs", tuple(self.costs))
        if len(times) != len(self.costs) or not times:
            raise InvalidInputError("need one cost per activation time, at least one")
        if times[0] != 0:
            raise InvalidInputError("first activation time must be 0")
        if any(b <= a for a, b in itertools.pairwise(times)):
            raise InvalidInputError("activation times must be strictly increasing")
        if self.horizon < 0:
            raise InvalidInputError("horizon must be nonnegative")

    def __len__(self) -> int:
        return self.horizon + 1

    def at(self, t: int) -> CostPair:
        if not 0 <= t <= self.horizon:
            raise InvalidInputError(f"time {t} outside [0, {self.horizon}]")
        return self.costs[bisect.bisect_right(self.times, t) - 1]

    def sequence(self) -> list[CostPair]:
        return [self.at(t) for t in range(self.horizon + 1)]

    def minimizers(self) -> tuple[np.ndarray, np.ndarray]:
        """Arrays ``(eta, theta)`` of shape (T+1, m) and (T+1, p)."""
        seq = self.sequence()
        return np.array([c.eta for c in seq]), np.array([c.theta for c in seq])

    def with_horizon(self, horizon: int) -> "CostSchedule":
        keep = [i for i, t in enumerate(self.times) if t <= horizon]
        return CostSchedule(tuple(self.times[i] for i in keep), tuple(self.costs[i] for i in keep), horizon)


def validate_schedule(schedule: CostSchedule, residual: Callable[[Vector, Vector], float], tol: float = 1e-6) -> None:
    """Reject schedules whose minimizer pairs are not equilibria.

    ``residual(u, y)`` is any equilibrium residual (data-driven kernel test or
    model-based); the threshold is ``tol * (1 + ||(eta, theta)||)``.
    """
    for t, cost in zip(schedule.times, schedule.costs):
        r = residual(cost.eta, cost.theta)
        scale = 1.0 + np.linalg.norm(np.concatenate([cost.eta, cost.theta]))
        if r > tol * scale:
            raise InfeasibleError(f"minimizers active from t={t} are not an equilibrium", r)


def equilibrium_schedule(
    steady_output: Callable[[Vector], Vector],
    switch_times: Sequence[int],
    etas: Sequence,
    horizon: int,
    u_box: tuple | None = None,
    y_box: tuple | None = None,
) -> CostSchedule:
    """Quadratic tracking schedule with ``theta_i = steady_output(eta_i)``."""
    costs = []
    for eta in etas:
        eta = np.asarray(eta, dtype=float)
        costs.append(quadratic_tracking(eta, steady_output(eta), u_box, y_box))
    return CostSchedule(tuple(switch_times), tuple(costs), horizon)
