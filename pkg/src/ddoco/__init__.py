"""Data-driven online convex optimization for unknown LTI plants.

The controller works from one recorded input/output trajectory (Hankel
matrices) and never sees a state-space model.
"""

from .controller import Controller, ControllerConfig, precompute
from .costs import CostPair, CostSchedule, quadratic_tracking
from .equilibria import SteadyMaps, compute_steady_maps
from .errors import DdocoError
from .hankel import Trajectory, build_hankel, is_persistently_exciting
from .lti import LtiSystem, random_system, solve_hindsight
from .regret import RegretReport, compute_regret

__all__ = [
    "Controller",
    "ControllerConfig",
    "CostPair",
    "CostSchedule",
    "DdocoError",
    "LtiSystem",
    "RegretReport",
    "SteadyMaps",
    "Trajectory",
    "build_hankel",
    "compute_regret",
    "compute_steady_maps",
    "is_persistently_exciting",
    "precompute",
    "quadratic_tracking",
    "random_system",
    "solve_hindsight",
]
