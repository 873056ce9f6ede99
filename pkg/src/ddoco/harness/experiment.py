"""Closed-loop experiments: data generation, noise, the online loop, output."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..controller import Controller, ControllerConfig, StepDiagnostics, minimum_data_length
from ..costs import CostSchedule, equilibrium_schedule, validate_schedule
from ..errors import DdocoError, GenerationFailureError, InvalidInputError
from ..hankel import Trajectory, is_persistently_exciting
from ..lti import LtiSystem, stabilizing_gain
from ..regret import RegretReport, compute_regret
from .config import ExperimentConfig

log = logging.getLogger(__name__)

# stream indices for SeedSequence.spawn
_SYSTEM, _DATA, _SCHEDULE, _DATA_NOISE, _MEAS_NOISE = range(5)


def streams(seed: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(5)]


def generate_data(
    sys: LtiSystem,
    N: int,
    rng: np.random.Generator,
    order: int,
    low: float = -1.0,
    high: float = 1.0,
    feedback: str = "lqr",
    max_retries: int = 10,
) -> Trajectory:
    """Record ``N`` samples from the plant starting at rest.

    The excitation is i.i.d. uniform on ``[low, high]`` per channel. With
    ``feedback="lqr"`` the applied input is ``K x + e`` for a stabilizing
    gain ``K``, which keeps the recorded signals bounded for unstable plants.
    The input must be persistently exciting of ``order``; a fresh excitation
    is drawn up to ``max_retries`` times.

    Raises:
        GenerationFailureError: no draw was exciting enough.
    """
    if feedback not in ("lqr", "none"):
        raise InvalidInputError(f"unknown feedback mode {feedback!r}")
    K = stabilizing_gain(sys) if feedback == "lqr" else np.zeros((sys.m, sys.n))
    for _ in range(max_retries):
        e = rng.uniform(low, high, (N, sys.m))
        x = np.zeros(sys.n)
        u = np.empty((N, sys.m))
        y = np.empty((N, sys.p))
        for k in range(N):
            u[k] = K @ x + e[k]
            y[k] = sys.C @ x + sys.D @ u[k]
            x = sys.A @ x + sys.B @ u[k]
        if is_persistently_exciting(u, order):
            return Trajectory(u, y)
    raise GenerationFailureError(
        f"input not persistently exciting of order {order} after {max_retries} draws (N={N}, m={sys.m})"
    )


def ball_noise(rng: np.random.Generator, count: int, dim: int, bound: float) -> np.ndarray:
    """``count`` samples uniform on the Euclidean ball of radius ``bound`` in R^dim."""
    if bound < 0:
        raise InvalidInputError("noise bound must be nonnegative")
    if bound == 0:
        return np.zeros((count, dim))
    direction = rng.standard_normal((count, dim))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    radius = bound * rng.uniform(size=(count, 1)) ** (1.0 / dim)
    return direction * radius


def inject_noise(values, bound: float, rng: np.random.Generator) -> np.ndarray:
    """Add per-sample noise with ``||eps_k|| <= bound`` to a (count, dim) array."""
    values = np.asarray(values, dtype=float)
    flat = values.reshape(len(values), -1) if values.ndim > 1 else values.reshape(-1, 1)
    return (flat + ball_noise(rng, len(flat), flat.shape[1], bound)).reshape(values.shape)


@dataclass
class RunRecord:
    """Per-step log of a closed-loop run, one row per ``t = 0..T``."""

    t: np.ndarray
    u: np.ndarray
    y: np.ndarray
    y_measured: np.ndarray
    eta: np.ndarray
    theta: np.ndarray
    u_s: np.ndarray
    y_s: np.ndarray
    y_hat: np.ndarray
    stage_cost: np.ndarray
    hindsight_cost: np.ndarray
    cumulative_regret: np.ndarray
    states: np.ndarray = field(repr=False, default=None)  # plant state before u_t, for checks
    diagnostics: list = field(repr=False, default=None)
    matrices: object = field(repr=False, default=None)

    def __len__(self) -> int:
        return len(self.t)

    def columns(self) -> tuple[list[str], np.ndarray]:
        names, blocks = ["t"], [self.t[:, None].astype(float)]
        for name, arr in [
            ("u_t", self.u),
            ("y_t", self.y),
            ("y_meas", self.y_measured),
            ("eta_t", self.eta),
            ("theta_t", self.theta),
            ("us_t", self.u_s),
            ("ys_t", self.y_s),
            ("yhat_t", self.y_hat),
        ]:
            names += [f"{name}_{i}" for i in range(arr.shape[1])]
            blocks.append(arr)
        for name, arr in [
            ("stage_cost", self.stage_cost),
            ("hindsight_cost", self.hindsight_cost),
            ("cumulative_regret", self.cumulative_regret),
        ]:
            names.append(name)
            blocks.append(arr[:, None])
        return names, np.hstack(blocks)

    def write_csv(self, path: str | Path) -> None:
        names, table = self.columns()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(names)
            for row in table:
                writer.writerow([str(int(row[0]))] + [f"{v:.17g}" for v in row[1:]])


def read_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        names = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    return names, np.array(rows)


def write_trajectory_csv(traj: Trajectory, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k"] + [f"u_{i}" for i in range(traj.m)] + [f"y_{i}" for i in range(traj.p)])
        for k in range(len(traj)):
            writer.writerow([k] + [f"{v:.17g}" for v in np.concatenate([traj.u[k], traj.y[k]])])


def read_trajectory_csv(path: str | Path) -> Trajectory:
    names, table = read_csv(path)
    m = sum(1 for n in names if n.startswith("u_"))
    return Trajectory(table[:, 1 : 1 + m], table[:, 1 + m :])


@dataclass
class Setup:
    """Everything a run needs before the loop starts."""

    config: ExperimentConfig
    system: LtiSystem
    data: Trajectory
    recorded: Trajectory  # data as seen by the controller (possibly noisy)
    schedule: CostSchedule
    controller_config: ControllerConfig
    rngs: list[np.random.Generator]


def build_system(cfg: ExperimentConfig) -> LtiSystem:
    spec = cfg.system
    return spec.build(cfg.seed)


def build_schedule(cfg: ExperimentConfig, sys: LtiSystem, rng: np.random.Generator) -> CostSchedule:
    times = cfg.schedule.times(cfg.horizon)
    etas = [rng.uniform(cfg.schedule.eta_low, cfg.schedule.eta_high, sys.m) for _ in times]
    schedule = equilibrium_schedule(sys.steady_output, times, etas, cfg.horizon)
    validate_schedule(schedule, lambda u, y: steady_state_residual(sys, u, y))
    return schedule


def steady_state_residual(sys: LtiSystem, u, y) -> float:
    """Model-based equilibrium residual: distance of (u, y) from {(I-A)x = Bu, Cx + Du = y}."""
    M = np.vstack([np.eye(sys.n) - sys.A, sys.C])
    rhs = np.concatenate([sys.B @ u, np.asarray(y) - sys.D @ u])
    x = np.linalg.lstsq(M, rhs, rcond=None)[0]
    return float(np.linalg.norm(M @ x - rhs))


def prepare(cfg: ExperimentConfig) -> Setup:
    rngs = streams(cfg.seed)
    sys = build_system(cfg)
    ccfg = cfg.controller_config()
    order = 3 * ccfg.n_bar + ccfg.horizon + 1
    N_min = minimum_data_length(sys.m, ccfg.n_bar, ccfg.horizon)
    if cfg.data.length < N_min:
        raise GenerationFailureError(f"data length {cfg.data.length} below minimum {N_min}")
    data = generate_data(
        sys,
        cfg.data.length,
        rngs[_DATA],
        order,
        cfg.data.input_low,
        cfg.data.input_high,
        cfg.data.feedback,
        cfg.data.max_retries,
    )
    recorded = Trajectory(data.u, inject_noise(data.y, cfg.noise.data, rngs[_DATA_NOISE]))
    schedule = build_schedule(cfg, sys, rngs[_SCHEDULE])
    return Setup(cfg, sys, data, recorded, schedule, ccfg, rngs)


@dataclass
class LoopResult:
    realized: Trajectory
    measured: np.ndarray
    states: np.ndarray
    diagnostics: list[StepDiagnostics]
    x0: np.ndarray


def closed_loop(
    controller: Controller,
    plant: LtiSystem,
    schedule,
    horizon: int,
    measurement_noise: np.ndarray | None = None,
) -> LoopResult:
    """Run ``t = 0..horizon``.

    Cost ``t`` is looked up only after ``u_t`` has been applied, and the step
    at ``t`` sees gradients of cost ``t - 1`` and outputs up to ``y_{t-1}``.
    """
    m, p = plant.m, plant.p
    u_log = np.empty((horizon + 1, m))
    y_log = np.empty((horizon + 1, p))
    y_meas = np.empty((horizon + 1, p))
    states = np.empty((horizon + 1, plant.n))
    diags = []
    x0 = plant.x.copy()
    revealed = None
    y_prev = None
    for t in range(horizon + 1):
        grad_u = revealed.grad_u if revealed is not None else None
        grad_y = revealed.grad_y if revealed is not None else None
        try:
            u = controller.step(grad_u, grad_y, y_prev)
        except DdocoError as exc:
            exc.partial = LoopResult(Trajectory(u_log[:t], y_log[:t]), y_meas[:t], states[:t], diags, x0)
            raise
        diags.append(controller.last)
        states[t] = plant.x
        y = plant.step(u)
        u_log[t], y_log[t] = u, y
        y_meas[t] = y if measurement_noise is None else y + measurement_noise[t]
        y_prev = y_meas[t]
        revealed = schedule.at(t)
    return LoopResult(Trajectory(u_log, y_log), y_meas, states, diags, x0)


def run_experiment(cfg: ExperimentConfig, setup: Setup | None = None) -> tuple[RunRecord, RegretReport]:
    """Full closed-loop run with regret post-processing.

    Controller errors propagate with their ``step`` attribute set.
    """
    setup = prepare(cfg) if setup is None else setup
    sys, ccfg, T = setup.system, setup.controller_config, cfg.horizon

    plant = sys.copy()
    plant.x = np.zeros(sys.n)
    warmup = plant.simulate(np.zeros((ccfg.n_bar, sys.m)))
    warmup = Trajectory(warmup.u, inject_noise(warmup.y, cfg.noise.measurement, setup.rngs[_MEAS_NOISE]))
    controller = Controller.from_data(setup.recorded, ccfg, warmup)
    meas_noise = ball_noise(setup.rngs[_MEAS_NOISE], T + 1, sys.p, cfg.noise.measurement)

    loop = closed_loop(controller, plant, setup.schedule, T, meas_noise)
    diags = loop.diagnostics
    report = compute_regret(
        loop.realized, sys, setup.schedule, loop.x0, eta_prev=diags[0].v, theta_prev=diags[0].y_hat
    )
    etas, thetas = setup.schedule.minimizers()
    record = RunRecord(
        t=np.arange(T + 1),
        u=loop.realized.u,
        y=loop.realized.y,
        y_measured=loop.measured,
        eta=etas,
        theta=thetas,
        u_s=np.array([d.u_s for d in diags]),
        y_s=np.array([d.y_s for d in diags]),
        y_hat=np.array([d.y_hat for d in diags]),
        stage_cost=report.realized,
        hindsight_cost=report.hindsight,
        cumulative_regret=report.cumulative,
        states=loop.states,
        diagnostics=diags,
        matrices=controller.M,
    )
    return record, report


def summary(cfg: ExperimentConfig, record: RunRecord, report: RegretReport) -> dict:
    err = np.linalg.norm(record.y - record.theta, axis=1)
    return {
        "seed": cfg.seed,
        "noise_case": cfg.noise.case,
        "horizon": cfg.horizon,
        "regret": report.total,
        "equilibrium_regret": report.equilibrium_regret,
        "realized_cost": float(report.realized.sum()),
        "hindsight_cost": float(report.hindsight.sum()),
        "theta_variation": report.theta_variation,
        "eta_variation": report.eta_variation,
        "final_tracking_error": float(err[-1]),
        "mean_tracking_error": float(err.mean()),
        "max_abs_output": float(np.abs(record.y).max()),
    }


def write_outputs(cfg: ExperimentConfig, record: RunRecord, report: RegretReport, out: str | Path) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{cfg.output.prefix}_seed{cfg.seed}_case{cfg.noise.case}_T{cfg.horizon}"
    record.write_csv(out / f"{stem}.csv")
    info = summary(cfg, record, report)
    (out / f"{stem}_regret.json").write_text(json.dumps(info, indent=2))
    return info


def sweep(
    base: ExperimentConfig,
    seeds: list[int],
    horizons: list[int],
    noise_cases: list[int],
) -> list[dict]:
    """Run the grid; failed runs are reported with their error instead of a result."""
    rows = []
    for seed in seeds:
        for horizon in horizons:
            for case in noise_cases:
                cfg = base.replace(seed=seed, horizon=horizon, noise={"case": case})
                try:
                    record, report = run_experiment(cfg)
                    rows.append({**summary(cfg, record, report), "error": ""})
                except DdocoError as exc:
                    log.warning("run seed=%s T=%s case=%s failed: %s", seed, horizon, case, exc)
                    rows.append({"seed": seed, "horizon": horizon, "noise_case": case, "error": str(exc)})
    return rows
