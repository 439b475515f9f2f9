"""Closed-loop receding-horizon simulation.

Each tick: read the plant state (exact feedback by default, mirroring
motion-capture accuracy), solve the horizon problem warm-started with the
previous solution shifted by one block, push the first input block through
the thrust estimator (commanded acceleration -> normalized signal -> actual
plant acceleration), hold it for one sampling period, integrate the plant,
then advance the reference schedule if the vehicle got close enough.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .dynamics import NU, NX, step
from .estimator import ThrustEstimator
from .obstacles import VerticalCylinder
from .ocp import ShootingProblem
from .panoc import BoxSet, ExitStatus, solve
from .scenario import ReferenceSchedule, ScenarioConfig

TRAJ_COLUMNS = ("t", "px", "py", "pz", "vx", "vy", "vz", "roll", "pitch",
                "Td", "roll_d", "pitch_d", "uT", "ref_idx", "dist_axis")
DIAG_COLUMNS = ("t", "iters", "solve_time_s", "avg_iter_time_s", "res_inf",
                "status", "C_hat", "P")
EST_COLUMNS = ("t", "uT", "a_m", "accepted", "C_hat", "P")


class ClosedLoopError(RuntimeError):
    """The closed loop cannot continue (solver failure or diverged plant)."""


@dataclass
class TrajectoryLog:
    """Per-tick record of a closed-loop run (one row per control tick)."""

    t: np.ndarray
    states: np.ndarray          # (n, 8) plant state at the start of the tick
    inputs: np.ndarray          # (n, 3) commanded (T_d, roll_d, pitch_d)
    u_t: np.ndarray             # normalized thrust signal actually sent
    ref_idx: np.ndarray         # active reference index during the solve
    dist_axis: np.ndarray       # distance to the first cylinder axis (NaN if none)
    iterations: np.ndarray
    solve_time_s: np.ndarray
    avg_iter_time_s: np.ndarray
    res_inf: np.ndarray
    status: list[str]
    c_hat: np.ndarray           # estimate after this tick's measurement
    p_var: np.ndarray
    a_m: np.ndarray             # synthesized accelerometer sample
    accepted: np.ndarray        # whether the sample updated the filter
    c_true: np.ndarray          # plant's actual thrust constant
    initial_residual: np.ndarray       # ||u0 - proj(u0 - grad)|| of the warm start
    initial_residual_cold: np.ndarray  # same measure for a cold (hover) start
    scenario_name: str = ""

    def __len__(self) -> int:
        return self.t.shape[0]


def reference_scheduler(p: np.ndarray, schedule: ReferenceSchedule,
                        current: int) -> int:
    """Advance (cyclically) to the next waypoint once the vehicle is within
    the switch radius of the active one."""
    target = schedule.waypoints[current]
    if float(np.linalg.norm(np.asarray(p) - target)) < schedule.switch_radius:
        return (current + 1) % len(schedule.waypoints)
    return current


def _first_cylinder(scenario: ScenarioConfig) -> Optional[VerticalCylinder]:
    for ob in scenario.raw_obstacles:
        for con in ob.constraints:
            if isinstance(con, VerticalCylinder):
                return con
    return None


def _pg_residual(problem: ShootingProblem, box: BoxSet, u: np.ndarray) -> float:
    """Norm of the unit-step projected gradient mapping, a step-size-free
    stationarity measure used to compare warm and cold starts."""
    _, g = problem.cost_and_grad(u)
    return float(np.linalg.norm(u - box.project(u - g)))


def run_closed_loop(scenario: ScenarioConfig) -> TrajectoryLog:
    """Simulate the scenario; deterministic given its seed."""
    n_ticks = scenario.num_ticks
    dt = scenario.ocp.dt
    rng = np.random.default_rng(scenario.seed)
    estimator = ThrustEstimator(scenario.estimator)
    lower, upper = scenario.ocp.input_box()
    box = BoxSet(lower, upper)
    hover = np.array([scenario.params.g, 0.0, 0.0])
    cold_guess = np.tile(hover, scenario.ocp.horizon)
    cylinder = _first_cylinder(scenario)

    log = TrajectoryLog(
        t=np.empty(n_ticks), states=np.empty((n_ticks, NX)),
        inputs=np.empty((n_ticks, NU)), u_t=np.empty(n_ticks),
        ref_idx=np.empty(n_ticks, dtype=np.int64), dist_axis=np.empty(n_ticks),
        iterations=np.empty(n_ticks, dtype=np.int64),
        solve_time_s=np.empty(n_ticks), avg_iter_time_s=np.empty(n_ticks),
        res_inf=np.empty(n_ticks), status=[],
        c_hat=np.empty(n_ticks), p_var=np.empty(n_ticks),
        a_m=np.empty(n_ticks), accepted=np.empty(n_ticks, dtype=np.int64),
        c_true=np.empty(n_ticks),
        initial_residual=np.empty(n_ticks),
        initial_residual_cold=np.empty(n_ticks),
        scenario_name=scenario.name)

    x = scenario.x0.copy()
    ref_idx = 0
    warm: Optional[np.ndarray] = None

    for k in range(n_ticks):
        t = k * dt
        if not np.all(np.isfinite(x)):
            raise ClosedLoopError(f"plant state diverged at t={t:.3f} s")
        if not (abs(x[6]) < math.pi / 2 and abs(x[7]) < math.pi / 2):
            raise ClosedLoopError(f"attitude left the nominal envelope at t={t:.3f} s")

        x_fb = x
        if scenario.plant.state_noise_std > 0:
            x_fb = x + rng.normal(0.0, scenario.plant.state_noise_std, NX)

        cfg = scenario.ocp_for_reference(ref_idx)
        problem = ShootingProblem(cfg, x_fb, t0=t)
        u_init = warm if (scenario.warm_start and warm is not None) else cold_guess
        log.initial_residual[k] = _pg_residual(problem, box, u_init)
        log.initial_residual_cold[k] = _pg_residual(problem, box, cold_guess)

        u_star, diag = solve(problem, box, u_init, scenario.solver)
        if diag.status is ExitStatus.LINE_SEARCH_FAILURE:
            raise ClosedLoopError(
                f"solver line-search failure at t={t:.3f} s "
                f"(residual {diag.res_norm:.3e}, {diag.iterations} iterations)")

        u0 = u_star[0:NU]
        c_true = scenario.plant.thrust.value(t, scenario.duration)
        u_t = estimator.thrust_to_signal(u0[0])
        thrust_actual = c_true * u_t * u_t
        a_m = thrust_actual + rng.normal(0.0, scenario.plant.imu_noise_std)
        vet = estimator.process(a_m, u_t)

        log.t[k] = t
        log.states[k] = x
        log.inputs[k] = u0
        log.u_t[k] = u_t
        log.ref_idx[k] = ref_idx
        if cylinder is not None:
            u_ax, w_ax = cylinder._plane_axes()
            log.dist_axis[k] = math.hypot(x[u_ax] - cylinder.center[0],
                                          x[w_ax] - cylinder.center[1])
        else:
            log.dist_axis[k] = math.nan
        log.iterations[k] = diag.iterations
        log.solve_time_s[k] = diag.solve_time_s
        log.avg_iter_time_s[k] = diag.avg_iter_time_s
        log.res_inf[k] = diag.res_norm_inf
        log.status.append(diag.status.value)
        log.c_hat[k] = estimator.c_hat
        log.p_var[k] = estimator.p
        log.a_m[k] = a_m
        log.accepted[k] = int(vet.accepted)
        log.c_true[k] = c_true

        # zero-order hold over one sampling period
        plant_input = np.array([thrust_actual, u0[1], u0[2]])
        x = step(x, plant_input, scenario.params, dt, scenario.plant.integrator)

        ref_idx = reference_scheduler(x[0:3], scenario.schedule, ref_idx)
        warm = np.concatenate([u_star[NU:], u_star[-NU:]])

    return log


def _fmt(value) -> str:
    return "%.9g" % value


def export_csv(log: TrajectoryLog,
               traj_path: Union[str, Path],
               diag_path: Union[str, Path],
               est_path: Optional[Union[str, Path]] = None) -> None:
    """Write the trajectory and diagnostics tables (and optionally the full
    estimator trace) as plain-ASCII CSV, one row per tick, %.9g floats."""
    _write_rows(traj_path, TRAJ_COLUMNS, (
        (_fmt(log.t[k]), *(_fmt(v) for v in log.states[k]),
         *(_fmt(v) for v in log.inputs[k]), _fmt(log.u_t[k]),
         str(int(log.ref_idx[k])), _fmt(log.dist_axis[k]))
        for k in range(len(log))))
    _write_rows(diag_path, DIAG_COLUMNS, (
        (_fmt(log.t[k]), str(int(log.iterations[k])),
         _fmt(log.solve_time_s[k]), _fmt(log.avg_iter_time_s[k]),
         _fmt(log.res_inf[k]), log.status[k],
         _fmt(log.c_hat[k]), _fmt(log.p_var[k]))
        for k in range(len(log))))
    if est_path is not None:
        _write_rows(est_path, EST_COLUMNS, (
            (_fmt(log.t[k]), _fmt(log.u_t[k]), _fmt(log.a_m[k]),
             str(int(log.accepted[k])), _fmt(log.c_hat[k]), _fmt(log.p_var[k]))
            for k in range(len(log))))


def _write_rows(path: Union[str, Path], header: Sequence[str], rows) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def read_csv_columns(path: Union[str, Path]) -> dict[str, np.ndarray]:
    """Read one of the exported CSVs back into column arrays (floats where
    possible, strings otherwise)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    cols: dict[str, np.ndarray] = {}
    for i, name in enumerate(header):
        values = [row[i] for row in rows]
        try:
            cols[name] = np.array([float(v) for v in values])
        except ValueError:
            cols[name] = np.array(values)
    return cols
