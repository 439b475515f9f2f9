"""Scenario files: a versioned, human-readable YAML schema describing the
model, the horizon problem, obstacles, references and the simulated plant.

Schema (version 1) — all keys optional unless noted, defaults are the flight
test values:

    version: 1                  # required
    name: str
    model:        a_x a_y a_z tau_r tau_p k_r k_p g
    ocp:          horizon sampling_period integrator
                  state_weights[8] input_weights[3]
                  terminal_weights[8] | terminal_scale
                  rate_weights[3]
                  thrust_bounds[2] roll_bounds[2] pitch_bounds[2]
    corners:      offsets[[3]] ball_radius margin
    obstacles:    list of {weight, terminal_weight, constraints: [shape...]}
                  shapes: {type: cylinder, center[2], radius, axis}
                          {type: slab, axis, lower, upper,
                           enlarge_lower, enlarge_upper}
                          {type: halfspace, normal[3], offset}
                          {type: sphere, center[3], radius}
                          {type: ellipsoid, center[3], semi_axes[3]}
    references:   waypoints[[3]] (required)  switch_radius
    initial_state: position[3] velocity[3] roll pitch
    duration: seconds (required)
    seed: int
    plant:        integrator imu_noise_std state_noise_std
                  thrust_constant: {initial, final | drift_rate}
    estimator:    initial_estimate initial_variance process_variance
                  measurement_variance min_signal
    solver:       tolerance max_iterations lbfgs_memory warm_start

Obstacle geometry is written pre-enlargement; the loader inflates it by
ball_radius + margin to build the sets the penalty acts on.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
import yaml

from .dynamics import ModelParams
from .estimator import EstimatorConfig
from .obstacles import (AxisSlab, CornerPointSet, Ellipsoid, Halfspace,
                        ObstacleSpec, VerticalCylinder, enlarge)
from .ocp import CostWeights, OcpConfig, reference_state
from .panoc import SolverConfig

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    """Malformed or unsupported scenario file."""


@dataclass(frozen=True)
class ReferenceSchedule:
    """Cyclic list of position references; the active one advances when the
    vehicle comes within switch_radius of it."""

    waypoints: tuple[np.ndarray, ...]
    switch_radius: float = 0.3

    def __post_init__(self):
        object.__setattr__(
            self, "waypoints",
            tuple(np.asarray(w, dtype=np.float64) for w in self.waypoints))
        if len(self.waypoints) < 1:
            raise ScenarioError("reference schedule needs at least one waypoint")
        if self.switch_radius <= 0:
            raise ScenarioError("switch radius must be positive")


@dataclass(frozen=True)
class ThrustProfile:
    """True thrust constant of the simulated plant.  A ``final`` value ramps
    linearly over the run (battery-drain emulation); otherwise ``drift_rate``
    per second applies."""

    initial: float = 2.0 * 9.81
    final: Optional[float] = None
    drift_rate: float = 0.0

    def value(self, t: float, duration: float) -> float:
        if self.final is not None and duration > 0:
            frac = min(max(t / duration, 0.0), 1.0)
            return self.initial + frac * (self.final - self.initial)
        return self.initial + self.drift_rate * t


@dataclass(frozen=True)
class PlantOptions:
    """Simulated-plant behavior: integrator, sensor noise, thrust drift."""

    integrator: str = "euler"
    imu_noise_std: float = 0.4
    state_noise_std: float = 0.0
    thrust: ThrustProfile = field(default_factory=ThrustProfile)


@dataclass(frozen=True)
class ScenarioConfig:
    """A complete closed-loop experiment definition."""

    name: str
    params: ModelParams
    ocp: OcpConfig                      # template; x_ref tracks the schedule
    raw_obstacles: tuple[ObstacleSpec, ...]
    schedule: ReferenceSchedule
    x0: np.ndarray
    duration: float
    plant: PlantOptions = field(default_factory=PlantOptions)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    warm_start: bool = True
    seed: int = 1

    def __post_init__(self):
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=np.float64))
        if self.duration <= 0:
            raise ScenarioError("duration must be positive")

    @property
    def num_ticks(self) -> int:
        return int(round(self.duration / self.ocp.dt))

    def ocp_for_reference(self, idx: int) -> OcpConfig:
        return self.ocp.with_reference(self.schedule.waypoints[idx])


def _get(d: dict, key: str, default=None):
    v = d.get(key, default)
    return default if v is None else v


def _parse_constraint(spec: dict):
    kind = str(_get(spec, "type", "")).lower()
    if kind in ("cylinder", "vertical_cylinder"):
        return VerticalCylinder(center=np.asarray(_get(spec, "center", [0.0, 0.0])),
                                radius=float(spec["radius"]),
                                axis=_get(spec, "axis", "z"))
    if kind in ("slab", "axis_slab"):
        return AxisSlab(axis=_get(spec, "axis", "z"),
                        lower=float(spec["lower"]), upper=float(spec["upper"]),
                        enlarge_lower=bool(_get(spec, "enlarge_lower", True)),
                        enlarge_upper=bool(_get(spec, "enlarge_upper", True)))
    if kind == "halfspace":
        return Halfspace(normal=np.asarray(spec["normal"], dtype=np.float64),
                         offset=float(spec["offset"]))
    if kind == "sphere":
        r = float(spec["radius"])
        return Ellipsoid(center=np.asarray(spec["center"], dtype=np.float64),
                         m=np.eye(3) / (r * r))
    if kind == "ellipsoid":
        semi = np.asarray(spec["semi_axes"], dtype=np.float64)
        return Ellipsoid(center=np.asarray(spec["center"], dtype=np.float64),
                         m=np.diag(1.0 / semi ** 2))
    raise ScenarioError(f"unknown constraint type {kind!r}")


def parse_scenario(data: dict, name: str = "scenario") -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ScenarioError("scenario file must contain a mapping")
    version = data.get("version")
    if version != SCHEMA_VERSION:
        raise ScenarioError(f"unsupported scenario version {version!r}; "
                            f"expected {SCHEMA_VERSION}")

    m = _get(data, "model", {})
    params = ModelParams(
        a_x=float(_get(m, "a_x", 0.1)), a_y=float(_get(m, "a_y", 0.1)),
        a_z=float(_get(m, "a_z", 0.2)),
        tau_r=float(_get(m, "tau_r", 0.5)), tau_p=float(_get(m, "tau_p", 0.5)),
        k_r=float(_get(m, "k_r", 1.0)), k_p=float(_get(m, "k_p", 1.0)),
        g=float(_get(m, "g", 9.81)))

    c = _get(data, "corners", {})
    corners = CornerPointSet(
        offsets=tuple(np.asarray(o, dtype=np.float64)
                      for o in _get(c, "offsets", [[0.0, 0.0, 0.0]])),
        r_ball=float(_get(c, "ball_radius", 0.24)),
        margin=float(_get(c, "margin", 0.06)))

    raw_obstacles = []
    for ob in _get(data, "obstacles", []):
        cons = tuple(_parse_constraint(s) for s in _get(ob, "constraints", []))
        raw_obstacles.append(ObstacleSpec(
            constraints=cons,
            weight=float(_get(ob, "weight", 1e4)),
            terminal_weight=float(_get(ob, "terminal_weight",
                                       _get(ob, "weight", 1e4)))))
    enlarged = tuple(enlarge(ob, corners.total_inflation) for ob in raw_obstacles)

    o = _get(data, "ocp", {})
    q = np.asarray(_get(o, "state_weights", [3, 3, 12, 1, 1, 1, 3, 3]), dtype=np.float64)
    r = np.asarray(_get(o, "input_weights", [2, 10, 10]), dtype=np.float64)
    if "terminal_weights" in o and o["terminal_weights"] is not None:
        qf = np.asarray(o["terminal_weights"], dtype=np.float64)
    else:
        qf = float(_get(o, "terminal_scale", 10.0)) * q
    rd = np.asarray(_get(o, "rate_weights", [0.0, 0.0, 0.0]), dtype=np.float64)
    weights = CostWeights(q=q, r=r, qf=qf, r_delta=rd)
    thrust_b = _get(o, "thrust_bounds", [0.0, 2.0 * params.g])
    roll_b = _get(o, "roll_bounds", [-0.5, 0.5])
    pitch_b = _get(o, "pitch_bounds", [-0.5, 0.5])

    refs = _get(data, "references", {})
    waypoints = _get(refs, "waypoints", None)
    if not waypoints:
        raise ScenarioError("references.waypoints is required")
    schedule = ReferenceSchedule(
        waypoints=tuple(np.asarray(w, dtype=np.float64) for w in waypoints),
        switch_radius=float(_get(refs, "switch_radius", 0.3)))

    ocp = OcpConfig(
        horizon=int(_get(o, "horizon", 40)),
        dt=float(_get(o, "sampling_period", 0.05)),
        weights=weights, params=params,
        obstacles=enlarged, corners=corners,
        x_ref=reference_state(schedule.waypoints[0]),
        u_lower=np.array([thrust_b[0], roll_b[0], pitch_b[0]], dtype=np.float64),
        u_upper=np.array([thrust_b[1], roll_b[1], pitch_b[1]], dtype=np.float64),
        integrator=str(_get(o, "integrator", "euler")))

    s = _get(data, "initial_state", {})
    x0 = np.zeros(8)
    x0[0:3] = np.asarray(_get(s, "position", [0.0, 0.0, 1.0]), dtype=np.float64)
    x0[3:6] = np.asarray(_get(s, "velocity", [0.0, 0.0, 0.0]), dtype=np.float64)
    x0[6] = float(_get(s, "roll", 0.0))
    x0[7] = float(_get(s, "pitch", 0.0))

    p = _get(data, "plant", {})
    tc = _get(p, "thrust_constant", {})
    thrust = ThrustProfile(
        initial=float(_get(tc, "initial", 2.0 * params.g)),
        final=(float(tc["final"]) if _get(tc, "final") is not None else None),
        drift_rate=float(_get(tc, "drift_rate", 0.0)))
    plant = PlantOptions(
        integrator=str(_get(p, "integrator", "euler")),
        imu_noise_std=float(_get(p, "imu_noise_std", 0.4)),
        state_noise_std=float(_get(p, "state_noise_std", 0.0)),
        thrust=thrust)

    e = _get(data, "estimator", {})
    est = EstimatorConfig(
        p0=float(_get(e, "initial_variance", 100.0)),
        process_var=float(_get(e, "process_variance", 1e-3)),
        meas_var=float(_get(e, "measurement_variance", 1.0)),
        c_min=params.g, c_max=10.0 * params.g,
        u_t_min=float(_get(e, "min_signal", 0.1)),
        c0=float(_get(e, "initial_estimate", 2.0 * params.g)))

    sv = _get(data, "solver", {})
    solver = SolverConfig(
        tolerance=float(_get(sv, "tolerance", 1e-3)),
        max_iterations=int(_get(sv, "max_iterations", 200)),
        lbfgs_memory=int(_get(sv, "lbfgs_memory", 10)))

    return ScenarioConfig(
        name=str(_get(data, "name", name)),
        params=params, ocp=ocp,
        raw_obstacles=tuple(raw_obstacles),
        schedule=schedule, x0=x0,
        duration=float(data["duration"]),
        plant=plant, estimator=est, solver=solver,
        warm_start=bool(_get(sv, "warm_start", True)),
        seed=int(_get(data, "seed", 1)))


def bundled_scenario_names() -> list[str]:
    root = importlib.resources.files("mavmpc") / "scenarios"
    return sorted(p.name.removesuffix(".yaml") for p in root.iterdir()
                  if p.name.endswith(".yaml"))


def load_scenario(source: Union[str, Path]) -> ScenarioConfig:
    """Load a scenario from a YAML path or a bundled scenario name
    (``cylinder``, ``hover_drain``)."""
    path = Path(source)
    if path.exists():
        text = path.read_text()
        name = path.stem
    else:
        res = importlib.resources.files("mavmpc") / "scenarios" / f"{source}.yaml"
        if not res.is_file():
            raise ScenarioError(
                f"no scenario file {source!r}; bundled names: "
                f"{', '.join(bundled_scenario_names())}")
        text = res.read_text()
        name = str(source)
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"invalid YAML in {source}: {exc}") from exc
    return parse_scenario(data, name=name)
