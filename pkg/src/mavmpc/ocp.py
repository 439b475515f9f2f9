"""Discrete-time soft-constrained optimal control problem built by single
shooting over the quadrotor model, with the exact cost gradient computed by a
hand-derived adjoint recursion (forward trajectory sweep plus one backward
sweep of Jacobian-transpose products).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .dynamics import NU, NX, ModelParams, hover_input, step
from .obstacles import CON_PARAM_WIDTH, CornerPointSet, ObstacleSpec, psi


class DivergedTrajectoryError(RuntimeError):
    """A shot trajectory left the representable range (non-finite state)."""


_INTEGRATORS = {"euler": _kernels.EULER, "rk4": _kernels.RK4}


@dataclass(frozen=True)
class CostWeights:
    """Diagonal weights of the quadratic tracking costs.

    q  (8,) state deviation, r (3,) input deviation, qf (8,) terminal state
    deviation, r_delta (3,) optional input rate-of-change penalty.
    """

    q: np.ndarray
    r: np.ndarray
    qf: np.ndarray
    r_delta: np.ndarray = field(default_factory=lambda: np.zeros(NU))

    def __post_init__(self):
        for name, size in (("q", NX), ("r", NU), ("qf", NX), ("r_delta", NU)):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (size,):
                raise ValueError(f"{name} must have shape ({size},)")
            if np.any(arr < 0):
                raise ValueError(f"{name} entries must be nonnegative")
            object.__setattr__(self, name, arr)

    @classmethod
    def flight_defaults(cls) -> "CostWeights":
        """Weights used by the shipped flight scenarios."""
        q = np.array([3.0, 3.0, 12.0, 1.0, 1.0, 1.0, 3.0, 3.0])
        return cls(q=q, r=np.array([2.0, 10.0, 10.0]), qf=10.0 * q)


def reference_state(p_ref: Sequence[float]) -> np.ndarray:
    """Reference state [p_ref, 0, ..., 0]: hold position at rest, level."""
    x = np.zeros(NX)
    x[0:3] = np.asarray(p_ref, dtype=np.float64)
    return x


@dataclass(frozen=True)
class OcpConfig:
    """Everything needed to evaluate the horizon cost from an initial state.

    Obstacles are the *enlarged* sets the penalty acts on.  Bounds default to
    roll/pitch references in [-0.5, 0.5] rad and thrust in [0, 2g]; thrust can
    always be converted to a valid normalized signal for hover-capable thrust
    constants, and 2g covers aggressive climbs.
    """

    horizon: int
    dt: float
    weights: CostWeights
    params: ModelParams = field(default_factory=ModelParams)
    obstacles: tuple[ObstacleSpec, ...] = ()
    corners: CornerPointSet = field(default_factory=CornerPointSet)
    x_ref: np.ndarray = field(default_factory=lambda: np.zeros(NX))
    u_ref: Optional[np.ndarray] = None
    u_lower: Optional[np.ndarray] = None
    u_upper: Optional[np.ndarray] = None
    integrator: str = "euler"
    u_prev: Optional[np.ndarray] = None  # rate-penalty anchor for stage 0

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.dt <= 0:
            raise ValueError("sampling period must be positive")
        if self.integrator not in _INTEGRATORS:
            raise ValueError(f"unknown integrator {self.integrator!r}")
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        object.__setattr__(self, "x_ref",
                           np.asarray(self.x_ref, dtype=np.float64))
        u_ref = (hover_input(self.params) if self.u_ref is None
                 else np.asarray(self.u_ref, dtype=np.float64))
        object.__setattr__(self, "u_ref", u_ref)
        lo = (np.array([0.0, -0.5, -0.5]) if self.u_lower is None
              else np.asarray(self.u_lower, dtype=np.float64))
        hi = (np.array([2.0 * self.params.g, 0.5, 0.5]) if self.u_upper is None
              else np.asarray(self.u_upper, dtype=np.float64))
        if np.any(lo > hi):
            raise ValueError("input lower bounds exceed upper bounds")
        object.__setattr__(self, "u_lower", lo)
        object.__setattr__(self, "u_upper", hi)
        if self.u_prev is not None:
            object.__setattr__(self, "u_prev",
                               np.asarray(self.u_prev, dtype=np.float64))

    @property
    def n_inputs(self) -> int:
        """Decision-vector length: one input block per horizon step."""
        return NU * self.horizon

    def input_box(self) -> tuple[np.ndarray, np.ndarray]:
        """Stacked bounds over the whole decision vector."""
        return (np.tile(self.u_lower, self.horizon),
                np.tile(self.u_upper, self.horizon))

    def with_reference(self, p_ref: Sequence[float]) -> "OcpConfig":
        return replace(self, x_ref=reference_state(p_ref))


def stage_cost(x: np.ndarray, u: np.ndarray, u_prev: Optional[np.ndarray],
               k: int, cfg: OcpConfig, t0: float = 0.0) -> float:
    """Stage cost at step k: tracking quadratics, obstacle penalties at every
    corner point, and the optional input-rate term when u_prev is given."""
    x = np.asarray(x, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    t = t0 + k * cfg.dt
    dx = x - cfg.x_ref
    du = u - cfg.u_ref
    val = float(dx @ (cfg.weights.q * dx) + du @ (cfg.weights.r * du))
    for ob in cfg.obstacles:
        for c in cfg.corners.world_points(x[0:3]):
            val += ob.weight * psi(c, ob, t)
    if u_prev is not None:
        d = u - np.asarray(u_prev, dtype=np.float64)
        val += float(d @ (cfg.weights.r_delta * d))
    return val


def terminal_cost(x: np.ndarray, cfg: OcpConfig, t0: float = 0.0) -> float:
    x = np.asarray(x, dtype=np.float64)
    t = t0 + cfg.horizon * cfg.dt
    dx = x - cfg.x_ref
    val = float(dx @ (cfg.weights.qf * dx))
    for ob in cfg.obstacles:
        for c in cfg.corners.world_points(x[0:3]):
            val += ob.terminal_weight * psi(c, ob, t)
    return val


def shoot(u_seq: np.ndarray, x0: np.ndarray, cfg: OcpConfig) -> np.ndarray:
    """Forward trajectory of the horizon: returns (horizon+1, 8) states."""
    u_seq = _check_useq(u_seq, cfg)
    xs = np.empty((cfg.horizon + 1, NX))
    xs[0] = np.asarray(x0, dtype=np.float64)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(cfg.horizon):
            xs[k + 1] = step(xs[k], u_seq[3 * k:3 * k + 3], cfg.params, cfg.dt,
                             cfg.integrator)
            if not np.all(np.isfinite(xs[k + 1])):
                raise DivergedTrajectoryError(f"non-finite state after step {k + 1}")
    return xs


def _check_useq(u_seq: np.ndarray, cfg: OcpConfig) -> np.ndarray:
    u_seq = np.ascontiguousarray(np.asarray(u_seq, dtype=np.float64).ravel())
    if u_seq.shape[0] != cfg.n_inputs:
        raise ValueError(
            f"control sequence has length {u_seq.shape[0]}, expected {cfg.n_inputs}")
    return u_seq


class ShootingProblem:
    """Cost/gradient oracle for one solve: fixed initial state, reference and
    obstacle snapshot.  Exposes exactly what the solver needs."""

    def __init__(self, cfg: OcpConfig, x0: np.ndarray, t0: float = 0.0):
        self.cfg = cfg
        self.x0 = np.ascontiguousarray(np.asarray(x0, dtype=np.float64))
        if self.x0.shape != (NX,):
            raise ValueError(f"initial state must have shape ({NX},)")
        self.t0 = float(t0)
        self._enc = _encode(cfg, self.t0)

    @property
    def n(self) -> int:
        return self.cfg.n_inputs

    def cost(self, u_seq: np.ndarray) -> float:
        u = _check_useq(u_seq, self.cfg)
        e = self._enc
        val = _kernels.total_cost_kernel(
            u, self.x0, e["prm"], self.cfg.dt, self.cfg.horizon, e["method"],
            e["q"], e["r"], e["qf"], e["rd"], e["has_uprev"], e["u_prev"],
            e["x_ref"], e["u_ref"], e["ctypes"], e["cpar"], e["obs_ptr"],
            e["lam"], e["lamf"], e["corners"])
        if math.isnan(val):
            raise DivergedTrajectoryError("trajectory diverged during cost evaluation")
        return float(val)

    def cost_and_grad(self, u_seq: np.ndarray) -> tuple[float, np.ndarray]:
        u = _check_useq(u_seq, self.cfg)
        e = self._enc
        grad = np.empty(self.cfg.n_inputs)
        val = _kernels.cost_grad_kernel(
            u, self.x0, e["prm"], self.cfg.dt, self.cfg.horizon, e["method"],
            e["q"], e["r"], e["qf"], e["rd"], e["has_uprev"], e["u_prev"],
            e["x_ref"], e["u_ref"], e["ctypes"], e["cpar"], e["obs_ptr"],
            e["lam"], e["lamf"], e["corners"], grad)
        if math.isnan(val):
            raise DivergedTrajectoryError("trajectory diverged during gradient evaluation")
        return float(val), grad


def _encode(cfg: OcpConfig, t0: float) -> dict:
    """Flatten a configuration into the kernel array layout.

    Time-varying obstacles are sampled at every stage time; static ones are
    encoded once and broadcast.
    """
    rows0 = []
    obs_ptr = [0]
    for ob in cfg.obstacles:
        rows0.extend(ob.encode_rows(t0))
        obs_ptr.append(len(rows0))
    n_con = len(rows0)
    static = all(ob.is_static for ob in cfg.obstacles)
    n_t = 1 if static else cfg.horizon + 1
    ctypes = np.array([tc for tc, _ in rows0], dtype=np.int64).reshape(n_con)
    cpar = np.zeros((n_t, max(n_con, 1), CON_PARAM_WIDTH))
    for i, (_, par) in enumerate(rows0):
        cpar[0, i] = par
    if not static:
        for k in range(1, n_t):
            rows_k = []
            for ob in cfg.obstacles:
                rows_k.extend(ob.encode_rows(t0 + k * cfg.dt))
            for i, (tc, par) in enumerate(rows_k):
                if tc != ctypes[i]:
                    raise ValueError("obstacle constraint types may not change over time")
                cpar[k, i] = par
    if n_con == 0:
        ctypes = np.zeros(0, dtype=np.int64)
    has_uprev = cfg.u_prev is not None
    return {
        "prm": cfg.params.as_array(),
        "method": _INTEGRATORS[cfg.integrator],
        "q": cfg.weights.q, "r": cfg.weights.r, "qf": cfg.weights.qf,
        "rd": cfg.weights.r_delta,
        "has_uprev": has_uprev,
        "u_prev": cfg.u_prev if has_uprev else np.zeros(NU),
        "x_ref": np.ascontiguousarray(cfg.x_ref).reshape(1, NX),
        "u_ref": np.ascontiguousarray(cfg.u_ref).reshape(1, NU),
        "ctypes": ctypes,
        "cpar": cpar,
        "obs_ptr": np.array(obs_ptr, dtype=np.int64),
        "lam": np.array([ob.weight for ob in cfg.obstacles]),
        "lamf": np.array([ob.terminal_weight for ob in cfg.obstacles]),
        "corners": cfg.corners.offsets_array(),
    }


def total_cost(u_seq: np.ndarray, x0: np.ndarray, cfg: OcpConfig,
               t0: float = 0.0) -> float:
    """Horizon cost: terminal cost of the shot trajectory plus the sum of
    stage costs along it."""
    return ShootingProblem(cfg, x0, t0).cost(u_seq)


def grad_total_cost(u_seq: np.ndarray, x0: np.ndarray, cfg: OcpConfig,
                    t0: float = 0.0) -> np.ndarray:
    """Exact gradient of :func:`total_cost` with respect to the control
    sequence, by the adjoint recursion (no matrices beyond the 8x8 step
    Jacobians; cost comparable to two trajectory integrations)."""
    return ShootingProblem(cfg, x0, t0).cost_and_grad(u_seq)[1]
