"""Quadrotor kinematics: first-order attitude lags, linear drag, thrust in the
body z-axis, expressed in a yaw-compensated global frame.

State vector layout (8,): [px, py, pz, vx, vy, vz, theta_r, theta_p]
Input vector layout (3,): [T_d, theta_rd, theta_pd]
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# state/input vector indices
PX, PY, PZ, VX, VY, VZ, ROLL, PITCH = range(8)
THRUST, ROLL_D, PITCH_D = range(3)

NX = 8
NU = 3


@dataclass(frozen=True)
class ModelParams:
    """Physical model parameters, SI units.

    a_x, a_y, a_z : linear drag coefficients [1/s]
    tau_r, tau_p  : roll/pitch closed-loop time constants [s]
    k_r, k_p      : roll/pitch reference gains [-]
    g             : gravity [m/s^2]
    """

    a_x: float = 0.1
    a_y: float = 0.1
    a_z: float = 0.2
    tau_r: float = 0.5
    tau_p: float = 0.5
    k_r: float = 1.0
    k_p: float = 1.0
    g: float = 9.81

    def __post_init__(self) -> None:
        if self.tau_r <= 0 or self.tau_p <= 0:
            raise ValueError("attitude time constants must be positive")
        if min(self.a_x, self.a_y, self.a_z) < 0:
            raise ValueError("drag coefficients must be nonnegative")
        if self.g <= 0:
            raise ValueError("gravity must be positive")

    def as_array(self) -> np.ndarray:
        """Pack into the flat layout used by the numeric kernels."""
        return np.array(
            [self.a_x, self.a_y, self.a_z, self.tau_r, self.tau_p,
             self.k_r, self.k_p, self.g],
            dtype=np.float64,
        )


@dataclass
class MavState:
    """Position, velocity, roll and pitch of the vehicle."""

    p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    theta_r: float = 0.0
    theta_p: float = 0.0

    def __post_init__(self) -> None:
        self.p = np.asarray(self.p, dtype=np.float64)
        self.v = np.asarray(self.v, dtype=np.float64)
        if not (np.all(np.isfinite(self.p)) and np.all(np.isfinite(self.v))
                and math.isfinite(self.theta_r) and math.isfinite(self.theta_p)):
            raise ValueError("state components must be finite")

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.p, self.v, [self.theta_r, self.theta_p]])

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "MavState":
        x = np.asarray(x, dtype=np.float64)
        return cls(p=x[:3].copy(), v=x[3:6].copy(),
                   theta_r=float(x[6]), theta_p=float(x[7]))

    def attitude_ok(self) -> bool:
        """True while roll and pitch stay clear of the +-pi/2 singularity."""
        return abs(self.theta_r) < math.pi / 2 and abs(self.theta_p) < math.pi / 2


@dataclass(frozen=True)
class ControlInput:
    """Thrust acceleration [m/s^2] and roll/pitch references [rad]."""

    t_d: float
    theta_rd: float = 0.0
    theta_pd: float = 0.0

    def __post_init__(self) -> None:
        if self.t_d < 0:
            raise ValueError("thrust acceleration must be nonnegative")

    def as_vector(self) -> np.ndarray:
        return np.array([self.t_d, self.theta_rd, self.theta_pd], dtype=np.float64)


def hover_input(params: ModelParams) -> np.ndarray:
    """Input holding the vehicle at rest with level attitude."""
    return np.array([params.g, 0.0, 0.0])


def rotation_matrix(theta_r: float, theta_p: float) -> np.ndarray:
    """Attitude rotation R = R_y(theta_p) @ R_x(theta_r), yaw-free."""
    cr, sr = math.cos(theta_r), math.sin(theta_r)
    cp, sp = math.cos(theta_p), math.sin(theta_p)
    rx = np.array([[1.0, 0.0, 0.0],
                   [0.0, cr, -sr],
                   [0.0, sr, cr]])
    ry = np.array([[cp, 0.0, sp],
                   [0.0, 1.0, 0.0],
                   [-sp, 0.0, cp]])
    return ry @ rx


def derivative(x: np.ndarray, u: np.ndarray, params: ModelParams) -> np.ndarray:
    """Continuous-time state derivative f(x, u)."""
    x = np.asarray(x, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    cr, sr = math.cos(x[ROLL]), math.sin(x[ROLL])
    cp, sp = math.cos(x[PITCH]), math.sin(x[PITCH])
    t = u[THRUST]
    out = np.empty(NX)
    out[PX:PZ + 1] = x[VX:VZ + 1]
    out[VX] = t * sp * cr - params.a_x * x[VX]
    out[VY] = -t * sr - params.a_y * x[VY]
    out[VZ] = t * cp * cr - params.g - params.a_z * x[VZ]
    out[ROLL] = (params.k_r * u[ROLL_D] - x[ROLL]) / params.tau_r
    out[PITCH] = (params.k_p * u[PITCH_D] - x[PITCH]) / params.tau_p
    return out


def step(x: np.ndarray, u: np.ndarray, params: ModelParams, dt: float,
         method: str = "euler") -> np.ndarray:
    """One explicit integration step with zero-order-hold input.

    method: "euler" (default, one step per sampling period) or "rk4"
    (classical four-stage scheme, provided for plant-model mismatch studies).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=np.float64)
    if method == "euler":
        return x + dt * derivative(x, u, params)
    if method == "rk4":
        k1 = derivative(x, u, params)
        k2 = derivative(x + 0.5 * dt * k1, u, params)
        k3 = derivative(x + 0.5 * dt * k2, u, params)
        k4 = derivative(x + dt * k3, u, params)
        return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    raise ValueError(f"unknown integration method {method!r}")


def derivative_jacobians(x: np.ndarray, u: np.ndarray,
                         params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Jacobians (df/dx, df/du) of the continuous-time dynamics."""
    cr, sr = math.cos(x[ROLL]), math.sin(x[ROLL])
    cp, sp = math.cos(x[PITCH]), math.sin(x[PITCH])
    t = u[THRUST]
    a = np.zeros((NX, NX))
    a[PX, VX] = a[PY, VY] = a[PZ, VZ] = 1.0
    a[VX, VX] = -params.a_x
    a[VY, VY] = -params.a_y
    a[VZ, VZ] = -params.a_z
    a[VX, ROLL] = -t * sp * sr
    a[VY, ROLL] = -t * cr
    a[VZ, ROLL] = -t * cp * sr
    a[VX, PITCH] = t * cp * cr
    a[VZ, PITCH] = -t * sp * cr
    a[ROLL, ROLL] = -1.0 / params.tau_r
    a[PITCH, PITCH] = -1.0 / params.tau_p
    b = np.zeros((NX, NU))
    b[VX, THRUST] = sp * cr
    b[VY, THRUST] = -sr
    b[VZ, THRUST] = cp * cr
    b[ROLL, ROLL_D] = params.k_r / params.tau_r
    b[PITCH, PITCH_D] = params.k_p / params.tau_p
    return a, b


def step_jacobians(x: np.ndarray, u: np.ndarray, params: ModelParams, dt: float,
                   method: str = "euler") -> tuple[np.ndarray, np.ndarray]:
    """Jacobians (A, B) of the discrete step x' = step(x, u) w.r.t. x and u."""
    x = np.asarray(x, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    eye = np.eye(NX)
    if method == "euler":
        fa, fb = derivative_jacobians(x, u, params)
        return eye + dt * fa, dt * fb
    if method == "rk4":
        k1 = derivative(x, u, params)
        x2 = x + 0.5 * dt * k1
        k2 = derivative(x2, u, params)
        x3 = x + 0.5 * dt * k2
        k3 = derivative(x3, u, params)
        x4 = x + dt * k3
        j1a, j1b = derivative_jacobians(x, u, params)
        j2a, j2b = derivative_jacobians(x2, u, params)
        j3a, j3b = derivative_jacobians(x3, u, params)
        j4a, j4b = derivative_jacobians(x4, u, params)
        dk1 = j1a
        dk2 = j2a @ (eye + 0.5 * dt * dk1)
        dk3 = j3a @ (eye + 0.5 * dt * dk2)
        dk4 = j4a @ (eye + dt * dk3)
        a = eye + (dt / 6.0) * (dk1 + 2.0 * dk2 + 2.0 * dk3 + dk4)
        dk1u = j1b
        dk2u = j2a @ (0.5 * dt * dk1u) + j2b
        dk3u = j3a @ (0.5 * dt * dk2u) + j3b
        dk4u = j4a @ (dt * dk3u) + j4b
        b = (dt / 6.0) * (dk1u + 2.0 * dk2u + 2.0 * dk3u + dk4u)
        return a, b
    raise ValueError(f"unknown integration method {method!r}")
