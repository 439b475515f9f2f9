"""Obstacle sets described by smooth constraint functions, their safety
enlargement, and the soft-constraint penalty used by the optimal control
problem.

An obstacle is the set of points where *all* of its constraint functions are
strictly positive.  The penalty of a point p against one obstacle is

    penalty(p) = 0.5 * prod_i max(h_i(p), 0)^2

which is zero outside the set, zero on its boundary, and grows toward the
interior.  Its gradient is continuous everywhere (each term of the product
rule keeps at least one vanishing factor on the boundary).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence, Union

import numpy as np

# constraint encodings used by the numeric kernels
CON_HALFSPACE = 0
CON_ELLIPSOID = 1
CON_CYLINDER = 2
CON_PARAM_WIDTH = 10

_AXIS_NAMES = {"x": 0, "y": 1, "z": 2, 0: 0, 1: 1, 2: 2}

Vec3Like = Union[np.ndarray, Sequence[float]]
PathFn = Callable[[float], np.ndarray]


def _axis_index(axis) -> int:
    try:
        return _AXIS_NAMES[axis]
    except KeyError:
        raise ValueError(f"axis must be one of x/y/z or 0/1/2, got {axis!r}") from None


@dataclass(frozen=True)
class Halfspace:
    """Affine constraint h(p) = offset - normal . p."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        object.__setattr__(self, "normal", np.asarray(self.normal, dtype=np.float64))

    def value(self, p: np.ndarray, t: float = 0.0) -> float:
        return float(self.offset - self.normal @ np.asarray(p, dtype=np.float64))

    def gradient(self, p: np.ndarray, t: float = 0.0) -> np.ndarray:
        return -self.normal.copy()

    def enlarged(self, radius: float) -> "Halfspace":
        # Minkowski sum with a ball shifts the plane outward by radius.
        return Halfspace(self.normal, self.offset + radius * float(np.linalg.norm(self.normal)))

    def encode_rows(self, t: float = 0.0) -> list[tuple[int, np.ndarray]]:
        par = np.zeros(CON_PARAM_WIDTH)
        par[0:3] = self.normal
        par[3] = self.offset
        return [(CON_HALFSPACE, par)]

    @property
    def is_static(self) -> bool:
        return True


@dataclass(frozen=True)
class Ellipsoid:
    """Quadratic constraint h(p, t) = 1 - (p - c(t))^T M(t) (p - c(t)).

    M must be symmetric positive semidefinite.  ``center`` and ``m`` may be
    callables of time for moving obstacles; static arrays otherwise.
    """

    center: Union[Vec3Like, PathFn]
    m: Union[np.ndarray, Callable[[float], np.ndarray]]

    def _center_at(self, t: float) -> np.ndarray:
        c = self.center(t) if callable(self.center) else self.center
        return np.asarray(c, dtype=np.float64)

    def _m_at(self, t: float) -> np.ndarray:
        m = self.m(t) if callable(self.m) else self.m
        return np.asarray(m, dtype=np.float64)

    def value(self, p: np.ndarray, t: float = 0.0) -> float:
        d = np.asarray(p, dtype=np.float64) - self._center_at(t)
        return float(1.0 - d @ self._m_at(t) @ d)

    def gradient(self, p: np.ndarray, t: float = 0.0) -> np.ndarray:
        d = np.asarray(p, dtype=np.float64) - self._center_at(t)
        return -2.0 * (self._m_at(t) @ d)

    def enlarged(self, radius: float) -> "Ellipsoid":
        """Grow every active semi-axis by ``radius``.

        This is the exact Minkowski sum only when all active semi-axes are
        equal (balls and circular cylinders in quadratic form); anisotropic
        ellipsoids are rejected because their sum with a ball is not an
        ellipsoid.
        """
        if callable(self.center) or callable(self.m):
            raise ValueError("cannot enlarge a moving ellipsoid; enlarge its snapshot")
        if radius == 0.0:
            return self
        evals, evecs = np.linalg.eigh(self._m_at(0.0))
        evals = np.where(np.abs(evals) < 1e-12, 0.0, evals)
        if np.any(evals < 0):
            raise ValueError("ellipsoid matrix must be positive semidefinite")
        active = evals > 0
        semi = 1.0 / np.sqrt(evals[active])
        if semi.size and not np.allclose(semi, semi[0], rtol=1e-9):
            raise ValueError(
                "enlargement of an anisotropic ellipsoid is not an ellipsoid; "
                "use equal semi-axes or another primitive"
            )
        new_evals = evals.copy()
        new_evals[active] = 1.0 / (semi + radius) ** 2
        m_new = (evecs * new_evals) @ evecs.T
        return Ellipsoid(np.asarray(self.center, dtype=np.float64), m_new)

    def encode_rows(self, t: float = 0.0) -> list[tuple[int, np.ndarray]]:
        par = np.zeros(CON_PARAM_WIDTH)
        par[0:3] = self._center_at(t)
        m = self._m_at(t)
        par[3:9] = [m[0, 0], m[0, 1], m[0, 2], m[1, 1], m[1, 2], m[2, 2]]
        return [(CON_ELLIPSOID, par)]

    @property
    def is_static(self) -> bool:
        return not (callable(self.center) or callable(self.m))


@dataclass(frozen=True)
class VerticalCylinder:
    """Infinite circular cylinder along one coordinate axis, in the
    unnormalized quadratic form h(p) = r^2 - (p_u - c_u)^2 - (p_w - c_w)^2
    where (u, w) are the two coordinates orthogonal to ``axis``.
    """

    center: Vec3Like  # 2-vector in the (u, w) plane
    radius: float
    axis: Union[int, str] = 2

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))
        object.__setattr__(self, "axis", _axis_index(self.axis))
        if self.radius <= 0:
            raise ValueError("cylinder radius must be positive")

    def _plane_axes(self) -> tuple[int, int]:
        return tuple(i for i in range(3) if i != self.axis)  # type: ignore[return-value]

    def value(self, p: np.ndarray, t: float = 0.0) -> float:
        u, w = self._plane_axes()
        p = np.asarray(p, dtype=np.float64)
        du = p[u] - self.center[0]
        dw = p[w] - self.center[1]
        return float(self.radius ** 2 - du * du - dw * dw)

    def gradient(self, p: np.ndarray, t: float = 0.0) -> np.ndarray:
        u, w = self._plane_axes()
        p = np.asarray(p, dtype=np.float64)
        g = np.zeros(3)
        g[u] = -2.0 * (p[u] - self.center[0])
        g[w] = -2.0 * (p[w] - self.center[1])
        return g

    def enlarged(self, radius: float) -> "VerticalCylinder":
        return replace(self, radius=self.radius + radius)

    def encode_rows(self, t: float = 0.0) -> list[tuple[int, np.ndarray]]:
        par = np.zeros(CON_PARAM_WIDTH)
        par[0] = float(self.axis)
        par[1] = self.center[0]
        par[2] = self.center[1]
        par[3] = self.radius
        return [(CON_CYLINDER, par)]

    @property
    def is_static(self) -> bool:
        return True


@dataclass(frozen=True)
class AxisSlab:
    """Band lower < p_axis < upper, contributing two affine constraints.

    ``enlarge_lower``/``enlarge_upper`` control which faces move during
    enlargement; a ground face that must stay put sets enlarge_lower=False.
    """

    axis: Union[int, str]
    lower: float
    upper: float
    enlarge_lower: bool = True
    enlarge_upper: bool = True

    def __post_init__(self):
        object.__setattr__(self, "axis", _axis_index(self.axis))
        if self.lower > self.upper:
            raise ValueError("slab lower bound above upper bound")

    def value(self, p: np.ndarray, t: float = 0.0) -> float:
        # min of the two face values; used for membership tests only
        c = float(np.asarray(p, dtype=np.float64)[self.axis])
        return min(c - self.lower, self.upper - c)

    def gradient(self, p: np.ndarray, t: float = 0.0) -> np.ndarray:
        raise NotImplementedError("AxisSlab is a pair of faces; use its encoded rows")

    def enlarged(self, radius: float) -> "AxisSlab":
        return replace(
            self,
            lower=self.lower - (radius if self.enlarge_lower else 0.0),
            upper=self.upper + (radius if self.enlarge_upper else 0.0),
        )

    def encode_rows(self, t: float = 0.0) -> list[tuple[int, np.ndarray]]:
        lo = np.zeros(CON_PARAM_WIDTH)
        lo[self.axis] = -1.0  # h = p_axis - lower
        lo[3] = -self.lower
        hi = np.zeros(CON_PARAM_WIDTH)
        hi[self.axis] = 1.0  # h = upper - p_axis
        hi[3] = self.upper
        return [(CON_HALFSPACE, lo), (CON_HALFSPACE, hi)]

    @property
    def is_static(self) -> bool:
        return True


ConstraintFn = Union[Halfspace, Ellipsoid, VerticalCylinder, AxisSlab]


@dataclass(frozen=True)
class ObstacleSpec:
    """One obstacle: the intersection of m smooth constraints, with the
    penalty weights applied at the stage and terminal costs."""

    constraints: tuple[ConstraintFn, ...]
    weight: float = 1.0
    terminal_weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if len(self.constraints) < 1:
            raise ValueError("an obstacle needs at least one constraint")
        if self.weight <= 0 or self.terminal_weight <= 0:
            raise ValueError("penalty weights must be positive")

    @property
    def is_static(self) -> bool:
        return all(c.is_static for c in self.constraints)

    def constraint_values(self, p: np.ndarray, t: float = 0.0) -> np.ndarray:
        vals: list[float] = []
        for c in self.constraints:
            for tc, par in c.encode_rows(t):
                vals.append(_row_value(tc, par, np.asarray(p, dtype=np.float64)))
        return np.array(vals)

    def contains(self, p: np.ndarray, t: float = 0.0) -> bool:
        """Strict membership: all constraint functions positive."""
        return bool(np.all(self.constraint_values(p, t) > 0.0))

    def encode_rows(self, t: float = 0.0) -> list[tuple[int, np.ndarray]]:
        rows: list[tuple[int, np.ndarray]] = []
        for c in self.constraints:
            rows.extend(c.encode_rows(t))
        return rows


def _row_value(tc: int, par: np.ndarray, p: np.ndarray) -> float:
    if tc == CON_HALFSPACE:
        return float(par[3] - par[0:3] @ p)
    if tc == CON_ELLIPSOID:
        d = p - par[0:3]
        mxx, mxy, mxz, myy, myz, mzz = par[3:9]
        q = (mxx * d[0] * d[0] + myy * d[1] * d[1] + mzz * d[2] * d[2]
             + 2.0 * (mxy * d[0] * d[1] + mxz * d[0] * d[2] + myz * d[1] * d[2]))
        return 1.0 - q
    if tc == CON_CYLINDER:
        ax = int(par[0])
        u, w = (i for i in range(3) if i != ax)
        du = p[u] - par[1]
        dw = p[w] - par[2]
        return float(par[3] ** 2 - du * du - dw * dw)
    raise ValueError(f"unknown constraint code {tc}")


def _row_gradient(tc: int, par: np.ndarray, p: np.ndarray) -> np.ndarray:
    if tc == CON_HALFSPACE:
        return -par[0:3].copy()
    if tc == CON_ELLIPSOID:
        d = p - par[0:3]
        mxx, mxy, mxz, myy, myz, mzz = par[3:9]
        md = np.array([
            mxx * d[0] + mxy * d[1] + mxz * d[2],
            mxy * d[0] + myy * d[1] + myz * d[2],
            mxz * d[0] + myz * d[1] + mzz * d[2],
        ])
        return -2.0 * md
    if tc == CON_CYLINDER:
        ax = int(par[0])
        u, w = (i for i in range(3) if i != ax)
        g = np.zeros(3)
        g[u] = -2.0 * (p[u] - par[1])
        g[w] = -2.0 * (p[w] - par[2])
        return g
    raise ValueError(f"unknown constraint code {tc}")


def enlarge(obstacle: ObstacleSpec, radius: float) -> ObstacleSpec:
    """Inflate every constraint face outward by ``radius`` (Minkowski sum with
    a ball of that radius, taken per primitive)."""
    if radius < 0:
        raise ValueError("enlargement radius must be nonnegative")
    if radius == 0:
        return obstacle
    return replace(obstacle,
                   constraints=tuple(c.enlarged(radius) for c in obstacle.constraints))


def psi(p: np.ndarray, obstacle: ObstacleSpec, t: float = 0.0) -> float:
    """Penalty 0.5 * prod_i max(h_i(p,t), 0)^2; zero outside the obstacle."""
    p = np.asarray(p, dtype=np.float64)
    prod = 1.0
    for tc, par in obstacle.encode_rows(t):
        h = _row_value(tc, par, p)
        if h <= 0.0:
            return 0.0
        prod *= h
    return 0.5 * prod * prod


def grad_psi(p: np.ndarray, obstacle: ObstacleSpec, t: float = 0.0) -> np.ndarray:
    """Gradient of :func:`psi`; identically zero outside the obstacle and on
    its boundary, continuous across it."""
    p = np.asarray(p, dtype=np.float64)
    rows = obstacle.encode_rows(t)
    hs = np.empty(len(rows))
    for i, (tc, par) in enumerate(rows):
        h = _row_value(tc, par, p)
        if h <= 0.0:
            return np.zeros(3)
        hs[i] = h
    # inside: sum_i h_i * prod_{j != i} h_j^2 * grad h_i  ==  sum_i (2 psi / h_i) grad h_i
    prod = float(np.prod(hs))
    val = 0.5 * prod * prod
    g = np.zeros(3)
    for (tc, par), h in zip(rows, hs):
        g += (2.0 * val / h) * _row_gradient(tc, par, p)
    return g


@dataclass(frozen=True)
class CornerPointSet:
    """Representative points of the vehicle body plus the safety ball that
    encloses it around each point.

    Offsets are fixed displacements in the yaw-compensated world frame (the
    vehicle flies near-level, so body offsets are not rotated).  A point-mass
    setup uses the single zero offset.
    """

    offsets: tuple[np.ndarray, ...] = field(
        default_factory=lambda: (np.zeros(3),))
    r_ball: float = 0.24
    margin: float = 0.06

    def __post_init__(self):
        object.__setattr__(
            self, "offsets",
            tuple(np.asarray(o, dtype=np.float64) for o in self.offsets))
        if len(self.offsets) < 1:
            raise ValueError("need at least one corner point")
        if self.r_ball <= 0:
            raise ValueError("ball radius must be positive")
        if self.margin < 0:
            raise ValueError("safety margin must be nonnegative")

    @property
    def total_inflation(self) -> float:
        """Radius by which obstacles are enlarged: ball plus violation margin."""
        return self.r_ball + self.margin

    def world_points(self, p: np.ndarray) -> np.ndarray:
        """Corner coordinates for a vehicle centered at p, shape (n, 3)."""
        return np.asarray(p, dtype=np.float64)[None, :] + np.stack(self.offsets)

    def offsets_array(self) -> np.ndarray:
        return np.stack(self.offsets)
