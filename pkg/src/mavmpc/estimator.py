"""Scalar extended Kalman filter for the special thrust constant (thrust
constant over mass, so the loop stays mass-free), with outlier rejection and
conversion of commanded thrust acceleration to the normalized thrust signal.

Model: the constant drifts as a slow random walk and is observed through
a_m = C * u_T^2 (noisy accelerometer reading along the thrust axis).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

_G = 9.81

REJECT_LOW_SIGNAL = "low-signal"
REJECT_OUT_OF_BOUNDS = "out-of-bounds"


@dataclass(frozen=True)
class EstimatorConfig:
    """Filter variances, acceptance bounds and the initial estimate.

    The bounds [c_min, c_max] reflect that a hover-capable vehicle produces at
    least 1 g and at most 10 g of thrust acceleration; they gate raw
    measurements and clamp the posterior.
    """

    p0: float = 100.0              # initial estimate variance
    process_var: float = 1e-3      # random-walk variance added per update
    meas_var: float = 1.0          # accelerometer variance
    c_min: float = _G
    c_max: float = 10.0 * _G
    u_t_min: float = 0.1           # signals below this give no usable ratio
    c0: float = 2.0 * _G           # mid-range initial guess; p0 makes the
                                   # first accepted measurement dominate

    def __post_init__(self):
        if min(self.p0, self.process_var, self.meas_var) <= 0:
            raise ValueError("variances must be positive")
        if not (0 < self.c_min <= self.c_max):
            raise ValueError("invalid thrust-constant bounds")
        if not (self.c_min <= self.c0 <= self.c_max):
            raise ValueError("initial estimate outside bounds")


@dataclass
class EstimatorState:
    """Current estimate and its variance."""

    c_hat: float
    p: float


class DirectEstimate(NamedTuple):
    """Outcome of vetting one accelerometer sample."""

    value: float          # a_m / u_T^2 (NaN when the signal is too low)
    accepted: bool
    reason: Optional[str]  # None when accepted


def direct_estimate(a_m: float, u_t: float,
                    cfg: EstimatorConfig = EstimatorConfig()) -> DirectEstimate:
    """Raw ratio estimate with outlier rejection.

    Rejection is a normal outcome: low-signal when u_T is too small for the
    division to mean anything, out-of-bounds when the ratio falls outside the
    physically plausible thrust range.
    """
    if u_t < cfg.u_t_min:
        return DirectEstimate(math.nan, False, REJECT_LOW_SIGNAL)
    c_tilde = a_m / (u_t * u_t)
    if not (cfg.c_min <= c_tilde <= cfg.c_max):
        return DirectEstimate(c_tilde, False, REJECT_OUT_OF_BOUNDS)
    return DirectEstimate(c_tilde, True, None)


def ekf_update(state: EstimatorState, a_m: float, u_t: float,
               cfg: EstimatorConfig = EstimatorConfig()) -> EstimatorState:
    """One predict/update cycle for a measurement that passed vetting.

    Predict adds the random-walk variance; the update is the scalar Kalman
    step with observation gain H = u_T^2; the posterior is clamped to the
    plausible range (variance left untouched by the clamp).
    """
    vet = direct_estimate(a_m, u_t, cfg)
    if not vet.accepted:
        raise ValueError(f"measurement rejected ({vet.reason}); vet with direct_estimate first")
    p_pred = state.p + cfg.process_var
    h = u_t * u_t
    gain = p_pred * h / (h * h * p_pred + cfg.meas_var)
    c_new = state.c_hat + gain * (a_m - state.c_hat * h)
    p_new = (1.0 - gain * h) * p_pred
    c_new = min(max(c_new, cfg.c_min), cfg.c_max)
    return EstimatorState(c_hat=c_new, p=p_new)


def thrust_to_signal(t_d: float, c_hat: float) -> float:
    """Normalized thrust signal for a commanded acceleration: sqrt(T_d/C),
    clamped into [0, 1].  Negative commands clamp to zero (the input box
    already forbids them)."""
    if t_d <= 0.0:
        return 0.0
    return min(math.sqrt(t_d / c_hat), 1.0)


class ThrustEstimator:
    """Stateful wrapper owned by the control loop: vets each sample, applies
    accepted ones, and converts thrust commands with the current estimate."""

    def __init__(self, cfg: EstimatorConfig = EstimatorConfig()):
        self.cfg = cfg
        self.state = EstimatorState(c_hat=cfg.c0, p=cfg.p0)

    @property
    def c_hat(self) -> float:
        return self.state.c_hat

    @property
    def p(self) -> float:
        return self.state.p

    def process(self, a_m: float, u_t: float) -> DirectEstimate:
        """Vet one sample and fold it into the estimate when accepted."""
        vet = direct_estimate(a_m, u_t, self.cfg)
        if vet.accepted:
            self.state = ekf_update(self.state, a_m, u_t, self.cfg)
        return vet

    def thrust_to_signal(self, t_d: float) -> float:
        return thrust_to_signal(t_d, self.state.c_hat)
