"""Replica controllers: the response-time PID law, static weighting, and an HPA baseline.

The PID carries a fractional replica target between decisions and adds the
full three-term increment every decision::

    e           = measured_rt - slo_ms
    integral'   = integral + e * dt          (frozen while saturated outward)
    derivative  = (e - prev_error) / dt
    continuous' = continuous + w * (kp*e + ki*integral' + kd*derivative)

Positive error (too slow) grows the target. The actuated replica count is
``continuous'`` rounded half-up and clamped to the replica bounds.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace

from .errors import DomainError


@dataclass(frozen=True)
class PidGains:
    kp: float
    ki: float
    kd: float

    def __post_init__(self):
        for name in ("kp", "ki", "kd"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise DomainError(f"gain {name} must be finite and non-negative, got {v}")


PAPER_GAINS = PidGains(kp=0.004, ki=0.004, kd=0.0005)


@dataclass(frozen=True)
class PidState:
    continuous_target: float
    integral: float = 0.0
    prev_error: float = 0.0
    last_decision_clock: float = 0.0

    @classmethod
    def fresh(cls, replicas: int, clock: float = 0.0) -> "PidState":
        return cls(continuous_target=float(replicas), last_decision_clock=clock)


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def pid_increment(
    state: PidState, measured_rt: float, slo_ms: float, dt: float, gains: PidGains,
    bounds: tuple[int, int], anti_windup: bool = True, integral_limit: float = math.inf,
) -> tuple[float, float, float]:
    """Return ``(raw_increment, integral', error)`` before weighting and clamping."""
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    if not measured_rt >= 0:
        raise DomainError(f"measured_rt must be non-negative, got {measured_rt}")
    lo, hi = bounds
    e = measured_rt - slo_ms
    integral = state.integral
    if anti_windup:
        current = round_half_up(state.continuous_target)
        saturated_out = (current >= hi and e > 0) or (current <= lo and e < 0)
        if not saturated_out:
            integral = min(max(integral + e * dt, -integral_limit), integral_limit)
    else:
        integral = integral + e * dt
    derivative = (e - state.prev_error) / dt
    raw = gains.kp * e + gains.ki * integral + gains.kd * derivative
    return raw, integral, e


def apply_weight(delta: float, w: float) -> float:
    """Scale a PID increment by a per-service weight."""
    if not w > 0:
        raise DomainError(f"weight must be positive, got {w}")
    return w * delta


def pid_step(
    state: PidState, measured_rt: float, slo_ms: float, dt: float, gains: PidGains,
    bounds: tuple[int, int], *, weight: float = 1.0, anti_windup: bool = True,
    integral_limit: float = math.inf, clock: float | None = None,
) -> tuple[PidState, int]:
    raw, integral, e = pid_increment(
        state, measured_rt, slo_ms, dt, gains, bounds, anti_windup, integral_limit
    )
    lo, hi = bounds
    continuous = state.continuous_target + apply_weight(raw, weight)
    continuous = min(max(continuous, lo - 0.5), hi + 0.5)
    target = min(max(round_half_up(continuous), lo), hi)
    new = PidState(
        continuous_target=continuous,
        integral=integral,
        prev_error=e,
        last_decision_clock=state.last_decision_clock if clock is None else clock,
    )
    return new, target


@dataclass(frozen=True)
class HpaState:
    """Kubernetes-style autoscaler memory.

    ``recommendations`` holds the desired counts of the trailing
    stabilization window, newest last.
    """

    target_utilization: float
    sync_period_sec: float = 15.0
    stabilization_sec: float = 300.0
    tolerance: float = 0.1
    recommendations: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if not 0 < self.target_utilization <= 1:
            raise DomainError(f"target_utilization must be in (0, 1], got {self.target_utilization}")
        if not self.sync_period_sec > 0:
            raise DomainError("sync_period_sec must be positive")

    @property
    def window_len(self) -> int:
        return max(1, math.ceil(self.stabilization_sec / self.sync_period_sec))


def hpa_step(
    state: HpaState, current_util: float, current_replicas: int, bounds: tuple[int, int]
) -> tuple[HpaState, int]:
    if not 0 <= current_util <= 1:
        raise DomainError(f"current_util must be in [0, 1], got {current_util}")
    if current_replicas < 1:
        raise DomainError("current_replicas must be at least 1")
    lo, hi = bounds
    ratio = current_util / state.target_utilization
    if abs(ratio - 1.0) <= state.tolerance:
        desired = current_replicas
    else:
        desired = math.ceil(current_replicas * current_util / state.target_utilization)
    desired = min(max(desired, lo), hi)

    window = deque(state.recommendations, maxlen=state.window_len)
    window.append(desired)
    if desired >= current_replicas:
        target = desired
    else:
        target = min(current_replicas, max(window))
    return replace(state, recommendations=tuple(window)), target
