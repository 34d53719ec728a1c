"""Supervisory layer wrapped around the per-service PID units.

The global state keeps a trailing window of utilization samples per chain.
From it the supervisor adapts per-service weights, finds each chain's
bottleneck hop, and stretches each service's decision interval to its boot
time. A forecast, when available, pre-provisions replicas ahead of demand.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

from .control import PidGains, PidState, pid_increment, apply_weight, round_half_up
from .errors import DomainError
from .forecast import Forecast
from .simcore import AppSpec, MicroserviceSpec, TickTelemetry


@dataclass(frozen=True)
class SupervisorConfig:
    low_threshold: float = 0.30
    high_threshold: float = 0.80
    window_sec: float = 300.0
    weight_step: float = 1.25
    w_min: float = 0.25
    w_max: float = 4.0
    default_control_interval_sec: float = 30.0
    horizon_sec: float = 60.0
    feedforward_deadband: float = 0.10
    # "all" (every sample) or "mean" (window mean) for each threshold rule
    low_rule: str = "all"
    high_rule: str = "mean"
    adapt_weights: bool = True
    dependency_gating: bool = True
    adaptive_timing: bool = True

    def __post_init__(self):
        if not 0 < self.low_threshold < self.high_threshold < 1:
            raise DomainError("need 0 < low_threshold < high_threshold < 1")
        if not self.weight_step > 1:
            raise DomainError("weight_step must exceed 1")
        if not 0 < self.w_min <= self.w_max:
            raise DomainError("need 0 < w_min <= w_max")
        if not self.horizon_sec > 0:
            raise DomainError("horizon_sec must be positive")
        if not self.window_sec > 0:
            raise DomainError("window_sec must be positive")
        if not self.default_control_interval_sec > 0:
            raise DomainError("default_control_interval_sec must be positive")
        if not self.feedforward_deadband >= 0:
            raise DomainError("feedforward_deadband must be non-negative")
        for name in ("low_rule", "high_rule"):
            if getattr(self, name) not in ("all", "mean"):
                raise DomainError(f"{name} must be 'all' or 'mean'")


@dataclass
class GlobalState:
    """Per-chain utilization windows and per-service weights.

    ``windows[endpoint]`` holds ``(clock, dt, {micro: utilization})``
    samples, oldest first; a sample covers ``(clock - dt, clock]``.
    """

    chains: dict[str, tuple[str, ...]]
    weights: dict[str, float]
    window_sec: float = 300.0
    windows: dict[str, deque] = field(default_factory=dict)
    clock: float = 0.0
    flags: list[tuple[float, str]] = field(default_factory=list)

    @classmethod
    def for_app(cls, spec: AppSpec, window_sec: float = 300.0,
                weights: Mapping[str, float] | None = None) -> "GlobalState":
        chains = {e.name: e.chain for e in spec.endpoints}
        w = {m: 1.0 for m in spec.micro_names}
        w.update(weights or {})
        return cls(chains, w, window_sec, {e: deque() for e in chains})

    def samples(self, micro: str) -> list[float]:
        """Utilization samples of ``micro`` in time order, one per tick.

        A service on several chains reports the same per-tick utilization on
        each, so the first chain containing it is used.
        """
        for ep, chain in self.chains.items():
            if micro in chain:
                return [s[micro] for _, _, s in self.windows[ep]]
        return []

    def span(self) -> float:
        """Seconds covered by the shortest chain window."""
        spans = [w[-1][0] - (w[0][0] - w[0][1]) for w in self.windows.values() if w]
        return min(spans) if spans else 0.0

    def full(self) -> bool:
        return all(self.windows.values()) and self.span() >= self.window_sec - 1e-9

    def chain_means(self, endpoint: str, since: float | None = None) -> list[float]:
        """Per-hop mean utilization over the window, or over samples newer than ``since``."""
        window = self.windows[endpoint]
        chain = self.chains[endpoint]
        if since is not None:
            window = [x for x in window if x[0] > since]
        if not window:
            return [0.0] * len(chain)
        return [math.fsum(s[m] for _, _, s in window) / len(window) for m in chain]


def update_utilization_window(g: GlobalState, telemetry: TickTelemetry) -> GlobalState:
    """Append one utilization sample per chain and evict samples older than the window.

    Mutates and returns ``g``; the simulation loop owns it exclusively.
    """
    clock = telemetry.clock_sec
    if clock < g.clock:
        raise DomainError(f"telemetry clock {clock} precedes state clock {g.clock}")
    for ep, chain in g.chains.items():
        window = g.windows[ep]
        window.append((clock, telemetry.dt, {m: telemetry.micros[m].utilization for m in chain}))
        while clock - window[0][0] >= g.window_sec:
            window.popleft()
    g.clock = clock
    return g


def adjust_weights(g: GlobalState, cfg: SupervisorConfig) -> GlobalState:
    if not g.full():
        g.flags.append((g.clock, "adjust_weights skipped: window not full"))
        return g
    for micro, w in g.weights.items():
        samples = g.samples(micro)
        if not samples:
            continue
        mean = math.fsum(samples) / len(samples)
        low = max(samples) if cfg.low_rule == "all" else mean
        high = min(samples) if cfg.high_rule == "all" else mean
        if low < cfg.low_threshold:
            g.weights[micro] = max(cfg.w_min, w / cfg.weight_step)
        elif high > cfg.high_threshold:
            g.weights[micro] = min(cfg.w_max, w * cfg.weight_step)
    return g


def bottleneck(chain_utils: Sequence[float]) -> int:
    if not chain_utils:
        raise DomainError("chain_utils must be non-empty")
    best = 0
    for i, u in enumerate(chain_utils):
        if u > chain_utils[best]:
            best = i
    return best


def dependency_gate(endpoint_violating: bool, hop: int, bottleneck_hop: int,
                    pid_target: int, current: int) -> int:
    """Hold non-bottleneck hops at their current size while the chain violates its SLO."""
    if endpoint_violating and hop != bottleneck_hop:
        return min(pid_target, current)
    return pid_target


def control_interval(spec: MicroserviceSpec, cfg: SupervisorConfig) -> float:
    return max(cfg.default_control_interval_sec, spec.boot_time_sec)


def feedforward_target(current_replicas: int, lambda_now: float, lambda_pred: float,
                       deadband: float) -> int:
    if lambda_now <= 0:
        return current_replicas
    ratio = lambda_pred / lambda_now
    if ratio > 1.0 + deadband:
        return math.ceil(current_replicas * ratio)
    return current_replicas


@dataclass(frozen=True)
class StpidUnit:
    """A weighted PID unit.

    ``ff_rate`` is the predicted rate the last feedforward provisioned for;
    until ``ff_until`` it is the floor of the ratio basis, so one predicted
    rise is acted on once rather than at every decision inside the horizon.
    """

    pid: PidState
    weight: float = 1.0
    ff_rate: float = 0.0
    ff_until: float = -math.inf


@dataclass(frozen=True)
class ChainView:
    """What one service's unit sees of the worst chain it belongs to."""

    violating: bool
    hop: int
    bottleneck_hop: int


def stpid_decide(
    unit: StpidUnit,
    measured_rt: float,
    slo_ms: float,
    dt: float,
    gains: PidGains,
    bounds: tuple[int, int],
    current: int,
    *,
    chain: ChainView | None = None,
    forecast: Forecast | None = None,
    lambda_now: float = 0.0,
    cfg: SupervisorConfig = SupervisorConfig(),
    anti_windup: bool = True,
    integral_limit: float = math.inf,
    clock: float | None = None,
) -> tuple[StpidUnit, int]:
    """One decision of a weighted PID unit with optional gating and feedforward.

    ``chain=None`` disables dependency gating and ``forecast=None`` disables
    feedforward; with both off and weight 1 the result equals ``pid_step``.
    When gating or feedforward overrides the PID's own target, the carried
    fractional target is reset to the actuated count so it does not drift
    away from what the cluster is actually running.
    """
    lo, hi = bounds
    raw, integral, e = pid_increment(
        unit.pid, measured_rt, slo_ms, dt, gains, bounds, anti_windup, integral_limit
    )
    continuous = unit.pid.continuous_target + apply_weight(raw, unit.weight)
    continuous = min(max(continuous, lo - 0.5), hi + 0.5)
    pid_target = min(max(round_half_up(continuous), lo), hi)

    now = unit.pid.last_decision_clock if clock is None else clock
    ff_rate, ff_until = unit.ff_rate, unit.ff_until
    target = pid_target
    if chain is not None:
        target = dependency_gate(chain.violating, chain.hop, chain.bottleneck_hop, target, current)
    if forecast is not None:
        basis = max(lambda_now, ff_rate) if now < ff_until else lambda_now
        ff = feedforward_target(current, basis, forecast.predicted_rate, cfg.feedforward_deadband)
        if ff > current:
            target = max(target, ff)
            ff_rate, ff_until = forecast.predicted_rate, now + forecast.horizon_sec
    target = min(max(target, lo), hi)
    if target != pid_target:
        continuous = float(target)

    pid = PidState(
        continuous_target=continuous,
        integral=integral,
        prev_error=e,
        last_decision_clock=now,
    )
    return replace(unit, pid=pid, ff_rate=ff_rate, ff_until=ff_until), target
