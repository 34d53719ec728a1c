"""Tick-driven fluid-queue model of a microservice application.

Each microservice holds one shared backlog drained by ``active * mu``
requests per second. Requests walk their endpoint's chain sequentially,
so an endpoint's response time is the sum of its hops' response times.
New replicas pay ``boot_time_sec`` before contributing capacity; removed
replicas vanish at once and their unfinished work stays in the backlog.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

from .errors import DomainError


@dataclass(frozen=True)
class MicroserviceSpec:
    name: str
    mu: float
    cpu_request: float
    boot_time_sec: float = 0.0
    min_replicas: int = 1
    max_replicas: int = 100

    def __post_init__(self):
        if not self.name:
            raise DomainError("microservice name must be non-empty")
        if not self.mu > 0:
            raise DomainError(f"{self.name}: mu must be positive")
        if not self.cpu_request > 0:
            raise DomainError(f"{self.name}: cpu_request must be positive")
        if not self.boot_time_sec >= 0:
            raise DomainError(f"{self.name}: boot_time_sec must be non-negative")
        if not 1 <= self.min_replicas <= self.max_replicas:
            raise DomainError(f"{self.name}: need 1 <= min_replicas <= max_replicas")


@dataclass(frozen=True)
class ServiceEndpoint:
    name: str
    chain: tuple[str, ...]
    slo_ms: float
    call_multiplier: tuple[float, ...] = ()

    def __post_init__(self):
        chain = tuple(self.chain)
        if not chain:
            raise DomainError(f"endpoint {self.name}: chain must be non-empty")
        mult = tuple(float(m) for m in self.call_multiplier) or (1.0,) * len(chain)
        if len(mult) != len(chain):
            raise DomainError(f"endpoint {self.name}: one call_multiplier per hop required")
        if any(not m > 0 for m in mult):
            raise DomainError(f"endpoint {self.name}: multipliers must be positive")
        if not self.slo_ms > 0:
            raise DomainError(f"endpoint {self.name}: slo_ms must be positive")
        object.__setattr__(self, "chain", chain)
        object.__setattr__(self, "call_multiplier", mult)


@dataclass(frozen=True)
class AppSpec:
    microservices: tuple[MicroserviceSpec, ...]
    endpoints: tuple[ServiceEndpoint, ...]

    def __post_init__(self):
        micros = tuple(self.microservices)
        endpoints = tuple(self.endpoints)
        names = [m.name for m in micros]
        if len(set(names)) != len(names):
            raise DomainError("microservice names must be unique")
        ep_names = [e.name for e in endpoints]
        if len(set(ep_names)) != len(ep_names):
            raise DomainError("endpoint names must be unique")
        known = set(names)
        for ep in endpoints:
            missing = [m for m in ep.chain if m not in known]
            if missing:
                raise DomainError(f"endpoint {ep.name} references unknown microservices {missing}")
        object.__setattr__(self, "microservices", micros)
        object.__setattr__(self, "endpoints", endpoints)

    def micro(self, name: str) -> MicroserviceSpec:
        for m in self.microservices:
            if m.name == name:
                return m
        raise KeyError(name)

    @property
    def micro_names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.microservices)

    def endpoints_of(self, micro: str) -> tuple[ServiceEndpoint, ...]:
        return tuple(e for e in self.endpoints if micro in e.chain)


@dataclass
class MicroState:
    active: int
    pending: list[float] = field(default_factory=list)  # ready_at, oldest first
    backlog: float = 0.0

    @property
    def provisioned(self) -> int:
        return self.active + len(self.pending)

    def copy(self) -> "MicroState":
        return MicroState(self.active, list(self.pending), self.backlog)


@dataclass
class ClusterState:
    spec: AppSpec
    micros: dict[str, MicroState]
    clock_sec: float = 0.0
    clamp_events: list[tuple[float, str, int, int]] = field(default_factory=list)

    def copy(self) -> "ClusterState":
        return ClusterState(
            self.spec,
            {k: v.copy() for k, v in self.micros.items()},
            self.clock_sec,
            list(self.clamp_events),
        )

    def replicas(self) -> dict[str, int]:
        return {k: v.active for k, v in self.micros.items()}


@dataclass(frozen=True)
class MicroTelemetry:
    arrival_rate: float
    utilization: float
    response_ms: float
    active: int
    pending: int
    processed: float
    backlog: float


@dataclass(frozen=True)
class TickTelemetry:
    clock_sec: float  # end of tick
    dt: float
    micros: Mapping[str, MicroTelemetry]
    endpoint_response_ms: Mapping[str, float]


def init_cluster(spec: AppSpec, initial_replicas: Mapping[str, int] | None = None) -> ClusterState:
    initial_replicas = dict(initial_replicas or {})
    unknown = set(initial_replicas) - set(spec.micro_names)
    if unknown:
        raise DomainError(f"initial replicas for unknown microservices {sorted(unknown)}")
    micros = {}
    for m in spec.microservices:
        n = initial_replicas.get(m.name, m.min_replicas)
        if not m.min_replicas <= n <= m.max_replicas:
            raise DomainError(
                f"{m.name}: initial replicas {n} outside [{m.min_replicas}, {m.max_replicas}]"
            )
        micros[m.name] = MicroState(int(n))
    return ClusterState(spec, micros)


def step(
    state: ClusterState, endpoint_rates: Mapping[str, float], dt: float
) -> tuple[ClusterState, TickTelemetry]:
    """Advance the cluster by ``dt`` seconds under constant endpoint rates."""
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    spec = state.spec
    arrivals = {name: 0.0 for name in spec.micro_names}
    for ep in spec.endpoints:
        rate = endpoint_rates.get(ep.name, 0.0)
        if not rate >= 0:
            raise DomainError(f"rate for {ep.name} must be non-negative, got {rate}")
        for hop, mult in zip(ep.chain, ep.call_multiplier):
            arrivals[hop] += rate * mult

    new = state.copy()
    clock = state.clock_sec + dt
    new.clock_sec = clock
    tele: dict[str, MicroTelemetry] = {}
    hop_ms: dict[str, float] = {}
    for m in spec.microservices:
        ms = new.micros[m.name]
        q0 = ms.backlog
        a = arrivals[m.name] * dt
        total = q0 + a
        cap = ms.active * m.mu * dt
        if total <= cap:
            processed, q1 = total, 0.0
        else:
            # q1 first, then processed = total - q1: keeps q0 + a == processed + q1 exact
            q1 = total - cap
            processed = total - q1
        util = min(1.0, processed / cap)
        response = 1000.0 * (1.0 / m.mu + ((q0 + q1) / 2.0) / (ms.active * m.mu))
        hop_ms[m.name] = response
        tele[m.name] = MicroTelemetry(
            arrival_rate=arrivals[m.name],
            utilization=util,
            response_ms=response,
            active=ms.active,
            pending=len(ms.pending),
            processed=processed,
            backlog=q1,
        )
        ms.backlog = q1
        if ms.pending:
            ready = [r for r in ms.pending if r <= clock]
            if ready:
                ms.active += len(ready)
                ms.pending = [r for r in ms.pending if r > clock]

    endpoint_ms = {ep.name: sum(hop_ms[h] for h in ep.chain) for ep in spec.endpoints}
    return new, TickTelemetry(clock, dt, tele, endpoint_ms)


def apply_scaling(state: ClusterState, micro: str, target: int) -> ClusterState:
    """Move ``micro`` toward ``target`` provisioned replicas (active + pending).

    Growth enqueues booting replicas; shrinkage cancels the newest pending
    replicas first, then removes active ones. Out-of-bounds targets are
    clamped and logged in ``clamp_events``.
    """
    m = state.spec.micro(micro)
    new = state.copy()
    requested = int(target)
    target = min(max(requested, m.min_replicas), m.max_replicas)
    if target != requested:
        new.clamp_events.append((state.clock_sec, micro, requested, target))
    ms = new.micros[micro]
    have = ms.provisioned
    if target > have:
        if m.boot_time_sec == 0:
            ms.active += target - have
        else:
            ms.pending.extend([state.clock_sec + m.boot_time_sec] * (target - have))
    elif target < have:
        excess = have - target
        cancel = min(excess, len(ms.pending))
        if cancel:
            del ms.pending[len(ms.pending) - cancel:]
        ms.active -= excess - cancel
    return new


def chain_response_floor_ms(spec: AppSpec, endpoint: ServiceEndpoint) -> float:
    """Pure service time of ``endpoint``: its response with every backlog empty."""
    return math.fsum(1000.0 / spec.micro(h).mu for h in endpoint.chain)

