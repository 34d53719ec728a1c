"""SLO-violation and core-minute accounting.

Per tick, each endpoint accrues ``max(0, response_ms - slo_ms)`` violation
milliseconds and each microservice accrues
``(active + pending) * cpu_request * dt / 60`` core-minutes. Booting
replicas are billed from the moment they are scheduled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import DomainError
from .simcore import AppSpec, ClusterState, TickTelemetry

SUMMARY_HEADER = ("controller", "core_min", "violation_ms", "p50_ms", "p95_ms", "max_ms")


class CompensatedSum:
    """Neumaier running sum."""

    __slots__ = ("total", "comp")

    def __init__(self):
        self.total = 0.0
        self.comp = 0.0

    def add(self, x: float) -> None:
        t = self.total + x
        if abs(self.total) >= abs(x):
            self.comp += (self.total - t) + x
        else:
            self.comp += (x - t) + self.total
        self.total = t

    @property
    def value(self) -> float:
        return self.total + self.comp


def compensated_sum(values: Iterable[float]) -> float:
    acc = CompensatedSum()
    for v in values:
        acc.add(v)
    return acc.value


@dataclass
class TickRow:
    clock: float
    response_ms: dict[str, float]
    violation_ms: dict[str, float]
    replicas: dict[str, int]
    billed_replicas: dict[str, int]
    utilization: dict[str, float]
    weight: dict[str, float]
    core_min: dict[str, float]


@dataclass
class MetricsLedger:
    slo_ms: dict[str, float]
    cpu_request: dict[str, float]
    rows: list[TickRow] = field(default_factory=list)
    _violation: dict[str, CompensatedSum] = field(default_factory=dict)
    _core: dict[str, CompensatedSum] = field(default_factory=dict)

    @classmethod
    def for_app(cls, spec: AppSpec) -> "MetricsLedger":
        return cls(
            slo_ms={e.name: e.slo_ms for e in spec.endpoints},
            cpu_request={m.name: m.cpu_request for m in spec.microservices},
        )

    def __post_init__(self):
        for e in self.slo_ms:
            self._violation.setdefault(e, CompensatedSum())
        for m in self.cpu_request:
            self._core.setdefault(m, CompensatedSum())

    @property
    def endpoints(self) -> list[str]:
        return sorted(self.slo_ms)

    @property
    def micros(self) -> list[str]:
        return sorted(self.cpu_request)

    def violation_ms_total(self, endpoint: str | None = None) -> float:
        if endpoint is not None:
            return self._violation[endpoint].value
        return compensated_sum(self._violation[e].value for e in self.endpoints)

    def core_minutes_total(self, micro: str | None = None) -> float:
        if micro is not None:
            return self._core[micro].value
        return compensated_sum(self._core[m].value for m in self.micros)


def record_tick(ledger: MetricsLedger, telemetry: TickTelemetry, state: ClusterState,
                dt: float, weights: Mapping[str, float] | None = None) -> MetricsLedger:
    """Append one tick to ``ledger`` (in place) and return it."""
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    response = dict(telemetry.endpoint_response_ms)
    violation = {e: max(0.0, response[e] - slo) for e, slo in ledger.slo_ms.items()}
    billed = {m: ms.provisioned for m, ms in state.micros.items()}
    core = {m: billed[m] * ledger.cpu_request[m] * dt / 60.0 for m in ledger.cpu_request}
    for e, v in violation.items():
        ledger._violation[e].add(v)
    for m, c in core.items():
        ledger._core[m].add(c)
    weights = weights or {}
    ledger.rows.append(TickRow(
        clock=telemetry.clock_sec,
        response_ms=response,
        violation_ms=violation,
        replicas={m: ms.active for m, ms in state.micros.items()},
        billed_replicas=billed,
        utilization={m: t.utilization for m, t in telemetry.micros.items()},
        weight={m: float(weights.get(m, 1.0)) for m in ledger.cpu_request},
        core_min=core,
    ))
    return ledger


def nearest_rank(values: Sequence[float], pct: float) -> float:
    if not values:
        raise DomainError("percentile of an empty sequence")
    ordered = sorted(values)
    rank = max(1, math.ceil(pct / 100.0 * len(ordered)))
    return ordered[rank - 1]


@dataclass(frozen=True)
class SummaryRow:
    controller: str
    core_min: float
    violation_ms: float
    p50_ms: float
    p95_ms: float
    max_ms: float
    per_endpoint: Mapping[str, tuple[float, float, float]] = field(default_factory=dict)
    mean_replicas: Mapping[str, float] = field(default_factory=dict)

    def csv_fields(self) -> list[str]:
        return [self.controller] + [
            _fmt(v) for v in (self.core_min, self.violation_ms, self.p50_ms, self.p95_ms, self.max_ms)
        ]


def summarize(ledger: MetricsLedger, controller: str = "") -> SummaryRow:
    """Totals plus nearest-rank response percentiles.

    The top-level percentiles pool every endpoint's per-tick responses;
    ``per_endpoint`` holds ``(p50, p95, max)`` per endpoint.
    """
    if not ledger.rows:
        raise DomainError("cannot summarize an empty ledger")
    per_endpoint = {}
    pooled: list[float] = []
    for e in ledger.endpoints:
        vals = [r.response_ms[e] for r in ledger.rows]
        pooled.extend(vals)
        per_endpoint[e] = (nearest_rank(vals, 50), nearest_rank(vals, 95), max(vals))
    n = len(ledger.rows)
    mean_replicas = {m: math.fsum(r.replicas[m] for r in ledger.rows) / n for m in ledger.micros}
    return SummaryRow(
        controller=controller,
        core_min=ledger.core_minutes_total(),
        violation_ms=ledger.violation_ms_total(),
        p50_ms=nearest_rank(pooled, 50),
        p95_ms=nearest_rank(pooled, 95),
        max_ms=max(pooled),
        per_endpoint=per_endpoint,
        mean_replicas=mean_replicas,
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def export_csv(ledger: MetricsLedger) -> bytes:
    """Time series, one line per (tick, endpoint)."""
    micros = ledger.micros
    header = ["t_sec", "endpoint", "response_ms", "violation_ms"]
    for m in micros:
        header += [f"{m}_replicas", f"{m}_util", f"{m}_weight"]
    lines = [",".join(header)]
    for r in ledger.rows:
        tail = []
        for m in micros:
            tail += [str(r.replicas[m]), _fmt(r.utilization[m]), _fmt(r.weight[m])]
        for e in ledger.endpoints:
            lines.append(",".join([_fmt(r.clock), e, _fmt(r.response_ms[e]), _fmt(r.violation_ms[e])] + tail))
    return ("\n".join(lines) + "\n").encode("utf-8")


def summary_csv(rows: Sequence[SummaryRow], axis: str | None = None,
                axis_values: Sequence[object] | None = None) -> bytes:
    header = list(SUMMARY_HEADER)
    if axis is not None:
        header.insert(0, axis)
    lines = [",".join(header)]
    for k, row in enumerate(rows):
        fields = row.csv_fields()
        if axis is not None:
            fields.insert(0, str(axis_values[k]))
        lines.append(",".join(fields))
    return ("\n".join(lines) + "\n").encode("utf-8")
