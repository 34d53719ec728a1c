"""Arrival-rate traces: CSV ingestion, synthetic generation, piecewise-constant lookup.

A trace is a sequence of arrival rates (req/s), each held constant for
``interval_sec`` seconds. The CSV layout is::

    t_sec,req_per_sec
    0,10
    60,20

Synthetic noise uses numpy's PCG64 generator (``numpy.random.default_rng``);
two runs agree per seed only on the same generator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import DomainError, FormatError, ParseError, RangeError

HEADER = "t_sec,req_per_sec"
_SPACING_RTOL = 1e-9


@dataclass(frozen=True)
class TraceOrigin:
    kind: str  # "file" | "synthetic"
    seed: int | None = None
    pattern: str | None = None


@dataclass(frozen=True)
class WorkloadTrace:
    interval_sec: float
    rates: tuple[float, ...]
    origin: TraceOrigin = field(default_factory=lambda: TraceOrigin("file"))

    def __post_init__(self):
        if not (self.interval_sec > 0 and math.isfinite(self.interval_sec)):
            raise DomainError(f"interval_sec must be positive, got {self.interval_sec}")
        rates = tuple(float(r) for r in self.rates)
        if len(rates) < 2:
            raise DomainError("a trace needs at least 2 intervals")
        for k, r in enumerate(rates):
            if not math.isfinite(r) or r < 0:
                raise DomainError(f"rate[{k}]={r} is not a finite non-negative number")
        object.__setattr__(self, "rates", rates)

    def __len__(self) -> int:
        return len(self.rates)

    @property
    def span_sec(self) -> float:
        return len(self.rates) * self.interval_sec

    def as_array(self) -> np.ndarray:
        return np.asarray(self.rates, dtype=float)


def load_trace(data: bytes | str) -> WorkloadTrace:
    """Parse a ``t_sec,req_per_sec`` CSV document."""
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0].strip() != HEADER:
        raise ParseError(f"expected header {HEADER!r}", line=1)

    times: list[float] = []
    rates: list[float] = []
    for lineno, raw in enumerate(lines[1:], start=2):
        parts = raw.strip().split(",")
        if len(parts) != 2:
            raise ParseError(f"expected 2 fields, got {len(parts)}", line=lineno)
        try:
            t, r = float(parts[0]), float(parts[1])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        if not (math.isfinite(t) and math.isfinite(r)):
            raise ParseError("non-finite value", line=lineno)
        if r < 0:
            raise DomainError(f"line {lineno}: negative rate {r}")
        times.append(t)
        rates.append(r)

    if len(times) < 2:
        raise FormatError("a trace needs at least 2 rows")
    spacing = times[1] - times[0]
    if spacing <= 0:
        raise FormatError("t_sec must be strictly increasing")
    for k in range(1, len(times)):
        step = times[k] - times[k - 1]
        if not math.isclose(step, spacing, rel_tol=_SPACING_RTOL, abs_tol=0.0):
            raise FormatError(
                f"non-constant spacing at line {k + 2}: {step} after {spacing}"
            )
    return WorkloadTrace(spacing, tuple(rates), TraceOrigin("file"))


def dump_trace(trace: WorkloadTrace) -> bytes:
    """Inverse of :func:`load_trace`; rates are written at full round-trip precision."""
    rows = [HEADER]
    for k, r in enumerate(trace.rates):
        rows.append(f"{_fmt(k * trace.interval_sec)},{_fmt(r)}")
    return ("\n".join(rows) + "\n").encode("utf-8")


def _fmt(x: float) -> str:
    if float(x).is_integer() and abs(x) < 2**53:
        return str(int(x))
    return repr(float(x))


def synth_trace(
    base: float,
    amplitude: float,
    period_sec: float,
    spike_times: Iterable[float] = (),
    spike_factor: float = 1.0,
    noise_sd: float = 0.0,
    seed: int = 0,
    length: int = 3600,
    interval_sec: float = 1.0,
    spike_duration_sec: float | None = None,
) -> WorkloadTrace:
    """Sinusoid plus Gaussian noise, multiplied by ``spike_factor`` inside spike windows.

    A spike starting at ``s`` covers ``s <= t < s + spike_duration_sec``; the
    duration defaults to one interval.
    """
    if amplitude < 0 or base < amplitude:
        raise DomainError(f"need base >= amplitude >= 0, got base={base}, amplitude={amplitude}")
    if spike_factor < 1:
        raise DomainError(f"spike_factor must be >= 1, got {spike_factor}")
    if period_sec <= 0:
        raise DomainError(f"period_sec must be positive, got {period_sec}")
    if noise_sd < 0:
        raise DomainError(f"noise_sd must be non-negative, got {noise_sd}")
    if length < 2:
        raise DomainError("length must be at least 2")
    duration = interval_sec if spike_duration_sec is None else spike_duration_sec

    t = np.arange(length, dtype=float) * interval_sec
    rate = base + amplitude * np.sin(2.0 * np.pi * t / period_sec)
    if noise_sd > 0:
        rate = rate + np.random.default_rng(seed).normal(0.0, noise_sd, size=length)
    rate = np.maximum(rate, 0.0)
    in_spike = np.zeros(length, dtype=bool)
    for s in spike_times:
        in_spike |= (t >= s) & (t < s + duration)
    rate = np.where(in_spike, rate * spike_factor, rate)

    pattern = f"sine(base={base},amp={amplitude},period={period_sec})"
    if in_spike.any():
        pattern += f"+spike(x{spike_factor})"
    return WorkloadTrace(float(interval_sec), tuple(rate.tolist()), TraceOrigin("synthetic", seed, pattern))


def rate_at(trace: WorkloadTrace, t: float) -> float:
    """Rate held over the interval containing ``t``."""
    k = math.floor(t / trace.interval_sec)
    # the division can land one interval off at a boundary; compare against the products
    if k * trace.interval_sec > t:
        k -= 1
    elif (k + 1) * trace.interval_sec <= t:
        k += 1
    if t < 0 or k >= len(trace.rates):
        raise RangeError(f"t={t} outside [0, {trace.span_sec})")
    return trace.rates[k]


def resample(trace: WorkloadTrace, interval_sec: float) -> WorkloadTrace:
    """Coarsen ``trace`` to ``interval_sec`` by averaging whole groups of intervals.

    A trailing partial group is dropped.
    """
    ratio = interval_sec / trace.interval_sec
    k = round(ratio)
    if k < 1 or not math.isclose(ratio, k, rel_tol=0, abs_tol=1e-9):
        raise DomainError(
            f"interval {interval_sec}s is not a whole multiple of {trace.interval_sec}s"
        )
    n = len(trace.rates) // k
    rates = trace.as_array()[: n * k].reshape(n, k).mean(axis=1)
    return WorkloadTrace(float(interval_sec), tuple(rates.tolist()), trace.origin)
