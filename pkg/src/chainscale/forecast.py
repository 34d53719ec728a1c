"""Arrival-rate predictors: a single-layer LSTM, last-value, and a trace oracle.

LSTM cell (gate blocks stacked in the order input, forget, output, candidate)::

    z_t = W_x * x_t + W_h @ h_{t-1} + b
    i, f, o = sigmoid(z_i), sigmoid(z_f), sigmoid(z_o);  g = tanh(z_g)
    c_t = f * c_{t-1} + i * g
    h_t = o * tanh(c_t)
    y   = w_y @ h_W + b_y                       (linear head, last step only)

Inputs and outputs are min-max normalized with the training trace's bounds.
Training is full-batch gradient descent on the mean squared one-step error,
with backpropagation through the whole input window.

Saved models are ``.npz`` archives of named float64 arrays; see
:func:`save_model` for the field list.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError, UndefinedMetricError
from .trace import WorkloadTrace, rate_at

FORMAT_VERSION = 1
KINDS = ("lstm", "naive", "oracle")
PARAM_NAMES = ("w_x", "w_h", "b", "w_y", "b_y")


@dataclass(frozen=True)
class Forecast:
    horizon_sec: float
    predicted_rate: float

    def __post_init__(self):
        if not (math.isfinite(self.predicted_rate) and self.predicted_rate >= 0):
            raise DomainError(f"predicted_rate must be finite and >= 0, got {self.predicted_rate}")


@dataclass(frozen=True, eq=False)
class PredictorModel:
    kind: str
    window: int = 1
    hidden: int = 1
    params: dict[str, np.ndarray] = field(default_factory=dict)
    norm_min: float = 0.0
    norm_max: float = 1.0
    interval_sec: float = 1.0
    trace: WorkloadTrace | None = None
    loss_history: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown predictor kind {self.kind!r}")
        if self.window < 1 or self.hidden < 1:
            raise DomainError("window and hidden must be >= 1")
        if self.kind == "lstm":
            if not self.norm_max > self.norm_min:
                raise DomainError("normalization max must exceed min")
            for name in PARAM_NAMES:
                if name not in self.params:
                    raise DomainError(f"missing LSTM parameter {name}")
                if not np.all(np.isfinite(self.params[name])):
                    raise DomainError(f"non-finite values in {name}")
        if self.kind == "oracle" and self.trace is None:
            raise DomainError("oracle predictor needs a trace")

    @classmethod
    def naive(cls) -> "PredictorModel":
        return cls("naive")

    @classmethod
    def oracle(cls, trace: WorkloadTrace) -> "PredictorModel":
        return cls("oracle", trace=trace, interval_sec=trace.interval_sec)

    def normalize(self, x):
        return (np.asarray(x, dtype=float) - self.norm_min) / (self.norm_max - self.norm_min)

    def denormalize(self, y):
        return y * (self.norm_max - self.norm_min) + self.norm_min


def init_params(window: int, hidden: int, seed: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    H = hidden
    return {
        "w_x": rng.uniform(-0.1, 0.1, size=4 * H),
        "w_h": rng.uniform(-0.1, 0.1, size=(4 * H, H)),
        "b": np.zeros(4 * H),
        "w_y": rng.uniform(-0.1, 0.1, size=H),
        "b_y": np.zeros(1),
    }


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _forward(params: dict[str, np.ndarray], X: np.ndarray):
    """Batched forward pass. ``X`` has shape (N, W); returns (y, cache)."""
    w_x, w_h, b = params["w_x"], params["w_h"], params["b"]
    H = w_h.shape[1]
    w_h_t = w_h.T
    N, W = X.shape
    h = np.zeros((N, H))
    c = np.zeros((N, H))
    hs, cs, gates = [h], [c], []
    for t in range(W):
        z = X[:, t:t + 1] * w_x + h @ w_h_t + b
        s = _sigmoid(z[:, :3 * H])
        i, f, o = s[:, :H], s[:, H:2 * H], s[:, 2 * H:]
        g = np.tanh(z[:, 3 * H:])
        c = f * c + i * g
        h = o * np.tanh(c)
        hs.append(h)
        cs.append(c)
        gates.append((s, i, f, o, g))
    y = h @ params["w_y"] + params["b_y"][0]
    return y, (hs, cs, gates)


def loss_and_grads(params, X, Y):
    """Mean squared one-step error over the rows of ``X`` and its gradient per parameter."""
    y, (hs, cs, gates) = _forward(params, X)
    N, W = X.shape
    H = params["w_h"].shape[1]
    err = y - Y
    loss = float(np.mean(err ** 2))
    dy = 2.0 * err / N

    grads = {k: np.zeros_like(v) for k, v in params.items()}
    grads["w_y"] = hs[-1].T @ dy
    grads["b_y"] = np.array([dy.sum()])
    dh = np.outer(dy, params["w_y"])
    dc = np.zeros((N, H))
    w_h = params["w_h"]
    for t in range(W - 1, -1, -1):
        s, i, f, o, g = gates[t]
        tc = np.tanh(cs[t + 1])
        dc = dc + dh * o * (1.0 - tc * tc)
        dsig = np.concatenate([dc * g, dc * cs[t], dh * tc], axis=1)
        dz = np.concatenate([dsig * s * (1.0 - s), dc * i * (1.0 - g * g)], axis=1)
        grads["w_x"] += dz.T @ X[:, t]
        grads["w_h"] += dz.T @ hs[t]
        grads["b"] += dz.sum(axis=0)
        dh = dz @ w_h
        dc = dc * f
    return loss, grads


def lstm_forward(model: PredictorModel, window: Sequence[float]):
    """One-step normalized prediction for one normalized window.

    Returns ``(prediction, hidden_states, cell_states)``; the state arrays have
    shape (W + 1, H) and start with the zero initial state.
    """
    x = np.asarray(window, dtype=float)
    if x.shape != (model.window,):
        raise DomainError(f"window must have length {model.window}, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DomainError("window contains non-finite values")
    y, (hs, cs, _) = _forward(model.params, x[None, :])
    return float(y[0]), np.vstack(hs), np.vstack(cs)


def training_set(rates: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray]:
    n = len(rates) - window
    X = np.lib.stride_tricks.sliding_window_view(rates[:-1], window)[:n]
    Y = rates[window:]
    return np.ascontiguousarray(X), Y


def train_lstm(trace: WorkloadTrace, window: int = 24, hidden: int = 32, epochs: int = 1000,
               lr: float = 0.5, seed: int = 0) -> PredictorModel:
    if epochs < 1:
        raise DomainError(f"epochs must be >= 1, got {epochs}")
    if lr < 0:
        raise DomainError(f"lr must be non-negative, got {lr}")
    if window < 1 or hidden < 1:
        raise DomainError("window and hidden must be >= 1")
    if len(trace) <= window + 1:
        raise DomainError(f"trace of {len(trace)} intervals is too short for window {window}")

    rates = trace.as_array()
    lo, hi = float(rates.min()), float(rates.max())
    if hi - lo < 1e-12:
        # constant trace: centre it in a unit-scaled range
        half = 0.5 * max(1.0, abs(lo))
        lo, hi = lo - half, hi + half
    scaled = (rates - lo) / (hi - lo)
    X, Y = training_set(scaled, window)

    params = init_params(window, hidden, seed)
    history = []
    # overflow only happens on divergence, which the finiteness check reports
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(epochs + 1):
            loss, grads = loss_and_grads(params, X, Y)
            if not math.isfinite(loss):
                raise DomainError(f"training diverged at lr={lr}; lower the learning rate")
            history.append(loss)
            if epoch < epochs:
                for k in params:
                    params[k] = params[k] - lr * grads[k]
    return PredictorModel(
        "lstm", window=window, hidden=hidden, params=params, norm_min=lo, norm_max=hi,
        interval_sec=trace.interval_sec, loss_history=tuple(history),
    )


def training_loss(model: PredictorModel, trace: WorkloadTrace) -> float:
    X, Y = training_set(model.normalize(trace.as_array()), model.window)
    y, _ = _forward(model.params, X)
    return float(np.mean((y - Y) ** 2))


def _steps(horizon_sec: float, interval_sec: float) -> int:
    steps = horizon_sec / interval_sec
    n = round(steps)
    if n < 0 or not math.isclose(steps, n, rel_tol=0, abs_tol=1e-9):
        raise DomainError(f"horizon {horizon_sec}s is not a multiple of interval {interval_sec}s")
    return n


def predict(model: PredictorModel, history: Sequence[float], t: float,
            horizon_sec: float) -> Forecast:
    if model.kind == "naive":
        if len(history) < 1:
            raise DomainError("naive predictor needs at least one history value")
        return Forecast(horizon_sec, max(0.0, float(history[-1])))
    if model.kind == "oracle":
        _steps(horizon_sec, model.trace.interval_sec)
        return Forecast(horizon_sec, rate_at(model.trace, t + horizon_sec))

    if len(history) < model.window:
        raise DomainError(f"lstm needs {model.window} history values, got {len(history)}")
    n = _steps(horizon_sec, model.interval_sec)
    buf = list(model.normalize(np.asarray(history[-model.window:], dtype=float)))
    if n == 0:
        return Forecast(horizon_sec, max(0.0, float(history[-1])))
    for _ in range(n):
        y, _, _ = lstm_forward(model, buf[-model.window:])
        buf.append(y)
    value = float(model.denormalize(buf[-1]))
    return Forecast(horizon_sec, max(0.0, value))


def mape(predicted: Sequence[float], actual: Sequence[float]) -> float:
    """Mean absolute percentage error; points with zero actual are skipped.

    :func:`mape_detail` also returns how many points were skipped.
    """
    return mape_detail(predicted, actual)[0]


def mape_detail(predicted: Sequence[float], actual: Sequence[float]) -> tuple[float, int]:
    if len(predicted) != len(actual) or len(actual) < 1:
        raise DomainError("predicted and actual must have the same non-zero length")
    terms = []
    skipped = 0
    for p, a in zip(predicted, actual):
        if a <= 0:
            skipped += 1
            continue
        terms.append(abs(p - a) / a)
    if not terms:
        raise UndefinedMetricError("every actual value is zero; MAPE undefined")
    return 100.0 * math.fsum(terms) / len(terms), skipped


def save_model(model: PredictorModel, path: str | Path) -> None:
    """Write ``model`` as an ``.npz`` archive.

    Fields: ``format_version``, ``kind`` (index into ``KINDS``), ``window``,
    ``hidden``, ``norm`` ([min, max]), ``interval_sec``, the LSTM parameters
    ``w_x`` (4H), ``w_h`` (4H x H), ``b`` (4H), ``w_y`` (H), ``b_y`` (1), and for
    oracles ``trace_rates``.
    """
    arrays = {
        "format_version": np.array([FORMAT_VERSION], dtype=np.int64),
        "kind": np.array([KINDS.index(model.kind)], dtype=np.int64),
        "window": np.array([model.window], dtype=np.int64),
        "hidden": np.array([model.hidden], dtype=np.int64),
        "norm": np.array([model.norm_min, model.norm_max]),
        "interval_sec": np.array([model.interval_sec]),
    }
    arrays.update({k: np.asarray(v) for k, v in model.params.items()})
    if model.trace is not None:
        arrays["trace_rates"] = model.trace.as_array()
        arrays["trace_interval_sec"] = np.array([model.trace.interval_sec])
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_model(path: str | Path) -> PredictorModel:
    with np.load(path) as data:
        version = int(data["format_version"][0])
        if version != FORMAT_VERSION:
            raise DomainError(f"unsupported model format version {version}")
        kind = KINDS[int(data["kind"][0])]
        params = {k: data[k].copy() for k in PARAM_NAMES if k in data}
        trace = None
        if "trace_rates" in data:
            trace = WorkloadTrace(float(data["trace_interval_sec"][0]), tuple(data["trace_rates"].tolist()))
        return PredictorModel(
            kind,
            window=int(data["window"][0]),
            hidden=int(data["hidden"][0]),
            params=params,
            norm_min=float(data["norm"][0]),
            norm_max=float(data["norm"][1]),
            interval_sec=float(data["interval_sec"][0]),
            trace=trace,
        )
