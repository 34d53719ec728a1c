import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chainscale.errors import DomainError, UndefinedMetricError
from chainscale.forecast import (
    PARAM_NAMES, Forecast, PredictorModel, init_params, load_model, loss_and_grads,
    lstm_forward, mape, mape_detail, predict, save_model, train_lstm, training_loss,
    training_set,
)
from chainscale.trace import WorkloadTrace, synth_trace


def lstm_model(params, window, hidden):
    return PredictorModel("lstm", window=window, hidden=hidden, params=params)


def zero_params(hidden):
    H = hidden
    return {"w_x": np.zeros(4 * H), "w_h": np.zeros((4 * H, H)), "b": np.zeros(4 * H),
            "w_y": np.zeros(H), "b_y": np.zeros(1)}


def scalar_forward(params, window):
    """Gate equations evaluated one scalar at a time, with no numpy algebra."""
    H = len(params["w_y"])
    sig = lambda v: 1.0 / (1.0 + math.exp(-v))
    h = [0.0] * H
    c = [0.0] * H
    for x in window:
        z = []
        for r in range(4 * H):
            acc = params["w_x"][r] * x + params["b"][r]
            for j in range(H):
                acc += params["w_h"][r][j] * h[j]
            z.append(acc)
        new_h, new_c = [], []
        for j in range(H):
            i = sig(z[j])
            f = sig(z[H + j])
            o = sig(z[2 * H + j])
            g = math.tanh(z[3 * H + j])
            cj = f * c[j] + i * g
            new_c.append(cj)
            new_h.append(o * math.tanh(cj))
        h, c = new_h, new_c
    return sum(params["w_y"][j] * h[j] for j in range(H)) + params["b_y"][0]


def test_zero_weights_collapse_to_output_bias():
    p = zero_params(3)
    y, hs, cs = lstm_forward(lstm_model(p, 4, 3), [0.2, 0.9, -1.0, 5.0])
    assert y == 0.0
    assert not hs.any() and not cs.any()
    p["b_y"] = np.array([0.25])
    assert lstm_forward(lstm_model(p, 4, 3), [0.2, 0.9, -1.0, 5.0])[0] == 0.25


def test_forward_matches_scalar_evaluation():
    p = init_params(3, 2, seed=11)
    rng = np.random.default_rng(5)
    p = {k: v + rng.uniform(-0.5, 0.5, size=v.shape) for k, v in p.items()}
    window = [0.1, 0.7, 0.4]
    y, hs, cs = lstm_forward(lstm_model(p, 3, 2), window)
    assert hs.shape == (4, 2) and cs.shape == (4, 2)
    assert y == pytest.approx(scalar_forward(p, window), rel=1e-12, abs=1e-15)


def test_forward_is_pure_and_checks_input():
    m = lstm_model(init_params(3, 2, seed=1), 3, 2)
    assert lstm_forward(m, [0.1, 0.2, 0.3])[0] == lstm_forward(m, [0.1, 0.2, 0.3])[0]
    with pytest.raises(DomainError):
        lstm_forward(m, [0.1, float("nan"), 0.3])
    with pytest.raises(DomainError):
        lstm_forward(m, [0.1, 0.2])


def test_gradient_check_against_central_differences():
    W, H, step = 4, 3, 1e-5
    rng = np.random.default_rng(0)
    params = {k: v + rng.uniform(-0.5, 0.5, size=v.shape) for k, v in init_params(W, H, 2).items()}
    X, Y = training_set(rng.uniform(0, 1, size=12), W)
    _, grads = loss_and_grads(params, X, Y)
    for name in PARAM_NAMES:
        for idx in np.ndindex(params[name].shape):
            plus = {k: v.copy() for k, v in params.items()}
            minus = {k: v.copy() for k, v in params.items()}
            plus[name][idx] += step
            minus[name][idx] -= step
            numeric = (loss_and_grads(plus, X, Y)[0] - loss_and_grads(minus, X, Y)[0]) / (2 * step)
            analytic = grads[name][idx]
            scale = max(abs(numeric), abs(analytic), 1e-8)
            assert abs(numeric - analytic) / scale < 1e-4, (name, idx, numeric, analytic)


def test_loss_non_increasing_at_small_lr():
    trace = synth_trace(10, 5, 3600, length=80, interval_sec=60)
    m = train_lstm(trace, window=6, hidden=4, epochs=200, lr=0.05, seed=3)
    diffs = np.diff(m.loss_history)
    assert np.all(diffs <= 1e-9)
    assert m.loss_history[-1] == pytest.approx(training_loss(m, trace), rel=1e-12)


def test_zero_lr_leaves_weights_unchanged():
    trace = synth_trace(10, 5, 3600, length=40, interval_sec=60)
    m = train_lstm(trace, window=4, hidden=3, epochs=5, lr=0.0, seed=9)
    init = init_params(4, 3, 9)
    for k in PARAM_NAMES:
        assert np.array_equal(m.params[k], init[k])


def test_training_is_deterministic_per_seed():
    trace = synth_trace(10, 5, 3600, length=40, interval_sec=60)
    a = train_lstm(trace, window=4, hidden=3, epochs=20, seed=1)
    b = train_lstm(trace, window=4, hidden=3, epochs=20, seed=1)
    for k in PARAM_NAMES:
        assert np.array_equal(a.params[k], b.params[k])


def test_training_errors():
    trace = synth_trace(10, 5, 3600, length=10, interval_sec=60)
    with pytest.raises(DomainError):
        train_lstm(trace, window=4, hidden=2, epochs=0)
    with pytest.raises(DomainError):
        train_lstm(trace, window=9, hidden=2, epochs=1)


def test_divergence_is_reported():
    trace = synth_trace(10, 5, 3600, length=60, interval_sec=60)
    with pytest.raises(DomainError, match="diverged"):
        train_lstm(trace, window=4, hidden=4, epochs=200, lr=1e6, seed=0)


def test_constant_trace_is_learned():
    trace = WorkloadTrace(60, (10.0,) * 60)
    m = train_lstm(trace, window=24, hidden=32, epochs=1000, lr=0.5, seed=0)
    f = predict(m, [10.0] * 24, 0, 60)
    assert f.predicted_rate == pytest.approx(10, rel=0.05)


def test_naive_and_oracle():
    assert predict(PredictorModel.naive(), [1, 2, 42], 0, 60).predicted_rate == 42
    oracle = PredictorModel.oracle(WorkloadTrace(60, (10, 20, 30)))
    assert predict(oracle, [], 0, 120).predicted_rate == 30
    with pytest.raises(DomainError):
        predict(oracle, [], 0, 90)
    with pytest.raises(DomainError):
        predict(PredictorModel.naive(), [], 0, 60)


def test_lstm_needs_window_history():
    m = lstm_model(init_params(4, 2, 0), 4, 2)
    with pytest.raises(DomainError):
        predict(m, [1.0, 2.0], 0, 60)


def test_oracle_mape_zero_on_own_trace():
    trace = synth_trace(10, 5, 3600, length=120, interval_sec=60)
    oracle = PredictorModel.oracle(trace)
    for horizon in (0, 60, 600):
        pred = [predict(oracle, [], 60 * k, horizon).predicted_rate
                for k in range(120 - horizon // 60)]
        assert mape(pred, trace.rates[horizon // 60:]) == 0.0


def test_mape_examples():
    assert mape([10], [10]) == 0
    assert mape([11], [10]) == pytest.approx(10.0)
    assert mape([11, 9], [10, 10]) == pytest.approx(10.0)
    assert mape_detail([11, 5], [10, 0]) == (pytest.approx(10.0), 1)
    with pytest.raises(UndefinedMetricError):
        mape([1, 2], [0, 0])
    with pytest.raises(DomainError):
        mape([1], [1, 2])


def test_forecast_invariants():
    with pytest.raises(DomainError):
        Forecast(60, -1.0)
    with pytest.raises(DomainError):
        Forecast(60, float("inf"))


def test_model_invariants():
    p = zero_params(2)
    with pytest.raises(DomainError):
        PredictorModel("lstm", window=3, hidden=2, params=p, norm_min=1, norm_max=1)
    bad = dict(p, w_y=np.array([np.nan, 0.0]))
    with pytest.raises(DomainError):
        PredictorModel("lstm", window=3, hidden=2, params=bad)
    with pytest.raises(DomainError):
        PredictorModel("oracle")
    with pytest.raises(DomainError):
        PredictorModel("arima")


def test_save_load_round_trip_is_bit_exact(tmp_path):
    trace = synth_trace(10, 5, 3600, length=40, interval_sec=60)
    m = train_lstm(trace, window=4, hidden=3, epochs=10, seed=4)
    save_model(m, tmp_path / "m.npz")
    back = load_model(tmp_path / "m.npz")
    assert (back.kind, back.window, back.hidden) == ("lstm", 4, 3)
    assert (back.norm_min, back.norm_max, back.interval_sec) == (m.norm_min, m.norm_max, 60.0)
    for k in PARAM_NAMES:
        assert back.params[k].tobytes() == m.params[k].tobytes()
    assert predict(back, trace.rates, 0, 120) == predict(m, trace.rates, 0, 120)


def test_oracle_round_trip(tmp_path):
    oracle = PredictorModel.oracle(WorkloadTrace(60, (10, 20, 30)))
    save_model(oracle, tmp_path / "o.npz")
    back = load_model(tmp_path / "o.npz")
    assert back.kind == "oracle" and back.trace.rates == (10.0, 20.0, 30.0)


@settings(max_examples=50, deadline=None)
@given(history=st.lists(st.floats(0, 1e4), min_size=4, max_size=10), seed=st.integers(0, 100),
       steps=st.integers(0, 5))
def test_predictions_are_non_negative(history, seed, steps):
    p = init_params(4, 2, seed)
    p["b_y"] = np.array([-3.0])  # pull the output below the training minimum
    m = PredictorModel("lstm", window=4, hidden=2, params=p, norm_min=0.0, norm_max=10.0,
                       interval_sec=60)
    assert predict(m, history, 0, 60 * steps).predicted_rate >= 0
