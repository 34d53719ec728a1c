"""Scenario configuration and the experiment loop.

A scenario is a YAML document. Every field below has a default except
``app`` and ``traces``::

    seed: 7
    duration_sec: 7200
    dt: 1
    controller: pid            # hpa | pid | wpid | spid | stpid
    app:
      microservices: [{name, mu, cpu_request, boot_time_sec, min_replicas, max_replicas}]
      endpoints: [{name, chain: [...], slo_ms, call_multiplier: [...]}]
    traces:
      /login: {file: trace.csv}                 # path relative to the scenario file
      # or {synthetic: {base, amplitude, period_sec, spike_times, spike_factor,
      #                 spike_duration_sec, noise_sd, length, interval_sec, seed}}
    initial_replicas: {name: count}
    hpa: {target_util, sync_period_sec, stabilization_sec, tolerance}
    pid: {kp, ki, kd, anti_windup, integral_limit, control_interval_sec}
    wpid: {weight_sets: [{name: weight}]}      # the ladder reports the best set
    supervisor: {low_threshold, high_threshold, window_sec, weight_step, w_min, w_max,
                 default_control_interval_sec, horizon_sec, feedforward_deadband,
                 low_rule, high_rule, adapt_weights, dependency_gating, adaptive_timing}
    predictor: {kind: oracle|naive|lstm, model, interval_sec, window, hidden, epochs, lr}
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import yaml

from . import control, forecast, metrics, simcore, supervisory
from .errors import ChainscaleError, ConfigError
from .trace import WorkloadTrace, load_trace, rate_at, resample, synth_trace

CONTROLLERS = ("hpa", "pid", "wpid", "spid", "stpid")
LADDER = CONTROLLERS
_EPS = 1e-9

DEFAULTS: dict[str, Any] = {
    "name": "scenario",
    "seed": 0,
    "duration_sec": None,
    "dt": 1.0,
    "controller": "pid",
    "initial_replicas": {},
    "hpa": {"target_util": 0.5, "sync_period_sec": 15.0, "stabilization_sec": 300.0, "tolerance": 0.1},
    "pid": {
        "kp": 0.004, "ki": 0.004, "kd": 0.0005,
        "anti_windup": True, "integral_limit": None, "control_interval_sec": 30.0,
    },
    "wpid": {"weight_sets": []},
    "supervisor": {
        "low_threshold": 0.30, "high_threshold": 0.80, "window_sec": 300.0, "weight_step": 1.25,
        "w_min": 0.25, "w_max": 4.0, "default_control_interval_sec": 30.0, "horizon_sec": 60.0,
        "feedforward_deadband": 0.10, "low_rule": "all", "high_rule": "mean",
        "adapt_weights": True, "dependency_gating": True, "adaptive_timing": True,
        "initial_weights": {},
    },
    "predictor": {
        "kind": "oracle", "model": None, "interval_sec": 60.0, "window": 24, "hidden": 32,
        "epochs": 1000, "lr": 0.5,
    },
}
_FREE_MAPS = {"initial_replicas", "supervisor.initial_weights"}


def _merge(defaults: Mapping, given: Mapping, path: str = "") -> dict:
    out = copy.deepcopy(dict(defaults))
    for key, value in given.items():
        p = f"{path}.{key}" if path else str(key)
        if key not in defaults:
            raise ConfigError("unknown field", p)
        if isinstance(defaults[key], dict) and p not in _FREE_MAPS:
            if not isinstance(value, Mapping):
                raise ConfigError("expected a mapping", p)
            out[key] = _merge(defaults[key], value, p)
        else:
            out[key] = copy.deepcopy(value)
    return out


def resolve_config(raw: Mapping, base_dir: str | Path | None = None) -> dict:
    """Merge ``raw`` over the defaults and check field types; returns a plain dict."""
    if not isinstance(raw, Mapping):
        raise ConfigError("scenario must be a mapping")
    raw = dict(raw)
    for required in ("app", "traces"):
        if required not in raw:
            raise ConfigError("missing required field", required)
    app, traces = raw.pop("app"), raw.pop("traces")
    cfg = _merge(DEFAULTS, raw)
    cfg["app"] = copy.deepcopy(app)
    cfg["traces"] = copy.deepcopy(traces)
    if base_dir is not None:
        cfg["base_dir"] = str(base_dir)
    return cfg


def load_scenario(path: str | Path) -> dict:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read scenario: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from None
    return resolve_config(raw or {}, base_dir=path.parent)


def dump_config(cfg: Mapping) -> str:
    return yaml.safe_dump(dict(cfg), sort_keys=True, default_flow_style=False)


# ---------------------------------------------------------------- building


def _num(cfg: Mapping, key: str, path: str, *, positive=False, nonneg=False, integer=False):
    v = cfg.get(key)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"expected a number, got {v!r}", f"{path}.{key}" if path else key)
    if not math.isfinite(v):
        raise ConfigError("must be finite", f"{path}.{key}" if path else key)
    if positive and not v > 0:
        raise ConfigError("must be positive", f"{path}.{key}" if path else key)
    if nonneg and not v >= 0:
        raise ConfigError("must be non-negative", f"{path}.{key}" if path else key)
    if integer and int(v) != v:
        raise ConfigError("must be an integer", f"{path}.{key}" if path else key)
    return int(v) if integer else float(v)


def _wrap(path: str, fn: Callable, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ConfigError:
        raise
    except (ChainscaleError, TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc), path) from None


def build_app(cfg: Mapping) -> simcore.AppSpec:
    app = cfg["app"]
    if not isinstance(app, Mapping):
        raise ConfigError("expected a mapping", "app")
    micros = []
    for k, m in enumerate(app.get("microservices") or []):
        p = f"app.microservices[{k}]"
        if not isinstance(m, Mapping):
            raise ConfigError("expected a mapping", p)
        unknown = set(m) - {"name", "mu", "cpu_request", "boot_time_sec", "min_replicas", "max_replicas"}
        if unknown:
            raise ConfigError(f"unknown fields {sorted(unknown)}", p)
        micros.append(_wrap(p, simcore.MicroserviceSpec,
            name=str(m.get("name", "")),
            mu=_num(m, "mu", p, positive=True),
            cpu_request=_num(m, "cpu_request", p, positive=True),
            boot_time_sec=_num({"v": m.get("boot_time_sec", 0.0)}, "v", f"{p}.boot_time_sec", nonneg=True),
            min_replicas=_num({"v": m.get("min_replicas", 1)}, "v", f"{p}.min_replicas", integer=True),
            max_replicas=_num({"v": m.get("max_replicas", 100)}, "v", f"{p}.max_replicas", integer=True),
        ))
    if not micros:
        raise ConfigError("at least one microservice required", "app.microservices")
    endpoints = []
    for k, e in enumerate(app.get("endpoints") or []):
        p = f"app.endpoints[{k}]"
        if not isinstance(e, Mapping):
            raise ConfigError("expected a mapping", p)
        unknown = set(e) - {"name", "chain", "slo_ms", "call_multiplier"}
        if unknown:
            raise ConfigError(f"unknown fields {sorted(unknown)}", p)
        missing = [h for h in e.get("chain") or () if h not in {m.name for m in micros}]
        if missing:
            raise ConfigError(f"unknown microservices {missing}", f"{p}.chain")
        endpoints.append(_wrap(p, simcore.ServiceEndpoint,
            name=str(e.get("name", "")),
            chain=tuple(e.get("chain") or ()),
            slo_ms=_num(e, "slo_ms", p, positive=True),
            call_multiplier=tuple(e.get("call_multiplier") or ()),
        ))
    if not endpoints:
        raise ConfigError("at least one endpoint required", "app.endpoints")
    return _wrap("app", simcore.AppSpec, tuple(micros), tuple(endpoints))


def build_traces(cfg: Mapping, spec: simcore.AppSpec) -> dict[str, WorkloadTrace]:
    given = cfg["traces"]
    if not isinstance(given, Mapping):
        raise ConfigError("expected a mapping of endpoint -> trace", "traces")
    out = {}
    for ep in spec.endpoints:
        p = f"traces.{ep.name}"
        t = given.get(ep.name)
        if not isinstance(t, Mapping) or len(t) != 1 or not ({"file", "synthetic"} & set(t)):
            raise ConfigError("expected exactly one of {file, synthetic}", p)
        if "file" in t:
            fp = Path(str(t["file"]))
            if not fp.is_absolute() and cfg.get("base_dir"):
                fp = Path(cfg["base_dir"]) / fp
            if not fp.exists():
                raise ConfigError(f"trace file {fp} does not exist", f"{p}.file")
            out[ep.name] = _wrap(f"{p}.file", load_trace, fp.read_bytes())
        else:
            s = dict(t["synthetic"])
            s.setdefault("seed", cfg["seed"])
            out[ep.name] = _wrap(f"{p}.synthetic", synth_trace, **s)
    extra = set(given) - {e.name for e in spec.endpoints}
    if extra:
        raise ConfigError(f"traces for unknown endpoints {sorted(extra)}", "traces")
    return out


def build_supervisor(cfg: Mapping) -> supervisory.SupervisorConfig:
    s = {k: v for k, v in cfg["supervisor"].items() if k != "initial_weights"}
    return _wrap("supervisor", supervisory.SupervisorConfig, **s)


def build_gains(cfg: Mapping) -> control.PidGains:
    p = cfg["pid"]
    return _wrap("pid", control.PidGains, _num(p, "kp", "pid"), _num(p, "ki", "pid"), _num(p, "kd", "pid"))


def _weights(spec: simcore.AppSpec, given: Mapping, path: str) -> dict[str, float]:
    if not isinstance(given, Mapping):
        raise ConfigError("expected a mapping of microservice -> weight", path)
    unknown = set(given) - set(spec.micro_names)
    if unknown:
        raise ConfigError(f"weights for unknown microservices {sorted(unknown)}", path)
    w = {m: 1.0 for m in spec.micro_names}
    for m, v in given.items():
        w[m] = _num(given, m, path, positive=True)
    return w


def build_predictor(cfg: Mapping, traces: Mapping[str, WorkloadTrace]) -> dict[str, forecast.PredictorModel]:
    """One predictor per endpoint."""
    p = cfg["predictor"]
    kind = p["kind"]
    if kind == "oracle":
        return {e: forecast.PredictorModel.oracle(t) for e, t in traces.items()}
    if kind == "naive":
        return {e: forecast.PredictorModel.naive() for e in traces}
    if kind != "lstm":
        raise ConfigError(f"unknown predictor kind {kind!r}", "predictor.kind")
    if p.get("model"):
        fp = Path(str(p["model"]))
        if not fp.is_absolute() and cfg.get("base_dir"):
            fp = Path(cfg["base_dir"]) / fp
        if not fp.exists():
            raise ConfigError(f"model file {fp} does not exist", "predictor.model")
        model = _wrap("predictor.model", forecast.load_model, fp)
        return {e: model for e in traces}
    return {e: train_predictor(cfg, t) for e, t in traces.items()}


def train_predictor(cfg: Mapping, trace: WorkloadTrace) -> forecast.PredictorModel:
    p = cfg["predictor"]
    coarse = _wrap("predictor.interval_sec", resample, trace, _num(p, "interval_sec", "predictor", positive=True))
    return _wrap("predictor", forecast.train_lstm, coarse,
                 window=_num(p, "window", "predictor", integer=True),
                 hidden=_num(p, "hidden", "predictor", integer=True),
                 epochs=_num(p, "epochs", "predictor", integer=True),
                 lr=_num(p, "lr", "predictor", nonneg=True),
                 seed=int(cfg["seed"]))


@dataclass
class Prepared:
    """A validated scenario, ready to simulate."""

    cfg: dict
    spec: simcore.AppSpec
    traces: dict[str, WorkloadTrace]
    duration_sec: float
    dt: float
    initial: dict[str, int]


def prepare(cfg: Mapping) -> Prepared:
    cfg = dict(cfg)
    spec = build_app(cfg)
    traces = build_traces(cfg, spec)
    dt = _num(cfg, "dt", "", positive=True)
    span = min(t.span_sec for t in traces.values())
    duration = span if cfg.get("duration_sec") is None else _num(cfg, "duration_sec", "", positive=True)
    if duration > span + _EPS:
        raise ConfigError(f"duration {duration}s exceeds the shortest trace span {span}s", "duration_sec")
    ticks = duration / dt
    if not math.isclose(ticks, round(ticks), abs_tol=1e-9):
        raise ConfigError("duration_sec must be a whole number of ticks", "duration_sec")
    init = cfg.get("initial_replicas") or {}
    if not isinstance(init, Mapping):
        raise ConfigError("expected a mapping", "initial_replicas")
    initial = {}
    for m in spec.microservices:
        initial[m.name] = _num({"v": init.get(m.name, m.min_replicas)}, "v", f"initial_replicas.{m.name}", integer=True)
    _wrap("initial_replicas", simcore.init_cluster, spec, initial)
    unknown = set(init) - set(spec.micro_names)
    if unknown:
        raise ConfigError(f"unknown microservices {sorted(unknown)}", "initial_replicas")
    if cfg["controller"] not in CONTROLLERS:
        raise ConfigError(f"must be one of {CONTROLLERS}", "controller")
    return Prepared(cfg, spec, traces, duration, dt, initial)


# ---------------------------------------------------------------- controllers


class _Window:
    """Per-decision accumulator of telemetry between two decisions."""

    def __init__(self, spec: simcore.AppSpec):
        self.spec = spec
        self.reset()

    def reset(self):
        self.n = 0
        self.response = {e.name: 0.0 for e in self.spec.endpoints}
        self.hpa_util = {m: 0.0 for m in self.spec.micro_names}

    def add(self, tel: simcore.TickTelemetry):
        self.n += 1
        for e, r in tel.endpoint_response_ms.items():
            self.response[e] += r
        for m, t in tel.micros.items():
            self.hpa_util[m] += t.utilization * t.active / (t.active + t.pending)

    def mean_response(self, endpoint: str) -> float:
        return self.response[endpoint] / self.n


def _due(clock: float, last: float, interval: float) -> bool:
    return clock - last >= interval - _EPS


class HpaController:
    name = "hpa"

    def __init__(self, prep: Prepared, hpa_cfg: Mapping):
        self.spec = prep.spec
        self.sync = _num(hpa_cfg, "sync_period_sec", "hpa", positive=True)
        base = _wrap("hpa", control.HpaState,
                     target_utilization=_num(hpa_cfg, "target_util", "hpa", positive=True),
                     sync_period_sec=self.sync,
                     stabilization_sec=_num(hpa_cfg, "stabilization_sec", "hpa", nonneg=True),
                     tolerance=_num(hpa_cfg, "tolerance", "hpa", nonneg=True))
        self.states = {m: base for m in self.spec.micro_names}
        self.window = _Window(self.spec)
        self.last = 0.0

    def weights(self):
        return {}

    def on_tick(self, state, tel, clock):
        self.window.add(tel)
        if not _due(clock, self.last, self.sync):
            return state
        for m in self.spec.microservices:
            util = min(1.0, self.window.hpa_util[m.name] / self.window.n)
            current = state.micros[m.name].provisioned
            self.states[m.name], target = control.hpa_step(
                self.states[m.name], util, current, (m.min_replicas, m.max_replicas)
            )
            state = simcore.apply_scaling(state, m.name, target)
        self.window.reset()
        self.last = clock
        return state


class PidFamilyController:
    """PID, WPID, SPID and STPID share one loop; the flags select the rung."""

    def __init__(self, prep: Prepared, name: str, *, weights: Mapping[str, float] | None = None,
                 supervised: bool = False, predictors: Mapping[str, forecast.PredictorModel] | None = None):
        cfg = prep.cfg
        self.name = name
        self.spec = prep.spec
        self.traces = prep.traces
        self.gains = build_gains(cfg)
        pid_cfg = cfg["pid"]
        self.anti_windup = bool(pid_cfg["anti_windup"])
        limit = pid_cfg.get("integral_limit")
        self.integral_limit = math.inf if limit is None else _num(pid_cfg, "integral_limit", "pid", positive=True)
        self.sup = build_supervisor(cfg) if supervised else None
        self.predictors = predictors
        base_interval = _num(pid_cfg, "control_interval_sec", "pid", positive=True)

        if self.sup is not None:
            initial_w = _weights(self.spec, cfg["supervisor"].get("initial_weights") or {}, "supervisor.initial_weights")
            self.g = supervisory.GlobalState.for_app(self.spec, self.sup.window_sec, initial_w)
            self.intervals = {
                m.name: supervisory.control_interval(m, self.sup) if self.sup.adaptive_timing
                else self.sup.default_control_interval_sec
                for m in self.spec.microservices
            }
        else:
            self.g = supervisory.GlobalState.for_app(self.spec, 300.0, weights or {})
            self.intervals = {m: base_interval for m in self.spec.micro_names}
        self.units = {
            m: supervisory.StpidUnit(control.PidState.fresh(prep.initial[m]), self.g.weights[m])
            for m in self.spec.micro_names
        }
        self.windows = {m: _Window(self.spec) for m in self.spec.micro_names}
        self.last_weight_update = 0.0
        self.rate_history = {e: [] for e in self.traces}

    def weights(self):
        return dict(self.g.weights)

    def on_tick(self, state, tel, clock):
        sup = self.sup
        for e, t in self.traces.items():
            self.rate_history[e].append(rate_at(t, clock - tel.dt))
        if sup is not None:
            supervisory.update_utilization_window(self.g, tel)
            if sup.adapt_weights and _due(clock, self.last_weight_update, sup.window_sec):
                self.last_weight_update = clock
                supervisory.adjust_weights(self.g, sup)
        for m in self.spec.microservices:
            w = self.windows[m.name]
            w.add(tel)
            unit = self.units[m.name]
            if not _due(clock, unit.pid.last_decision_clock, self.intervals[m.name]):
                continue
            state = self._decide(state, tel, clock, m, w)
            w.reset()
        return state

    def _worst_endpoint(self, micro: str, w: _Window):
        eps = self.spec.endpoints_of(micro)
        return max(eps, key=lambda e: (w.mean_response(e.name) - e.slo_ms, e.name)) if eps else None

    def _decide(self, state, tel, clock, m: simcore.MicroserviceSpec, w: _Window):
        unit = self.units[m.name]
        ep = self._worst_endpoint(m.name, w)
        if ep is None:
            return state
        if self.sup is not None:
            unit = replace(unit, weight=self.g.weights[m.name])
        measured = w.mean_response(ep.name)
        current = state.micros[m.name].provisioned
        chain = None
        if self.sup is not None and self.sup.dependency_gating:
            hop = ep.chain.index(m.name)
            utils = self.g.chain_means(ep.name, since=unit.pid.last_decision_clock)
            worst = supervisory.bottleneck(utils)
            if utils[hop] >= utils[worst]:
                worst = hop  # tied at the maximum: this hop is a bottleneck too
            chain = supervisory.ChainView(violating=measured > ep.slo_ms, hop=hop, bottleneck_hop=worst)
        fc = None
        lam_now = 0.0
        if self.predictors is not None:
            fc = self._forecast(m.name, clock)
            lam_now = self._offered_rate(m.name)
        unit, target = supervisory.stpid_decide(
            unit, measured, ep.slo_ms, clock - unit.pid.last_decision_clock, self.gains,
            (m.min_replicas, m.max_replicas), current,
            chain=chain, forecast=fc, lambda_now=lam_now,
            cfg=self.sup or supervisory.SupervisorConfig(),
            anti_windup=self.anti_windup, integral_limit=self.integral_limit, clock=clock,
        )
        self.units[m.name] = unit
        return simcore.apply_scaling(state, m.name, target)

    def _forecast(self, micro: str, clock: float) -> forecast.Forecast | None:
        horizon = self.sup.horizon_sec
        total = 0.0
        for ep in self.spec.endpoints_of(micro):
            model = self.predictors[ep.name]
            try:
                if model.kind == "lstm":
                    hist = self._coarse_history(ep.name, model.interval_sec)
                    f = forecast.predict(model, hist, clock, horizon)
                else:
                    f = forecast.predict(model, self.rate_history[ep.name], clock, horizon)
            except ChainscaleError:
                return None  # beyond the trace or not enough history yet
            total += sum(f.predicted_rate * mult for h, mult in zip(ep.chain, ep.call_multiplier) if h == micro)
        return forecast.Forecast(horizon, total)

    def _offered_rate(self, micro: str) -> float:
        """Current endpoint demand routed to ``micro``, on the same basis as the forecast."""
        total = 0.0
        for ep in self.spec.endpoints_of(micro):
            rate = self.rate_history[ep.name][-1]
            total += sum(rate * mult for h, mult in zip(ep.chain, ep.call_multiplier) if h == micro)
        return total

    def _coarse_history(self, endpoint: str, interval: float) -> list[float]:
        hist = self.rate_history[endpoint]
        k = max(1, round(interval / self.traces[endpoint].interval_sec))
        n = len(hist) // k
        return [math.fsum(hist[i * k:(i + 1) * k]) / k for i in range(n)]


def make_controller(prep: Prepared, kind: str, *, weights=None, predictors=None):
    if kind == "hpa":
        return HpaController(prep, prep.cfg["hpa"])
    if kind == "pid":
        return PidFamilyController(prep, "pid")
    if kind == "wpid":
        return PidFamilyController(prep, "wpid", weights=weights)
    if kind == "spid":
        return PidFamilyController(prep, "spid", supervised=True)
    if kind == "stpid":
        if predictors is None:
            predictors = build_predictor(prep.cfg, prep.traces)
        return PidFamilyController(prep, "stpid", supervised=True, predictors=predictors)
    raise ConfigError(f"unknown controller {kind!r}", "controller")


# ---------------------------------------------------------------- running


@dataclass
class RunResult:
    label: str
    summary: metrics.SummaryRow
    ledger: metrics.MetricsLedger
    final_state: simcore.ClusterState = field(repr=False)

    def timeseries_csv(self) -> bytes:
        return metrics.export_csv(self.ledger)


def simulate(prep: Prepared, controller, label: str | None = None) -> RunResult:
    """Run the tick loop: read rates, step, record, then let the controller act."""
    spec = prep.spec
    state = simcore.init_cluster(spec, prep.initial)
    ledger = metrics.MetricsLedger.for_app(spec)
    n_ticks = round(prep.duration_sec / prep.dt)
    dt = prep.dt
    for k in range(n_ticks):
        t = k * dt
        rates = {e: rate_at(tr, t) for e, tr in prep.traces.items()}
        state, tel = simcore.step(state, rates, dt)
        metrics.record_tick(ledger, tel, state, dt, controller.weights())
        state = controller.on_tick(state, tel, tel.clock_sec)
    label = label or controller.name
    return RunResult(label, metrics.summarize(ledger, label), ledger, state)


def validate(prep: Prepared) -> None:
    """Build every rung's controller once so all parameter errors surface up front.

    An LSTM predictor is checked for a loadable model or valid training
    settings but not trained.
    """
    make_controller(prep, "hpa")
    make_controller(prep, "pid")
    for w in _wpid_sets(prep):
        make_controller(prep, "wpid", weights=w)
    make_controller(prep, "spid")
    p = prep.cfg["predictor"]
    if p["kind"] == "lstm" and not p.get("model"):
        for key in ("window", "hidden", "epochs"):
            if _num(p, key, "predictor", integer=True) < 1:
                raise ConfigError("must be at least 1", f"predictor.{key}")
        _num(p, "lr", "predictor", nonneg=True)
        _num(p, "interval_sec", "predictor", positive=True)
    else:
        build_predictor(prep.cfg, prep.traces)


def _wpid_sets(prep: Prepared) -> list[dict[str, float]]:
    sets = prep.cfg["wpid"].get("weight_sets") or []
    if not isinstance(sets, Sequence) or not sets:
        raise ConfigError("at least one weight set required", "wpid.weight_sets")
    return [_weights(prep.spec, s, f"wpid.weight_sets[{k}]") for k, s in enumerate(sets)]


def run_scenario(cfg: Mapping, controller: str | None = None) -> RunResult:
    prep = prepare(cfg)
    kind = controller or prep.cfg["controller"]
    if kind == "wpid":
        return _best_wpid(prep)
    return simulate(prep, make_controller(prep, kind))


def _best_wpid(prep: Prepared) -> RunResult:
    results = [simulate(prep, make_controller(prep, "wpid", weights=w)) for w in _wpid_sets(prep)]
    return min(results, key=lambda r: r.summary.violation_ms)


def set_path(cfg: dict, dotted: str, value) -> dict:
    out = copy.deepcopy(cfg)
    node = out
    keys = dotted.split(".")
    for key in keys[:-1]:
        if not isinstance(node, dict) or key not in node or not isinstance(node[key], dict):
            raise ConfigError("unknown sweep axis", dotted)
        node = node[key]
    leaf = keys[-1]
    if leaf not in node:
        raise ConfigError("unknown sweep axis", dotted)
    current = node[leaf]
    if isinstance(current, bool) or not isinstance(current, (int, float)):
        raise ConfigError("sweep axis must name a numeric field", dotted)
    node[leaf] = value
    return out


def run_sweep(cfg: Mapping, axis: str, values: Sequence[float]) -> list[RunResult]:
    if not values:
        raise ConfigError("sweep needs at least one value", "values")
    cfg = dict(cfg)
    head = axis.split(".")[0]
    controller = head if head in CONTROLLERS else cfg["controller"]
    variants = [set_path(cfg, axis, v) for v in values]
    results = []
    for v, variant in zip(values, variants):
        r = run_scenario(variant, controller)
        r.label = f"{controller}[{axis}={v}]"
        results.append(r)
    return results


def run_ladder(cfg: Mapping) -> list[RunResult]:
    prep = prepare(cfg)
    _wpid_sets(prep)
    predictors = build_predictor(prep.cfg, prep.traces)
    rows = []
    for kind in LADDER:
        if kind == "wpid":
            r = _best_wpid(prep)
        else:
            r = simulate(prep, make_controller(prep, kind, predictors=predictors))
        rows.append(r)
    return rows


def default_scenario_path() -> Path:
    return Path(__file__).parent / "data" / "benchmark.yaml"
