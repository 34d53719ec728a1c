"""Small scenario configs shared by the scenario, CLI and acceptance tests."""
import copy

from chainscale.scenario import default_scenario_path, load_scenario

STEADY_GAINS = {"kp": 1e-4, "ki": 0.0, "kd": 0.0}


def benchmark():
    return load_scenario(default_scenario_path())


def steady(lam, mu, duration=7200):
    """One service under constant load with a generous SLO and gentle gains."""
    return {
        "name": "steady",
        "duration_sec": duration,
        "controller": "pid",
        "app": {
            "microservices": [{"name": "svc", "mu": mu, "cpu_request": 1, "boot_time_sec": 0,
                               "min_replicas": 1, "max_replicas": 50}],
            "endpoints": [{"name": "/e", "chain": ["svc"], "slo_ms": 1000}],
        },
        "traces": {"/e": {"synthetic": {"base": lam, "amplitude": 0, "period_sec": 3600,
                                        "length": duration}}},
        "initial_replicas": {"svc": 1},
        "pid": dict(STEADY_GAINS, integral_limit=100, control_interval_sec=30),
        "wpid": {"weight_sets": [{"svc": 1}]},
    }


def small_chain(duration=1200):
    """A short two-hop chain with a spike, fast enough for repeated runs."""
    return {
        "name": "small",
        "seed": 3,
        "duration_sec": duration,
        "controller": "pid",
        "app": {
            "microservices": [
                {"name": "front", "mu": 40, "cpu_request": 0.5, "boot_time_sec": 10, "max_replicas": 200},
                {"name": "back", "mu": 20, "cpu_request": 0.5, "boot_time_sec": 40, "max_replicas": 200},
            ],
            "endpoints": [{"name": "/x", "chain": ["front", "back"], "slo_ms": 200}],
        },
        "traces": {"/x": {"synthetic": {"base": 400, "amplitude": 200, "period_sec": 600,
                                        "spike_times": [300], "spike_factor": 1.5,
                                        "spike_duration_sec": 60, "noise_sd": 20,
                                        "length": duration}}},
        "initial_replicas": {"front": 15, "back": 30},
        "pid": {"integral_limit": 10, "control_interval_sec": 15},
        "wpid": {"weight_sets": [{"front": 1, "back": 2}, {"front": 2, "back": 1}]},
        "supervisor": {"default_control_interval_sec": 15},
    }


def with_updates(cfg, **sections):
    out = copy.deepcopy(cfg)
    for key, value in sections.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key].update(value)
        else:
            out[key] = value
    return out
