"""Simulation and control toolkit for autoscaling chained microservices.

Modules: ``trace`` (workload traces), ``forecast`` (LSTM predictor),
``simcore`` (fluid-queue cluster plant), ``control`` (PID and HPA laws),
``supervisory`` (adaptive weights, gating, timing, feedforward),
``metrics`` (violation and core-minute accounting), ``scenario`` (config
and experiment loop) and ``cli``.
"""

__version__ = "0.1.0"
