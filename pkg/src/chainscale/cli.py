"""Command-line experiment runner.

Every verb that produces files writes them into a scratch directory next to
``--out`` and moves them into place only once all of them exist, so a failed
run leaves nothing behind. Exit status is 0 on success, 2 on a configuration
or validation error and 1 on any other failure.
"""
from __future__ import annotations

import argparse
import copy
import os
import re
import shutil
import sys
import tempfile
from pathlib import Path
from typing import Mapping, Sequence

import yaml

from . import forecast, metrics
from .errors import ChainscaleError, ConfigError
from .scenario import (
    CONTROLLERS, default_scenario_path, dump_config, load_scenario, prepare,
    run_ladder, run_scenario, run_sweep, train_predictor, validate,
)

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG = 0, 1, 2


def _row_name(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9._=-]+", "_", label).strip("_") or "row"


def echo_config(cfg: Mapping) -> str:
    """The resolved config with relative file references made absolute."""
    out = copy.deepcopy(dict(cfg))
    base = out.pop("base_dir", None)
    if base is not None:
        for t in out["traces"].values():
            if isinstance(t, dict) and "file" in t and not Path(str(t["file"])).is_absolute():
                t["file"] = str((Path(base) / str(t["file"])).resolve())
        model = out["predictor"].get("model")
        if model and not Path(str(model)).is_absolute():
            out["predictor"]["model"] = str((Path(base) / str(model)).resolve())
    return dump_config(out)


class _Staging:
    """Collect output files in a scratch directory, then publish them together."""

    def __init__(self, out: Path):
        self.out = out
        out.parent.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))

    def write(self, name: str, data: bytes | str) -> Path:
        path = self.tmp / name
        path.write_bytes(data.encode("utf-8") if isinstance(data, str) else data)
        return path

    def publish(self) -> None:
        if not self.out.exists():
            os.replace(self.tmp, self.out)
            return
        for f in sorted(self.tmp.iterdir()):
            os.replace(f, self.out / f.name)
        self.discard()

    def discard(self) -> None:
        shutil.rmtree(self.tmp, ignore_errors=True)


def _load(args) -> dict:
    cfg = load_scenario(args.scenario)
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    return cfg


def _parse_values(text: str) -> list[float]:
    values = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            values.append(int(item) if re.fullmatch(r"[+-]?\d+", item) else float(item))
        except ValueError:
            raise ConfigError(f"not a number: {item!r}", "values") from None
    return values


def _emit(stage: _Staging, cfg: Mapping, results, axis=None, axis_values=None) -> bytes:
    table = metrics.summary_csv([r.summary for r in results], axis, axis_values)
    stage.write("summary.csv", table)
    names = [r.label for r in results] if axis is None else [f"{axis}={v}" for v in axis_values]
    for name, r in zip(names, results):
        stage.write(f"timeseries_{_row_name(name)}.csv", r.timeseries_csv())
    stage.write("config_echo.yaml", echo_config(cfg))
    return table


def cmd_run(args) -> bytes:
    cfg = _load(args)
    if args.controller is not None:
        cfg["controller"] = args.controller
    result = run_scenario(cfg)
    return _with_stage(args, lambda st: _emit(st, cfg, [result]))


def cmd_sweep(args) -> bytes:
    cfg = _load(args)
    values = _parse_values(args.values)
    results = run_sweep(cfg, args.axis, values)
    return _with_stage(args, lambda st: _emit(st, cfg, results, args.axis, values))


def cmd_ladder(args) -> bytes:
    cfg = _load(args)
    results = run_ladder(cfg)
    return _with_stage(args, lambda st: _emit(st, cfg, results))


def cmd_train_predictor(args) -> bytes:
    cfg = _load(args)
    prep = prepare(cfg)
    models = {e: train_predictor(prep.cfg, t) for e, t in sorted(prep.traces.items())}

    def write(st: _Staging) -> bytes:
        lines = ["endpoint,model,epochs,final_loss"]
        for e, model in models.items():
            name = f"model_{_row_name(e)}.npz"
            forecast.save_model(model, st.tmp / name)
            lines.append(f"{e},{name},{len(model.loss_history)},{model.loss_history[-1]!r}")
        table = ("\n".join(lines) + "\n").encode("utf-8")
        st.write("training.csv", table)
        st.write("config_echo.yaml", echo_config(cfg))
        return table

    return _with_stage(args, write)


def cmd_validate_config(args) -> bytes:
    cfg = _load(args)
    prep = prepare(cfg)
    validate(prep)
    return (f"ok: {len(prep.spec.microservices)} microservices, "
            f"{len(prep.spec.endpoints)} endpoints, {prep.duration_sec:g} s\n").encode("utf-8")


def _with_stage(args, fn) -> bytes:
    stage = _Staging(Path(args.out))
    try:
        report = fn(stage)
        stage.publish()
    except BaseException:
        stage.discard()
        raise
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chainscale", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, out=True):
        p.add_argument("--scenario", type=Path, default=default_scenario_path(),
                       help="scenario YAML (default: the bundled benchmark)")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        if out:
            p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("run", help="simulate one controller")
    common(p)
    p.add_argument("--controller", choices=CONTROLLERS, default=None)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("sweep", help="vary one numeric config field")
    common(p)
    p.add_argument("--axis", required=True, help="dotted config field, e.g. hpa.target_util")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("ladder", help="compare hpa, pid, wpid, spid and stpid")
    common(p)
    p.set_defaults(fn=cmd_ladder)

    p = sub.add_parser("train-predictor", help="fit the LSTM predictor and save it")
    common(p)
    p.set_defaults(fn=cmd_train_predictor)

    p = sub.add_parser("validate-config", help="check a scenario without simulating")
    common(p, out=False)
    p.set_defaults(fn=cmd_validate_config)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        report = args.fn(args)
    except ChainscaleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    sys.stdout.write(report.decode("utf-8"))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
