"""Operator entry point.

Commands:
    run           execute a batch of closed-loop experiments
    analyze       turn a record file into figure-source CSVs
    replay        simulate the flat-floor demonstration scenarios
    print-config  echo the effective configuration and exit

Configuration is INI-style, sections [platform], [experiment] and [ocp],
with command-line flags overriding file values.  The BINTHRUST_SEED
environment variable supplies the default seed.  Exit codes: 0 success,
1 usage error, 2 solver abort in at least one run, 3 I/O or data error.
"""

from __future__ import annotations

import argparse
import configparser
import math
import os
import sys

import numpy as np

from .analysis import write_figure_csvs
from .platform_model import PlatformParams
from .sim_harness import (
    ExperimentConfig,
    load_records,
    run_batch,
    run_experiment,
    write_trajectory_csv,
)

ALL_CONTROLLERS = ("mimpc", "continuous", "informed")

REPLAY_SCENARIOS = {
    "orgl-mimpc": "mimpc",
    "orgl-informed": "informed",
}
# the demonstration floor is larger than the default simulation box
REPLAY_STATE_LB = (-6.0, -6.0, -math.inf, -0.3, -0.3, -0.3, -26.18)
REPLAY_STATE_UB = (6.0, 6.0, math.inf, 0.3, 0.3, 0.3, 26.18)
REPLAY_START = (1.14, 3.14, math.pi / 2, 0.0, 0.0, 0.0, 0.0)
REPLAY_HOLD_S = 20.0
REPLAY_WEIGHTS = (0.25, 11.0, 0.3)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="binthrust", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="INI configuration file")
        p.add_argument("--n", type=int, help="number of weight draws")
        p.add_argument("--seed", type=int, help="seed base (default env BINTHRUST_SEED or 0)")
        p.add_argument("--controller", action="append", choices=ALL_CONTROLLERS,
                       help="controller to run (repeatable; default all three)")
        p.add_argument("--out", help="record file path (default records.jsonl)")
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                       help="parallel workers (default: logical cores)")
        p.add_argument("--dump-trajectory", action="store_true",
                       help="write one trajectory CSV per run next to the record file")

    runp = sub.add_parser("run", help="run a batch of experiments")
    add_common(runp)
    runp.add_argument("--print-config", action="store_true",
                      help="echo the effective configuration and exit")

    pc = sub.add_parser("print-config", help="echo the effective configuration")
    add_common(pc)

    an = sub.add_parser("analyze", help="summarize a record file into figure CSVs")
    an.add_argument("records", help="JSONL record file from 'run'")
    an.add_argument("--outdir", default=".", help="output directory for CSVs")

    rp = sub.add_parser("replay", help="simulate a demonstration scenario")
    rp.add_argument("scenario", help=f"one of {', '.join(sorted(REPLAY_SCENARIOS))}")
    rp.add_argument("--out", help="trajectory CSV path (default <scenario>.csv)")
    return parser


def _default_seed() -> int:
    env = os.environ.get("BINTHRUST_SEED")
    return int(env) if env else 0


def load_config(path: str | None):
    cfg = configparser.ConfigParser()
    if path:
        try:
            with open(path) as fh:
                cfg.read_file(fh)
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            raise SystemExit(3)
    return cfg


def _get(cfg, section, key, cast, default):
    if cfg.has_section(section) and key in cfg[section]:
        raw = cfg[section][key]
        if cast is tuple:
            return tuple(float(v) for v in raw.replace(",", " ").split())
        return cast(raw)
    return default


def effective_settings(args) -> dict:
    cfg = load_config(getattr(args, "config", None))
    settings = {
        "n": _get(cfg, "experiment", "n", int, 1),
        "seed": _get(cfg, "experiment", "seed", int, _default_seed()),
        "controllers": list(ALL_CONTROLLERS),
        "out": _get(cfg, "experiment", "out", str, "records.jsonl"),
        "success_radius": _get(cfg, "experiment", "success_radius", float, 0.1),
        "hold_duration": _get(cfg, "experiment", "hold_duration", float, 40.0),
        "reach_cutoff": _get(cfg, "experiment", "reach_cutoff", float, 80.0),
        "total_cap": _get(cfg, "experiment", "total_cap", float, 120.0),
        "dt_plant": _get(cfg, "experiment", "dt_plant", float, 0.001),
        "initial_state": _get(cfg, "experiment", "initial_state", tuple,
                              (1.0, -0.5, math.pi, 0.0, 0.1, 0.0, 0.0)),
        "target": _get(cfg, "experiment", "target", tuple, (0.0,) * 7),
        "horizon": _get(cfg, "ocp", "horizon", int, 20),
        "ocp_dt": _get(cfg, "ocp", "dt", float, 0.1),
        "solver_budget_s": _get(cfg, "ocp", "solver_budget_s", float, 0.1),
        "nodes_per_second": _get(cfg, "ocp", "nodes_per_second", float, 250.0),
        "state_lb": _get(cfg, "ocp", "state_lb", tuple, None),
        "state_ub": _get(cfg, "ocp", "state_ub", tuple, None),
    }
    if cfg.has_section("experiment") and "controllers" in cfg["experiment"]:
        settings["controllers"] = cfg["experiment"]["controllers"].replace(",", " ").split()
    if getattr(args, "n", None) is not None:
        settings["n"] = args.n
    if getattr(args, "seed", None) is not None:
        settings["seed"] = args.seed
    if getattr(args, "controller", None):
        settings["controllers"] = list(args.controller)
    if getattr(args, "out", None):
        settings["out"] = args.out
    settings["platform"] = PlatformParams.from_config(cfg)
    return settings


def print_effective_config(settings) -> None:
    out = configparser.ConfigParser()
    p = settings["platform"]
    out["platform"] = {
        "m": repr(p.mass), "r": repr(p.radius), "I_S": repr(p.inertia),
        "I_RW": repr(p.wheel_inertia), "omega_RW_max": repr(p.wheel_speed_limit),
        "F_n": repr(p.thrust), "tau_max": repr(p.wheel_torque_limit),
        "t_on_min": repr(p.t_on_min), "t_on_max": repr(p.t_on_max),
        "t_off_min": repr(p.t_off_min),
    }
    out["experiment"] = {
        "n": str(settings["n"]),
        "seed": str(settings["seed"]),
        "controllers": " ".join(settings["controllers"]),
        "out": settings["out"],
        "success_radius": repr(settings["success_radius"]),
        "hold_duration": repr(settings["hold_duration"]),
        "reach_cutoff": repr(settings["reach_cutoff"]),
        "total_cap": repr(settings["total_cap"]),
        "dt_plant": repr(settings["dt_plant"]),
        "initial_state": " ".join(repr(v) for v in settings["initial_state"]),
        "target": " ".join(repr(v) for v in settings["target"]),
    }
    out["ocp"] = {
        "horizon": str(settings["horizon"]),
        "dt": repr(settings["ocp_dt"]),
        "solver_budget_s": repr(settings["solver_budget_s"]),
        "nodes_per_second": repr(settings["nodes_per_second"]),
    }
    if settings["state_lb"] is not None:
        out["ocp"]["state_lb"] = " ".join(repr(v) for v in settings["state_lb"])
    if settings["state_ub"] is not None:
        out["ocp"]["state_ub"] = " ".join(repr(v) for v in settings["state_ub"])
    out.write(sys.stdout)


def _base_experiment_config(settings) -> ExperimentConfig:
    return ExperimentConfig(
        controller="mimpc",
        initial_state=tuple(settings["initial_state"]),
        target=tuple(settings["target"]),
        success_radius=settings["success_radius"],
        hold_duration=settings["hold_duration"],
        reach_cutoff=settings["reach_cutoff"],
        total_cap=settings["total_cap"],
        dt_plant=settings["dt_plant"],
        horizon=settings["horizon"],
        ocp_dt=settings["ocp_dt"],
        solver_budget_s=settings["solver_budget_s"],
        nodes_per_second=settings["nodes_per_second"],
        state_lb=settings["state_lb"],
        state_ub=settings["state_ub"],
    )


def cmd_run(args) -> int:
    settings = effective_settings(args)
    if getattr(args, "print_config", False):
        print_effective_config(settings)
        return 0
    base = _base_experiment_config(settings)

    def progress(record):
        m = record.metrics
        brief = f"t_reach={m.time_to_reach}" if m and m.success else record.status
        print(f"[{record.config.controller} seed={record.config.seed}] {brief}",
              flush=True)

    try:
        records = run_batch(settings["n"], settings["controllers"], settings["seed"],
                            out_path=settings["out"], jobs=args.jobs,
                            params=settings["platform"], base_config=base,
                            progress=progress)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {len(records)} records to {settings['out']}")
    aborted = sum(1 for r in records if r.status == "invalid")
    if args.dump_trajectory:
        stem = os.path.splitext(settings["out"])[0]
        for rec in records:
            if rec.status == "invalid":
                continue
            redo = run_experiment(rec.config, params=settings["platform"],
                                  keep_trajectory=True)
            path = f"{stem}_traj_seed{rec.config.seed}_{rec.config.controller}.csv"
            write_trajectory_csv(redo, path)
            print(f"trajectory -> {path}")
    if aborted:
        print(f"{aborted} run(s) aborted on solver trouble", file=sys.stderr)
        return 2
    return 0


def cmd_print_config(args) -> int:
    print_effective_config(effective_settings(args))
    return 0


def cmd_analyze(args) -> int:
    try:
        records = load_records(args.records)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    if not records:
        print("error: record file is empty", file=sys.stderr)
        return 3
    os.makedirs(args.outdir, exist_ok=True)
    try:
        paths = write_figure_csvs(records, args.outdir)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    for name in sorted(paths):
        print(f"{name} -> {paths[name]}")
    return 0


def cmd_replay(args) -> int:
    if args.scenario not in REPLAY_SCENARIOS:
        print(f"error: unknown scenario {args.scenario!r}; choose from "
              f"{', '.join(sorted(REPLAY_SCENARIOS))}", file=sys.stderr)
        return 1
    eta, xi, kappa = REPLAY_WEIGHTS
    cfg = ExperimentConfig(
        controller=REPLAY_SCENARIOS[args.scenario],
        eta=eta, xi=xi, kappa=kappa,
        initial_state=REPLAY_START,
        hold_duration=REPLAY_HOLD_S,
        hold_mode="post_arrival",
        state_lb=REPLAY_STATE_LB,
        state_ub=REPLAY_STATE_UB,
    )
    record = run_experiment(cfg, keep_trajectory=True)
    out = args.out or f"{args.scenario}.csv"
    try:
        write_trajectory_csv(record, out)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    m = record.metrics
    reach = f"{m.time_to_reach:.3f}s" if m and m.time_to_reach is not None else "never"
    print(f"{args.scenario}: status={record.status} reached={reach} -> {out}")
    return 0 if record.status != "invalid" else 2


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handler = {
        "run": cmd_run,
        "print-config": cmd_print_config,
        "analyze": cmd_analyze,
        "replay": cmd_replay,
    }[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
