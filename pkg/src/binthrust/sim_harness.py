"""Closed-loop experiment engine.

One experiment: integrate the nonlinear plant at a fixed step, call the
controller on exact multiples of its period (zero-order hold in between),
and adjudicate success when the platform enters a ball around the target
position and stays inside for the required hold time.  Leaving the ball
resets the dwell clock; the reported time-to-reach is the entry time of
the dwell that finally succeeds.  A run fails once the cutoff passes with
no live dwell, and runs are allowed to continue past the cutoff only to
finish a hold that began before it.

Batches draw one (eta, xi, kappa) weight triple per seed from a PCG64
stream (numpy's implementation, seeded with SeedSequence([seed_base, i]))
and run every requested controller on the identical triple.  Records are
one JSON object per line, written in (seed, controller) order so repeated
runs produce byte-identical files.
"""

from __future__ import annotations

import json
import math
import multiprocessing
from dataclasses import asdict, dataclass, field

import numpy as np

from .controllers import ControllerConfig, SolverAbort, make_controller
from .ocp_builder import OcpWeights
from .platform_model import N_THRUSTERS, PlatformParams, step_plant, wrap_angle

DEFAULT_INITIAL_STATE = (1.0, -0.5, math.pi, 0.0, 0.1, 0.0, 0.0)

ETA_RANGE = (0.0, 0.5)
XI_RANGE = (1.0, 21.0)
KAPPA_RANGE = (0.0, 0.6)


@dataclass
class ExperimentConfig:
    controller: str
    seed: int = 0
    eta: float = 0.25
    xi: float = 11.0
    kappa: float = 0.3
    initial_state: tuple = DEFAULT_INITIAL_STATE
    target: tuple = (0.0,) * 7
    success_radius: float = 0.1
    hold_duration: float = 40.0
    reach_cutoff: float = 80.0
    total_cap: float = 120.0
    dt_plant: float = 0.001
    horizon: int = 20
    ocp_dt: float = 0.1
    solver_budget_s: float = 0.1
    nodes_per_second: float = 250.0
    node_budget: int | None = None
    hold_mode: str = "dwell"             # "dwell" resets on exit, "post_arrival" does not
    state_lb: tuple | None = None
    state_ub: tuple | None = None

    def validate(self) -> None:
        if self.controller not in ("mimpc", "continuous", "informed", "disabled"):
            raise ValueError(f"unknown controller {self.controller!r}")
        if self.hold_mode not in ("dwell", "post_arrival"):
            raise ValueError("hold_mode must be 'dwell' or 'post_arrival'")
        if not 0 < self.dt_plant <= 0.01:
            raise ValueError("dt_plant must be in (0, 10 ms]")
        period = 1.0 / {"mimpc": 10.0, "continuous": 100.0,
                        "informed": 100.0, "disabled": 100.0}[self.controller]
        ratio = period / self.dt_plant
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("controller period must be a multiple of dt_plant")

    def controller_config(self) -> ControllerConfig:
        kw = {}
        if self.state_lb is not None:
            kw["state_lb"] = np.asarray(self.state_lb, dtype=float)
        if self.state_ub is not None:
            kw["state_ub"] = np.asarray(self.state_ub, dtype=float)
        return ControllerConfig(
            kind=self.controller,
            weights=OcpWeights.from_study_parameters(self.eta, self.xi, self.kappa),
            target=np.asarray(self.target, dtype=float),
            horizon=self.horizon,
            dt=self.ocp_dt,
            solver_budget_s=self.solver_budget_s,
            nodes_per_second=self.nodes_per_second,
            node_budget=self.node_budget,
            **kw,
        )

    def as_dict(self) -> dict:
        d = asdict(self)
        d["initial_state"] = list(self.initial_state)
        d["target"] = list(self.target)
        if self.state_lb is not None:
            d["state_lb"] = list(self.state_lb)
        if self.state_ub is not None:
            d["state_ub"] = list(self.state_ub)
        return d


@dataclass
class Metrics:
    success: bool
    time_to_reach: float | None
    avg_position_error_at_target: float | None
    avg_orientation_error_at_target: float | None
    avg_thrust_usage_reach: float | None
    avg_thrust_usage_stay: float | None
    thruster_on_times: list
    duration: float

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExperimentRecord:
    config: ExperimentConfig
    status: str                      # "success" | "failure" | "invalid"
    metrics: Metrics | None
    diagnostics: dict = field(default_factory=dict)
    trajectory: np.ndarray | None = None     # (steps+1, 1+7+9) when kept

    def to_json(self) -> str:
        payload = {
            "config": self.config.as_dict(),
            "status": self.status,
            "metrics": self.metrics.as_dict() if self.metrics else None,
            "diagnostics": self.diagnostics,
        }
        return json.dumps(payload, sort_keys=True)


def audit_dwell_log(bits_log: np.ndarray, dt: float, params: PlatformParams) -> None:
    """Assert the plant-side firing log obeys the timing rules.

    Completed on-runs must last [t_on_min, t_on_max]; gaps between runs at
    least t_off_min.  A run or gap still open at the end of the log is
    allowed to be short.  Raises AssertionError with the offending thruster.
    """
    steps_on_min = int(round(params.t_on_min / dt))
    steps_on_max = int(round(params.t_on_max / dt))
    steps_off_min = int(round(params.t_off_min / dt))
    for j in range(bits_log.shape[1]):
        run = 0
        gap = None
        for b in bits_log[:, j]:
            if b > 0.5:
                if gap is not None:
                    assert gap >= steps_off_min, \
                        f"thruster {j}: gap {gap * dt:.3f}s < t_off_min"
                    gap = None
                run += 1
                assert run <= steps_on_max, \
                    f"thruster {j}: run exceeds t_on_max"
            else:
                if run:
                    assert run >= steps_on_min, \
                        f"thruster {j}: run {run * dt:.3f}s < t_on_min"
                    run = 0
                    gap = 0
                if gap is not None:
                    gap += 1


def run_experiment(cfg: ExperimentConfig, params: PlatformParams | None = None,
                   keep_trajectory: bool = False) -> ExperimentRecord:
    cfg.validate()
    params = params or PlatformParams()
    controller = make_controller(cfg.controller_config(), params)
    dt = cfg.dt_plant
    ctrl_every = int(round(1.0 / controller.cfg.rate_hz / dt)) if hasattr(controller, "cfg") else int(round(0.01 / dt))
    max_steps = int(round(cfg.total_cap / dt))

    x = np.array(cfg.initial_state, dtype=float)
    target = np.asarray(cfg.target, dtype=float)
    u = np.zeros(9)

    on_times = np.zeros(N_THRUSTERS)           # plant-side, full run
    ctrl_on_times = np.zeros(N_THRUSTERS)      # controller-side integral
    last_ctrl_time = 0.0

    dwell_start = None
    first_entry = None
    stay_on_times = np.zeros(N_THRUSTERS)
    stay_pos_err = 0.0
    stay_orient_err = 0.0
    stay_samples = 0

    trajectory = [] if keep_trajectory else None
    status = None
    t = 0.0
    k = 0

    def in_ball(state):
        return math.hypot(state[0] - target[0], state[1] - target[1]) <= cfg.success_radius

    try:
        while k <= max_steps:
            t = k * dt
            if k % ctrl_every == 0 and k < max_steps:
                if k > 0:
                    ctrl_on_times += u[1:] * (t - last_ctrl_time)
                u = controller.step(x)
                last_ctrl_time = t

            inside = in_ball(x)
            if cfg.hold_mode == "post_arrival":
                if inside and first_entry is None:
                    first_entry = t
                    dwell_start = t
                tracking = first_entry is not None
            else:
                if inside:
                    if dwell_start is None:
                        dwell_start = t
                else:
                    dwell_start = None
                    stay_on_times[:] = 0.0
                    stay_pos_err = 0.0
                    stay_orient_err = 0.0
                    stay_samples = 0
                tracking = dwell_start is not None

            if tracking:
                stay_pos_err += math.hypot(x[0] - target[0], x[1] - target[1])
                stay_orient_err += abs(wrap_angle(x[2] - target[2]))
                stay_samples += 1

            if dwell_start is not None and t - dwell_start >= cfg.hold_duration - 1e-9:
                status = "success"
                break
            if dwell_start is None and t >= cfg.reach_cutoff - 1e-9:
                status = "failure"
                break
            if k == max_steps:
                status = "failure"
                break

            if trajectory is not None:
                trajectory.append(np.concatenate([[t], x, u]))
            x = step_plant(params, x, u, dt)
            bits = u[1:]
            on_times += bits * dt
            if tracking:
                stay_on_times += bits * dt
            k += 1
    except SolverAbort as exc:
        ctrl_on_times += u[1:] * (t - last_ctrl_time)
        return ExperimentRecord(
            config=cfg, status="invalid", metrics=None,
            diagnostics={"message": str(exc), "aborted_at": t,
                         **controller.counters},
        )

    ctrl_on_times += u[1:] * (t - last_ctrl_time)
    if trajectory is not None:
        trajectory.append(np.concatenate([[t], x, u]))

    success = status == "success"
    reach_time = dwell_start if success else None
    stay_window = (t - dwell_start) if (success and t > dwell_start) else None
    reach_duration = reach_time if success else t
    usage_reach = None
    if reach_duration and reach_duration > 0:
        usage_reach = float(np.sum(on_times - stay_on_times) / (N_THRUSTERS * reach_duration))
    elif reach_duration == 0.0:
        usage_reach = 0.0
    usage_stay = None
    if stay_window:
        usage_stay = float(np.sum(stay_on_times) / (N_THRUSTERS * stay_window))
    metrics = Metrics(
        success=success,
        time_to_reach=reach_time,
        avg_position_error_at_target=(stay_pos_err / stay_samples) if success and stay_samples else None,
        avg_orientation_error_at_target=(stay_orient_err / stay_samples) if success and stay_samples else None,
        avg_thrust_usage_reach=usage_reach,
        avg_thrust_usage_stay=usage_stay,
        thruster_on_times=[float(v) for v in on_times],
        duration=t,
    )
    diagnostics = dict(controller.counters)
    diagnostics["controller_side_on_time"] = float(np.sum(ctrl_on_times))
    diagnostics["plant_side_on_time"] = float(np.sum(on_times))
    record = ExperimentRecord(config=cfg, status=status, metrics=metrics,
                              diagnostics=diagnostics)
    if trajectory is not None:
        record.trajectory = np.array(trajectory)
    return record


def draw_weights(seed_base: int, index: int) -> tuple[float, float, float]:
    """The study's weight triple for one seed; PCG64, fixed draw order."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed_base, index])))
    eta = rng.uniform(*ETA_RANGE)
    xi = rng.uniform(*XI_RANGE)
    kappa = rng.uniform(*KAPPA_RANGE)
    return float(eta), float(xi), float(kappa)


def _run_task(args):
    cfg, params = args
    record = run_experiment(cfg, params=params)
    return record


def run_batch(n: int, kinds, seed_base: int, out_path: str | None = None,
              jobs: int = 1, params: PlatformParams | None = None,
              base_config: ExperimentConfig | None = None,
              progress=None) -> list[ExperimentRecord]:
    """Run every controller kind on n shared weight draws.

    Records come back sorted by (seed index, kind order) and, when out_path
    is given, are streamed to the file in that order as they complete.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    kinds = list(kinds)
    params = params or PlatformParams()
    configs = []
    for i in range(n):
        eta, xi, kappa = draw_weights(seed_base, i)
        for kind in kinds:
            base = base_config.as_dict() if base_config else {}
            base.pop("controller", None)
            base.pop("seed", None)
            base.update({"eta": eta, "xi": xi, "kappa": kappa})
            cfg = ExperimentConfig(controller=kind, seed=i, **{
                k: (tuple(v) if isinstance(v, list) else v) for k, v in base.items()
            })
            configs.append(cfg)

    records: dict[int, ExperimentRecord] = {}
    out = open(out_path, "w") if out_path else None
    next_flush = 0

    def flush_ready():
        nonlocal next_flush
        while next_flush in records:
            if out is not None:
                out.write(records[next_flush].to_json() + "\n")
            if progress is not None:
                progress(records[next_flush])
            next_flush += 1

    try:
        if jobs > 1:
            with multiprocessing.Pool(jobs) as pool:
                for idx, record in enumerate(pool.imap(_run_task, [(c, params) for c in configs])):
                    records[idx] = record
                    flush_ready()
        else:
            for idx, cfg in enumerate(configs):
                records[idx] = run_experiment(cfg, params=params)
                flush_ready()
    finally:
        if out is not None:
            out.close()
    return [records[i] for i in range(len(configs))]


def load_records(path: str) -> list[dict]:
    """Parse a JSONL record file; malformed lines raise with their number."""
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: malformed record: {exc}") from exc
    return out


def write_trajectory_csv(record: ExperimentRecord, path: str) -> None:
    """Dump a kept trajectory: t, the 7 states, torque, 8 thruster bits."""
    if record.trajectory is None:
        raise ValueError("record has no trajectory; run with keep_trajectory=True")
    header = "t,x,y,theta,vx,vy,theta_dot,omega_rw,torque," + \
        ",".join(f"u{j}" for j in range(1, 9))
    np.savetxt(path, record.trajectory, delimiter=",", header=header,
               comments="", fmt="%.9g")
