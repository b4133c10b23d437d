"""The three receding-horizon controllers under comparison.

All share one OCP family and differ in how thruster discreteness is
handled:

    mimpc       solves the OCP as a mixed-integer program at 10 Hz with an
                anytime node budget; the binary plan's first step is applied
                directly and held for the full control period
    continuous  solves the plain LP at 100 Hz and pushes the fractional
                thruster commands through per-thruster Delta-Sigma
                modulators, which own all firing-time rules
    informed    like continuous, but the predicted modulator firings are
                forward-simulated each cycle and injected into the dynamics
                constraint so the optimizer plans around committed thrust

A "disabled" controller (wheel only, always zero here) exists for harness
tests.  Controllers own their internal state (modulators, applied-input
history, warm-start basis, predicted yaw trajectory) and expose a single
step(x_estimated) -> applied input (9,).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ds_modulator import ModulatorBank
from .lp_solver import LpStatus, SimplexEngine
from .mip_solver import DwellLimits, MipProblem, MipStatus, add_dwell_constraints, solve_mip
from .ocp_builder import (
    ColumnMap,
    OcpSpec,
    OcpWeights,
    build,
    extract_first_input,
    extract_state_plan,
)
from .platform_model import N_THRUSTERS, PlatformParams

CONTROLLER_KINDS = ("mimpc", "continuous", "informed", "disabled")
DEFAULT_RATES = {"mimpc": 10.0, "continuous": 100.0, "informed": 100.0, "disabled": 100.0}

# linearization angles are snapped to this grid so that consecutive cycles
# with an unchanged prediction reuse the factorized basis matrix
THETA_QUANTUM = 1e-3


class SolverAbort(RuntimeError):
    """LP pivot limit hit: numerical trouble, the experiment must stop."""


@dataclass
class ControllerConfig:
    kind: str
    weights: OcpWeights
    target: np.ndarray = field(default_factory=lambda: np.zeros(7))
    horizon: int = 20
    dt: float = 0.1
    rate_hz: float | None = None
    solver_budget_s: float = 0.1
    nodes_per_second: float = 250.0
    node_budget: int | None = None
    state_lb: np.ndarray | None = None
    state_ub: np.ndarray | None = None
    terminal_lb: np.ndarray | None = None
    terminal_ub: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in CONTROLLER_KINDS:
            raise ValueError(f"unknown controller kind {self.kind!r}")
        if self.rate_hz is None:
            self.rate_hz = DEFAULT_RATES[self.kind]

    @property
    def period(self) -> float:
        return 1.0 / self.rate_hz

    @classmethod
    def from_study_parameters(cls, kind, eta, xi, kappa, **kw) -> "ControllerConfig":
        return cls(kind=kind, weights=OcpWeights.from_study_parameters(eta, xi, kappa), **kw)


class _MpcBase:
    """Shared machinery: linearization angles, spec assembly, diagnostics."""

    def __init__(self, cfg: ControllerConfig, params: PlatformParams):
        self.cfg = cfg
        self.params = params
        self.theta_plan = None         # predicted yaw over the last horizon
        self.basis = None
        self.counters = {"solves": 0, "fallbacks": 0, "infeasible_holds": 0,
                         "nodes": 0, "pivots": 0}
        # shift of the reused yaw prediction per control period, in OCP steps
        self.plan_shift = int(round(cfg.period / cfg.dt)) if cfg.period >= cfg.dt else 0

    def linearization_angles(self, x_est: np.ndarray) -> np.ndarray:
        N = self.cfg.horizon
        if self.theta_plan is None:
            angles = np.full(N, float(x_est[2]))
        else:
            s = self.plan_shift
            padded = np.concatenate([self.theta_plan[s:], np.full(s, self.theta_plan[-1])])
            angles = padded[:N]
        return np.round(angles / THETA_QUANTUM) * THETA_QUANTUM

    def make_spec(self, x_est, angles, firings=None) -> OcpSpec:
        cfg = self.cfg
        kw = {}
        if cfg.state_lb is not None:
            kw["state_lb"] = cfg.state_lb
        if cfg.state_ub is not None:
            kw["state_ub"] = cfg.state_ub
        spec = OcpSpec(
            horizon=cfg.horizon,
            dt=cfg.dt,
            weights=cfg.weights,
            target=np.asarray(cfg.target, dtype=float),
            x_estimated=np.asarray(x_est, dtype=float),
            thetas=angles,
            terminal_lb=cfg.terminal_lb,
            terminal_ub=cfg.terminal_ub,
            torque_limit=self.params.wheel_torque_limit,
            exogenous_firings=firings,
            **kw,
        )
        return spec


class MimpcController(_MpcBase):
    """Binary thrusters planned explicitly; applied bits held one period."""

    def __init__(self, cfg, params):
        super().__init__(cfg, params)
        self.limits = DwellLimits.from_params(params, cfg.dt)
        self.history = np.zeros((N_THRUSTERS, self.limits.history_depth))
        self.cm = ColumnMap(cfg.horizon)
        self.engine = None
        self.engine_key = None

    def step(self, x_est: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        angles = self.linearization_angles(x_est)
        spec = self.make_spec(x_est, angles)
        base = build(spec, self.params)
        problem = MipProblem(base=base, binary_cols=self.cm.binary_columns(),
                             horizon=cfg.horizon, limits=self.limits,
                             history=self.history)
        problem = add_dwell_constraints(problem)
        key = angles.tobytes()
        if self.engine is None or key != self.engine_key:
            # linearization moved: the constraint matrix changed, so the
            # factorization has to be rebuilt from the warm basis
            self.engine = SimplexEngine(problem.base)
            if self.basis is not None:
                self.engine.load_basis(self.basis)
            self.engine_key = key
        else:
            # same matrix: only bounds (initial state) and the dwell-row
            # right-hand sides moved with the applied-input history
            self.engine.refresh_problem_data(problem.base)
        sol = solve_mip(problem, budget_s=cfg.solver_budget_s,
                        node_budget=cfg.node_budget,
                        nodes_per_second=cfg.nodes_per_second,
                        engine=self.engine)
        self.counters["solves"] += 1
        self.counters["nodes"] += sol.nodes
        u = np.zeros(9)
        if sol.status in (MipStatus.OPTIMAL, MipStatus.INCUMBENT):
            u[0] = float(np.clip(sol.z[self.cm.u(0).start],
                                 -self.params.wheel_torque_limit,
                                 self.params.wheel_torque_limit))
            u[1:] = sol.binaries[0]
            self.basis = sol.basis
            cmz = self.cm
            self.theta_plan = np.array([sol.z[cmz.x(t).start + 2]
                                        for t in range(cfg.horizon + 1)])
        else:
            # no plan available: thrusters stay dark, wheel follows the
            # relaxation's torque when the root solved at all
            self.counters["fallbacks"] += 1
            torque = sol.root_torque if sol.root_torque is not None else 0.0
            u[0] = float(np.clip(torque, -self.params.wheel_torque_limit,
                                 self.params.wheel_torque_limit))
            self.theta_plan = None
        self.history = np.roll(self.history, -1, axis=1)
        self.history[:, -1] = u[1:]
        return u


class ContinuousMpc(_MpcBase):
    """Plain LP controller; modulators turn commands into firings."""

    informed = False

    def __init__(self, cfg, params):
        super().__init__(cfg, params)
        self.modulators = ModulatorBank(params)
        self.engine = None
        self.engine_key = None
        self.last_commands = np.zeros(N_THRUSTERS)
        self.last_torque = 0.0
        self.cm = ColumnMap(cfg.horizon)

    def firing_plan(self):
        if not self.informed:
            return None
        return self.modulators.forward_simulate(
            self.cfg.horizon, self.cfg.dt, self.last_commands,
            dt_update=self.cfg.period)

    def step(self, x_est: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        angles = self.linearization_angles(x_est)
        firings = self.firing_plan()
        spec = self.make_spec(x_est, angles, firings)
        base = build(spec, self.params)
        key = angles.tobytes()
        if self.engine is None or key != self.engine_key:
            engine = SimplexEngine(base)
            if self.basis is not None:
                engine.load_basis(self.basis)
            self.engine = engine
            self.engine_key = key
        else:
            # same matrix as last cycle: only the pinned initial state and,
            # in informed mode, the committed-thrust right-hand side moved
            self.engine.refresh_problem_data(base)
        sol = self.engine.solve()
        self.counters["solves"] += 1
        self.counters["pivots"] += sol.iterations
        if sol.status == LpStatus.OPTIMAL:
            u0 = extract_first_input(sol, spec)
            self.basis = sol.basis
            self.theta_plan = extract_state_plan(sol, spec)[:, 2]
            self.last_torque = float(u0[0])
            self.last_commands = u0[1:].copy()
        elif sol.status == LpStatus.ITERATION_LIMIT:
            raise SolverAbort(f"LP hit the pivot limit after {sol.iterations} pivots")
        else:
            # infeasible (estimate outside the state box): hold the last
            # command and let the modulators keep the thrusters legal
            self.counters["infeasible_holds"] += 1
        bits = self.modulators.update(self.last_commands, cfg.period)
        u = np.zeros(9)
        u[0] = self.last_torque
        u[1:] = bits
        return u


class InformedMpc(ContinuousMpc):
    """Continuous MPC whose model knows the modulators' committed firings."""

    informed = True


class DisabledController:
    """Wheel-only placeholder that never actuates; used in harness tests."""

    def __init__(self, cfg, params):
        self.cfg = cfg
        self.counters = {"solves": 0, "fallbacks": 0, "infeasible_holds": 0,
                         "nodes": 0, "pivots": 0}

    def step(self, x_est: np.ndarray) -> np.ndarray:
        return np.zeros(9)


def make_controller(cfg: ControllerConfig, params: PlatformParams):
    cls = {
        "mimpc": MimpcController,
        "continuous": ContinuousMpc,
        "informed": InformedMpc,
        "disabled": DisabledController,
    }[cfg.kind]
    return cls(cfg, params)
