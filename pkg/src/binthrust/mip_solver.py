"""Anytime branch-and-bound over binary thruster firings.

The search tree relaxes the thruster integrality of an OCP-derived LP,
branching depth-first on the most fractional binary (ties to the lowest
column index) with the rounded-down child explored first, which biases the
dive toward fuel-lean plans.  Dwell-time rules enter twice: as linear
inequalities appended to the relaxation (see add_dwell_constraints) and as
the rule automaton dwell_feasible(), which is the ground truth the
inequalities are validated against.

Budgets are node counts for reproducibility; a wall-clock limit can be
layered on top but is off by default because cutting a search at a
machine-dependent moment breaks run-to-run determinism.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np

from .lp_solver import Basis, LpProblem, LpStatus, SimplexEngine
from .platform_model import N_THRUSTERS, PlatformParams

INT_TOL = 1e-6
PRUNE_TOL = 1e-9
DEFAULT_NODES_PER_SECOND = 250.0


@dataclass
class DwellLimits:
    """Firing-time rules expressed in controller steps."""

    n_on_min: int = 1
    n_on_max: int = 3
    n_off_min: int = 2

    @classmethod
    def from_params(cls, params: PlatformParams, dt: float) -> "DwellLimits":
        return cls(
            n_on_min=max(1, int(np.ceil(params.t_on_min / dt - 1e-9))),
            n_on_max=max(1, int(np.floor(params.t_on_max / dt + 1e-9))),
            n_off_min=max(1, int(np.ceil(params.t_off_min / dt - 1e-9))),
        )

    @property
    def history_depth(self) -> int:
        return max(self.n_on_min, self.n_on_max, self.n_off_min)


class MipStatus(enum.Enum):
    OPTIMAL = "optimal"
    INCUMBENT = "incumbent"
    INFEASIBLE = "infeasible"
    NO_INCUMBENT = "no_incumbent"


@dataclass
class MipProblem:
    base: LpProblem
    binary_cols: np.ndarray            # (steps * 8,) ordered (t, thruster)
    horizon: int
    limits: DwellLimits
    history: np.ndarray = field(default_factory=lambda: np.zeros((N_THRUSTERS, 3)))
    dwell_rows_added: bool = False

    def history_bit(self, thruster: int, step: int) -> float:
        """Applied bit at negative step index; steps beyond the log are 0."""
        depth = self.history.shape[1]
        idx = depth + step            # step = -1 is the most recent column
        if idx < 0:
            return 0.0
        return float(self.history[thruster, idx])


@dataclass
class MipSolution:
    status: MipStatus
    binaries: np.ndarray | None        # (horizon, 8) 0/1
    z: np.ndarray | None               # structural primal of the incumbent
    objective: float
    nodes: int
    wall_time: float
    root_torque: float | None = None   # first-step wheel torque of the root LP
    basis: Basis | None = None


def dwell_feasible(pattern: np.ndarray, history_bits: np.ndarray, limits: DwellLimits) -> bool:
    """Rule automaton: is this on/off sequence extendable to a legal one?

    pattern is a thruster's plan over the horizon, history_bits its most
    recent applied steps (oldest first).  Checks only violations already
    determined inside the visible window: over-long runs, closed runs
    shorter than the minimum, and gaps between runs shorter than the
    cool-down.  A trailing run or gap may legally continue past the end.
    """
    seq = np.concatenate([np.zeros(limits.history_depth), np.asarray(history_bits, dtype=float),
                          np.asarray(pattern, dtype=float)])
    run = 0
    gap = None
    for b in seq:
        if b > 0.5:
            if gap is not None and gap < limits.n_off_min:
                return False
            gap = None
            run += 1
            if run > limits.n_on_max:
                return False
        else:
            if run:
                if run < limits.n_on_min:
                    return False
                gap = 0
                run = 0
            if gap is not None:
                gap += 1
    return True


def add_dwell_constraints(problem: MipProblem) -> MipProblem:
    """Append the firing-time inequalities to the relaxation.

    max-on: every window of n_on_max+1 consecutive steps, history included,
    sums to at most n_on_max.  min-off: a turn-off at step t forces the next
    n_off_min-1 steps dark via u_{t-1} - u_t + u_{t+k} <= 1.  min-on: a
    turn-on at step t forces the next n_on_min-1 steps lit via
    u_t - u_{t-1} - u_{t+k} <= 0.  Steps before the horizon come from the
    applied-input history and fold into the right-hand side.
    """
    if problem.dwell_rows_added:
        return problem
    base = problem.base
    lim = problem.limits
    N = problem.horizon
    n = base.n
    cols = problem.binary_cols.reshape(N, N_THRUSTERS)

    rows = []
    rhs = []

    def coeff_or_rhs(row, acc_rhs, thruster, step, coeff):
        """Add coeff * u_step; history steps contribute to the rhs instead."""
        if step >= 0:
            row[cols[step, thruster]] += coeff
            return acc_rhs
        return acc_rhs - coeff * problem.history_bit(thruster, step)

    for j in range(N_THRUSTERS):
        # max-on windows
        for s in range(-lim.n_on_max, N - lim.n_on_max):
            row = np.zeros(n)
            b = float(lim.n_on_max)
            for step in range(s, s + lim.n_on_max + 1):
                b = coeff_or_rhs(row, b, j, step, 1.0)
            if np.any(row):
                rows.append(row)
                rhs.append(b)
        # min-off: turn-off events force a cool-down
        for t in range(-(lim.n_off_min - 1), N - 1):
            for k in range(1, lim.n_off_min):
                if not 0 <= t + k < N:
                    continue
                row = np.zeros(n)
                b = 1.0
                b = coeff_or_rhs(row, b, j, t - 1, 1.0)
                b = coeff_or_rhs(row, b, j, t, -1.0)
                b = coeff_or_rhs(row, b, j, t + k, 1.0)
                if np.any(row):
                    rows.append(row)
                    rhs.append(b)
        # min-on: turn-on events force a hold
        for t in range(-(lim.n_on_min - 1), N - 1):
            for k in range(1, lim.n_on_min):
                if not 0 <= t + k < N:
                    continue
                row = np.zeros(n)
                b = 0.0
                b = coeff_or_rhs(row, b, j, t, 1.0)
                b = coeff_or_rhs(row, b, j, t - 1, -1.0)
                b = coeff_or_rhs(row, b, j, t + k, -1.0)
                if np.any(row):
                    rows.append(row)
                    rhs.append(b)

    if rows:
        G = np.vstack([base.G, np.array(rows)])
        h = np.concatenate([base.h, np.array(rhs)])
    else:
        G, h = base.G, base.h
    new_base = LpProblem(c=base.c, G=G, h=h, E=base.E, f=base.f,
                         lo=base.lo.copy(), hi=base.hi.copy(), names=base.names)
    return MipProblem(base=new_base, binary_cols=problem.binary_cols,
                      horizon=problem.horizon, limits=problem.limits,
                      history=problem.history, dwell_rows_added=True)


def round_and_repair(frac_plan: np.ndarray, history: np.ndarray, limits: DwellLimits) -> np.ndarray:
    """Round a fractional firing plan to the nearest rule-legal binary plan.

    Greedy left-to-right per thruster: fire where the relaxation wants at
    least half thrust and the timing rules allow it, otherwise stay dark.
    With n_on_min == 1 turning a step off is always legal; for larger
    minimum holds a pending run is extended until legal.
    """
    N, n_thr = frac_plan.shape
    plan = np.zeros_like(frac_plan)
    for j in range(n_thr):
        pattern = []
        for t in range(N):
            want = frac_plan[t, j] >= 0.5
            if want and dwell_feasible(pattern + [1], history[j], limits):
                pattern.append(1)
            elif dwell_feasible(pattern + [0], history[j], limits):
                pattern.append(0)
            else:
                pattern.append(1)      # min-on hold must continue
        if not dwell_feasible(pattern, history[j], limits):
            pattern = [0] * N
        plan[:, j] = pattern
    return plan


PUMP_ROUNDS = 6


def _feasibility_pump(engine, problem, bins, root_lo, root_hi, zb_root,
                      node_budget, nodes, trace_file):
    """Search for one integer-feasible plan by alternating rule-repaired
    rounding with a distance-minimizing LP; every LP counts as a node.

    Returns (incumbent tuple or None, nodes).  The engine is left for the
    caller to restore.
    """
    orig_c = engine.problem.c.copy()
    zb_cur = zb_root
    plan_prev = None
    found = None
    for _ in range(PUMP_ROUNDS):
        if nodes >= node_budget:
            break
        plan = round_and_repair(zb_cur.reshape(problem.horizon, N_THRUSTERS),
                                problem.history, problem.limits).reshape(-1)
        if plan_prev is not None and np.array_equal(plan, plan_prev):
            # cycled: flip the coordinates where the projection disagrees
            # with the plan the most; those are where feasibility needs to
            # deviate from the rounding
            mism = np.abs(zb_cur - plan)
            flips = np.argsort(-mism, kind="stable")[:3]
            target = plan.copy()
            target[flips] = 1.0 - target[flips]
            plan = round_and_repair(target.reshape(problem.horizon, N_THRUSTERS),
                                    problem.history, problem.limits).reshape(-1)
            if np.array_equal(plan, plan_prev):
                break
        plan_prev = plan
        for pos in range(len(bins)):
            engine.set_column_bounds(bins[pos], plan[pos], plan[pos])
        engine.set_costs(orig_c)
        fsol = engine.solve()
        nodes += 1
        if trace_file is not None:
            bound = "%.9g" % fsol.objective if fsol.status == LpStatus.OPTIMAL \
                else fsol.status.value
            trace_file.write(f"node {nodes} depth pump-fix bound {bound} incumbent none\n")
        if fsol.status == LpStatus.OPTIMAL:
            found = (fsol.objective, plan.astype(float).copy(), fsol.z.copy(), fsol.basis)
            break
        if nodes >= node_budget:
            break
        # project: minimize L1 distance to the plan over the binary box
        for pos in range(len(bins)):
            engine.set_column_bounds(bins[pos], root_lo[pos], root_hi[pos])
        c_pump = np.zeros_like(orig_c)
        c_pump[bins] = 1.0 - 2.0 * plan      # |u - plan| restated linearly
        engine.set_costs(c_pump)
        dsol = engine.solve()
        nodes += 1
        if trace_file is not None:
            trace_file.write(f"node {nodes} depth pump-dist bound n/a incumbent none\n")
        if dsol.status != LpStatus.OPTIMAL:
            break
        zb_cur = dsol.z[bins]
    engine.set_costs(orig_c)
    return found, nodes


def solve_mip(problem: MipProblem, budget_s: float | None = None,
              node_budget: int | None = None,
              nodes_per_second: float = DEFAULT_NODES_PER_SECOND,
              wall_clock_cap: float | None = None,
              warm_start: Basis | None = None,
              trace_file=None,
              engine: SimplexEngine | None = None) -> MipSolution:
    """Depth-first branch-and-bound, resumable nowhere: one deterministic pass.

    The node budget is the binding limit (derived from budget_s via the
    node-rate calibration constant when not given explicitly); the optional
    wall-clock cap exists as a runaway guard and is off by default.  Passing
    a resident engine (matrices matching problem.base) reuses its basis as
    the warm start and leaves it with root bounds restored afterwards.
    """
    if node_budget is None:
        if budget_s is None:
            node_budget = np.iinfo(np.int64).max
        else:
            if budget_s <= 0:
                raise ValueError("budget must be positive")
            node_budget = max(1, int(round(budget_s * nodes_per_second)))
    t_start = time.monotonic()

    if engine is None:
        engine = SimplexEngine(problem.base)
    if warm_start is not None:
        engine.load_basis(warm_start)
    bins = problem.binary_cols
    root_lo = problem.base.lo[bins].copy()
    root_hi = problem.base.hi[bins].copy()

    incumbent_obj = np.inf
    incumbent_bins = None
    incumbent_z = None
    incumbent_basis = None
    root_torque = None
    nodes = 0
    proven = True        # becomes False once the budget truncates the tree

    # node: tuple of (binary_index, fixed_value) pairs from the root
    stack = [()]
    while stack:
        if nodes >= node_budget:
            proven = False
            break
        if wall_clock_cap is not None and time.monotonic() - t_start > wall_clock_cap:
            proven = False
            break
        fixings = stack.pop()
        # install this node's bounds on the binary columns
        lo = root_lo.copy()
        hi = root_hi.copy()
        for idx, val in fixings:
            lo[idx] = hi[idx] = float(val)
        for pos in range(len(bins)):
            engine.set_column_bounds(bins[pos], lo[pos], hi[pos])
        sol = engine.solve()
        nodes += 1
        if trace_file is not None:
            inc = "%.9g" % incumbent_obj if np.isfinite(incumbent_obj) else "none"
            bound = "%.9g" % sol.objective if sol.status == LpStatus.OPTIMAL else sol.status.value
            trace_file.write(f"node {nodes} depth {len(fixings)} bound {bound} incumbent {inc}\n")
        if nodes == 1 and sol.status == LpStatus.OPTIMAL:
            u0 = problem.base.names.get("u")
            if u0 is not None:
                root_torque = float(sol.z[int(np.asarray(u0)[0][0])])
        if sol.status == LpStatus.ITERATION_LIMIT:
            # numerical trouble: surface it like an exhausted budget
            proven = False
            break
        if sol.status != LpStatus.OPTIMAL:
            continue                       # infeasible subtree
        if sol.objective >= incumbent_obj - PRUNE_TOL:
            continue                       # cannot improve
        zb = sol.z[bins]
        frac = np.abs(zb - np.round(zb))
        pick = int(np.argmax(frac))
        if frac[pick] <= INT_TOL:
            incumbent_obj = sol.objective
            incumbent_bins = np.round(zb).astype(float)
            incumbent_z = sol.z.copy()
            incumbent_basis = sol.basis
            continue
        if nodes == 1 and nodes < node_budget:
            # fractional root: pump for a first incumbent before branching;
            # plain diving can wander dozens of levels while the relaxation
            # shuffles fractional thrust between steps
            root_state = engine.snapshot()
            found, nodes = _feasibility_pump(engine, problem, bins, root_lo,
                                             root_hi, zb, node_budget, nodes,
                                             trace_file)
            if found is not None and found[0] < incumbent_obj - PRUNE_TOL:
                incumbent_obj, incumbent_bins, incumbent_z, incumbent_basis = found
            engine.restore(root_state)
        elif incumbent_bins is None and nodes < node_budget \
                and int(np.sum(frac > INT_TOL)) <= 6:
            # deep in a dive the dust has been squeezed into a handful of
            # variables; one rounding attempt often lands a first incumbent
            node_state = engine.snapshot()
            plan = round_and_repair(zb.reshape(problem.horizon, N_THRUSTERS),
                                    problem.history, problem.limits).reshape(-1)
            for pos in range(len(bins)):
                engine.set_column_bounds(bins[pos], plan[pos], plan[pos])
            hsol = engine.solve()
            nodes += 1
            if trace_file is not None:
                bound = "%.9g" % hsol.objective if hsol.status == LpStatus.OPTIMAL \
                    else hsol.status.value
                trace_file.write(f"node {nodes} depth node-round bound {bound} incumbent none\n")
            if hsol.status == LpStatus.OPTIMAL and hsol.objective < incumbent_obj - PRUNE_TOL:
                incumbent_obj = hsol.objective
                incumbent_bins = plan.astype(float).copy()
                incumbent_z = hsol.z.copy()
                incumbent_basis = hsol.basis
            engine.restore(node_state)
        # dive toward the relaxation: the child matching the rounded value
        # pops first, which reaches integer-feasible leaves within a few
        # nodes; a strict dive on 0 rarely finds an incumbent inside a
        # real-time budget because all-off plans miss the terminal set
        near = int(round(zb[pick]))
        stack.append(fixings + ((pick, 1 - near),))
        stack.append(fixings + ((pick, near),))

    for pos in range(len(bins)):
        engine.set_column_bounds(bins[pos], root_lo[pos], root_hi[pos])
    wall = time.monotonic() - t_start
    if incumbent_bins is None:
        status = MipStatus.INFEASIBLE if proven else MipStatus.NO_INCUMBENT
        return MipSolution(status=status, binaries=None, z=None, objective=np.inf,
                           nodes=nodes, wall_time=wall, root_torque=root_torque)
    status = MipStatus.OPTIMAL if proven else MipStatus.INCUMBENT
    return MipSolution(status=status,
                       binaries=incumbent_bins.reshape(problem.horizon, N_THRUSTERS),
                       z=incumbent_z, objective=incumbent_obj, nodes=nodes,
                       wall_time=wall, root_torque=root_torque,
                       basis=incumbent_basis)
