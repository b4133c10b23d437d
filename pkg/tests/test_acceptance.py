"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`.  The scaled Pareto
reproduction (hours of compute) only runs when BINTHRUST_FULL_ACCEPTANCE=1.

Note on the closed-loop reach criterion: at the stated mid-range weight
triple (eta=0.25, xi=11, kappa=0.3) the stage cost makes thruster impulses
unprofitable over the 2 s horizon (the per-impulse error reduction tops out
near kappa ~ 0.2), so no controller translates toward a distant target and
the criterion cannot pass under the pinned problem formulation.  The test
asserts the criterion exactly as stated; the companion test at kappa = 0.1
demonstrates the same protocol succeeding once thrust is cost-effective.
"""

import contextlib
import itertools
import json
import math
import os
import time

import numpy as np
import pytest

from binthrust.analysis import front_value_at, pareto_front, summarize
from binthrust.lp_solver import LpStatus, SimplexEngine, solve
from binthrust.mip_solver import DwellLimits, MipProblem, MipStatus, add_dwell_constraints, solve_mip
from binthrust.ds_modulator import ModulatorBank
from binthrust.ocp_builder import ColumnMap, OcpSpec, OcpWeights, build
from binthrust.platform_model import PlatformParams, spin_momentum, step_plant
from binthrust.sim_harness import ExperimentConfig, audit_dwell_log, run_batch, run_experiment

from oracles import (
    brute_force_lp_objective,
    dwell_feasible_patterns,
    fine_euler_batch,
    firing_rules_ok,
    random_bounded_lp,
)

P = PlatformParams()
DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


@contextlib.contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"\n[ACCEPTANCE] {name}: FAIL")
        raise
    print(f"\n[ACCEPTANCE] {name}: PASS")


def test_dynamics_oracle():
    with criterion("dynamics-oracle"):
        t0 = time.perf_counter()
        rng = np.random.default_rng(20240801)
        k = 100
        X = np.column_stack([
            rng.uniform(-2, 2, size=(k, 2)),
            rng.uniform(-math.pi, math.pi, size=(k, 1)),
            rng.uniform(-0.3, 0.3, size=(k, 2)),
            rng.uniform(-0.3, 0.3, size=(k, 1)),
            rng.uniform(-26, 26, size=(k, 1)),
        ])
        U = np.column_stack([rng.uniform(-1.44, 1.44, size=(k, 1)),
                             rng.integers(0, 2, size=(k, 8)).astype(float)])
        oracle = fine_euler_batch(P, X, U, 0.1, 1e-5)
        worst = 0.0
        for i in range(k):
            state = X[i].copy()
            for _ in range(100):
                state = step_plant(P, state, U[i], 0.001)
            worst = max(worst, float(np.max(np.abs(state - oracle[i]))))
        assert worst < 1e-6, f"worst deviation {worst:.2e}"

        # momentum bookkeeping with thrusters off
        state = np.array([0.0, 0.0, 1.0, 0.0, 0.0, 0.2, -5.0])
        for i in range(500):
            u = np.zeros(9)
            u[0] = 1.44 * math.sin(0.01 * i)
            before = spin_momentum(P, state)
            state = step_plant(P, state, u, 0.001)
            assert abs(spin_momentum(P, state) - before) < 1e-9
        elapsed = time.perf_counter() - t0
        assert elapsed < 10.0, f"dynamics oracle took {elapsed:.1f}s"


def test_lp_correctness():
    with criterion("lp-correctness"):
        t0 = time.perf_counter()
        rng = np.random.default_rng(777)
        from binthrust.lp_solver import LpProblem

        limit_hits = 0
        for _ in range(200):
            c, G, h, lo, hi = random_bounded_lp(rng)
            n = len(c)
            problem = LpProblem(c=c, G=G, h=h, E=np.zeros((0, n)), f=np.zeros(0),
                                lo=lo, hi=hi)
            sol = solve(problem)
            if sol.status == LpStatus.ITERATION_LIMIT:
                limit_hits += 1
                continue
            assert sol.status == LpStatus.OPTIMAL
            oracle = brute_force_lp_objective(c, G, h, lo, hi)
            assert oracle is not None
            assert abs(sol.objective - oracle) <= 1e-6, \
                f"objective {sol.objective} vs oracle {oracle}"
        assert limit_hits == 0, f"{limit_hits} iteration-limit outcomes"
        elapsed = time.perf_counter() - t0
        assert elapsed < 60.0, f"LP criterion took {elapsed:.1f}s"


def mip_instance(seed):
    """Random small MIMPC instance with at most 12 binary variables."""
    rng = np.random.default_rng(seed)
    shapes = [(3, [0]), (4, [1, 4]), (5, [0, 3]), (4, [0, 2, 5])]
    N, active = shapes[seed % len(shapes)]
    x0 = np.zeros(7)
    x0[0] = rng.uniform(-0.3, 0.3)
    x0[1] = rng.uniform(-0.3, 0.3)
    x0[2] = rng.uniform(-0.5, 0.5)
    x0[4] = rng.uniform(-0.04, 0.04)
    weights = OcpWeights.from_study_parameters(
        float(rng.uniform(0.05, 0.45)), float(rng.uniform(2, 20)),
        float(rng.uniform(0.01, 0.2)))
    spec = OcpSpec(horizon=N, dt=0.1, weights=weights, target=np.zeros(7),
                   x_estimated=x0, thetas=np.full(N, x0[2]))
    base = build(spec, P)
    cm = ColumnMap(N)
    for t in range(N):
        us = cm.u(t)
        for j in range(8):
            if j not in active:
                base.lo[us.start + 1 + j] = 0.0
                base.hi[us.start + 1 + j] = 0.0
    problem = MipProblem(base=base, binary_cols=cm.binary_columns(), horizon=N,
                         limits=DwellLimits(1, 3, 2), history=np.zeros((8, 3)))
    return add_dwell_constraints(problem), cm, N, active


def test_mip_correctness():
    with criterion("mip-correctness"):
        t0 = time.perf_counter()
        for seed in range(20):
            problem, cm, N, active = mip_instance(seed)
            sol = solve_mip(problem)     # unlimited budget
            per_thruster = dwell_feasible_patterns(N, [0, 0, 0])
            engine = SimplexEngine(problem.base)
            best = np.inf
            feasible_any = False
            for combo in itertools.product(per_thruster, repeat=len(active)):
                for a, j in enumerate(active):
                    for t in range(N):
                        col = cm.u(t).start + 1 + j
                        engine.set_column_bounds(col, float(combo[a][t]),
                                                 float(combo[a][t]))
                s = engine.solve()
                if s.status == LpStatus.OPTIMAL:
                    feasible_any = True
                    best = min(best, s.objective)
            if not feasible_any:
                assert sol.status == MipStatus.INFEASIBLE
                continue
            assert sol.status == MipStatus.OPTIMAL, f"seed {seed}: {sol.status}"
            assert abs(sol.objective - best) <= 1e-6, \
                f"seed {seed}: {sol.objective} vs enumeration {best}"
            for j in range(8):
                assert firing_rules_ok(sol.binaries[:, j].astype(int),
                                       [0, 0, 0], 1, 3, 2), f"seed {seed} thruster {j}"
        elapsed = time.perf_counter() - t0
        assert elapsed < 300.0, f"MIP criterion took {elapsed:.1f}s"


def test_dwell_encoding_equivalence():
    with criterion("dwell-encoding-equivalence"):
        from binthrust.lp_solver import LpProblem

        histories = {
            "fresh": [0, 0, 0],
            "on_for_1": [0, 0, 1],
            "on_for_2": [0, 1, 1],
            "on_for_3": [1, 1, 1],
            "off_for_1": [1, 1, 0],
        }
        n_steps = 6
        for name, hist in histories.items():
            n = n_steps * 8
            base = LpProblem(c=np.zeros(n), G=np.zeros((0, n)), h=np.zeros(0),
                             E=np.zeros((0, n)), f=np.zeros(0),
                             lo=np.zeros(n), hi=np.ones(n))
            history = np.zeros((8, 3))
            history[0] = hist
            problem = add_dwell_constraints(MipProblem(
                base=base, binary_cols=np.arange(n), horizon=n_steps,
                limits=DwellLimits(1, 3, 2), history=history))
            G, h = problem.base.G, problem.base.h
            cols = np.arange(n).reshape(n_steps, 8)
            via_rows = set()
            for pattern in itertools.product([0, 1], repeat=n_steps):
                z = np.zeros(n)
                z[cols[:, 0]] = pattern
                if np.all(G @ z <= h + 1e-9):
                    via_rows.add(pattern)
            via_rules = {p for p in itertools.product([0, 1], repeat=n_steps)
                         if firing_rules_ok(p, hist, 1, 3, 2)}
            assert via_rows == via_rules, f"history class {name}"


def test_modulator_duty_tracking():
    with criterion("modulator-duty-tracking"):
        for command in (0.1, 0.3, 0.5):
            bank = ModulatorBank(P)
            cmd = np.full(8, command)
            bits = np.empty(10_000)
            for k in range(10_000):
                bits[k] = bank.update(cmd, 0.01)[0]
            duty = bits.mean()
            assert abs(duty - command) <= 0.05, f"duty {duty} at command {command}"
        # timing rules over randomized commands
        rng = np.random.default_rng(99)
        bank = ModulatorBank(P)
        steps = 100_000
        trace = np.empty((steps, 8))
        for k in range(steps):
            trace[k] = bank.update(rng.uniform(0, 1, size=8), 0.01)
        audit_dwell_log(trace, 0.01, P)


MID_TRIPLE = (0.25, 11.0, 0.3)
VIABLE_TRIPLE = (0.25, 11.0, 0.1)


def run_protocol(kind, triple, keep_trajectory=False):
    eta, xi, kappa = triple
    cfg = ExperimentConfig(controller=kind, eta=eta, xi=xi, kappa=kappa)
    return run_experiment(cfg, keep_trajectory=keep_trajectory)


def test_closed_loop_reach_mid_weights():
    # criterion as stated: both controllers succeed at the mid-range triple;
    # see the module docstring for why this is expected to stay red
    with criterion("closed-loop-reach(eta=0.25,xi=11,kappa=0.3)"):
        mim = run_protocol("mimpc", MID_TRIPLE)
        inf = run_protocol("informed", MID_TRIPLE)
        assert mim.status == "success", \
            f"MIMPC did not reach: {mim.status}, usage {mim.metrics.avg_thrust_usage_reach}"
        assert inf.status == "success", \
            f"informed did not reach: {inf.status}"
        assert mim.metrics.time_to_reach <= 80.0
        assert inf.metrics.time_to_reach <= 80.0
        assert mim.metrics.avg_position_error_at_target < 0.1


def test_closed_loop_reach_validated_weights():
    # the same protocol at a thrust-viable kappa: demonstrates the machinery
    # end to end and pins the first validated run as a regression fixture
    with criterion("closed-loop-reach(validated kappa=0.1)"):
        mim = run_protocol("mimpc", VIABLE_TRIPLE, keep_trajectory=True)
        inf = run_protocol("informed", VIABLE_TRIPLE)
        assert mim.status == "success", f"MIMPC: {mim.status}"
        assert inf.status == "success", f"informed: {inf.status}"
        assert mim.metrics.time_to_reach <= 80.0
        assert inf.metrics.time_to_reach <= 80.0
        assert mim.metrics.avg_position_error_at_target < 0.1
        audit_dwell_log(mim.trajectory[:, 9:], mim.config.dt_plant, P)

        ref_path = os.path.join(DATA_DIR, "closed_loop_reference.json")
        with open(ref_path) as fh:
            ref = json.load(fh)
        for record, name in ((mim, "mimpc"), (inf, "informed")):
            pinned = ref[name]
            m = record.metrics
            assert m.time_to_reach == pytest.approx(pinned["time_to_reach"], rel=0.2)
            assert m.avg_position_error_at_target == pytest.approx(
                pinned["pos_err"], rel=0.5)
            assert m.avg_thrust_usage_stay == pytest.approx(
                pinned["usage_stay"], rel=0.5)


def test_determinism_byte_identical_records(tmp_path):
    with criterion("determinism"):
        base = ExperimentConfig(controller="mimpc",
                                initial_state=(0.15, -0.1, 0.3, 0.0, 0.0, 0.0, 0.0),
                                hold_duration=1.0, reach_cutoff=3.0, total_cap=4.0)
        out1 = tmp_path / "a.jsonl"
        out2 = tmp_path / "b.jsonl"
        kinds = ["mimpc", "continuous", "informed"]
        run_batch(1, kinds, 314, out_path=str(out1), base_config=base)
        run_batch(1, kinds, 314, out_path=str(out2), base_config=base)
        b1 = out1.read_bytes()
        assert b1 == out2.read_bytes()
        assert len(b1.splitlines()) == 3


@pytest.mark.skipif(not os.environ.get("BINTHRUST_FULL_ACCEPTANCE"),
                    reason="hours-long tier; set BINTHRUST_FULL_ACCEPTANCE=1")
def test_scaled_pareto_reproduction(tmp_path):
    # 100 shared draws, all three controllers; orderings asserted, the
    # magnitudes printed for inspection
    with criterion("scaled-pareto-reproduction(n=100)"):
        out = tmp_path / "pareto.jsonl"
        records = run_batch(100, ["mimpc", "continuous", "informed"], 2025,
                            out_path=str(out))
        rows = [json.loads(r.to_json()) for r in records]
        tables = summarize(rows)
        min_stay = {name: tables[name].usage_stay.get("min", float("inf"))
                    for name in tables}
        print(f"\nminimum station-keeping usage: {min_stay}")
        assert min_stay["informed"] < min_stay["continuous"], \
            "informed MPC should station-keep leaner than continuous"
        assert min_stay["mimpc"] < min_stay["informed"], \
            "MIMPC should station-keep leanest of all three"
        # reach fronts overlap within a factor of 2 in the shared usage band
        fronts = {name: tables[name].front_reach_time for name in tables}
        for front in fronts.values():
            assert front, "every controller needs at least one success"
        lo = max(front[0][0] for front in fronts.values())
        hi = min(front[-1][0] for front in fronts.values())
        assert hi > lo, "reach fronts share no usage band"
        for q in np.linspace(lo, hi, 7):
            times = [front_value_at(fronts[name], q) for name in fronts]
            times = [t for t in times if t is not None]
            assert len(times) == 3
            assert max(times) <= 2.0 * min(times), \
                f"fronts diverge beyond 2x at usage {q}: {times}"
