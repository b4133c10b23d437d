"""Finite-horizon optimal control problem assembled as a dense LP.

Decision variables, in column order:

    x_t   for t = 0..N        7 each   predicted states
    u_t   for t = 0..N-1      9 each   inputs (wheel torque + 8 thrusters)
    ex_t  for t = 0..N        7 each   state-error magnitude bounds
    eu_t  for t = 0..N-1      9 each   input magnitude bounds

which gives 14*(N+1) + 18*N columns (654 at N = 20).  The objective is the
weighted sum of the magnitude variables; magnitude coupling, dynamics and
the t=0 state-bound rows are constraint rows, everything else lives in the
variable bounds (torque box, thruster [0,1], state box for 0 < t < N,
terminal box at t = N, and the initial state pinned to the estimate).

In informed mode a fixed firing plan enters the dynamics right-hand side,
so the predicted trajectory accounts for thrust the modulators are already
committed to deliver.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lp_solver import LpProblem, LpSolution, LpStatus
from .platform_model import N_INPUTS, N_STATES, PlatformParams, system_matrices


class InconsistentBounds(ValueError):
    """Raised when a lower bound exceeds its upper bound before solving."""


class NotOptimal(RuntimeError):
    """Raised when an input is extracted from a non-optimal solution."""


@dataclass
class OcpWeights:
    """Diagonal cost weights: running state, terminal state, input."""

    q: np.ndarray        # (7,)
    q_terminal: np.ndarray   # (7,)
    w: np.ndarray        # (9,)

    @classmethod
    def from_study_parameters(cls, eta: float, xi: float, kappa: float) -> "OcpWeights":
        """Weight family used by the efficiency study.

        eta scales the velocity terms, xi the terminal cost, kappa the
        thruster effort; the wheel-torque effort weight stays small and
        the wheel speed is not penalized.
        """
        q = np.array([1.0, 1.0, 0.12, eta, eta, 0.12 * eta, 0.0])
        w = np.concatenate([[0.0001], np.full(8, kappa)])
        return cls(q=q, q_terminal=xi * q, w=w)

    def validate(self) -> None:
        for arr, size in ((self.q, 7), (self.q_terminal, 7), (self.w, 9)):
            if np.asarray(arr).shape != (size,):
                raise ValueError("weight vector shape mismatch")
            if np.any(np.asarray(arr) < 0.0):
                raise ValueError("weights must be nonnegative")


DEFAULT_STATE_LB = np.array([-2.5, -2.5, -np.inf, -0.3, -0.3, -0.3, -26.18])
DEFAULT_STATE_UB = -DEFAULT_STATE_LB
DEFAULT_TERMINAL_VELOCITY_BAND = 0.05


def default_terminal_bounds(state_lb, state_ub, velocity_band=DEFAULT_TERMINAL_VELOCITY_BAND):
    """Conservative stand-in for a control-invariant terminal set: a small
    velocity box, with pose and wheel speed inheriting the state bounds."""
    t_lb = np.array(state_lb, dtype=float)
    t_ub = np.array(state_ub, dtype=float)
    t_lb[3:6] = -velocity_band
    t_ub[3:6] = velocity_band
    return t_lb, t_ub


@dataclass
class OcpSpec:
    """One control cycle's optimization problem data."""

    horizon: int
    dt: float
    weights: OcpWeights
    target: np.ndarray                  # (7,)
    x_estimated: np.ndarray             # (7,)
    thetas: np.ndarray                  # (N,), linearization angle per step
    state_lb: np.ndarray = field(default_factory=lambda: DEFAULT_STATE_LB.copy())
    state_ub: np.ndarray = field(default_factory=lambda: DEFAULT_STATE_UB.copy())
    terminal_lb: np.ndarray | None = None
    terminal_ub: np.ndarray | None = None
    torque_limit: float = 1.44
    exogenous_firings: np.ndarray | None = None   # (N, 8) binary, informed mode

    def validate(self) -> None:
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        self.weights.validate()
        if self.thetas.shape != (self.horizon,):
            raise ValueError("need one linearization angle per step")
        if np.any(self.state_lb > self.state_ub):
            raise InconsistentBounds("state_lb > state_ub")
        if self.terminal_lb is not None and self.terminal_ub is not None:
            if np.any(np.asarray(self.terminal_lb) > np.asarray(self.terminal_ub)):
                raise InconsistentBounds("terminal_lb > terminal_ub")
        if self.exogenous_firings is not None:
            if self.exogenous_firings.shape != (self.horizon, 8):
                raise ValueError("exogenous firing plan must be N x 8")
            vals = self.exogenous_firings
            if not np.all((vals == 0.0) | (vals == 1.0)):
                raise ValueError("exogenous firings must be binary")


@dataclass
class ColumnMap:
    """Column offsets of each variable family; shared by builder and users."""

    horizon: int

    def x(self, t: int) -> slice:
        return slice(7 * t, 7 * t + 7)

    def u(self, t: int) -> slice:
        base = 7 * (self.horizon + 1)
        return slice(base + 9 * t, base + 9 * t + 9)

    def ex(self, t: int) -> slice:
        base = 7 * (self.horizon + 1) + 9 * self.horizon
        return slice(base + 7 * t, base + 7 * t + 7)

    def eu(self, t: int) -> slice:
        base = 14 * (self.horizon + 1) + 9 * self.horizon
        return slice(base + 9 * t, base + 9 * t + 9)

    @property
    def n_columns(self) -> int:
        return 14 * (self.horizon + 1) + 18 * self.horizon

    def binary_columns(self) -> np.ndarray:
        """Thruster input columns across the horizon, ordered (t, thruster)."""
        cols = []
        for t in range(self.horizon):
            cols.extend(range(self.u(t).start + 1, self.u(t).start + 9))
        return np.array(cols, dtype=int)


def build(spec: OcpSpec, params: PlatformParams) -> LpProblem:
    """Assemble the LP for one control cycle."""
    spec.validate()
    N = spec.horizon
    cm = ColumnMap(N)
    n = cm.n_columns
    dt = spec.dt

    term_lb, term_ub = spec.terminal_lb, spec.terminal_ub
    if term_lb is None or term_ub is None:
        d_lb, d_ub = default_terminal_bounds(spec.state_lb, spec.state_ub)
        term_lb = d_lb if term_lb is None else np.asarray(term_lb, dtype=float)
        term_ub = d_ub if term_ub is None else np.asarray(term_ub, dtype=float)
    if np.any(np.asarray(term_lb) > np.asarray(term_ub)):
        raise InconsistentBounds("terminal_lb > terminal_ub")

    # variable bounds
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    lo[cm.x(0)] = spec.x_estimated       # x_0 pinned to the estimate
    hi[cm.x(0)] = spec.x_estimated
    for t in range(1, N):
        lo[cm.x(t)] = spec.state_lb
        hi[cm.x(t)] = spec.state_ub
    lo[cm.x(N)] = term_lb
    hi[cm.x(N)] = term_ub
    for t in range(N):
        us = cm.u(t)
        lo[us.start] = -spec.torque_limit
        hi[us.start] = spec.torque_limit
        lo[us.start + 1: us.stop] = 0.0
        hi[us.start + 1: us.stop] = 1.0

    # objective: running weights on magnitudes, terminal weight on ex_N
    c = np.zeros(n)
    for t in range(N):
        c[cm.ex(t)] = spec.weights.q
        c[cm.eu(t)] = spec.weights.w
    c[cm.ex(N)] = spec.weights.q_terminal

    # equality rows: forward-Euler dynamics, one 7-row block per step
    me = 7 * N
    E = np.zeros((me, n))
    f = np.zeros(me)
    for t in range(N):
        dyn = system_matrices(params, float(spec.thetas[t]), dt)
        rows = slice(7 * t, 7 * t + 7)
        E[rows, cm.x(t + 1)] = np.eye(7)
        E[rows, cm.x(t)] = -(np.eye(7) + dt * dyn.A)
        E[rows, cm.u(t)] = -dt * dyn.B
        if spec.exogenous_firings is not None:
            plan = np.concatenate([[0.0], spec.exogenous_firings[t]])
            f[rows] = dt * (dyn.B @ plan)

    # inequality rows: magnitude epigraphs plus the t=0 state box
    n_ub0 = int(np.sum(np.isfinite(spec.state_ub)))
    n_lb0 = int(np.sum(np.isfinite(spec.state_lb)))
    mi = 14 * (N + 1) + 18 * N + n_ub0 + n_lb0
    G = np.zeros((mi, n))
    h = np.zeros(mi)
    r = 0
    for t in range(N + 1):
        xs, es = cm.x(t), cm.ex(t)
        G[r:r + 7, xs] = np.eye(7)
        G[r:r + 7, es] = -np.eye(7)
        h[r:r + 7] = spec.target
        r += 7
        G[r:r + 7, xs] = -np.eye(7)
        G[r:r + 7, es] = -np.eye(7)
        h[r:r + 7] = -spec.target
        r += 7
    for t in range(N):
        us, es = cm.u(t), cm.eu(t)
        G[r:r + 9, us] = np.eye(9)
        G[r:r + 9, es] = -np.eye(9)
        r += 9
        G[r:r + 9, us] = -np.eye(9)
        G[r:r + 9, es] = -np.eye(9)
        r += 9
    # state box on x_0 as rows so an out-of-bounds estimate reads as an
    # infeasible LP rather than a malformed one
    x0 = cm.x(0).start
    for i in range(7):
        if np.isfinite(spec.state_ub[i]):
            G[r, x0 + i] = 1.0
            h[r] = spec.state_ub[i]
            r += 1
    for i in range(7):
        if np.isfinite(spec.state_lb[i]):
            G[r, x0 + i] = -1.0
            h[r] = -spec.state_lb[i]
            r += 1
    assert r == mi

    names = {
        "x": np.array([[cm.x(t).start + i for i in range(7)] for t in range(N + 1)]),
        "u": np.array([[cm.u(t).start + i for i in range(9)] for t in range(N)]),
        "ex": np.array([[cm.ex(t).start + i for i in range(7)] for t in range(N + 1)]),
        "eu": np.array([[cm.eu(t).start + i for i in range(9)] for t in range(N)]),
    }
    problem = LpProblem(c=c, G=G, h=h, E=E, f=f, lo=lo, hi=hi, names=names)
    problem.validate()
    return problem


def extract_first_input(sol: LpSolution, spec: OcpSpec) -> np.ndarray:
    """First input of the optimal plan, thrusters clamped against drift."""
    if sol.status != LpStatus.OPTIMAL:
        raise NotOptimal(f"cannot extract input from status {sol.status}")
    cm = ColumnMap(spec.horizon)
    u0 = np.array(sol.z[cm.u(0)], dtype=float)
    u0[1:] = np.clip(u0[1:], 0.0, 1.0)
    return u0


def extract_state_plan(sol: LpSolution, spec: OcpSpec) -> np.ndarray:
    """Predicted state trajectory (N+1, 7) from a solution."""
    cm = ColumnMap(spec.horizon)
    return np.array([sol.z[cm.x(t)] for t in range(spec.horizon + 1)])
