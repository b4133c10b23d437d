"""Dense bounded-variable primal simplex.

Serves two roles: standalone LP solver for the continuous controllers and
relaxation engine inside branch-and-bound.  The implementation favors
determinism over speed tricks: Dantzig pricing with lowest-index tie
breaking, Bland's rule engaged after a run of degenerate pivots, no
randomization anywhere.

Problems are stated as

    min  c.z   s.t.   G.z <= h,   E.z = f,   lo <= z <= hi

Internally one logical column is appended per row (slack for inequality
rows, a [0,0]-bounded logical for equality rows) so that any column set of
the right size is a structurally valid basis.  Feasibility is restored from
an arbitrary starting basis by a composite phase 1 that minimizes the total
bound violation of the basic variables; this is what makes warm starts
across bound/rhs changes cheap.

Tolerances are fixed for reproducibility: primal feasibility 1e-7,
reduced-cost optimality 1e-9.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

try:
    from scipy.linalg.blas import dger as _dger
except ImportError:          # pragma: no cover - scipy is a core dependency
    _dger = None

FEAS_TOL = 1e-7
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9
MIN_PIVOT = 1e-11
DEGEN_TOL = 1e-12
REFACTOR_EVERY = 150

# column status codes
BASIC = 0
AT_LO = 1
AT_UP = 2
FREE = 3


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


@dataclass
class LpProblem:
    """Dense LP in inequality/equality standard form."""

    c: np.ndarray                       # (n,)
    G: np.ndarray                       # (mi, n)
    h: np.ndarray                       # (mi,)
    E: np.ndarray                       # (me, n)
    f: np.ndarray                       # (me,)
    lo: np.ndarray                      # (n,), may be -inf
    hi: np.ndarray                      # (n,), may be +inf
    names: dict = field(default_factory=dict)   # symbol -> column index array

    @property
    def n(self) -> int:
        return self.c.shape[0]

    def validate(self) -> None:
        n = self.n
        mi, me = self.G.shape[0], self.E.shape[0]
        if self.G.shape != (mi, n) or self.E.shape != (me, n):
            raise ValueError("constraint matrix shape mismatch")
        if self.h.shape != (mi,) or self.f.shape != (me,):
            raise ValueError("rhs shape mismatch")
        if self.lo.shape != (n,) or self.hi.shape != (n,):
            raise ValueError("bound shape mismatch")
        if np.any(self.lo > self.hi):
            raise ValueError("lo > hi for some variable")
        for arr in (self.c, self.G, self.h, self.E, self.f):
            if not np.all(np.isfinite(arr)):
                raise ValueError("non-finite problem data")


@dataclass
class Basis:
    """Opaque warm-start handle: basic column ids plus nonbasic statuses."""

    basis: np.ndarray      # (m,) int
    status: np.ndarray     # (n + m,) int8


@dataclass
class LpSolution:
    status: LpStatus
    z: np.ndarray          # structural primal values, (n,)
    objective: float
    iterations: int
    basis: Basis | None = None
    dual: np.ndarray | None = None       # row multipliers at optimum
    reduced_costs: np.ndarray | None = None


class SimplexEngine:
    """Stateful solver bound to one problem's matrix sparsity-free layout.

    Bounds and right-hand sides may be mutated between solves; the resident
    basis and its factorization are reused, so successive solves after
    small changes typically take a handful of pivots.
    """

    def __init__(self, problem: LpProblem):
        problem.validate()
        self.problem = problem
        n = problem.n
        mi = problem.G.shape[0]
        me = problem.E.shape[0]
        self.n = n
        self.m = mi + me
        self.mi = mi
        self.ncols = n + self.m
        # structural columns only; logical column j is the identity column
        # of row j - n and is handled implicitly throughout
        self.A = np.ascontiguousarray(np.vstack([problem.G, problem.E]))
        self.b = np.concatenate([problem.h, problem.f]).astype(float)
        self.lo = np.concatenate([problem.lo, np.zeros(self.m)]).astype(float)
        self.hi = np.concatenate([problem.hi, np.full(self.m, np.inf)])
        self.hi[n + mi:] = 0.0          # equality logicals pinned to zero
        self.c = np.concatenate([problem.c, np.zeros(self.m)]).astype(float)
        self.max_iter = 50 * max(n, 1)
        self.basis = None               # (m,) int array
        self.status = None              # (ncols,) int8
        self.Binv = None
        self.xB = None
        self._pivots_since_refactor = 0
        self._d = np.empty(self.ncols)

    # -- state management ------------------------------------------------

    def set_column_bounds(self, col: int, lo: float, hi: float) -> None:
        if lo > hi:
            raise ValueError("lo > hi")
        self.lo[col] = lo
        self.hi[col] = hi

    def set_equality_rhs(self, values: np.ndarray) -> None:
        self.b[self.mi:] = values

    def set_costs(self, c_structural: np.ndarray) -> None:
        """Swap the structural cost vector (logical columns stay free)."""
        self.c[: self.n] = c_structural

    def refresh_problem_data(self, problem: LpProblem) -> None:
        """Adopt new costs, bounds and right-hand sides for a problem whose
        constraint matrices are identical to the resident ones.  The basis
        and factorization stay valid, making the next solve a warm one."""
        n, m, mi = self.n, self.m, self.mi
        if problem.n != n or problem.G.shape[0] != mi or problem.E.shape[0] != m - mi:
            raise ValueError("matrix layout differs; build a new engine")
        self.problem = problem
        self.b[:mi] = problem.h
        self.b[mi:] = problem.f
        self.lo[:n] = problem.lo
        self.hi[:n] = problem.hi
        self.c[:n] = problem.c

    def _basis_matrix(self, basis: np.ndarray) -> np.ndarray:
        B = np.empty((self.m, self.m))
        struct = basis < self.n
        B[:, struct] = self.A[:, basis[struct]]
        log_pos = np.where(~struct)[0]
        if log_pos.size:
            B[:, log_pos] = 0.0
            B[basis[log_pos] - self.n, log_pos] = 1.0
        return B

    def load_basis(self, handle: Basis) -> bool:
        """Install an external basis; returns False if it cannot be factored."""
        if handle.basis.shape[0] != self.m or handle.status.shape[0] != self.ncols:
            return False
        try:
            Binv = np.linalg.inv(self._basis_matrix(handle.basis))
        except np.linalg.LinAlgError:
            return False
        if not np.all(np.isfinite(Binv)):
            return False
        self.basis = handle.basis.copy()
        self.status = handle.status.copy()
        self.Binv = Binv
        self._pivots_since_refactor = 0
        self._recompute_xB()
        return True

    def snapshot(self) -> tuple:
        """Capture basis, statuses and factorization for cheap restore."""
        return (self.basis.copy(), self.status.copy(), self.Binv.copy(),
                self._pivots_since_refactor)

    def restore(self, snap: tuple) -> None:
        """Reinstate a snapshot taken on this engine; no refactorization."""
        self.basis, self.status, self.Binv, self._pivots_since_refactor = \
            snap[0].copy(), snap[1].copy(), snap[2].copy(), snap[3]
        self._recompute_xB()

    def _cold_basis(self) -> None:
        """All-logical basis; structural columns rest at their nearest bound."""
        n, m = self.n, self.m
        self.status = np.empty(self.ncols, dtype=np.int8)
        for j in range(n):
            if np.isfinite(self.lo[j]):
                self.status[j] = AT_LO
            elif np.isfinite(self.hi[j]):
                self.status[j] = AT_UP
            else:
                self.status[j] = FREE
        self.basis = n + np.arange(m)
        self.status[self.basis] = BASIC
        self.Binv = np.eye(m)
        self._pivots_since_refactor = 0
        self._recompute_xB()

    def _nonbasic_values(self) -> np.ndarray:
        vals = np.zeros(self.ncols)
        at_lo = self.status == AT_LO
        at_up = self.status == AT_UP
        vals[at_lo] = self.lo[at_lo]
        vals[at_up] = self.hi[at_up]
        return vals

    def _recompute_xB(self) -> None:
        vals = self._nonbasic_values()
        vals[self.basis] = 0.0
        self.xB = self.Binv @ (self.b - self.A @ vals[: self.n] - vals[self.n:])

    def _refactor(self) -> None:
        """Rebuild the factorization; a numerically singular basis (stale
        updates let a dependent column in) falls back to the logical basis,
        which is always valid, and the solve resumes from there."""
        try:
            Binv = np.linalg.inv(self._basis_matrix(self.basis))
        except np.linalg.LinAlgError:
            Binv = None
        if Binv is None or not np.all(np.isfinite(Binv)):
            self._cold_basis()
            return
        self.Binv = Binv
        self._pivots_since_refactor = 0
        self._recompute_xB()

    # -- core pivoting ---------------------------------------------------

    def _price(self, cvec: np.ndarray) -> np.ndarray:
        """Reduced costs for all columns under cost vector cvec."""
        y = cvec[self.basis] @ self.Binv
        d = self._d
        d[: self.n] = cvec[: self.n] - y @ self.A
        d[self.n:] = cvec[self.n:] - y
        return d

    def _column_direction(self, j: int) -> np.ndarray:
        """Binv times column j; a copy, safe to keep across the pivot."""
        if j < self.n:
            return self.Binv @ self.A[:, j]
        return self.Binv[:, j - self.n].copy()

    def _choose_entering(self, d: np.ndarray, bland: bool):
        """Return (col, direction) or None.  direction +1 grows, -1 shrinks."""
        fixed = self.hi - self.lo <= 0.0
        can_up = (self.status == AT_LO) & ~fixed | (self.status == FREE)
        can_dn = (self.status == AT_UP) & ~fixed | (self.status == FREE)
        viol = np.zeros(self.ncols)
        up_gain = np.where(can_up, -d, 0.0)
        dn_gain = np.where(can_dn, d, 0.0)
        gain = np.maximum(up_gain, dn_gain)
        viol = np.where(gain > OPT_TOL, gain, 0.0)
        if not np.any(viol > 0.0):
            return None
        if bland:
            j = int(np.argmax(viol > 0.0))
        else:
            j = int(np.argmax(viol))
        direction = 1 if up_gain[j] >= dn_gain[j] else -1
        return j, direction

    def _ratio_test(self, j: int, direction: int, w: np.ndarray, phase1: bool, bland: bool):
        """Pick the blocking bound along the entering direction.

        Returns (t, leaving_row, leaving_bound_status) where leaving_row is
        -1 for a bound flip of the entering column and -2 for no block.
        """
        delta = -direction * w
        bi = self.basis
        lob = self.lo[bi]
        hib = self.hi[bi]
        xb = self.xB
        t_best = np.inf
        if np.isfinite(self.lo[j]) and np.isfinite(self.hi[j]):
            t_best = self.hi[j] - self.lo[j]
        row_best = -1 if np.isfinite(t_best) else -2
        leave_at = 0

        up = delta > PIVOT_TOL
        dn = delta < -PIVOT_TOL
        if phase1:
            below = xb < lob - FEAS_TOL
            above = xb > hib + FEAS_TOL
            feas = ~below & ~above
            # infeasible-below rows block when rising into their lower bound,
            # infeasible-above rows when falling onto their upper bound;
            # feasible rows block at whichever finite bound they approach.
            cand_up = (below & up) | (feas & up & np.isfinite(hib))
            cand_dn = (above & dn) | (feas & dn & np.isfinite(lob))
            targets = np.where(below, lob, np.where(above, hib, np.where(up, hib, lob)))
        else:
            cand_up = up & np.isfinite(hib)
            cand_dn = dn & np.isfinite(lob)
            targets = np.where(up, hib, lob)

        cand = cand_up | cand_dn
        if np.any(cand):
            ratios = np.full(self.m, np.inf)
            idx = np.where(cand)[0]
            ratios[idx] = (targets[idx] - xb[idx]) / delta[idx]
            np.maximum(ratios, 0.0, out=ratios)
            tmin = ratios.min()
            if tmin < t_best:
                ties = np.where(ratios <= tmin + DEGEN_TOL)[0]
                if bland:
                    row_best = int(ties[np.argmin(bi[ties])])
                else:
                    row_best = int(ties[np.argmax(np.abs(delta[ties]))])
                t_best = max(ratios[row_best], 0.0)
                going_up = delta[row_best] > 0.0
                if phase1:
                    if xb[row_best] < lob[row_best] - FEAS_TOL:
                        leave_at = AT_LO
                    elif xb[row_best] > hib[row_best] + FEAS_TOL:
                        leave_at = AT_UP
                    else:
                        leave_at = AT_UP if going_up else AT_LO
                else:
                    leave_at = AT_UP if going_up else AT_LO
        return t_best, row_best, leave_at

    def _apply_step(self, j, direction, w, t, row, leave_at):
        """Move the entering variable by t and update the factorization."""
        self.xB += t * (-direction * w)
        vals = self._nonbasic_values()
        enter_val = vals[j] + direction * t
        if row == -1:
            # bound flip, basis unchanged
            self.status[j] = AT_UP if direction > 0 else AT_LO
            return
        leaving = self.basis[row]
        self.status[leaving] = leave_at
        self.status[j] = BASIC
        self.basis[row] = j
        self.xB[row] = enter_val
        # rank-1 update of Binv
        wr = w[row]
        self.Binv[row, :] /= wr
        col = w.copy()
        col[row] = 0.0
        if _dger is not None:
            # in-place BLAS rank-1 update through the transposed (Fortran
            # contiguous) view; avoids a dense temporary every pivot
            _dger(-1.0, self.Binv[row, :].copy(), col,
                  a=self.Binv.T, overwrite_a=1)
        else:
            self.Binv -= np.outer(col, self.Binv[row, :])
        self._pivots_since_refactor += 1
        if self._pivots_since_refactor >= REFACTOR_EVERY:
            self._refactor()

    def _phase1_cost(self) -> tuple[np.ndarray, float]:
        lob = self.lo[self.basis]
        hib = self.hi[self.basis]
        below = self.xB < lob - FEAS_TOL
        above = self.xB > hib + FEAS_TOL
        grad = np.zeros(self.m)
        grad[below] = -1.0
        grad[above] = 1.0
        total = np.sum(lob[below] - self.xB[below]) + np.sum(self.xB[above] - hib[above])
        return grad, total

    def solve(self, max_iter: int | None = None) -> LpSolution:
        """Composite primal simplex: each iteration restores feasibility if any
        basic variable violates its bounds, otherwise improves the objective."""
        if self.basis is None:
            self._cold_basis()
        else:
            self._recompute_xB()
        limit = self.max_iter if max_iter is None else max_iter
        iters = 0
        degen_run = 0
        bland_after = 3 * max(self.n, 1)
        cvec = np.zeros(self.ncols)

        while True:
            if iters >= limit:
                return self._finish(LpStatus.ITERATION_LIMIT, iters)
            grad, total = self._phase1_cost()
            phase1 = total > FEAS_TOL
            if phase1:
                cvec[:] = 0.0
                cvec[self.basis] = grad
                d = self._price(cvec)
            else:
                d = self._price(self.c)
            bland = degen_run >= bland_after
            pick = self._choose_entering(d, bland)
            if pick is None:
                return self._finish(
                    LpStatus.INFEASIBLE if phase1 else LpStatus.OPTIMAL, iters)
            j, direction = pick
            w = self._column_direction(j)
            t, row, leave_at = self._ratio_test(j, direction, w, phase1, bland)
            if row == -2 or t > 1e14:
                if phase1:
                    # the violation total is bounded below, so an unblocked
                    # improving ray signals numerical breakdown
                    return self._finish(LpStatus.ITERATION_LIMIT, iters)
                return self._finish(LpStatus.UNBOUNDED, iters)
            if row >= 0:
                # authenticate the pivot element against a directly computed
                # value; update error in a stale factorization would
                # otherwise let a dependent column into the basis
                if j < self.n:
                    wr_true = float(self.Binv[row] @ self.A[:, j])
                else:
                    wr_true = float(self.Binv[row, j - self.n])
                drift = abs(wr_true - w[row])
                if abs(wr_true) < MIN_PIVOT or drift > 1e-7 * max(1.0, abs(wr_true)):
                    self._refactor()
                    iters += 1
                    continue
                w[row] = wr_true
            degen_run = degen_run + 1 if t <= DEGEN_TOL else 0
            self._apply_step(j, direction, w, t, row, leave_at)
            iters += 1

    def _finish(self, status: LpStatus, iters: int) -> LpSolution:
        z_full = self._nonbasic_values()
        z_full[self.basis] = self.xB
        z = z_full[: self.n]
        obj = float(self.problem.c @ z)
        handle = Basis(self.basis.copy(), self.status.copy())
        dual = None
        red = None
        if status == LpStatus.OPTIMAL:
            y = self.c[self.basis] @ self.Binv
            dual = y.copy()
            red = np.concatenate([self.c[: self.n] - y @ self.A, self.c[self.n:] - y])
        return LpSolution(status=status, z=z, objective=obj, iterations=iters,
                          basis=handle, dual=dual, reduced_costs=red)

    def primal_values(self) -> np.ndarray:
        z_full = self._nonbasic_values()
        z_full[self.basis] = self.xB
        return z_full

    def feasibility_residual(self) -> float:
        z = self.primal_values()
        res_rows = float(np.max(np.abs(self.A @ z[: self.n] + z[self.n:] - self.b))) if self.m else 0.0
        res_lo = float(np.max(np.maximum(self.lo - z, 0.0)))
        res_hi = float(np.max(np.maximum(z - self.hi, 0.0)))
        return max(res_rows, res_lo, res_hi)


def solve(problem: LpProblem, warm_start: Basis | None = None,
          max_iter: int | None = None) -> LpSolution:
    """One-shot solve; see SimplexEngine for incremental use."""
    engine = SimplexEngine(problem)
    if warm_start is not None:
        engine.load_basis(warm_start)
    return engine.solve(max_iter=max_iter)


def dump(problem: LpProblem, path: str) -> None:
    """Write a plain-text dump for external cross-checking.

    Layout (all numbers %24.16e, space separated):
        line 1:  "LP n <n> mi <mi> me <me>"
        line 2:  c (n values)
        next mi lines: row of G followed by its h entry (n+1 values)
        next me lines: row of E followed by its f entry (n+1 values)
        next line: lo (n values, "-inf"/"inf" for unbounded)
        next line: hi (n values)
        remaining lines: "name <symbol> <col> <col> ..." per name-map entry
    """
    def fmt(vals):
        out = []
        for v in vals:
            if np.isposinf(v):
                out.append("%24s" % "inf")
            elif np.isneginf(v):
                out.append("%24s" % "-inf")
            else:
                out.append("%24.16e" % v)
        return " ".join(out)

    with open(path, "w") as fh:
        fh.write(f"LP n {problem.n} mi {problem.G.shape[0]} me {problem.E.shape[0]}\n")
        fh.write(fmt(problem.c) + "\n")
        for i in range(problem.G.shape[0]):
            fh.write(fmt(np.append(problem.G[i], problem.h[i])) + "\n")
        for i in range(problem.E.shape[0]):
            fh.write(fmt(np.append(problem.E[i], problem.f[i])) + "\n")
        fh.write(fmt(problem.lo) + "\n")
        fh.write(fmt(problem.hi) + "\n")
        for name, cols in problem.names.items():
            cols = np.atleast_1d(np.asarray(cols)).ravel()
            fh.write("name %s %s\n" % (name, " ".join(str(int(cc)) for cc in cols)))
