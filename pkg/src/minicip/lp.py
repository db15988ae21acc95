"""Dense bounded-variable primal simplex.

Rows ``lhs <= A x <= rhs`` get one logical (slack) column each, giving the
equality system ``A x - s = 0`` with every column boxed.  Phase 1 minimises
the sum of bound violations of basic variables (composite objective, no
big-M); phase 2 runs on the true costs.  The tableau ``B^-1 [A | -I]`` is
kept explicitly and updated by :func:`minicip.kernels.pivot`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels

INF = math.inf
PRIMAL_TOL = 1e-9
DUAL_TOL = 1e-9
REFACTOR_EVERY = 50

BASIC = "basic"
AT_LOWER = "at_lower"
AT_UPPER = "at_upper"
ZERO = "zero"  # free nonbasic column sitting at 0

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"


@dataclass
class LpProblem:
    c: np.ndarray
    A: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.shape[0]
        self.lhs = np.asarray(self.lhs, dtype=float).reshape(-1)
        self.A = np.asarray(self.A, dtype=float).reshape(self.lhs.shape[0], n)
        self.rhs = np.asarray(self.rhs, dtype=float).reshape(-1)
        self.lb = np.asarray(self.lb, dtype=float).reshape(-1)
        self.ub = np.asarray(self.ub, dtype=float).reshape(-1)
        if np.any(self.lhs > self.rhs) or np.any(self.lb > self.ub):
            raise ValueError("crossed row sides or column bounds")
        if not np.all(np.isfinite(self.A)):
            raise ValueError("non-finite constraint coefficient")

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.c.shape[0]


@dataclass
class LpSolution:
    status: str
    x: np.ndarray
    y: np.ndarray
    rc: np.ndarray
    col_basis: list[str]
    row_basis: list[str]
    objective: float
    iterations: int = 0
    activity: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def dual_objective(self, problem: LpProblem) -> float:
        """Dual objective built from the active sides and bounds."""
        total = 0.0
        for i, yi in enumerate(self.y):
            if yi > 0:
                total += yi * problem.lhs[i]
            elif yi < 0:
                total += yi * problem.rhs[i]
        for j, d in enumerate(self.rc):
            if d > 0:
                total += d * problem.lb[j]
            elif d < 0:
                total += d * problem.ub[j]
        return total


def solve_lp(problem: LpProblem, iteration_limit: int = 10000) -> LpSolution:
    return _Simplex(problem).run(iteration_limit)


class _Simplex:
    def __init__(self, p: LpProblem):
        self.p = p
        m, n = p.m, p.n
        self.m, self.n = m, n
        N = n + m
        self.full = np.hstack([p.A, -np.eye(m)]) if m else np.zeros((0, n))
        self.lo = np.concatenate([p.lb, p.lhs])
        self.hi = np.concatenate([p.ub, p.rhs])
        self.cost = np.concatenate([p.c, np.zeros(m)])
        self.basis = list(range(n, N))  # row i -> basic column
        self.is_basic = np.zeros(N, dtype=bool)
        self.is_basic[n:] = True
        self.xn = np.zeros(N)
        for j in range(n):
            self.xn[j] = self._rest_value(j)
        self.T = np.ascontiguousarray(-self.full) if m else np.zeros((0, N))
        self.x = np.zeros(N)

    def _rest_value(self, j: int) -> float:
        if np.isfinite(self.lo[j]):
            return self.lo[j]
        if np.isfinite(self.hi[j]):
            return self.hi[j]
        return 0.0

    def refactor(self):
        if self.m == 0:
            return
        B = self.full[:, self.basis]
        self.T = np.ascontiguousarray(np.linalg.solve(B, self.full))

    def compute_x(self):
        x = self.xn.copy()
        x[self.is_basic] = 0.0
        if self.m:
            nb = ~self.is_basic
            xb = -self.T[:, nb] @ x[nb]
            x[self.basis] = xb
        self.x = x

    def run(self, iteration_limit: int) -> LpSolution:
        m, n = self.m, self.n
        N = n + m
        degenerate_run = 0
        bland_after = 3 * (m + n)
        it = 0
        phase = 1
        while True:
            if it and it % REFACTOR_EVERY == 0:
                self.refactor()
            self.compute_x()
            x = self.x
            below = x < self.lo - PRIMAL_TOL
            above = x > self.hi + PRIMAL_TOL
            if below.any() or above.any():
                phase = 1
                cost = np.where(below, -1.0, 0.0) + np.where(above, 1.0, 0.0)
            else:
                phase = 2
                cost = self.cost
            cb = cost[self.basis] if m else np.zeros(0)
            d = cost - (cb @ self.T if m else 0.0)
            d[self.is_basic] = 0.0
            use_bland = degenerate_run >= bland_after
            enter, direction = self._price(d, use_bland)
            if enter < 0:
                if phase == 1:
                    return self._result(INFEASIBLE, it)
                return self._result(OPTIMAL, it)
            if it >= iteration_limit:
                return self._result(ITERATION_LIMIT, it)
            it += 1
            step, leave_row, leave_bound = self._ratio(enter, direction, below, above, use_bland)
            if math.isinf(step):
                if phase == 2:
                    return self._result(UNBOUNDED, it)
                # phase 1 directions always hit a breakpoint; numerical trouble
                self.refactor()
                return self._result(INFEASIBLE, it)
            degenerate_run = degenerate_run + 1 if step <= 1e-12 else 0
            if leave_row < 0:
                # bound flip of the entering column
                self.xn[enter] = self.hi[enter] if direction > 0 else self.lo[enter]
                continue
            leaving = self.basis[leave_row]
            self.xn[enter] = x[enter] + direction * step
            kernels.pivot(self.T, leave_row, enter)
            self.basis[leave_row] = enter
            self.is_basic[enter] = True
            self.is_basic[leaving] = False
            self.xn[leaving] = self.lo[leaving] if leave_bound == AT_LOWER else self.hi[leaving]

    def _price(self, d: np.ndarray, bland: bool) -> tuple[int, int]:
        best = -1
        best_dir = 0
        best_score = 0.0
        for j in range(self.n + self.m):
            if self.is_basic[j] or self.lo[j] == self.hi[j]:
                continue
            dj = d[j]
            xj = self.xn[j]
            can_up = xj < self.hi[j]
            can_down = xj > self.lo[j]
            if dj < -DUAL_TOL and can_up:
                dirj = 1
            elif dj > DUAL_TOL and can_down:
                dirj = -1
            else:
                continue
            if bland:
                return j, dirj
            if abs(dj) > best_score:
                best, best_dir, best_score = j, dirj, abs(dj)
        return best, best_dir

    def _ratio(self, enter, direction, below, above, bland):
        x = self.x
        step = INF
        leave_row = -1
        leave_bound = None
        span = self.hi[enter] - self.lo[enter]
        if math.isfinite(span):
            step = span
        best_piv = 0.0
        if self.m:
            alpha = -self.T[:, enter] * direction  # rate of change of basics
            for i in range(self.m):
                a = alpha[i]
                if abs(a) <= 1e-11:
                    continue
                j = self.basis[i]
                if a < 0:
                    if above[j]:
                        t, bound = (x[j] - self.hi[j]) / -a, AT_UPPER
                    elif below[j] or not math.isfinite(self.lo[j]):
                        continue
                    else:
                        t, bound = max(x[j] - self.lo[j], 0.0) / -a, AT_LOWER
                else:
                    if below[j]:
                        t, bound = (self.lo[j] - x[j]) / a, AT_LOWER
                    elif above[j] or not math.isfinite(self.hi[j]):
                        continue
                    else:
                        t, bound = max(self.hi[j] - x[j], 0.0) / a, AT_UPPER
                better = t < step - 1e-12
                tie = not better and abs(t - step) <= 1e-12 and leave_row >= 0
                if tie:
                    if bland:
                        better = j < self.basis[leave_row]
                    else:
                        better = abs(a) > best_piv
                if better:
                    step, leave_row, leave_bound, best_piv = t, i, bound, abs(a)
        return step, leave_row, leave_bound

    def _result(self, status: str, it: int) -> LpSolution:
        m, n = self.m, self.n
        self.compute_x()
        x = self.x
        cb = self.cost[self.basis] if m else np.zeros(0)
        if m:
            # y = c_B B^-1 ; B^-1 is -T restricted to the slack block
            binv = -self.T[:, n:]
            y = cb @ binv
        else:
            y = np.zeros(0)
        rc = self.p.c - (self.p.A.T @ y if m else 0.0)
        col_basis = [self._status(j) for j in range(n)]
        row_basis = [self._status(n + i) for i in range(m)]
        xs = x[:n].copy()
        rc = np.asarray(rc, dtype=float)
        for j in range(n):
            if col_basis[j] == BASIC:
                rc[j] = 0.0
        obj = float(self.p.c @ xs) if status == OPTIMAL else (
            -INF if status == UNBOUNDED else math.nan)
        return LpSolution(status, xs, np.asarray(y, dtype=float), rc, col_basis, row_basis,
                          obj, it, x[n:].copy())

    def _status(self, j: int) -> str:
        if self.is_basic[j]:
            return BASIC
        v = self.xn[j]
        if v == self.lo[j]:
            return AT_LOWER
        if v == self.hi[j]:
            return AT_UPPER
        return ZERO
