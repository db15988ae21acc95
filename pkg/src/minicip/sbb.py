"""Spatial branch-and-bound.

Each node propagates bounds over the linear rows and the extended
formulation, solves an LP outer approximation refined by a few rounds of
estimator cuts, tries a rounding heuristic and branches.  Integer variables
are branched on first; otherwise the solver branches spatially on original
variables that occur nonlinearly in violated rows.  Auxiliary and slack
variables of the extended formulation are never branched on, and a point is
only accepted as incumbent after it has been checked against the original
rows.
"""
from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .expr import DomainError, backward_propagate, evaluate, interval_eval
from .interval import Interval
from .lp import INFEASIBLE as LP_INFEASIBLE
from .lp import OPTIMAL as LP_OPTIMAL
from .lp import UNBOUNDED as LP_UNBOUNDED
from .lp import LpProblem, solve_lp
from .model import FEASTOL, INF, Instance
from .relax import (ORIGINAL, Cut, ExtendedForm, build_extended_formulation, estimate,
                    select_cuts)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
GAP_LIMIT = "gap_limit"
NODE_LIMIT = "node_limit"
TIME_LIMIT = "time_limit"

GAP_ABS = 1e-6
GAP_REL = 1e-4
BRANCH_CLAMP = 0.2
PROP_ROUNDS = 5
PROP_MIN_GAIN = 1e-3
SEP_STALL = 1e-4
INT_TOL = 1e-6
MIN_SPATIAL_WIDTH = 1e-7


@dataclass
class SolveParams:
    time_limit: float = INF
    node_limit: int = 100000
    gap_abs: float = GAP_ABS
    gap_rel: float = GAP_REL
    max_cuts_per_round: int = 20
    max_sep_rounds: int = 8
    prop_rounds: int = PROP_ROUNDS
    heuristics: bool = True
    presolve: bool = True
    seed: int = 0
    leader_rule: str = "min_index"
    decomposition_heuristics: Sequence[str] = ("dps", "padm")
    lp_iteration_limit: int = 20000


@dataclass
class SolveResult:
    status: str
    incumbent: list[float] | None
    primal_bound: float
    dual_bound: float
    nodes_processed: int
    branching_log: list[tuple[int, int, str, float]] = field(default_factory=list)
    trace: list[tuple[int, float, float]] = field(default_factory=list)
    lp_iterations: int = 0
    time: float = 0.0
    heuristic_hits: dict[str, int] = field(default_factory=dict)

    @property
    def gap(self) -> float:
        return relative_gap(self.primal_bound, self.dual_bound)


def relative_gap(primal: float, dual: float) -> float:
    if primal == dual:
        return 0.0
    if not (math.isfinite(primal) and math.isfinite(dual)):
        return INF
    return abs(primal - dual) / max(abs(primal), abs(dual), 1e-10)


def gap_closed(primal: float, dual: float, gap_abs: float = GAP_ABS, gap_rel: float = GAP_REL) -> bool:
    """Both bounds in minimisation sense."""
    if not math.isfinite(primal):
        return False
    if dual >= primal:
        return True
    return primal - dual <= gap_abs or relative_gap(primal, dual) <= gap_rel


@dataclass
class FeasibilityReport:
    violations: dict[str, float]

    @property
    def max_violation(self) -> float:
        return max(self.violations.values(), default=0.0)

    @property
    def feasible(self) -> bool:
        return self.max_violation <= FEASTOL


def check_original_feasibility(instance: Instance, point: Sequence[float]) -> FeasibilityReport:
    """Violations of the original rows, bounds and integrality (never aux rows)."""
    if len(point) < instance.n:
        raise ValueError("point does not cover all original variables")
    return FeasibilityReport(instance.violations(list(point[:instance.n])))


# ---------------------------------------------------------------------------
# node state and propagation

@dataclass
class Node:
    lo: list[float]
    hi: list[float]
    depth: int
    bound: float
    number: int = 0


@dataclass
class Context:
    """Read-only solve data handed to plugins."""

    instance: Instance
    ext: ExtendedForm
    is_int: list[bool]
    rows: list[tuple[dict[int, float], float, float]]   # global linear rows (ext space)
    cost: np.ndarray
    nonlinear_vars: list[set[int]]                       # per original nonlinear row
    symmetry: object = None
    params: SolveParams = field(default_factory=SolveParams)


def _round_int(ctx: Context, lo, hi, j) -> None:
    if ctx.is_int[j]:
        lo[j] = math.ceil(lo[j] - INT_TOL)
        hi[j] = math.floor(hi[j] + INT_TOL)


def _tighten(ctx, lo, hi, j, new_lo, new_hi) -> float:
    """Apply a bound change; return its relative size."""
    gain = 0.0
    width = hi[j] - lo[j]
    scale = max(1.0, abs(width)) if math.isfinite(width) else 1.0
    if new_lo > lo[j] + 1e-12:
        gain = max(gain, 1.0 if not math.isfinite(lo[j]) else (new_lo - lo[j]) / scale)
        lo[j] = new_lo
    if new_hi < hi[j] - 1e-12:
        gain = max(gain, 1.0 if not math.isfinite(hi[j]) else (hi[j] - new_hi) / scale)
        hi[j] = new_hi
    _round_int(ctx, lo, hi, j)
    return gain


def _residual(total: float, ninf: int, own: float, unbounded: float) -> float:
    """Activity bound of a row without one entry (infinite entries counted apart)."""
    if math.isinf(own):
        return total if ninf == 1 else unbounded
    return total - own if ninf == 0 else unbounded


def propagate_linear(ctx: Context, lo, hi) -> float | None:
    """Activity-based bound tightening over the linear rows."""
    best = 0.0
    for coeffs, lhs, rhs in ctx.rows:
        amin = amax = 0.0
        ninf_min = ninf_max = 0
        for j, a in coeffs.items():
            l, u = (lo[j], hi[j]) if a > 0 else (hi[j], lo[j])
            t = a * l
            if math.isinf(t):
                ninf_min += 1
            else:
                amin += t
            t = a * u
            if math.isinf(t):
                ninf_max += 1
            else:
                amax += t
        if ninf_min == 0 and amin > rhs + FEASTOL:
            return None
        if ninf_max == 0 and amax < lhs - FEASTOL:
            return None
        for j, a in coeffs.items():
            l, u = (lo[j], hi[j]) if a > 0 else (hi[j], lo[j])
            cmin, cmax = a * l, a * u
            # residual activity of the other entries
            rmin = _residual(amin, ninf_min, cmin, -INF)
            rmax = _residual(amax, ninf_max, cmax, INF)
            new_lo, new_hi = -INF, INF
            if math.isfinite(rhs) and math.isfinite(rmin):
                v = (rhs - rmin) / a
                if a > 0:
                    new_hi = v
                else:
                    new_lo = v
            if math.isfinite(lhs) and math.isfinite(rmax):
                v = (lhs - rmax) / a
                if a > 0:
                    new_lo = max(new_lo, v)
                else:
                    new_hi = min(new_hi, v)
            # keep a little slack against round-off in continuous bounds
            if not ctx.is_int[j]:
                new_lo -= 1e-9 * max(1.0, abs(new_lo)) if math.isfinite(new_lo) else 0.0
                new_hi += 1e-9 * max(1.0, abs(new_hi)) if math.isfinite(new_hi) else 0.0
            best = max(best, _tighten(ctx, lo, hi, j, new_lo, new_hi))
            if lo[j] > hi[j] + FEASTOL:
                return None
            if lo[j] > hi[j]:
                lo[j] = hi[j] = (lo[j] + hi[j]) / 2 if not ctx.is_int[j] else hi[j]
    return best


def propagate_extended(ctx: Context, lo, hi) -> float | None:
    """Forward/backward interval propagation over the extended rows."""
    ext = ctx.ext
    best = 0.0
    for row in ext.rows:
        box = [Interval(a, b) for a, b in zip(lo, hi)]
        target = Interval(lo[row.var], hi[row.var])
        new = backward_propagate(ext.dag, row.node, target, box)
        if new is None:
            return None
        img = interval_eval(ext.dag, row.node, new).intersect(target)
        if img.is_empty:
            return None
        best = max(best, _tighten(ctx, lo, hi, row.var, img.lo, img.hi))
        for j in ext.dag.variables(row.node):
            best = max(best, _tighten(ctx, lo, hi, j, new[j].lo, new[j].hi))
            if lo[j] > hi[j] + FEASTOL:
                return None
    return best


def propagate_symmetry(ctx: Context, lo, hi) -> float | None:
    sym = ctx.symmetry
    if sym is None or not sym.symresacks:
        return 0.0
    n = ctx.instance.n
    bounds = [(lo[j], hi[j]) for j in range(n)]
    fix = sym.propagate(bounds)
    if fix is None:
        return None
    gain = 0.0
    for j, v in fix.items():
        gain = max(gain, _tighten(ctx, lo, hi, j, float(v), float(v)))
    return gain


# ---------------------------------------------------------------------------
# branching

@dataclass(frozen=True)
class BranchingDecision:
    var: int
    point: float
    integer: bool

    def children(self, lo, hi) -> list[tuple[list[float], list[float]]]:
        j = self.var
        if self.integer:
            left_hi, right_lo = math.floor(self.point), math.floor(self.point) + 1.0
        else:
            left_hi = right_lo = self.point
        l_lo, l_hi = list(lo), list(hi)
        r_lo, r_hi = list(lo), list(hi)
        l_hi[j] = left_hi
        r_lo[j] = right_lo
        return [(l_lo, l_hi), (r_lo, r_hi)]


def clamp_branch_point(value: float, lo: float, hi: float) -> float:
    """LP value pulled into [lo + 0.2 w, hi - 0.2 w]."""
    width = hi - lo
    if not math.isfinite(width):
        if math.isfinite(value):
            return value
        return 0.0
    return min(max(value, lo + BRANCH_CLAMP * width), hi - BRANCH_CLAMP * width)


def nonlinear_variables(dag, root) -> set[int]:
    """Variables that occur below some nonlinear operator."""
    out: set[int] = set()
    stack = [(root, False)]
    seen = set()
    while stack:
        n, under = stack.pop()
        if (n, under) in seen:
            continue
        seen.add((n, under))
        node = dag[n]
        if node.op == "var":
            if under:
                out.add(node.index)
            continue
        nl = under or node.op != "sum"
        for c in node.children:
            stack.append((c, nl))
    return out


def select_branching(lo, hi, x, ctx: Context) -> BranchingDecision | None:
    """Most fractional integer, else widest nonlinear original variable.

    Only original variables are ever returned.
    """
    inst = ctx.instance
    best = None
    best_score = INF
    for j in range(inst.n):
        if not ctx.is_int[j] or lo[j] == hi[j]:
            continue
        frac = x[j] - math.floor(x[j])
        if INT_TOL < frac < 1 - INT_TOL:
            score = abs(frac - 0.5)
            if score < best_score - 1e-12:
                best, best_score = j, score
    if best is not None:
        return BranchingDecision(best, x[best], True)
    candidates: set[int] = set()
    for k, row in enumerate(inst.nonlinear):
        try:
            v = evaluate(inst.dag, row.root, x[:inst.n])
            viol = max(row.lhs - v, v - row.rhs, 0.0)
        except (DomainError, OverflowError, ZeroDivisionError):
            viol = INF
        if viol > FEASTOL:
            candidates |= ctx.nonlinear_vars[k]
    best_w = -1.0
    for j in sorted(candidates):
        w = hi[j] - lo[j]
        if ctx.is_int[j]:
            if w < 1.0:
                continue
        elif w <= MIN_SPATIAL_WIDTH * max(1.0, abs(lo[j]), abs(hi[j])):
            continue
        if w > best_w:
            best, best_w = j, w
    if best is None:
        return None
    p = clamp_branch_point(x[best], lo[best], hi[best])
    if ctx.is_int[best]:
        return BranchingDecision(best, p, True)
    return BranchingDecision(best, p, False)


# ---------------------------------------------------------------------------
# separation and heuristics

def _box(lo, hi) -> list[Interval]:
    return [Interval(a, b) for a, b in zip(lo, hi)]


def _reference(lo, hi, x=None) -> list[float]:
    ref = []
    for j, (a, b) in enumerate(zip(lo, hi)):
        if x is not None and math.isfinite(x[j]):
            v = x[j]
        elif math.isfinite(a) and math.isfinite(b):
            v = 0.5 * (a + b)
        else:
            v = 0.0
        ref.append(min(max(v, a), b))
    return ref


def estimator_cuts(ctx: Context, lo, hi, ref, violated_only: bool = True) -> list[Cut]:
    """Under/over-estimator cuts for every extended row ``w = h(x)``."""
    ext = ctx.ext
    box = _box(lo, hi)
    out = []
    for row, tag in zip(ext.rows, ext.tags):
        for over in (False, True):
            est = estimate(ext.dag, row.node, box, ref, over, tag)
            if est is None:
                continue
            cut = est.as_cut(row.var, over)
            if not cut.coeffs or any(not math.isfinite(a) for a in cut.coeffs.values()):
                continue
            if violated_only and cut.violation(ref) <= FEASTOL * max(1.0, abs(cut.rhs if over is False else cut.lhs)):
                continue
            out.append(cut)
    return out


def separate_estimators(ctx: Context, lo, hi, x) -> list[Cut]:
    if not ctx.ext.rows:
        return []
    return estimator_cuts(ctx, lo, hi, _reference(lo, hi, x), True)


def separate_symmetry(ctx: Context, lo, hi, x) -> list[Cut]:
    sym = ctx.symmetry
    if sym is None or not sym.symresacks:
        return []
    return sym.separate(list(x[:ctx.instance.n]))


def rounding_heuristic(ctx: Context, lo, hi, x) -> list[list[float]]:
    n = ctx.instance.n
    pt = []
    for j in range(n):
        v = x[j]
        if ctx.is_int[j]:
            v = float(round(v))
        pt.append(min(max(v, lo[j]), hi[j]))
    return [pt]


@dataclass
class PluginRegistry:
    propagators: list[Callable] = field(default_factory=list)
    separators: list[Callable] = field(default_factory=list)
    heuristics: list[Callable] = field(default_factory=list)
    branching: list[Callable] = field(default_factory=list)
    cut_selector: Callable = select_cuts

    @classmethod
    def default(cls) -> "PluginRegistry":
        return cls([propagate_linear, propagate_extended, propagate_symmetry],
                   [separate_estimators, separate_symmetry],
                   [rounding_heuristic],
                   [select_branching],
                   select_cuts)


# ---------------------------------------------------------------------------
# driver

class _Solver:
    def __init__(self, instance: Instance, params: SolveParams, registry: PluginRegistry,
                 symmetries=None, decomposition=None):
        self.inst = instance
        self.params = params
        self.reg = registry
        self.decomposition = decomposition
        self.t0 = time.perf_counter()
        ext = build_extended_formulation(instance)
        self.ext = ext
        n, N = instance.n, ext.n
        is_int = [v.integer for v in instance.variables] + [False] * (N - n)
        rows = []
        for r in instance.linear:
            coeffs = {j: a for j, a in r.coeffs.items() if a != 0.0}
            rows.append((coeffs, r.lhs, r.rhs))
        sym = None
        if symmetries:
            from .symmetry import SymmetryHandler, objective_invariant

            for g in symmetries:
                if not objective_invariant(instance, g):
                    raise ValueError(f"objective not invariant under {g.cycle_text()}")
            sym = SymmetryHandler.build(instance, symmetries, params.leader_rule)
            for cut in sym.cuts():
                rows.append((cut.coeffs, cut.lhs, cut.rhs))
        cost = np.zeros(N)
        cost[:n] = instance.min_costs()
        nl_vars = [nonlinear_variables(instance.dag, r.root) for r in instance.nonlinear]
        self.ctx = Context(instance, ext, is_int, rows, cost, nl_vars, sym, params)
        self.sign = 1.0 if instance.sense == "min" else -1.0
        self.offset = self.sign * instance.obj_offset
        self.incumbent: list[float] | None = None
        self.primal = INF
        self.nodes = 0
        self.lp_iterations = 0
        self.branch_log: list[tuple[int, int, str, float]] = []
        self.trace: list[tuple[int, float, float]] = []
        self.hits: dict[str, int] = {}
        self.unbounded = False

    # -- incumbents -----------------------------------------------------
    def try_point(self, x, source: str) -> bool:
        x = [float(v) for v in x[:self.inst.n]]
        if not check_original_feasibility(self.inst, x).feasible:
            return False
        val = self.sign * self.inst.objective_value(x)
        if val < self.primal - 1e-12:
            self.primal = val
            self.incumbent = x
            self.hits[source] = self.hits.get(source, 0) + 1
            return True
        return False

    # -- node work ------------------------------------------------------
    def propagate(self, lo, hi) -> bool:
        for _ in range(self.params.prop_rounds):
            gain = 0.0
            for prop in self.reg.propagators:
                g = prop(self.ctx, lo, hi)
                if g is None:
                    return False
                gain = max(gain, g)
            if any(a > b + FEASTOL for a, b in zip(lo, hi)):
                return False
            if gain < PROP_MIN_GAIN:
                break
        for j in range(len(lo)):
            if lo[j] > hi[j]:
                lo[j] = hi[j] = 0.5 * (lo[j] + hi[j])
        return True

    def solve_lp(self, lo, hi, cuts: list[Cut]):
        rows = self.ctx.rows + [(c.coeffs, c.lhs, c.rhs) for c in cuts]
        N = self.ext.n
        A = np.zeros((len(rows), N))
        lhs = np.empty(len(rows))
        rhs = np.empty(len(rows))
        for i, (coeffs, l, r) in enumerate(rows):
            for j, a in coeffs.items():
                A[i, j] += a
            lhs[i], rhs[i] = l, r
        sol = solve_lp(LpProblem(self.ctx.cost, A, lhs, rhs, lo, hi),
                       iteration_limit=self.params.lp_iteration_limit)
        self.lp_iterations += sol.iterations
        return sol

    def relax(self, lo, hi):
        """LP outer approximation with separation rounds; returns (status, bound, x)."""
        cuts: list[Cut] = []
        if self.ext.rows:
            cuts = estimator_cuts(self.ctx, lo, hi, _reference(lo, hi), violated_only=False)
        last = -INF
        sol = None
        for rnd in range(self.params.max_sep_rounds + 1):
            sol = self.solve_lp(lo, hi, cuts)
            if sol.status == LP_INFEASIBLE:
                return "infeasible", INF, None
            if sol.status == LP_UNBOUNDED:
                return "unbounded", -INF, sol.x
            if sol.status != LP_OPTIMAL:
                return "unknown", -INF, None
            obj = sol.objective
            if rnd == self.params.max_sep_rounds:
                break
            if rnd > 0 and obj - last < SEP_STALL * max(1.0, abs(obj)):
                break
            last = obj
            cands = []
            for sep in self.reg.separators:
                cands.extend(sep(self.ctx, lo, hi, sol.x))
            if not cands:
                break
            chosen = self.reg.cut_selector(cands, sol.x, self.params.max_cuts_per_round)
            if not chosen:
                break
            cuts.extend(cands[k] for k in chosen)
        return "optimal", sol.objective + self.offset, sol.x

    def closed(self, bound: float) -> bool:
        return gap_closed(self.primal, bound, self.params.gap_abs, self.params.gap_rel)

    def process(self, node: Node) -> list[Node]:
        lo, hi = list(node.lo), list(node.hi)
        if not self.propagate(lo, hi):
            return []
        status, bound, x = self.relax(lo, hi)
        if status == "infeasible":
            return []
        if status == "unbounded" and not self.inst.nonlinear:
            if not any(self.ctx.is_int):
                self.unbounded = True
                return []
        bound = max(bound, node.bound)
        if self.closed(bound):
            return []
        if x is not None:
            x = list(x)
            n = self.inst.n
            if all(not self.ctx.is_int[j] or abs(x[j] - round(x[j])) <= INT_TOL for j in range(n)):
                pt = [float(round(v)) if self.ctx.is_int[j] else v for j, v in enumerate(x[:n])]
                self.try_point(pt, "lp")
            if self.params.heuristics:
                for heur in self.reg.heuristics:
                    for pt in heur(self.ctx, lo, hi, x):
                        self.try_point(pt, heur.__name__)
            if self.closed(bound):
                return []
        else:
            x = _reference(lo, hi)
        decision = None
        for rule in self.reg.branching:
            decision = rule(lo, hi, x, self.ctx)
            if decision is not None:
                break
        if decision is None:
            decision = self._fallback_branch(lo, hi, x, status)
            if decision is None:
                return []
        j = decision.var
        if self.ext.origin[j] != ORIGINAL:
            raise AssertionError("branching on a non-original variable")
        self.branch_log.append((self.nodes, j, self.ext.origin[j], decision.point))
        kids = []
        for clo, chi in decision.children(lo, hi):
            kids.append(Node(clo, chi, node.depth + 1, bound))
        return kids

    def _fallback_branch(self, lo, hi, x, status):
        """Unbounded relaxations: split some unbounded nonlinear original variable."""
        if status != "unbounded":
            return None
        cand = sorted({j for s in self.ctx.nonlinear_vars for j in s if hi[j] - lo[j] == INF})
        if not cand:
            return None
        j = cand[0]
        if math.isfinite(lo[j]):
            p = lo[j] + 1.0 + abs(lo[j])
        elif math.isfinite(hi[j]):
            p = hi[j] - 1.0 - abs(hi[j])
        else:
            p = 0.0
        return BranchingDecision(j, p, self.ctx.is_int[j])

    def run(self, start=None) -> SolveResult:
        p = self.params
        if start is not None:
            self.try_point(start, "start")
        lo = list(b.lo for b in self.ext.box)
        hi = list(b.hi for b in self.ext.box)
        for j in range(len(lo)):
            _round_int(self.ctx, lo, hi, j)
        if self.ext.infeasible or any(a > b for a, b in zip(lo, hi)):
            return self._result(INFEASIBLE, [])
        heap: list[tuple[float, int, Node]] = []
        counter = 0
        root = Node(lo, hi, 0, -INF, 0)
        heapq.heappush(heap, (root.bound, counter, root))
        status = None
        while heap:
            if self.nodes >= p.node_limit:
                status = NODE_LIMIT
                break
            if time.perf_counter() - self.t0 > p.time_limit:
                status = TIME_LIMIT
                break
            bound, _, node = heapq.heappop(heap)
            if self.closed(bound):
                continue
            node.number = self.nodes
            self.nodes += 1
            kids = self.process(node)
            if self.nodes == 1 and self.decomposition is not None and p.heuristics:
                self._run_decomposition_heuristics()
            if self.unbounded:
                status = UNBOUNDED
                break
            for kid in kids:
                counter += 1
                heapq.heappush(heap, (kid.bound, counter, kid))
            heap = [h for h in heap if not self.closed(h[0])]
            heapq.heapify(heap)
            self.trace.append((self.nodes, *self._orig_bounds(heap)))
            if heap and self.closed(heap[0][0]):
                heap = []
        if status is None:
            status = OPTIMAL if self.incumbent is not None else INFEASIBLE
        return self._result(status, heap)

    def _run_decomposition_heuristics(self):
        from .decomp import DecompositionShapeError, FOUND, dps, padm

        for name in self.params.decomposition_heuristics:
            fn = {"dps": dps, "padm": padm}.get(name)
            if fn is None:
                continue
            try:
                res = fn(self.inst, self.decomposition)
            except DecompositionShapeError:
                continue
            if res.status == FOUND and res.x is not None:
                self.try_point(res.x, name)

    def _orig_bounds(self, heap) -> tuple[float, float]:
        dual = min([h[0] for h in heap] + [self.primal])
        return self.sign * dual, self.sign * self.primal

    def _result(self, status, heap) -> SolveResult:
        dual_min = min([h[0] for h in heap] + [self.primal]) if status not in (INFEASIBLE,) else INF
        if status == UNBOUNDED:
            dual_min = -INF
        if status in (NODE_LIMIT, TIME_LIMIT) and self.incumbent is not None:
            if gap_closed(self.primal, dual_min, self.params.gap_abs, self.params.gap_rel):
                status = OPTIMAL
        if status == OPTIMAL and not gap_closed(self.primal, dual_min, self.params.gap_abs, self.params.gap_rel):
            status = GAP_LIMIT
        if status == INFEASIBLE:
            primal, dual = self.sign * INF, self.sign * INF
        else:
            primal, dual = self.sign * self.primal, self.sign * dual_min
        return SolveResult(status, self.incumbent, primal, dual, self.nodes, self.branch_log,
                           self.trace, self.lp_iterations, time.perf_counter() - self.t0, self.hits)


def solve(instance: Instance, params: SolveParams | None = None,
          registry: PluginRegistry | None = None, symmetries=None, decomposition=None,
          start: Sequence[float] | None = None) -> SolveResult:
    """Solve ``instance`` to global optimality (within the gap tolerances)."""
    params = params or SolveParams()
    registry = registry or PluginRegistry.default()
    # presolve renumbers columns and rows, which would invalidate given
    # symmetries, decompositions and start points; it is skipped with them
    if params.presolve and symmetries is None and decomposition is None and start is None:
        return _solve_presolved(instance, params, registry)
    return _Solver(instance, params, registry, symmetries, decomposition).run(start)


def _solve_presolved(instance: Instance, params: SolveParams, registry) -> SolveResult:
    from dataclasses import replace

    from .presolve import INFEASIBLE as PRESOLVE_INFEASIBLE, postsolve_primal, run_presolve

    t0 = time.perf_counter()
    reduced, stack, stats = run_presolve(instance)
    if stats.status == PRESOLVE_INFEASIBLE:
        inf = INF if instance.sense == "min" else -INF
        return SolveResult(INFEASIBLE, None, inf, inf, 0, time=time.perf_counter() - t0)
    res = _Solver(reduced, replace(params, presolve=False), registry, None, None).run(None)
    if res.incumbent is not None:
        res.incumbent = postsolve_primal(stack, res.incumbent)
    res.branching_log = [(node, stack.col_map[var] if 0 <= var < len(stack.col_map) else var,
                          origin, point) for node, var, origin, point in res.branching_log]
    res.time = time.perf_counter() - t0
    return res
