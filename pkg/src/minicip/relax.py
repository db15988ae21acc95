"""Extended formulations, structure detection, and linear estimators.

A nonlinear row ``lhs <= g(x) <= rhs`` becomes ``h(x, w) = w_row`` with the
slack ``w_row`` bounded by the sides.  Subexpressions are cut out into
auxiliary variables only where the handler of their parent cannot estimate
them directly:

* sums estimate term by term, so any estimable term may stay inline;
* univariate functions (exp, log, abs, power) need an affine argument;
* products need plain variables as factors.

The original instance is never modified; it stays the reference for
feasibility checks.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import interval as iv
from .expr import (DomainError, ExprDag, evaluate, forward_intervals, gradient,
                   interval_eval, linear_coefficients)
from .interval import Interval
from .model import INF, Instance

ORIGINAL, SLACK, AUXILIARY = "original", "slack", "auxiliary"
KINDS = ("quadratic", "convex", "concave", "bilinear", "linear", "default")
PARALLEL_MAX = 0.9


@dataclass(frozen=True)
class StructureTag:
    kind: str
    evidence: tuple[int, ...] = ()
    curvature: str | None = None  # convex / concave / linear / None


@dataclass
class Cut:
    """``lhs <= sum(coeffs[j] * x[j]) <= rhs``."""

    coeffs: dict[int, float]
    lhs: float = -INF
    rhs: float = INF
    efficacy: float = 0.0
    origin: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.lhs) or math.isfinite(self.rhs)):
            raise ValueError("cut needs a finite side")

    @property
    def norm(self) -> float:
        return math.sqrt(sum(a * a for a in self.coeffs.values()))

    def activity(self, x: Sequence[float]) -> float:
        return sum(a * x[j] for j, a in self.coeffs.items())

    def violation(self, x: Sequence[float]) -> float:
        v = self.activity(x)
        return max(self.lhs - v, v - self.rhs, 0.0)

    def score(self, x: Sequence[float]) -> float:
        nrm = self.norm
        return self.violation(x) / nrm if nrm > 0 else 0.0


@dataclass
class Estimator:
    """Affine function ``constant + sum(coeffs[j] * x[j])``."""

    coeffs: dict[int, float]
    constant: float = 0.0

    def __call__(self, x: Sequence[float]) -> float:
        return self.constant + sum(a * x[j] for j, a in self.coeffs.items())

    def add(self, other: "Estimator", scale: float = 1.0) -> None:
        for j, a in other.coeffs.items():
            self.coeffs[j] = self.coeffs.get(j, 0.0) + scale * a
        self.constant += scale * other.constant

    def as_cut(self, w: int, over: bool) -> Cut:
        """Cut for ``w = f(x)``: est(x) - w <= 0 (under) or >= 0 (over)."""
        coeffs = {j: a for j, a in self.coeffs.items() if a != 0.0}
        coeffs[w] = coeffs.get(w, 0.0) - 1.0
        if over:
            return Cut(coeffs, lhs=-self.constant, origin="over")
        return Cut(coeffs, rhs=-self.constant, origin="under")


# ---------------------------------------------------------------------------
# structure detection

def _split_product(dag: ExprDag, n: int) -> tuple[float, list[int]]:
    """Constant factor and non-constant factors of a product node."""
    coef = 1.0
    rest = []
    for c in dag[n].children:
        if dag[c].op == "const":
            coef *= dag[c].value
        else:
            rest.append(c)
    return coef, rest


def _is_quadratic_term(dag: ExprDag, n: int) -> bool:
    node = dag[n]
    if node.op == "product":
        return len(_split_product(dag, n)[1]) == 2
    return node.op == "power" and node.value == 2.0


def _affine_nonneg(dag: ExprDag, n: int, box) -> bool:
    if box is None:
        return False
    return interval_eval(dag, n, box).lo >= 0.0


def curvature(dag: ExprDag, n: int, box=None) -> str | None:
    """Syntactic curvature: 'linear', 'convex', 'concave' or None."""
    node = dag[n]
    op = node.op
    if op in ("var", "const"):
        return "linear"
    if op == "sum":
        if quadratic_form(dag, n) is not None:
            return _quadratic_curvature(dag, n, box)
        return _combine([(a, curvature(dag, ch, box)) for ch, a in zip(node.children, node.coeffs)])
    if op == "product":
        coef, rest = _split_product(dag, n)
        if len(rest) == 1:
            return _combine([(coef, curvature(dag, rest[0], box))])
        return None
    inner = curvature(dag, node.children[0], box)
    if op == "exp":
        return "convex" if inner in ("linear", "convex") else None
    if op == "log":
        return "concave" if inner in ("linear", "concave") else None
    if op == "abs":
        return "convex" if inner == "linear" else None
    p = node.value
    if inner != "linear":
        if p == 2.0 and inner == "convex" and _affine_nonneg(dag, node.children[0], box):
            return "convex"
        return None
    if float(p).is_integer() and int(p) % 2 == 0 and p > 0:
        return "convex"
    if p >= 1.0 and _affine_nonneg(dag, node.children[0], box):
        return "convex"
    if 0.0 < p < 1.0:
        return "concave"
    return None


def _combine(parts) -> str | None:
    convex = concave = True
    for a, c in parts:
        if c is None:
            return None
        if c == "linear":
            continue
        if (c == "convex") == (a > 0):
            concave = False
        else:
            convex = False
    if convex and concave:
        return "linear"
    if convex:
        return "convex"
    if concave:
        return "concave"
    return None


def quadratic_form(dag: ExprDag, n: int):
    """Split a quadratic sum into (args, Q, rest) or return None.

    ``args`` are the node ids acting as quadratic arguments, ``Q`` the
    symmetric coefficient matrix over them, and ``rest`` the (coef, child)
    pairs that are not quadratic terms.
    """
    node = dag[n]
    if node.op != "sum" or not any(_is_quadratic_term(dag, ch) for ch in node.children):
        return None
    args: list[int] = []
    pos: dict[int, int] = {}

    def slot(c: int) -> int:
        if c not in pos:
            pos[c] = len(args)
            args.append(c)
        return pos[c]

    entries = []
    rest = []
    for ch, a in zip(node.children, node.coeffs):
        cn = dag[ch]
        if cn.op == "power" and cn.value == 2.0:
            i = slot(cn.children[0])
            entries.append((i, i, a))
        elif _is_quadratic_term(dag, ch):
            coef, (u, v) = _split_product(dag, ch)
            i, j = slot(u), slot(v)
            entries.append((i, j, a * coef))
        else:
            rest.append((a, ch))
    Q = np.zeros((len(args), len(args)))
    for i, j, a in entries:
        if i == j:
            Q[i, i] += a
        else:
            Q[i, j] += a / 2.0
            Q[j, i] += a / 2.0
    return args, Q, rest


def is_psd(Q: np.ndarray, tol: float = 1e-10) -> bool:
    """Symmetric Gaussian elimination with diagonal pivoting."""
    A = np.array(Q, dtype=float)
    n = A.shape[0]
    active = list(range(n))
    while active:
        k = max(active, key=lambda i: A[i, i])
        piv = A[k, k]
        if piv < -tol:
            return False
        active.remove(k)
        if piv <= tol:
            # zero pivot: its whole row must vanish
            if any(abs(A[k, j]) > tol for j in active):
                return False
            continue
        for i in active:
            f = A[i, k] / piv
            for j in active:
                A[i, j] -= f * A[k, j]
    return True


def _quadratic_curvature(dag: ExprDag, n: int, box) -> str | None:
    args, Q, rest = quadratic_form(dag, n)
    arg_curv = [curvature(dag, a, box) for a in args]
    if any(c != "linear" for c in arg_curv):
        return None
    if is_psd(Q):
        quad = "convex"
    elif is_psd(-Q):
        quad = "concave"
    else:
        return None
    return _combine([(1.0, quad)] + [(a, curvature(dag, ch, box)) for a, ch in rest])


def detect_structure(dag: ExprDag, node: int, box=None) -> StructureTag:
    """Tag ``node`` with the first matching handler in priority order."""
    nd = dag[node]
    if linear_coefficients(dag, node) is not None:
        return StructureTag("linear", (node,), "linear")
    curv = curvature(dag, node, box)
    qf = quadratic_form(dag, node)
    if qf is not None:
        return StructureTag("quadratic", tuple(qf[0]), curv)
    if curv == "convex":
        return StructureTag("convex", (node,), curv)
    if curv == "concave":
        return StructureTag("concave", (node,), curv)
    if nd.op == "product":
        _, nonconst = _split_product(dag, node)
        if len(nonconst) == 2:
            return StructureTag("bilinear", tuple(nonconst), None)
    return StructureTag("default", (node,), None)


# ---------------------------------------------------------------------------
# univariate pieces

def _f(op: str, p: float, t: float) -> float:
    if op == "exp":
        return math.exp(t) if t < 700 else INF
    if op == "log":
        return math.log(t) if t > 0 else -INF
    if op == "abs":
        return abs(t)
    if t == 0.0 and p < 0:
        return INF
    return math.pow(t, p)


def _df(op: str, p: float, t: float) -> float:
    if op == "exp":
        return math.exp(t)
    if op == "log":
        return 1.0 / t
    if op == "abs":
        return 1.0 if t > 0 else -1.0 if t < 0 else 0.0
    return p * math.pow(t, p - 1.0)


def _univariate_curvature(op: str, p: float, a: float, b: float) -> str | None:
    if op == "exp" or op == "abs":
        return "convex"
    if op == "log":
        return "concave"
    if float(p).is_integer():
        k = int(p)
        if k > 0 and k % 2 == 0:
            return "convex"
        if k > 0:
            return "convex" if a >= 0 else "concave" if b <= 0 else None
        if a > 0:
            return "convex"
        if b < 0:
            return "convex" if k % 2 == 0 else "concave"
        return None
    if p > 1:
        return "convex"
    if 0 < p < 1:
        return "concave"
    return "convex" if a > 0 else None


def _domain(op: str, p: float, a: float, b: float) -> tuple[float, float]:
    """Clip [a, b] to where the function is finite and differentiable."""
    if op == "log" or (op == "power" and not float(p).is_integer()):
        lo = max(a, 0.0)
        if op == "log" or p < 1:
            lo = max(lo, 1e-300)
        return lo, b
    return a, b


def _estimate_univariate(op: str, p: float, arg: Estimator, a: float, b: float,
                         t: float, over: bool) -> Estimator | None:
    a, b = _domain(op, p, a, b)
    if a > b:
        return None
    curv = _univariate_curvature(op, p, a, b)
    tangent = (curv == "convex" and not over) or (curv == "concave" and over)
    if curv is not None and a == b and math.isfinite(a):
        val = _f(op, p, a)
        return Estimator({}, val) if math.isfinite(val) else None
    if curv is not None and tangent:
        t = min(max(t, a), b)
        if t == 0.0 and op == "power" and p < 1:
            t = min(b, a + 1e-6 * (1 + abs(b - a))) if math.isfinite(b) else 1e-6
        try:
            ft, dft = _f(op, p, t), _df(op, p, t)
        except (OverflowError, ValueError, ZeroDivisionError):
            return None
        if not (math.isfinite(ft) and math.isfinite(dft)):
            return None
        est = Estimator({}, ft - dft * t)
        est.add(arg, dft)
        return est
    if curv is not None and math.isfinite(a) and math.isfinite(b):
        fa, fb = _f(op, p, a), _f(op, p, b)
        if not (math.isfinite(fa) and math.isfinite(fb)):
            return None
        slope = (fb - fa) / (b - a)
        est = Estimator({}, fa - slope * a)
        est.add(arg, slope)
        return est
    # no curvature information: constant bound from interval arithmetic
    img = _univariate_interval(op, p, Interval(a, b))
    bound = img.hi if over else img.lo
    if img.is_empty or not math.isfinite(bound):
        return None
    return Estimator({}, bound)


def _univariate_interval(op: str, p: float, x: Interval) -> Interval:
    if op == "exp":
        return iv.exp(x)
    if op == "log":
        return iv.log(x)
    if op == "abs":
        return iv.absval(x)
    return iv.power(x, p)


# ---------------------------------------------------------------------------
# estimation over an (extended) DAG

def estimate(dag: ExprDag, node: int, box: Sequence[Interval], ref: Sequence[float],
             over: bool = False, tag: StructureTag | None = None) -> Estimator | None:
    """Linear under- (or over-) estimator of ``node`` valid on ``box``.

    Returns None when no finite estimator exists on this box (e.g. a
    bilinear term with an unbounded factor).
    """
    ivs = forward_intervals(dag, node, box)
    return _estimate(dag, node, box, ref, over, ivs, tag)


def underestimate(dag, node, tag, box, ref_point):
    return estimate(dag, node, box, ref_point, False, tag)


def overestimate(dag, node, tag, box, ref_point):
    return estimate(dag, node, box, ref_point, True, tag)


def _tangent_plane(dag: ExprDag, node: int, ref: Sequence[float]) -> Estimator | None:
    try:
        f0 = evaluate(dag, node, ref)
        g = gradient(dag, node, ref)
    except DomainError:
        return None
    coeffs = {j: gj for j, gj in enumerate(g) if gj != 0.0}
    const = f0 - sum(gj * ref[j] for j, gj in coeffs.items())
    return Estimator(coeffs, const)


def _estimate(dag, n, box, ref, over, ivs, tag=None) -> Estimator | None:
    node = dag[n]
    op = node.op
    if op == "var":
        return Estimator({node.index: 1.0}, 0.0)
    if op == "const":
        return Estimator({}, node.value)
    lin = linear_coefficients(dag, n)
    if lin is not None:
        return Estimator(dict(lin[0]), lin[1])
    if op == "sum":
        if quadratic_form(dag, n) is not None:
            curv = tag.curvature if tag is not None else _quadratic_curvature(dag, n, None)
            if (curv == "convex" and not over) or (curv == "concave" and over):
                tp = _tangent_plane(dag, n, _clip(ref, box))
                if tp is not None:
                    return tp
        est = Estimator({}, node.value)
        for ch, a in zip(node.children, node.coeffs):
            sub = _estimate(dag, ch, box, ref, over if a > 0 else not over, ivs)
            if sub is None:
                return None
            est.add(sub, a)
        return est
    if op == "product":
        coef, rest = _split_product(dag, n)
        if len(rest) == 1:
            sub = _estimate(dag, rest[0], box, ref, over if coef > 0 else not over, ivs)
            if sub is None:
                return None
            est = Estimator({}, 0.0)
            est.add(sub, coef)
            return est
        if len(rest) != 2:
            return None
        u, v = rest
        U = linear_coefficients(dag, u)
        V = linear_coefficients(dag, v)
        if U is None or V is None:
            return None
        if coef < 0:
            over = not over
        est = _mccormick(Estimator(dict(U[0]), U[1]), ivs[u], Estimator(dict(V[0]), V[1]), ivs[v],
                         _clip(ref, box), over)
        if est is None or coef == 1.0:
            return est
        out = Estimator({}, 0.0)
        out.add(est, coef)
        return out
    child = node.children[0]
    A = linear_coefficients(dag, child)
    if A is None:
        return None
    arg = Estimator(dict(A[0]), A[1])
    cur = ivs[child]
    if cur.is_empty:
        return None
    return _estimate_univariate(op, node.value, arg, cur.lo, cur.hi, arg(_clip(ref, box)), over)


def _clip(ref, box):
    return [min(max(r, b.lo), b.hi) for r, b in zip(ref, box)]


def _mccormick(u: Estimator, U: Interval, v: Estimator, V: Interval, ref, over) -> Estimator | None:
    if not all(math.isfinite(t) for t in (U.lo, U.hi, V.lo, V.hi)):
        return None
    uref, vref = u(ref), v(ref)
    if over:
        planes = [(U.hi, V.lo), (U.lo, V.hi)]
    else:
        planes = [(U.lo, V.lo), (U.hi, V.hi)]
    best = None
    best_val = None
    for a, b in planes:
        # product >= (or <=) a*v + b*u - a*b
        val = a * vref + b * uref - a * b
        if best is None or (val < best_val if over else val > best_val):
            best, best_val = (a, b), val
    a, b = best
    est = Estimator({}, -a * b)
    est.add(v, a)
    est.add(u, b)
    return est


# ---------------------------------------------------------------------------
# extended formulation

@dataclass
class ExtRow:
    node: int          # h_i in the extended DAG
    var: int           # w_i
    kind: str          # SLACK or AUXILIARY
    source: int        # nonlinear row index (slack) or base node id (aux, -1 if synthetic)


@dataclass
class ExtendedForm:
    base: Instance
    dag: ExprDag
    n_orig: int
    names: list[str]
    box: list[Interval]
    origin: list[str]
    rows: list[ExtRow]
    tags: list[StructureTag] = field(default_factory=list)
    infeasible: bool = False

    @property
    def n(self) -> int:
        return len(self.origin)

    @property
    def aux_vars(self) -> list[tuple[int, int, Interval]]:
        return [(r.var, r.source, self.box[r.var]) for r in self.rows if r.kind == AUXILIARY]

    def slack_rows(self) -> list[ExtRow]:
        return [r for r in self.rows if r.kind == SLACK]

    def lift(self, x: Sequence[float]) -> list[float]:
        """Extend an original point with forward-evaluated slack/aux values."""
        full = list(x) + [0.0] * (self.n - self.n_orig)
        for row in reversed(self.rows):
            full[row.var] = evaluate(self.dag, row.node, full)
        return full

    def defining_vars(self, var: int) -> set[int]:
        """Original variables an auxiliary/slack variable depends on."""
        by_var = {r.var: r for r in self.rows}
        out: set[int] = set()
        stack = [var]
        seen = set()
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            if v < self.n_orig:
                out.add(v)
            elif v in by_var:
                stack.extend(self.dag.variables(by_var[v].node))
        return out


def build_extended_formulation(instance: Instance) -> ExtendedForm:
    # work on a simplified private copy so constants such as log(1000) fold
    base = copy.deepcopy(instance.dag)
    roots = [base.simplify(row.root) for row in instance.nonlinear]
    n0 = instance.n
    m = len(instance.nonlinear)
    box0 = [Interval(v.lb, v.ub) for v in instance.variables]

    # pass 1: temporary variable ids (aux ids negative) and post-order of aux completion
    tmp = ExprDag()
    aux_of: dict[object, int] = {}      # key -> temp aux id
    aux_def: dict[int, int] = {}        # temp aux id -> tmp node
    aux_src: dict[int, int] = {}
    done_order: list[int] = []
    counter = [0]

    def new_aux(key, build: Callable[[], int], source: int) -> int:
        if key in aux_of:
            return aux_of[key]
        counter[0] += 1
        tid = -counter[0]
        aux_of[key] = tid
        aux_def[tid] = build()
        aux_src[tid] = source
        done_order.append(tid)
        return tid

    memo: dict[tuple[int, str], int] = {}

    def proc(n: int, ctx: str) -> int:
        key = (n, ctx)
        if key in memo:
            return memo[key]
        node = base[n]
        op = node.op
        if op == "var":
            out = tmp.var(node.index)
        elif op == "const":
            out = tmp.const(node.value)
        elif ctx == "var":
            out = tmp.var(_tmp_index(new_aux(n, lambda: proc(n, "top"), n)))
        elif ctx == "affine":
            if op == "sum":
                out = tmp.sum([proc(c, "affine") for c in node.children], node.coeffs, node.value)
            else:
                out = tmp.var(_tmp_index(new_aux(n, lambda: proc(n, "top"), n)))
        elif op == "sum":
            out = tmp.sum([proc(c, "top") for c in node.children], node.coeffs, node.value)
        elif op == "product":
            kids = list(node.children)
            consts = [c for c in kids if base[c].op == "const"]
            kids = [c for c in kids if base[c].op != "const"]
            coef = math.prod(base[c].value for c in consts)
            first = proc(kids[0], "var")
            if len(kids) == 2:
                second = proc(kids[1], "var")
            else:
                rest = tuple(kids[1:])
                second = tmp.var(_tmp_index(new_aux(("product", rest),
                                                    lambda: _prod_rest(rest), -1)))
            out = tmp.product([first, second])
            if coef != 1.0:
                out = tmp.sum([out], [coef])
        else:
            child = proc(node.children[0], "affine")
            if op == "power":
                out = tmp.power(child, node.value)
            else:
                out = getattr(tmp, op)(child)
        memo[key] = out
        return out

    def _prod_rest(rest: tuple[int, ...]) -> int:
        if len(rest) == 2:
            return tmp.product([proc(rest[0], "var"), proc(rest[1], "var")])
        inner = tuple(rest[1:])
        return tmp.product([proc(rest[0], "var"),
                            tmp.var(_tmp_index(new_aux(("product", inner), lambda: _prod_rest(inner), -1)))])

    slack_nodes = [proc(r, "top") for r in roots]

    # pass 2: final numbering. aux rows in reverse completion order
    aux_order = list(reversed(done_order))
    varmap = {j: j for j in range(n0)}
    for k in range(m):
        varmap[n0 + k] = n0 + k
    for pos, tid in enumerate(aux_order):
        varmap[_tmp_index(tid)] = n0 + m + pos
    dag = ExprDag()
    rows: list[ExtRow] = []
    for k, tnode in enumerate(slack_nodes):
        rows.append(ExtRow(tmp.copy_into(dag, tnode, varmap), n0 + k, SLACK, k))
    for pos, tid in enumerate(aux_order):
        rows.append(ExtRow(tmp.copy_into(dag, aux_def[tid], varmap), n0 + m + pos, AUXILIARY,
                           aux_src[tid]))

    names = instance.names + [f"w{k + 1}" for k in range(m + len(aux_order))]
    origin = [ORIGINAL] * n0 + [SLACK] * m + [AUXILIARY] * len(aux_order)
    box = box0 + [iv.ENTIRE] * (m + len(aux_order))
    infeasible = False
    # bounds from the bottom up: deepest rows last in order, so iterate reversed
    for row in reversed(rows):
        img = interval_eval(dag, row.node, box)
        if row.kind == SLACK:
            src = instance.nonlinear[row.source]
            img = img.intersect(Interval(src.lhs, src.rhs))
        if img.is_empty:
            infeasible = True
        box[row.var] = img
    ext = ExtendedForm(instance, dag, n0, names, box, origin, rows, infeasible=infeasible)
    ext.tags = [detect_structure(dag, r.node, box) for r in rows]
    return ext


def _tmp_index(tid: int) -> int:
    # temporary aux ids live far above any real variable index
    return 10**9 - tid


# ---------------------------------------------------------------------------
# cut selection

def select_cuts(candidates: Sequence[Cut], lp_solution: Sequence[float] | None, max_cuts: int,
                parallel_max: float = PARALLEL_MAX) -> list[int]:
    """Greedy efficacy order with a parallelism filter; returns candidate indices."""
    if not candidates or max_cuts <= 0:
        return []
    scores = []
    for k, cut in enumerate(candidates):
        if lp_solution is not None:
            cut.efficacy = cut.score(lp_solution)
        scores.append((-cut.efficacy, k))
    scores.sort()
    chosen: list[int] = []
    for _, k in scores:
        cut = candidates[k]
        if cut.norm == 0.0:
            continue
        if all(_cosine(cut, candidates[s]) <= parallel_max for s in chosen):
            chosen.append(k)
            if len(chosen) == max_cuts:
                break
    return chosen


def _cosine(a: Cut, b: Cut) -> float:
    dot = sum(v * b.coeffs.get(j, 0.0) for j, v in a.coeffs.items())
    return dot / (a.norm * b.norm)
