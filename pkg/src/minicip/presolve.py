"""Transaction-based presolve with a postsolve stack.

Every round, all presolvers inspect the same working state concurrently (it
is not mutated while they run, so they share it without copying).  They
return *transactions* -- tuples of :class:`Reduction` records.  The engine
then applies them one by one in a fixed order (presolver priority, then the
order in which a presolver emitted them).  A transaction whose touched rows or
columns were modified earlier in the same round is rejected; the presolver
will see the updated state and may propose it again next round.  Because the
application order never depends on which worker finished first, the reduced
instance is deterministic.

Reductions act on the linear part only; nonlinear rows are opaque except that
fixed variables are replaced by constants in their expressions.

Every applied reduction is logged with the data needed to undo it, so primal
values, row duals, reduced costs and basis status of the reduced problem can
be mapped back to the original one.  Duals follow the convention of
:mod:`minicip.lp` for the *minimisation* form: ``c = A^T y + rc``.
"""

from __future__ import annotations

import json
import math
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .lp import AT_LOWER, AT_UPPER, BASIC, LpProblem
from .model import INF, Instance

FIX_VAR = "fix_var"
TIGHTEN_BOUND = "tighten_bound"
SUBSTITUTE_VAR = "substitute_var"
DELETE_ROW = "delete_redundant_row"
SCALE_ROW = "scale_row"
KINDS = (FIX_VAR, TIGHTEN_BOUND, SUBSTITUTE_VAR, DELETE_ROW, SCALE_ROW)

FEAS_TOL = 1e-9
BOUND_GAIN = 1e-7       # relative gain a continuous bound must make to be tightened
INT_ROUND = 1e-6
PIVOT_MIN = 1e-3        # substitution pivot relative to the largest row entry
DROP_TOL = 1e-12        # coefficients cancelling below this are removed

OK = "ok"
INFEASIBLE = "infeasible"


class PresolveInfeasible(Exception):
    def __init__(self, certificate: "Reduction"):
        super().__init__(certificate.payload.get("reason", "infeasible"))
        self.certificate = certificate


@dataclass(frozen=True)
class Reduction:
    """One logged change.  ``rows``/``cols`` are every index it reads or writes."""

    kind: str
    payload: dict
    rows: frozenset = frozenset()
    cols: frozenset = frozenset()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown reduction kind {self.kind!r}")
        for key in ("value", "new", "factor", "alpha"):
            v = self.payload.get(key)
            if v is not None and not math.isfinite(v):
                raise ValueError(f"non-finite {key} in {self.kind}")

    def to_json(self) -> dict:
        p = dict(self.payload)
        for key in ("column", "coeffs"):
            if key in p:  # JSON object keys are strings; keep them ordered
                p[key] = [[int(k), v] for k, v in sorted(p[key].items())]
        return {"kind": self.kind, "payload": p, "rows": sorted(self.rows),
                "cols": sorted(self.cols)}

    @classmethod
    def from_json(cls, d: dict) -> "Reduction":
        p = dict(d["payload"])
        for key in ("column", "coeffs"):
            if key in p:
                p[key] = {int(k): float(v) for k, v in p[key]}
        return cls(d["kind"], p, frozenset(d["rows"]), frozenset(d["cols"]))


@dataclass
class PostsolveStack:
    """Applied reductions in order plus the index maps of the reduced problem."""

    n: int
    m: int
    reductions: list[Reduction] = field(default_factory=list)
    col_map: list[int] = field(default_factory=list)   # reduced column -> original
    row_map: list[int] = field(default_factory=list)   # reduced linear row -> original

    def __len__(self) -> int:
        return len(self.reductions)

    @classmethod
    def identity(cls, n: int, m: int) -> "PostsolveStack":
        return cls(n, m, [], list(range(n)), list(range(m)))

    def to_text(self) -> str:
        """Line-oriented JSON: a header record followed by one record per reduction."""
        head = {"format": "minicip-postsolve", "version": 1, "n": self.n, "m": self.m,
                "col_map": self.col_map, "row_map": self.row_map}
        lines = [json.dumps(head, sort_keys=True)]
        lines += [json.dumps(r.to_json(), sort_keys=True) for r in self.reductions]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PostsolveStack":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = json.loads(lines[0])
        if head.get("format") != "minicip-postsolve":
            raise ValueError("not a postsolve stack file")
        return cls(head["n"], head["m"], [Reduction.from_json(json.loads(ln)) for ln in lines[1:]],
                   head["col_map"], head["row_map"])


@dataclass
class PresolveStats:
    status: str = OK
    rounds: int = 0
    applied: dict = field(default_factory=lambda: {k: 0 for k in KINDS})
    rejected: int = 0
    certificate: Reduction | None = None


# ---------------------------------------------------------------------------
# working state

class _State:
    """Mutable linear data indexed by original row/column numbers."""

    def __init__(self, inst: Instance):
        self.n = inst.n
        self.m = len(inst.linear)
        self.lb = [v.lb for v in inst.variables]
        self.ub = [v.ub for v in inst.variables]
        self.integer = [v.integer for v in inst.variables]
        self.cost = [inst.objective.get(j, 0.0) for j in range(self.n)]
        self.sign = 1.0 if inst.sense == "min" else -1.0
        self.offset = inst.obj_offset
        self.coeffs = [{j: a for j, a in r.coeffs.items() if a != 0.0} for r in inst.linear]
        self.lhs = [r.lhs for r in inst.linear]
        self.rhs = [r.rhs for r in inst.linear]
        self.row_alive = [True] * self.m
        self.col_alive = [True] * self.n
        self.col_rows: list[set[int]] = [set() for _ in range(self.n)]
        for i, row in enumerate(self.coeffs):
            for j in row:
                self.col_rows[j].add(i)
        self.nonlinear = set()
        for r in inst.nonlinear:
            self.nonlinear.update(inst.dag.variables(r.root))
        self.fixed: dict[int, float] = {}

    def min_cost(self, j: int) -> float:
        return self.sign * self.cost[j]

    def activity_bounds(self, i: int):
        """(min, max, #inf in min, #inf in max, per-column contributions)."""
        lo = hi = 0.0
        nlo = nhi = 0
        contrib = {}
        for j, a in self.coeffs[i].items():
            cl, cu = (a * self.lb[j], a * self.ub[j]) if a > 0 else (a * self.ub[j], a * self.lb[j])
            contrib[j] = (cl, cu)
            if math.isinf(cl):
                nlo += 1
            else:
                lo += cl
            if math.isinf(cu):
                nhi += 1
            else:
                hi += cu
        return lo, hi, nlo, nhi, contrib


def _apply(st: _State, red: Reduction) -> None:
    p = red.payload
    if red.kind == FIX_VAR:
        j, v = p["col"], p["value"]
        for i in sorted(st.col_rows[j]):
            a = st.coeffs[i].pop(j)
            st.lhs[i] -= a * v
            st.rhs[i] -= a * v
        st.col_rows[j].clear()
        st.offset += st.cost[j] * v
        st.cost[j] = 0.0
        st.lb[j] = st.ub[j] = v
        st.col_alive[j] = False
        st.fixed[j] = v
    elif red.kind == TIGHTEN_BOUND:
        if p["side"] == "lb":
            st.lb[p["col"]] = p["new"]
        else:
            st.ub[p["col"]] = p["new"]
        if st.lb[p["col"]] > st.ub[p["col"]] + FEAS_TOL:
            raise PresolveInfeasible(red)
    elif red.kind == SUBSTITUTE_VAR:
        k, i = p["col"], p["row"]
        row = p["coeffs"]
        b = p["rhs"]
        ak = row[k]
        for r in sorted(st.col_rows[k] - {i}):
            ark = st.coeffs[r].pop(k)
            for j, aij in row.items():
                if j == k:
                    continue
                v = st.coeffs[r].get(j, 0.0) - ark * aij / ak
                scale = max(abs(st.coeffs[r].get(j, 0.0)), abs(ark * aij / ak))
                if abs(v) <= DROP_TOL * max(1.0, scale):
                    if j in st.coeffs[r]:
                        del st.coeffs[r][j]
                        st.col_rows[j].discard(r)
                else:
                    st.coeffs[r][j] = v
                    st.col_rows[j].add(r)
            st.lhs[r] -= ark * b / ak
            st.rhs[r] -= ark * b / ak
        ck = st.cost[k]
        for j, aij in row.items():
            if j != k:
                st.cost[j] -= ck * aij / ak
        st.offset += ck * b / ak
        st.cost[k] = 0.0
        _drop_row(st, i)
        st.col_rows[k].clear()
        st.col_alive[k] = False
    elif red.kind == DELETE_ROW:
        _drop_row(st, p["row"])
    elif red.kind == SCALE_ROW:
        i, s = p["row"], p["factor"]
        st.coeffs[i] = {j: s * a for j, a in st.coeffs[i].items()}
        lo, hi = s * st.lhs[i], s * st.rhs[i]
        st.lhs[i], st.rhs[i] = (lo, hi) if s > 0 else (hi, lo)


def _drop_row(st: _State, i: int) -> None:
    for j in st.coeffs[i]:
        st.col_rows[j].discard(i)
    st.coeffs[i] = {}
    st.row_alive[i] = False


def _build(st: _State, inst: Instance) -> tuple[Instance, list[int], list[int]]:
    cols = [j for j in range(st.n) if st.col_alive[j]]
    rows = [i for i in range(st.m) if st.row_alive[i]]
    new_index = {j: q for q, j in enumerate(cols)}
    out = Instance(name=inst.name, sense=inst.sense, obj_offset=_clean(st.offset))
    for j in cols:
        v = inst.variables[j]
        out.add_var(v.name, st.lb[j], st.ub[j], v.integer)
    out.objective = {new_index[j]: st.cost[j] for j in cols if st.cost[j] != 0.0}
    for i in rows:
        out.add_linear({new_index[j]: a for j, a in sorted(st.coeffs[i].items())},
                       _clean(st.lhs[i]), _clean(st.rhs[i]), inst.linear[i].name)
    for r in inst.nonlinear:
        replace = {}
        for node in inst.dag.reachable(r.root):
            nd = inst.dag[node]
            if nd.op == "var" and nd.index in st.fixed:
                replace[node] = out.dag.const(st.fixed[nd.index])
        root = inst.dag.copy_into(out.dag, r.root, _VarMap(new_index), replace)
        out.add_nonlinear(out.dag.simplify(root), r.lhs, r.rhs, r.name)
    return out, cols, rows


class _VarMap(dict):
    def __missing__(self, key):  # only reached for variables that are still alive
        raise KeyError(f"variable {key} eliminated but still used in an expression")


def _clean(v: float) -> float:
    """Snap sides that drifted by rounding onto nearby integers."""
    if math.isfinite(v):
        r = round(v)
        if abs(v - r) <= 1e-12 * max(1.0, abs(v)):
            return float(r)
    return v


# ---------------------------------------------------------------------------
# presolvers: read-only functions of the state returning transactions

Transaction = tuple  # tuple[Reduction, ...]


def _touch_row(st: _State, i: int) -> tuple[frozenset, frozenset]:
    return frozenset([i]), frozenset(st.coeffs[i])


def presolve_activity(st: _State) -> list[Transaction]:
    """(a) Bound tightening from row activities; also drops redundant rows."""
    out = []
    for i in range(st.m):
        if not st.row_alive[i]:
            continue
        lo, hi, nlo, nhi, contrib = st.activity_bounds(i)
        lhs, rhs = st.lhs[i], st.rhs[i]
        rows, cols = _touch_row(st, i)
        tol = FEAS_TOL * max(1.0, abs(lhs) if math.isfinite(lhs) else 1.0,
                             abs(rhs) if math.isfinite(rhs) else 1.0)
        if (nlo == 0 and lo > rhs + tol) or (nhi == 0 and hi < lhs - tol):
            raise PresolveInfeasible(Reduction(DELETE_ROW, {
                "row": i, "reason": f"row {i} cannot meet its sides", "coeffs": dict(st.coeffs[i]),
                "lhs": lhs, "rhs": rhs}, rows, cols))
        if (nlo == 0 and lo >= lhs - tol or lhs == -INF) and (nhi == 0 and hi <= rhs + tol or rhs == INF):
            out.append((Reduction(DELETE_ROW, {"row": i, "coeffs": dict(st.coeffs[i]),
                                               "lhs": lhs, "rhs": rhs}, rows, cols),))
            continue
        reds = []
        for j in sorted(st.coeffs[i]):
            a = st.coeffs[i][j]
            cl, cu = contrib[j]
            cand = []  # (side, value, row side used)
            if rhs < INF and (nlo == 0 or (nlo == 1 and math.isinf(cl))):
                rest = lo - (0.0 if math.isinf(cl) else cl)
                bound = (rhs - rest) / a
                cand.append(("ub" if a > 0 else "lb", bound, "rhs"))
            if lhs > -INF and (nhi == 0 or (nhi == 1 and math.isinf(cu))):
                rest = hi - (0.0 if math.isinf(cu) else cu)
                bound = (lhs - rest) / a
                cand.append(("lb" if a > 0 else "ub", bound, "lhs"))
            for side, bound, used in cand:
                red = _tighten(st, i, j, side, bound, used)
                if red is not None:
                    reds.append(red)
        if reds:
            out.append(tuple(reds))
    return out


def _tighten(st: _State, i: int, j: int, side: str, bound: float, used: str) -> Reduction | None:
    if not math.isfinite(bound):
        return None
    if st.integer[j]:
        bound = math.floor(bound + INT_ROUND) if side == "ub" else math.ceil(bound - INT_ROUND)
    old = st.ub[j] if side == "ub" else st.lb[j]
    gain = (old - bound) if side == "ub" else (bound - old)
    if not gain > (0.5 if st.integer[j] else BOUND_GAIN * max(1.0, abs(bound))):
        return None
    rows, cols = _touch_row(st, i)
    return Reduction(TIGHTEN_BOUND, {"col": j, "side": side, "old": old, "new": float(bound),
                                     "row": i, "row_side": used, "coeffs": dict(st.coeffs[i])},
                     rows, cols)


def _fix(st: _State, j: int, v: float, reason: str) -> Transaction:
    rows = frozenset(st.col_rows[j])
    cols = frozenset([j]).union(*(st.coeffs[i] for i in rows)) if rows else frozenset([j])
    return (Reduction(FIX_VAR, {"col": j, "value": float(v), "lb": st.lb[j], "ub": st.ub[j],
                                "cost": st.min_cost(j), "reason": reason,
                                "column": {i: st.coeffs[i][j] for i in sorted(rows)}},
                      rows, cols),)


def presolve_fixed(st: _State) -> list[Transaction]:
    """(b) Remove columns whose bounds coincide."""
    return [_fix(st, j, st.lb[j], "fixed") for j in range(st.n)
            if st.col_alive[j] and st.lb[j] == st.ub[j]]


def _implied_free(st: _State, i: int, k: int) -> bool:
    """Do the row and the other columns' bounds keep x_k inside its own bounds?"""
    ak = st.coeffs[i][k]
    b = st.lhs[i]
    lo = hi = b / ak
    for j, a in st.coeffs[i].items():
        if j == k:
            continue
        t = -a / ak
        vl, vu = (t * st.lb[j], t * st.ub[j]) if t > 0 else (t * st.ub[j], t * st.lb[j])
        lo += vl
        hi += vu
    tol = 1e-9 * max(1.0, abs(lo) if math.isfinite(lo) else 1.0, abs(hi) if math.isfinite(hi) else 1.0)
    return lo >= st.lb[k] - tol and hi <= st.ub[k] + tol


def _substitutable(st: _State, i: int, k: int) -> bool:
    row = st.coeffs[i]
    return (not st.integer[k] and k not in st.nonlinear
            and abs(row[k]) >= PIVOT_MIN * max(abs(a) for a in row.values())
            and _implied_free(st, i, k))


def _substitute(st: _State, i: int, k: int) -> Transaction:
    rows = frozenset(st.col_rows[k] | {i})
    cols = frozenset().union(*(st.coeffs[r] for r in rows))
    return (Reduction(SUBSTITUTE_VAR, {"col": k, "row": i, "coeffs": dict(st.coeffs[i]),
                                       "rhs": st.lhs[i], "cost": st.min_cost(k),
                                       "lb": st.lb[k], "ub": st.ub[k],
                                       "column": {r: st.coeffs[r][k] for r in sorted(st.col_rows[k])}},
                      rows, cols),)


def _is_equation(st: _State, i: int) -> bool:
    return st.row_alive[i] and st.lhs[i] == st.rhs[i] and math.isfinite(st.lhs[i])


def presolve_singleton_columns(st: _State) -> list[Transaction]:
    """(c) An implied-free continuous column in a single equation is solved for."""
    out = []
    for k in range(st.n):
        if st.col_alive[k] and len(st.col_rows[k]) == 1:
            i = next(iter(st.col_rows[k]))
            # two-term equations are left to the doubleton presolver
            if _is_equation(st, i) and len(st.coeffs[i]) > 2 and _substitutable(st, i, k):
                out.append(_substitute(st, i, k))
    return out


def presolve_doubleton_equations(st: _State) -> list[Transaction]:
    """(d) Eliminate one column of a two-term equation."""
    out = []
    for i in range(st.m):
        if not _is_equation(st, i) or len(st.coeffs[i]) != 2:
            continue
        # prefer eliminating a column that occurs nowhere else (no fill-in)
        for k in sorted(st.coeffs[i], key=lambda j: (len(st.col_rows[j]), -j)):
            if _substitutable(st, i, k):
                out.append(_substitute(st, i, k))
                break
    return out


def presolve_dual_fixing(st: _State) -> list[Transaction]:
    """(e) Fix a column at the bound its cost and every row agree on."""
    out = []
    for j in range(st.n):
        if not st.col_alive[j] or j in st.nonlinear or st.lb[j] == st.ub[j]:
            continue
        c = st.min_cost(j)
        down = all((st.lhs[i] == -INF) if st.coeffs[i][j] > 0 else (st.rhs[i] == INF)
                   for i in st.col_rows[j])
        up = all((st.rhs[i] == INF) if st.coeffs[i][j] > 0 else (st.lhs[i] == -INF)
                 for i in st.col_rows[j])
        if c >= 0 and down and math.isfinite(st.lb[j]):
            out.append(_fix(st, j, st.lb[j], "dual"))
        elif c <= 0 and up and math.isfinite(st.ub[j]):
            out.append(_fix(st, j, st.ub[j], "dual"))
    return out


PRESOLVERS: tuple[tuple[str, Callable[[_State], list]], ...] = (
    ("fixed", presolve_fixed),
    ("activity", presolve_activity),
    ("singleton_columns", presolve_singleton_columns),
    ("doubleton_equations", presolve_doubleton_equations),
    ("dual_fixing", presolve_dual_fixing),
)


# ---------------------------------------------------------------------------
# engine

def _evaluate(st: _State, workers: int, schedule_seed: int | None):
    """Run every presolver on the current state; results keyed by priority."""
    order = list(range(len(PRESOLVERS)))
    rng = random.Random(schedule_seed) if schedule_seed is not None else None
    if rng is not None:
        rng.shuffle(order)
    delays = {p: (rng.random() * 1e-3 if rng else 0.0) for p in order}

    def job(p):
        if delays[p]:
            time.sleep(delays[p])
        try:
            return p, PRESOLVERS[p][1](st), None
        except PresolveInfeasible as exc:
            return p, [], exc

    if workers <= 1:
        results = [job(p) for p in order]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, order))
    by_priority = sorted(results, key=lambda t: t[0])
    for _, _, exc in by_priority:
        if exc is not None:
            raise exc
    return [txs for _, txs, _ in by_priority]


def run_presolve(instance: Instance, rounds: int = 25, workers: int = 4,
                 schedule_seed: int | None = None):
    """Presolve ``instance``; returns ``(reduced, PostsolveStack, PresolveStats)``.

    ``schedule_seed`` randomises the order and timing in which presolver
    workers start (used to test that the result does not depend on it).
    On infeasibility the original instance is returned unchanged, with
    ``stats.status == INFEASIBLE`` and the offending reduction as certificate.
    """
    st = _State(instance)
    stats = PresolveStats()
    log: list[Reduction] = []
    try:
        for rnd in range(rounds):
            stats.rounds = rnd + 1
            proposals = _evaluate(st, workers, None if schedule_seed is None
                                  else schedule_seed * 1000 + rnd)
            modified_rows: set[int] = set()
            modified_cols: set[int] = set()
            applied = 0
            for txs in proposals:
                for tx in txs:
                    rows = frozenset().union(*(r.rows for r in tx))
                    cols = frozenset().union(*(r.cols for r in tx))
                    if rows & modified_rows or cols & modified_cols:
                        stats.rejected += 1
                        continue
                    for red in tx:
                        _apply(st, red)
                        log.append(red)
                        stats.applied[red.kind] += 1
                    modified_rows |= rows
                    modified_cols |= cols
                    applied += 1
            if not applied:
                break
    except PresolveInfeasible as exc:
        stats.status = INFEASIBLE
        stats.certificate = exc.certificate
        return instance, PostsolveStack.identity(instance.n, len(instance.linear)), stats
    reduced, cols, rows = _build(st, instance)
    return reduced, PostsolveStack(st.n, st.m, log, cols, rows), stats


def replay(instance: Instance, stack: PostsolveStack) -> Instance:
    """Apply the logged reductions forward to ``instance``."""
    st = _State(instance)
    for red in stack.reductions:
        _apply(st, red)
    return _build(st, instance)[0]


# ---------------------------------------------------------------------------
# postsolve

def postsolve_primal(stack: PostsolveStack, reduced_x: Sequence[float]) -> list[float]:
    if len(reduced_x) != len(stack.col_map):
        raise ValueError(f"expected {len(stack.col_map)} reduced values, got {len(reduced_x)}")
    x = [math.nan] * stack.n
    for q, j in enumerate(stack.col_map):
        x[j] = float(reduced_x[q])
    for red in reversed(stack.reductions):
        p = red.payload
        if red.kind == FIX_VAR:
            x[p["col"]] = p["value"]
        elif red.kind == SUBSTITUTE_VAR:
            k, row = p["col"], p["coeffs"]
            rest = sum(a * x[j] for j, a in row.items() if j != k)
            v = (p["rhs"] - rest) / row[k]
            clipped = min(max(v, p["lb"]), p["ub"])
            # implied-free columns only leave their bounds by rounding error
            x[k] = clipped if abs(v - clipped) <= 1e-9 * max(1.0, abs(v)) else v
    return x


def postsolve_dual(stack: PostsolveStack, reduced_dual):
    """Map ``(y, rc, (col_basis, row_basis))`` of the reduced LP to the original.

    The reduced LP is the minimisation form of the reduced instance.
    """
    y_red, rc_red, (cb_red, rb_red) = reduced_dual
    if len(y_red) != len(stack.row_map) or len(rc_red) != len(stack.col_map):
        raise ValueError("dual vectors do not match the reduced problem")
    y = [0.0] * stack.m
    rc = [0.0] * stack.n
    cb = [BASIC] * stack.n
    rb = [BASIC] * stack.m
    for q, i in enumerate(stack.row_map):
        y[i] = float(y_red[q])
        rb[i] = rb_red[q]
    for q, j in enumerate(stack.col_map):
        rc[j] = float(rc_red[q])
        cb[j] = cb_red[q]
    for red in reversed(stack.reductions):
        p = red.payload
        if red.kind == DELETE_ROW:
            y[p["row"]] = 0.0
            rb[p["row"]] = BASIC
        elif red.kind == FIX_VAR:
            j = p["col"]
            rc[j] = p["cost"] - sum(y[i] * a for i, a in p["column"].items())
            cb[j] = AT_LOWER if rc[j] >= 0 else AT_UPPER
        elif red.kind == SUBSTITUTE_VAR:
            k, i = p["col"], p["row"]
            others = sum(y[r] * a for r, a in p["column"].items() if r != i)
            y[i] = (p["cost"] - others) / p["coeffs"][k]
            rc[k] = 0.0
            cb[k] = BASIC
            rb[i] = AT_LOWER
        elif red.kind == TIGHTEN_BOUND:
            _undo_tighten(p, y, rc, cb, rb)
        elif red.kind == SCALE_ROW:
            i, s = p["row"], p["factor"]
            y[i] *= s
            if s < 0 and rb[i] in (AT_LOWER, AT_UPPER):
                rb[i] = AT_UPPER if rb[i] == AT_LOWER else AT_LOWER
        else:  # pragma: no cover - guarded by Reduction.__post_init__
            raise ValueError(f"unsupported reduction kind {red.kind!r}")
    return y, rc, (cb, rb)


def _undo_tighten(p: dict, y, rc, cb, rb) -> None:
    j, i, a = p["col"], p["row"], p["coeffs"][p["col"]]
    at_side = (rc[j] < 0) if p["side"] == "ub" else (rc[j] > 0)
    if at_side:
        # the bound was implied by row i: it carries the multiplier instead
        delta = rc[j] / a
        y[i] += delta
        for k, ak in p["coeffs"].items():
            rc[k] -= ak * delta
            if k != j and cb[k] == BASIC and rc[k] != 0.0:
                # the row is tight, so every other column sits at its extreme bound
                cb[k] = AT_LOWER if rc[k] > 0 else AT_UPPER
        rc[j] = 0.0
        rb[i] = AT_UPPER if p["row_side"] == "rhs" else AT_LOWER
    if cb[j] == (AT_UPPER if p["side"] == "ub" else AT_LOWER) and rc[j] == 0.0:
        cb[j] = BASIC


# ---------------------------------------------------------------------------
# helpers

def instance_lp(instance: Instance) -> LpProblem:
    """Dense minimisation LP of a linear instance (integrality ignored)."""
    import numpy as np

    n, m = instance.n, len(instance.linear)
    A = np.zeros((m, n))
    for i, row in enumerate(instance.linear):
        for j, a in row.coeffs.items():
            A[i, j] = a
    return LpProblem(np.array(instance.min_costs(), dtype=float), A,
                     np.array([r.lhs for r in instance.linear], dtype=float),
                     np.array([r.rhs for r in instance.linear], dtype=float),
                     np.array([v.lb for v in instance.variables], dtype=float),
                     np.array([v.ub for v in instance.variables], dtype=float))
