"""Block decompositions and the two decomposition-based primal heuristics.

* DPS (dynamic partition search) splits the right-hand side of every
  linking row among the blocks and repairs the split until each block can
  meet its share;
* PADM (penalty alternating direction method) copies linking variables
  into every block that uses them and penalises disagreement.

Block subproblems are solved with the branch-and-bound solver in
:mod:`minicip.sbb`; the solver is imported lazily because the solver in turn
calls these heuristics at the root node.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .model import FEASTOL, INF, Instance

LINKING = -1
FOUND = "found"
NOT_FOUND = "not_found"
DPS_SUCCESS_TOL = 1e-6
AGREE_TOL = 1e-6


class DecompositionShapeError(ValueError):
    pass


@dataclass
class Decomposition:
    k: int
    row_label: list[int]            # per linear row
    col_label: list[int]            # per variable
    nl_label: list[int] = field(default_factory=list)  # per nonlinear row

    def linking_rows(self) -> list[int]:
        return [i for i, q in enumerate(self.row_label) if q == LINKING]

    def linking_cols(self) -> list[int]:
        return [j for j, q in enumerate(self.col_label) if q == LINKING]

    def block_cols(self, q: int) -> list[int]:
        return [j for j, b in enumerate(self.col_label) if b == q]


def _nl_vars(instance: Instance, r) -> list[int]:
    return instance.dag.variables(r.root)


def validate_decomposition(instance: Instance, dec: Decomposition) -> list[tuple[str, int]]:
    """Every (row name, column) pair that breaks the block condition."""
    if len(dec.row_label) != len(instance.linear) or len(dec.col_label) != instance.n:
        raise DecompositionShapeError("labels do not cover all rows and columns")
    nl = dec.nl_label or [LINKING] * len(instance.nonlinear)
    bad = []
    for row, q in zip(instance.linear, dec.row_label):
        if q == LINKING:
            continue
        for j in sorted(row.coeffs):
            if row.coeffs[j] != 0.0 and dec.col_label[j] not in (LINKING, q):
                bad.append((row.name, j))
    for row, q in zip(instance.nonlinear, nl):
        if q == LINKING:
            continue
        for j in _nl_vars(instance, row):
            if dec.col_label[j] not in (LINKING, q):
                bad.append((row.name, j))
    return bad


# ---------------------------------------------------------------------------
# helpers

SubSolver = Callable[[Instance], tuple[str, list[float] | None]]


def default_subsolver(node_limit: int = 2000, time_limit: float = 60.0) -> SubSolver:
    def solve(sub: Instance):
        from .sbb import SolveParams, solve as sbb_solve

        res = sbb_solve(sub, SolveParams(node_limit=node_limit, time_limit=time_limit,
                                         heuristics=False, presolve=False))
        return res.status, (list(res.incumbent) if res.incumbent is not None else None)
    return solve


def _extract(instance: Instance, cols: Sequence[int], rows: Sequence[int],
             nl_rows: Sequence[int]) -> tuple[Instance, dict[int, int]]:
    """Sub-instance on ``cols`` with the given rows and an empty objective."""
    sub = Instance(name=f"{instance.name}-block")
    colmap = {}
    for j in cols:
        v = instance.variables[j]
        colmap[j] = sub.add_var(v.name, v.lb, v.ub, v.integer)
    for i in rows:
        r = instance.linear[i]
        sub.add_linear({colmap[j]: a for j, a in r.coeffs.items()}, r.lhs, r.rhs, r.name)
    for i in nl_rows:
        r = instance.nonlinear[i]
        root = instance.dag.copy_into(sub.dag, r.root, colmap)
        sub.add_nonlinear(root, r.lhs, r.rhs, r.name)
    return sub, colmap


def _rest_value(v) -> float:
    if math.isfinite(v.lb):
        return v.lb
    if math.isfinite(v.ub):
        return v.ub
    return 0.0


def _free_value(instance: Instance, j: int) -> float:
    """Value for a variable no block constrains: its objective-best finite bound."""
    v = instance.variables[j]
    c = instance.min_costs()[j]
    if c > 0 and math.isfinite(v.lb):
        return v.lb
    if c < 0 and math.isfinite(v.ub):
        return v.ub
    return _rest_value(v)


def check_original_feasibility(instance: Instance, x) -> float:
    viol = instance.violations(x)
    return max(viol.values(), default=0.0)


# ---------------------------------------------------------------------------
# DPS

@dataclass
class DpsParams:
    max_iters: int = 50
    lambda_init: float = 1.0
    stall_iters: int = 3
    improve: bool = True
    improve_node_limit: int = 5000


@dataclass
class DpsState:
    sides: list[tuple[int, float]]          # (linear row, sign): sign*row >= b
    b: list[float]
    p: list[dict[int, float]]               # per side: block -> share
    lam: list[float]
    z: list[dict[int, float]] = field(default_factory=list)
    iteration: int = 0

    def partition_error(self) -> float:
        return max((abs(sum(p.values()) - b) for p, b in zip(self.p, self.b)), default=0.0)


@dataclass
class DecompResult:
    status: str
    x: list[float] | None = None
    objective: float = INF
    iterations: int = 0
    trace: list = field(default_factory=list)


def _dps_blocks(instance: Instance, dec: Decomposition) -> list[list[int]]:
    if dec.linking_cols():
        used = set()
        for r in instance.linear:
            used.update(j for j, a in r.coeffs.items() if a != 0.0)
        for r in instance.nonlinear:
            used.update(_nl_vars(instance, r))
        if any(j in used for j in dec.linking_cols()):
            raise DecompositionShapeError("DPS needs a decomposition with linking rows only")
    nl = dec.nl_label or [LINKING] * len(instance.nonlinear)
    if any(q == LINKING for q in nl):
        raise DecompositionShapeError("nonlinear linking rows are not supported by DPS")
    return [dec.block_cols(q) for q in range(dec.k)]


def dps_init(instance: Instance, dec: Decomposition, params: DpsParams | None = None) -> DpsState:
    params = params or DpsParams()
    blocks = _dps_blocks(instance, dec)
    sides, b, p = [], [], []
    for i in dec.linking_rows():
        row = instance.linear[i]
        touching = [q for q in range(dec.k) if any(row.coeffs.get(j, 0.0) for j in blocks[q])]
        if not touching:
            touching = list(range(dec.k))
        for sign, side in ((1.0, row.lhs), (-1.0, row.rhs)):
            if not math.isfinite(side):
                continue
            bb = sign * side
            sides.append((i, sign))
            b.append(bb)
            p.append({q: bb / len(touching) for q in touching})
    return DpsState(sides, b, p, [params.lambda_init] * len(sides))


def _dps_block_problem(instance, dec, state, q, cols):
    rows = [i for i, lab in enumerate(dec.row_label) if lab == q]
    nl = dec.nl_label or []
    nl_rows = [i for i, lab in enumerate(nl) if lab == q]
    sub, colmap = _extract(instance, cols, rows, nl_rows)
    zvars = {}
    for s, (i, sign) in enumerate(state.sides):
        if q not in state.p[s]:
            continue
        row = instance.linear[i]
        z = sub.add_var(f"_z{s}", 0.0, INF)
        zvars[s] = z
        coeffs = {colmap[j]: sign * a for j, a in row.coeffs.items() if j in colmap}
        coeffs[z] = 1.0
        sub.add_linear(coeffs, state.p[s][q], INF, f"_part{s}")
        sub.objective[z] = state.lam[s]
    return sub, colmap, zvars


def dps_iteration(instance: Instance, dec: Decomposition, state: DpsState, solver: SubSolver,
                  order: Sequence[int] | None = None):
    """Solve all block subproblems for the current partition.

    Returns ``(x, z, activity)`` where ``z[s][q]`` are slack values and
    ``activity[s][q]`` the block's contribution to side ``s``; ``x`` is None
    when some block is infeasible even with slacks.
    """
    blocks = _dps_blocks(instance, dec)
    x = [_free_value(instance, j) for j in range(instance.n)]
    z = [dict() for _ in state.sides]
    act = [dict() for _ in state.sides]
    ok = True
    for q in (order if order is not None else range(dec.k)):
        sub, colmap, zvars = _dps_block_problem(instance, dec, state, q, blocks[q])
        status, sol = solver(sub)
        if sol is None:
            ok = False
            continue
        for j, jj in colmap.items():
            x[j] = sol[jj]
        for s, zj in zvars.items():
            i, sign = state.sides[s]
            z[s][q] = max(sol[zj], 0.0)
            act[s][q] = sum(sign * a * sol[colmap[j]] for j, a in instance.linear[i].coeffs.items()
                            if j in colmap)
    return (x if ok else None), z, act


def dps_update(state: DpsState, z, act) -> None:
    """Move shares from deficit blocks to blocks with surplus; keeps sum(p) = b."""
    for s, p in enumerate(state.p):
        deficit = {q: z[s].get(q, 0.0) for q in p if z[s].get(q, 0.0) > DPS_SUCCESS_TOL}
        if not deficit:
            continue
        moved = sum(deficit.values())
        for q, d in deficit.items():
            p[q] -= d
        others = [q for q in p if q not in deficit] or list(p)
        excess = {q: max(act[s].get(q, 0.0) - p[q], 0.0) for q in others}
        total = sum(excess.values())
        for q in others:
            share = excess[q] / total if total > 0 else 1.0 / len(others)
            p[q] += moved * share
        # exact conservation against rounding drift
        drift = state.b[s] - sum(p.values())
        p[others[-1]] += drift


def dps(instance: Instance, dec: Decomposition, params: DpsParams | None = None,
        solver: SubSolver | None = None) -> DecompResult:
    params = params or DpsParams()
    solver = solver or default_subsolver()
    state = dps_init(instance, dec, params)
    trace = []
    best = INF
    stall = 0
    for it in range(1, params.max_iters + 1):
        state.iteration = it
        x, z, act = dps_iteration(instance, dec, state, solver)
        state.z = z
        total = sum(state.lam[s] * sum(zs.values()) for s, zs in enumerate(z))
        trace.append({"iteration": it, "p": [dict(p) for p in state.p], "lambda": list(state.lam),
                      "z": total})
        if x is None:
            break
        if all(v <= DPS_SUCCESS_TOL for zs in z for v in zs.values()):
            if check_original_feasibility(instance, x) <= FEASTOL:
                if params.improve:
                    x = dps_improve(instance, dec, x, state, solver, params)
                return DecompResult(FOUND, x, instance.objective_value(x), it, trace)
        raw = sum(sum(zs.values()) for zs in z)
        if raw < best - 1e-9:
            best, stall = raw, 0
        else:
            stall += 1
            if stall >= params.stall_iters:
                state.lam = [2.0 * v for v in state.lam]
                stall = 0
        dps_update(state, z, act)
    return DecompResult(NOT_FOUND, None, INF, params.max_iters, trace)


def _require_feasible(instance: Instance, x) -> None:
    if x is None or check_original_feasibility(instance, x) > FEASTOL:
        raise ValueError("improvement heuristics need a feasible input solution")


def _full_solve_with_cutoff(instance: Instance, x, node_limit: int):
    from .sbb import SolveParams, solve as sbb_solve

    res = sbb_solve(instance, SolveParams(node_limit=node_limit, heuristics=False),
                    start=list(x))
    return res.incumbent


def _better(instance: Instance, cand, x) -> bool:
    if cand is None or check_original_feasibility(instance, cand) > FEASTOL:
        return False
    sign = 1.0 if instance.sense == "min" else -1.0
    return sign * instance.objective_value(cand) < sign * instance.objective_value(x) - 1e-9


def dps_improve(instance: Instance, dec: Decomposition, x, state: DpsState | None = None,
                solver: SubSolver | None = None, params: DpsParams | None = None):
    """Re-optimise the original objective starting from a feasible DPS point.

    First every block is re-solved with its linking contributions held at
    the achieved values; then the whole instance is searched with the
    improved point as incumbent under a node limit.
    """
    _require_feasible(instance, x)
    params = params or DpsParams()
    solver = solver or default_subsolver()
    best = list(x)
    blocks = _dps_blocks(instance, dec)
    costs = instance.min_costs()
    cand = list(best)
    for q in range(dec.k):
        cols = blocks[q]
        rows = [i for i, lab in enumerate(dec.row_label) if lab == q]
        nl_rows = [i for i, lab in enumerate(dec.nl_label or []) if lab == q]
        sub, colmap = _extract(instance, cols, rows, nl_rows)
        for i in dec.linking_rows():
            row = instance.linear[i]
            part = {colmap[j]: a for j, a in row.coeffs.items() if j in colmap}
            if not part:
                continue
            held = sum(a * best[j] for j, a in row.coeffs.items() if j in colmap)
            lo = held if math.isfinite(row.lhs) else -INF
            hi = held if math.isfinite(row.rhs) else INF
            sub.add_linear(part, lo, hi)
        for j, jj in colmap.items():
            if costs[j]:
                sub.objective[jj] = costs[j]
        status, sol = solver(sub)
        if sol is not None:
            for j, jj in colmap.items():
                cand[j] = sol[jj]
    if _better(instance, cand, best):
        best = cand
    full = _full_solve_with_cutoff(instance, best, params.improve_node_limit)
    if _better(instance, full, best):
        best = list(full)
    return best


# ---------------------------------------------------------------------------
# PADM

@dataclass
class PadmParams:
    max_outer: int = 10
    max_inner: int = 20
    mu_init: float = 1.0
    mu_factor: float = 10.0
    improve: bool = True


@dataclass
class PadmState:
    copies: dict[tuple[int, int], float] = field(default_factory=dict)   # (block, var) -> value
    mu: dict[tuple[int, int], float] = field(default_factory=dict)
    consensus: dict[int, float] = field(default_factory=dict)
    block_x: dict[int, dict[int, float]] = field(default_factory=dict)
    mu_trace: list[dict[tuple[int, int], float]] = field(default_factory=list)


def _padm_blocks(instance: Instance, dec: Decomposition):
    if dec.linking_rows() or any(q == LINKING for q in (dec.nl_label or [])):
        raise DecompositionShapeError("PADM needs a decomposition with linking variables only")
    link = set(dec.linking_cols())
    blocks = []
    for q in range(dec.k):
        rows = [i for i, lab in enumerate(dec.row_label) if lab == q]
        nl_rows = [i for i, lab in enumerate(dec.nl_label or []) if lab == q]
        touched = set()
        for i in rows:
            touched.update(j for j, a in instance.linear[i].coeffs.items() if a != 0.0)
        for i in nl_rows:
            touched.update(_nl_vars(instance, instance.nonlinear[i]))
        shared = sorted(touched & link)
        blocks.append((dec.block_cols(q), shared, rows, nl_rows))
    return blocks


def _padm_block_problem(instance, q, block, state: PadmState):
    cols, shared, rows, nl_rows = block
    sub, colmap = _extract(instance, list(cols) + list(shared), rows, nl_rows)
    for j in shared:
        if j not in state.consensus:
            continue
        mu = state.mu[(q, j)]
        sp = sub.add_var(f"_sp{j}", 0.0, INF)
        sm = sub.add_var(f"_sm{j}", 0.0, INF)
        # copy - consensus = s+ - s-
        t = state.consensus[j]
        sub.add_linear({colmap[j]: 1.0, sp: -1.0, sm: 1.0}, t, t, f"_link{j}")
        sub.objective[sp] = mu
        sub.objective[sm] = mu
    return sub, colmap


def padm(instance: Instance, dec: Decomposition, params: PadmParams | None = None,
         solver: SubSolver | None = None, state: PadmState | None = None) -> DecompResult:
    params = params or PadmParams()
    solver = solver or default_subsolver()
    blocks = _padm_blocks(instance, dec)
    state = state or PadmState()
    for q, (_, shared, _, _) in enumerate(blocks):
        for j in shared:
            state.mu.setdefault((q, j), params.mu_init)
    trace = []
    it = 0
    for outer in range(params.max_outer):
        state.mu_trace.append(dict(state.mu))
        agreed = False
        for inner in range(params.max_inner):
            it += 1
            for q, block in enumerate(blocks):
                sub, colmap = _padm_block_problem(instance, q, block, state)
                status, sol = solver(sub)
                if sol is None:
                    trace.append({"outer": outer, "inner": inner, "block": q, "status": status})
                    return DecompResult(NOT_FOUND, None, INF, it, trace)
                state.block_x[q] = {j: sol[jj] for j, jj in colmap.items()}
                for j in block[1]:
                    state.copies[(q, j)] = sol[colmap[j]]
                    state.consensus[j] = sol[colmap[j]]
            gaps = _disagreement(state, blocks)
            trace.append({"outer": outer, "inner": inner, "max_gap": max(gaps.values(), default=0.0)})
            if all(g <= AGREE_TOL for g in gaps.values()):
                agreed = True
                break
        if agreed:
            x = _padm_assemble(instance, blocks, state)
            if check_original_feasibility(instance, x) <= FEASTOL:
                if params.improve:
                    x = padm_improve(instance, dec, x, solver)
                return DecompResult(FOUND, x, instance.objective_value(x), it, trace)
        gaps = _disagreement(state, blocks)
        for (q, j), mu in list(state.mu.items()):
            if gaps.get((q, j), 0.0) > AGREE_TOL:
                state.mu[(q, j)] = mu * params.mu_factor
    state.mu_trace.append(dict(state.mu))
    return DecompResult(NOT_FOUND, None, INF, it, trace)


def _disagreement(state: PadmState, blocks) -> dict[tuple[int, int], float]:
    return {(q, j): abs(state.copies[(q, j)] - state.consensus[j])
            for q, (_, shared, _, _) in enumerate(blocks) for j in shared
            if (q, j) in state.copies}


def _padm_assemble(instance: Instance, blocks, state: PadmState) -> list[float]:
    x = [_free_value(instance, j) for j in range(instance.n)]
    for q, (cols, shared, _, _) in enumerate(blocks):
        for j in cols:
            x[j] = state.block_x[q][j]
    for j, v in state.consensus.items():
        x[j] = v
    return x


def padm_improve(instance: Instance, dec: Decomposition, x, solver: SubSolver | None = None):
    """Fix the linking variables and re-optimise each block on the original objective."""
    _require_feasible(instance, x)
    solver = solver or default_subsolver()
    blocks = _padm_blocks(instance, dec)
    costs = instance.min_costs()
    cand = list(x)
    for q, (cols, shared, rows, nl_rows) in enumerate(blocks):
        sub, colmap = _extract(instance, list(cols) + list(shared), rows, nl_rows)
        for j in shared:
            v = sub.variables[colmap[j]]
            v.lb = v.ub = x[j]
        for j in cols:
            if costs[j]:
                sub.objective[colmap[j]] = costs[j]
        status, sol = solver(sub)
        if sol is not None:
            for j in cols:
                cand[j] = sol[colmap[j]]
    return cand if _better(instance, cand, x) else list(x)
