"""Presolve reductions, determinism and postsolve of primal and dual solutions."""

import math

import numpy as np
import pytest

from minicip.io import format_instance, parse_instance
from minicip.lp import AT_LOWER, AT_UPPER, BASIC, INFEASIBLE, OPTIMAL, UNBOUNDED, solve_lp
from minicip.model import INF, Instance
from minicip.presolve import (
    DELETE_ROW,
    FIX_VAR,
    SCALE_ROW,
    SUBSTITUTE_VAR,
    TIGHTEN_BOUND,
    PostsolveStack,
    Reduction,
    instance_lp,
    postsolve_dual,
    postsolve_primal,
    replay,
    run_presolve,
)

from oracles import milp_brute_force


def _types(stack):
    return [r.kind for r in stack.reductions]


# ---------------------------------------------------------------------------
# examples

def test_activity_tightening():
    inst = parse_instance("[VARS]\nx continuous [0, 10]; y continuous [0, 10]\n[OBJ]\nmin -x\n"
                          "[LINEAR]\nr: 2*x <= 4\ns: x + y >= 1\n")
    _, stack, _ = run_presolve(inst, rounds=1)
    first = stack.reductions[0]
    assert first.kind == TIGHTEN_BOUND
    assert (first.payload["col"], first.payload["side"], first.payload["new"]) == (0, "ub", 2.0)


def test_fixed_variable_folded_into_sides():
    inst = parse_instance("[VARS]\nx continuous [3, 3]; y continuous [-10, 10]; z continuous [-10, 10]\n"
                          "[OBJ]\nmin y + x - z\n[LINEAR]\nr: x + y - z <= 5\ns: 2*x - y + z >= 1\n")
    reduced, stack, _ = run_presolve(inst, rounds=1)
    assert stack.reductions[0].kind == FIX_VAR and stack.reductions[0].payload["value"] == 3
    assert reduced.names == ["y", "z"]
    assert [(r.lhs, r.rhs) for r in reduced.linear] == [(-INF, 2.0), (-5.0, INF)]
    assert reduced.obj_offset == 3.0


DOUBLETON = "[VARS]\nx continuous [0, inf]; y continuous [0, inf]\n[OBJ]\nmin x + 2*y\n" \
            "[LINEAR]\ne: x + y == 1\n"


def test_doubleton_substitution_and_postsolve():
    inst = parse_instance(DOUBLETON)
    reduced, stack, _ = run_presolve(inst)
    subs = [r for r in stack.reductions if r.kind == SUBSTITUTE_VAR]
    assert len(subs) == 1 and subs[0].payload["col"] == 1   # y := 1 - x
    assert not reduced.linear
    sol = solve_lp(instance_lp(reduced))
    x = postsolve_primal(stack, sol.x)
    direct = solve_lp(instance_lp(inst))
    assert x == pytest.approx(list(direct.x), abs=1e-9)
    y, rc, (cb, rb) = postsolve_dual(stack, (sol.y, sol.rc, (sol.col_basis, sol.row_basis)))
    assert y == pytest.approx(list(direct.y), abs=1e-8)
    assert rc == pytest.approx(list(direct.rc), abs=1e-8)
    assert cb[1] == AT_LOWER


def test_postsolve_empty_stack_is_identity():
    stack = PostsolveStack.identity(2, 1)
    assert postsolve_primal(stack, [1.5, -2.0]) == [1.5, -2.0]
    dual = ([0.5], [1.0, 0.0], ([AT_LOWER, BASIC], [AT_UPPER]))
    assert postsolve_dual(stack, dual) == ([0.5], [1.0, 0.0], ([AT_LOWER, BASIC], [AT_UPPER]))


def test_postsolve_fixed_value():
    fix = Reduction(FIX_VAR, {"col": 1, "value": 3.0, "lb": 3.0, "ub": 3.0, "cost": 0.0,
                              "column": {}})
    stack = PostsolveStack(2, 0, [fix], [0], [])
    assert postsolve_primal(stack, [5.0]) == [5.0, 3.0]


def test_postsolve_substitution_formula():
    sub = Reduction(SUBSTITUTE_VAR, {"col": 1, "row": 0, "coeffs": {0: 1.0, 1: 1.0}, "rhs": 1.0,
                                     "cost": 2.0, "lb": 0.0, "ub": INF, "column": {0: 1.0}})
    stack = PostsolveStack(2, 1, [sub], [0], [])
    assert postsolve_primal(stack, [0.25]) == [0.25, 0.75]


def test_postsolve_deleted_row_gets_zero_dual():
    red = Reduction(DELETE_ROW, {"row": 1, "coeffs": {0: 1.0}, "lhs": -INF, "rhs": 9.0})
    stack = PostsolveStack(1, 2, [red], [0], [0])
    y, rc, (cb, rb) = postsolve_dual(stack, ([2.0], [0.0], ([BASIC], [AT_LOWER])))
    assert y == [2.0, 0.0] and rb == [AT_LOWER, BASIC]


def test_postsolve_scaled_row():
    red = Reduction(SCALE_ROW, {"row": 0, "factor": -2.0})
    stack = PostsolveStack(1, 1, [red], [0], [0])
    y, _, (_, rb) = postsolve_dual(stack, ([1.5], [0.0], ([BASIC], [AT_LOWER])))
    assert y == [-3.0] and rb == [AT_UPPER]


def test_dimension_mismatch():
    stack = PostsolveStack.identity(2, 1)
    with pytest.raises(ValueError):
        postsolve_primal(stack, [1.0])
    with pytest.raises(ValueError):
        postsolve_dual(stack, ([], [0.0, 0.0], ([BASIC, BASIC], [])))


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        Reduction("probe", {})


def test_infeasibility_certificate():
    inst = parse_instance("[VARS]\nx continuous [0, 1]; y continuous [0, 1]\n[OBJ]\nmin x\n"
                          "[LINEAR]\nr: x + y >= 3\n")
    reduced, stack, stats = run_presolve(inst)
    assert stats.status == "infeasible" and stats.certificate is not None
    assert stats.certificate.rows == frozenset([0])


def test_crossed_bounds_certificate():
    inst = parse_instance("[VARS]\nx continuous [0, 10]\n[OBJ]\nmin x\n"
                          "[LINEAR]\na: x >= 4\nb: x <= 3\n")
    _, _, stats = run_presolve(inst)
    assert stats.status == "infeasible"


def test_dual_fixing():
    inst = parse_instance("[VARS]\nx continuous [1, 5]; y continuous [0, 4]\n[OBJ]\nmin x - y\n"
                          "[LINEAR]\nr: x - y <= 10\n")
    reduced, stack, _ = run_presolve(inst)
    x = postsolve_primal(stack, [0.0] * reduced.n)
    assert x == [1.0, 4.0]


def test_nonlinear_rows_see_fixings():
    inst = parse_instance("[VARS]\nx continuous [2, 2]; y continuous [0, 3]\n[OBJ]\nmin y\n"
                          "[NONLINEAR]\nc: x*y + exp(x) >= 9\n")
    reduced, stack, _ = run_presolve(inst)
    assert reduced.names == ["y"]
    assert "2*y" in format_instance(reduced)


def test_stack_text_round_trip():
    inst = parse_instance(DOUBLETON)
    _, stack, _ = run_presolve(inst)
    text = stack.to_text()
    again = PostsolveStack.from_text(text)
    assert again.to_text() == text
    assert postsolve_primal(again, []) == postsolve_primal(stack, [])


# ---------------------------------------------------------------------------
# random LPs

def random_lp_instance(rng) -> Instance:
    """Small LP with planted presolve structure (fixings, doubletons, singletons)."""
    n = int(rng.integers(2, 8))
    m = int(rng.integers(1, 7))
    inst = Instance(sense="min" if rng.random() < 0.7 else "max")
    for j in range(n):
        lo = float(rng.integers(-4, 2))
        r = rng.random()
        if r < 0.1:
            inst.add_var(f"x{j}", lo, lo)
        elif r < 0.25:
            inst.add_var(f"x{j}", lo, INF)
        elif r < 0.3:
            inst.add_var(f"x{j}", -INF, lo + 3)
        else:
            inst.add_var(f"x{j}", lo, lo + float(rng.integers(1, 6)))
    inst.objective = {j: float(rng.integers(-5, 6)) for j in range(n) if rng.random() < 0.8}
    for i in range(m):
        shape = rng.random()
        if shape < 0.25 and n >= 2:
            a, b = (int(v) for v in rng.choice(n, 2, replace=False))
            coeffs = {a: float(rng.choice([-2, -1, 1, 2, 3])), b: float(rng.choice([-1, 1, 2]))}
        else:
            coeffs = {j: float(rng.integers(-4, 5)) for j in range(n) if rng.random() < 0.6}
            coeffs = {j: v for j, v in coeffs.items() if v}
        if not coeffs:
            continue
        b = float(rng.integers(-4, 6))
        kind = rng.integers(0, 4)
        if kind == 0 or shape < 0.25:
            lhs, rhs = b, b
        elif kind == 1:
            lhs, rhs = -INF, b
        elif kind == 2:
            lhs, rhs = b, INF
        else:
            lhs, rhs = b - float(rng.integers(0, 4)), b
        inst.add_linear(coeffs, lhs, rhs, f"r{i}")
    return inst


def _check_dual(inst, x, y, rc, tol=1e-8):
    p = instance_lp(inst)
    x, y, rc = np.asarray(x), np.asarray(y), np.asarray(rc)
    act = p.A @ x if p.m else np.zeros(0)
    assert np.all(x >= p.lb - 1e-6) and np.all(x <= p.ub + 1e-6)
    if p.m:
        assert np.all(act >= p.lhs - 1e-6) and np.all(act <= p.rhs + 1e-6)
    assert np.allclose(p.c, (p.A.T @ y if p.m else 0.0) + rc, atol=tol, rtol=0)
    for i, yi in enumerate(y):
        if yi > 0:
            assert abs(yi) <= tol or abs(act[i] - p.lhs[i]) * abs(yi) <= tol
        elif yi < 0:
            assert abs(yi) <= tol or abs(act[i] - p.rhs[i]) * abs(yi) <= tol
    for j, d in enumerate(rc):
        if d > 0:
            assert abs(d) <= tol or abs(x[j] - p.lb[j]) * abs(d) <= tol
        elif d < 0:
            assert abs(d) <= tol or abs(x[j] - p.ub[j]) * abs(d) <= tol


def lp_round_trip(inst):
    """Returns the outcome class; raises AssertionError on any mismatch."""
    direct = solve_lp(instance_lp(inst))
    reduced, stack, stats = run_presolve(inst)
    if stats.status == "infeasible":
        assert direct.status == INFEASIBLE
        return "infeasible"
    sol = solve_lp(instance_lp(reduced))
    assert sol.status == direct.status
    if sol.status != OPTIMAL:
        return sol.status
    sign = 1.0 if inst.sense == "min" else -1.0
    red_obj = reduced.obj_offset + sign * sol.objective
    orig_obj = inst.obj_offset + sign * direct.objective
    assert abs(red_obj - orig_obj) <= 1e-7
    x = postsolve_primal(stack, sol.x)
    assert abs(inst.objective_value(x) - red_obj) <= 1e-9 * max(1.0, abs(red_obj))
    assert max(inst.violations(x).values(), default=0.0) <= 1e-6
    y, rc, (cb, rb) = postsolve_dual(stack, (sol.y, sol.rc, (sol.col_basis, sol.row_basis)))
    _check_dual(inst, x, y, rc)
    return OPTIMAL


def test_random_lp_round_trip():
    rng = np.random.default_rng(7)
    outcomes = {}
    reductions = 0
    optimal = 0
    tried = 0
    while optimal < 200:
        tried += 1
        inst = random_lp_instance(rng)
        kind = lp_round_trip(inst)
        outcomes[kind] = outcomes.get(kind, 0) + 1
        optimal += kind == OPTIMAL
        reductions += len(run_presolve(inst)[1])
    assert reductions > 200
    assert tried < 2000


def test_every_reduction_kind_is_exercised():
    rng = np.random.default_rng(11)
    seen = set()
    for _ in range(300):
        _, stack, _ = run_presolve(random_lp_instance(rng))
        seen.update(_types(stack))
    assert {FIX_VAR, TIGHTEN_BOUND, SUBSTITUTE_VAR, DELETE_ROW} <= seen


def test_deterministic_under_random_scheduling():
    rng = np.random.default_rng(3)
    for _ in range(5):
        inst = random_lp_instance(rng)
        ref_inst, ref_stack, _ = run_presolve(inst, workers=1)
        ref = format_instance(ref_inst) + ref_stack.to_text()
        for seed in range(20):
            reduced, stack, _ = run_presolve(inst, workers=4, schedule_seed=seed)
            assert format_instance(reduced) + stack.to_text() == ref


def test_replay_reproduces_reduced_instance():
    rng = np.random.default_rng(5)
    rejected = 0
    for _ in range(100):
        inst = random_lp_instance(rng)
        reduced, stack, stats = run_presolve(inst)
        rejected += stats.rejected
        if stats.status == "ok":
            assert format_instance(replay(inst, stack)) == format_instance(reduced)
    assert rejected > 0  # conflicts did occur and were handled


def small_milp(rng):
    n = int(rng.integers(2, 7))
    inst = Instance(sense="min" if rng.random() < 0.5 else "max")
    for j in range(n):
        fixed = rng.random() < 0.15
        inst.add_var(f"b{j}", 1.0 if fixed else 0.0, 1.0, True)
    inst.objective = {j: float(rng.integers(-5, 6)) for j in range(n)}
    for i in range(int(rng.integers(1, 5))):
        coeffs = {j: float(rng.integers(-3, 4)) for j in range(n) if rng.random() < 0.6}
        coeffs = {j: a for j, a in coeffs.items() if a}
        if coeffs:
            b = float(rng.integers(-2, 4))
            inst.add_linear(coeffs, *((b, b) if rng.random() < 0.2 else (-INF, b)), f"r{i}")
    return inst


def test_milp_optimum_preserved():
    rng = np.random.default_rng(13)
    for _ in range(150):
        inst = small_milp(rng)
        expect, _ = milp_brute_force(inst)
        reduced, stack, stats = run_presolve(inst)
        if stats.status == "infeasible":
            assert expect is None
            continue
        got, point = milp_brute_force(reduced)
        if expect is None:
            assert got is None
            continue
        assert got == expect
        x = postsolve_primal(stack, list(point))
        assert max(inst.violations(x).values(), default=0.0) <= 1e-9
        assert inst.objective_value(x) == expect


@pytest.mark.parametrize("name", ["knapsack", "logquad", "expcons", "mixed", "minimal"])
def test_solver_agrees_with_and_without_presolve(name):
    from pathlib import Path

    from minicip.io import read_instance
    from minicip.sbb import SolveParams, check_original_feasibility, solve

    inst = read_instance(Path(__file__).parent / "data" / "corpus" / f"{name}.inst")
    on = solve(inst, SolveParams(presolve=True))
    off = solve(inst, SolveParams(presolve=False))
    assert on.status == off.status
    if off.incumbent is not None:
        assert on.primal_bound == pytest.approx(off.primal_bound, rel=1e-6, abs=1e-6)
        assert check_original_feasibility(inst, on.incumbent).max_violation <= 1e-6
