import math

import numpy as np
import pytest

from minicip.expr import DomainError, evaluate, parse_expression, to_text
from minicip.interval import Interval
from minicip.model import Instance
from minicip.relax import (AUXILIARY, SLACK, Cut, build_extended_formulation, detect_structure,
                           estimate, is_psd, overestimate, select_cuts, underestimate)
from exprgen import random_text

E2 = math.e ** 2


def log_instance():
    inst = Instance()
    inst.add_var("x", 1.0, E2)
    inst.add_var("y", 0.0, 2.0)
    _, r = parse_expression("log(x)^2 + 2*log(x)*y + y^2", {"x": 0, "y": 1}, inst.dag)
    inst.add_nonlinear(r, -math.inf, 4.0, "c")
    return inst


def exp_instance():
    inst = Instance()
    inst.add_var("x", -2, 2, True)
    inst.add_var("y", -2, 2, True)
    inst.add_var("z", 0, 1e4)
    _, r = parse_expression("exp(log(1000) + 1 + x*y) - z", {"x": 0, "y": 1, "z": 2}, inst.dag)
    inst.add_nonlinear(r, -math.inf, 0.0)
    inst.objective = {2: 1.0, 0: -1.0, 1: -1.0}
    return inst


def test_extended_form_of_log_example():
    inst = log_instance()
    ext = build_extended_formulation(inst)
    assert [r.kind for r in ext.rows] == [SLACK, AUXILIARY]
    h1, h2 = ext.rows
    assert (h1.var, h2.var) == (2, 3)
    assert to_text(ext.dag, h1.node, ext.names) == "(w2^2) + 2*w2*y + (y^2)"
    assert to_text(ext.dag, h2.node, ext.names) == "log(x)"
    assert ext.tags[0].kind == "quadratic" and ext.tags[0].curvature == "convex"
    assert ext.box[2].hi == 4.0
    assert ext.box[3].lo == pytest.approx(0.0, abs=1e-9) and ext.box[3].hi == pytest.approx(2.0, abs=1e-9)
    # the original instance is untouched
    assert len(inst.nonlinear) == 1 and inst.n == 2


def test_linear_instance_has_no_aux():
    inst = Instance()
    inst.add_var("x", 0, 1)
    inst.add_var("y", 0, 1)
    inst.add_linear({0: 1, 1: 1}, rhs=1)
    ext = build_extended_formulation(inst)
    assert ext.rows == [] and ext.n == 2


def test_exp_example_only_bilinear_aux():
    ext = build_extended_formulation(exp_instance())
    aux = [r for r in ext.rows if r.kind == AUXILIARY]
    assert len(aux) == 1
    assert to_text(ext.dag, aux[0].node, ext.names) == "x*y"
    top = ext.dag[ext.rows[0].node]
    exp_nodes = [c for c in top.children if ext.dag[c].op == "exp"]
    assert len(exp_nodes) == 1
    arg = ext.dag[exp_nodes[0]].children[0]
    assert ext.dag.variables(arg) == [aux[0].var]


def test_empty_aux_bounds_infeasible():
    inst = Instance()
    inst.add_var("x", -1, 1)
    _, r = parse_expression("exp(x)", {"x": 0}, inst.dag)
    inst.add_nonlinear(r, -math.inf, 0.1)
    assert build_extended_formulation(inst).infeasible


def test_structure_tags():
    dag, r = parse_expression("w^2 + 2*w*y + y^2", {"w": 0, "y": 1})
    assert detect_structure(dag, r).kind == "quadratic"
    dag, r = parse_expression("x*y", {"x": 0, "y": 1})
    assert detect_structure(dag, r).kind == "bilinear"
    dag, r = parse_expression("exp(x) + y^2", {"x": 0, "y": 1})
    assert detect_structure(dag, r).kind == "quadratic"
    dag, r = parse_expression("exp(x + y)", {"x": 0, "y": 1})
    assert detect_structure(dag, r).kind == "convex"
    dag, r = parse_expression("log(x) - 3*exp(y)", {"x": 0, "y": 1})
    assert detect_structure(dag, r).kind == "concave"
    dag, r = parse_expression("x + 2*y", {"x": 0, "y": 1})
    assert detect_structure(dag, r).kind == "linear"
    dag, r = parse_expression("abs(x*y)", {"x": 0, "y": 1})
    assert detect_structure(dag, r).kind == "default"
    # pure function of the shape
    assert detect_structure(dag, r) == detect_structure(dag, r)


def test_psd():
    assert is_psd(np.array([[1.0, 1.0], [1.0, 1.0]]))
    assert not is_psd(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert is_psd(np.zeros((2, 2)))
    assert not is_psd(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_estimator_examples():
    dag, r = parse_expression("exp(x)", {"x": 0})
    est = underestimate(dag, r, None, [Interval(-1, 1)], [0.0])
    assert est.coeffs == {0: pytest.approx(1.0)} and est.constant == pytest.approx(1.0)
    dag, r = parse_expression("x*y", {"x": 0, "y": 1})
    b = [Interval(0, 1), Interval(0, 1)]
    low = underestimate(dag, r, None, b, [0.1, 0.1])
    assert low.constant == pytest.approx(0.0) and all(abs(a) < 1e-12 for a in low.coeffs.values())
    high = underestimate(dag, r, None, b, [0.9, 0.9])
    assert high.constant == pytest.approx(-1.0)
    assert high.coeffs[0] == pytest.approx(1.0) and high.coeffs[1] == pytest.approx(1.0)
    dag, r = parse_expression("log(x)", {"x": 0})
    sec = overestimate(dag, r, None, [Interval(1, E2)], [2.0])
    # concave: overestimation is the tangent; the secant is the underestimator
    under = underestimate(dag, r, None, [Interval(1, E2)], [2.0])
    assert under.coeffs[0] == pytest.approx(2.0 / (E2 - 1.0))
    assert under.constant == pytest.approx(-2.0 / (E2 - 1.0))
    assert sec.coeffs[0] == pytest.approx(0.5)


def test_log_secant_overestimates_log_inverse():
    """The secant for log on [1, e^2] is the secant through (1,0), (e^2,2)."""
    dag, r = parse_expression("log(x)", {"x": 0})
    est = estimate(dag, r, [Interval(1, E2)], [3.0], over=False)
    for x in np.linspace(1, E2, 50):
        assert est([x]) <= math.log(x) + 1e-12
    assert est([1.0]) == pytest.approx(0.0, abs=1e-12)
    assert est([E2]) == pytest.approx(2.0)


def test_unbounded_box_gives_none():
    dag, r = parse_expression("x*y", {"x": 0, "y": 1})
    assert underestimate(dag, r, None, [Interval(0, math.inf), Interval(0, 1)], [1.0, 0.5]) is None
    dag, r = parse_expression("x^3", {"x": 0})
    assert underestimate(dag, r, None, [Interval(-math.inf, 1)], [0.0]) is None


def _sample_check(dag, node, box, rng, n_samples=10_000):
    lo = np.array([b.lo for b in box])
    hi = np.array([b.hi for b in box])
    ref = rng.uniform(lo, hi)
    pts = rng.uniform(lo, hi, (n_samples, len(box)))
    ests = [(over, estimate(dag, node, box, ref, over)) for over in (False, True)]
    tested = 0
    for p in pts:
        try:
            f = evaluate(dag, node, p)
        except (DomainError, OverflowError):
            continue
        for over, est in ests:
            if est is None:
                continue
            v = est(p)
            if over:
                assert f <= v + 1e-9, (f, v)
            else:
                assert v <= f + 1e-9, (f, v)
            tested += 1
    return tested


def test_estimator_soundness_sampling():
    """Estimators on extended rows are valid on 10^4 sampled box points."""
    rng = np.random.default_rng(99)
    total = 0
    for trial in range(40):
        inst = Instance()
        for name in "xyz":
            lo = float(rng.uniform(-2, 1))
            inst.add_var(name, lo, lo + float(rng.uniform(0.1, 2.0)))
        text = random_text(rng, depth=3)
        try:
            _, root = parse_expression(text, {"x": 0, "y": 1, "z": 2}, inst.dag)
        except Exception:
            continue
        inst.add_nonlinear(root, -math.inf, math.inf)
        ext = build_extended_formulation(inst)
        if ext.infeasible:
            continue
        box = [b if b.lo > -1e6 and b.hi < 1e6 else Interval(max(b.lo, -1e6), min(b.hi, 1e6))
               for b in ext.box]
        if any(b.is_empty for b in box):
            continue
        for row in ext.rows:
            total += _sample_check(ext.dag, row.node, box, rng, 2_000 if trial >= 5 else 10_000)
    assert total > 50_000


def _original_feasible(inst, p):
    viol = inst.violations(p)
    return max(viol.values(), default=0.0) <= 1e-9


def _extended_feasible(ext, p):
    full = ext.lift(p)
    for row in ext.rows:
        v = evaluate(ext.dag, row.node, full)
        if abs(v - full[row.var]) > 1e-9 * max(1, abs(v)):
            return False
    for j in range(ext.n_orig, ext.n):
        b = ext.box[j]
        if not (b.lo - 1e-9 * max(1, abs(b.lo)) <= full[j] <= b.hi + 1e-9 * max(1, abs(b.hi))):
            return False
    return True


def test_extended_form_equivalence_grid():
    rng = np.random.default_rng(4)
    checked = 0
    for trial in range(30):
        inst = Instance()
        inst.add_var("x", 0.5, 2.5)
        inst.add_var("y", -1.5, 1.5)
        inst.add_var("z", -1.0, 2.0)
        text = random_text(rng, depth=3)
        _, root = parse_expression(text, {"x": 0, "y": 1, "z": 2}, inst.dag)
        grid = np.stack(np.meshgrid(*[np.linspace(v.lb, v.ub, 7) for v in inst.variables]), -1).reshape(-1, 3)
        vals = []
        for p in grid:
            try:
                vals.append(evaluate(inst.dag, root, p))
            except (DomainError, OverflowError):
                vals.append(math.nan)
        finite = sorted(v for v in vals if math.isfinite(v))
        if not finite:
            continue
        inst.add_nonlinear(root, -math.inf, finite[len(finite) // 2])
        ext = build_extended_formulation(inst)
        for p, v in zip(grid, vals):
            if not math.isfinite(v):
                continue
            assert _original_feasible(inst, p) == _extended_feasible(ext, list(p)), (text, p)
            # aux bound soundness
            full = ext.lift(list(p))
            for r in ext.rows:
                b = ext.box[r.var]
                if r.kind == AUXILIARY:
                    assert b.lo - 1e-9 * max(1, abs(b.lo)) <= full[r.var] <= b.hi + 1e-9 * max(1, abs(b.hi))
            checked += 1
    assert checked > 3000


def test_select_cuts_examples():
    assert select_cuts([], [0.0], 5) == []
    dup = [Cut({0: 1.0, 1: 1.0}, rhs=0.0), Cut({0: 1.0, 1: 1.0}, rhs=0.0)]
    assert len(select_cuts(dup, [1.0, 1.0], 2)) == 1
    cuts = [Cut({0: 1.0}, rhs=0.0), Cut({1: 1.0}, rhs=0.0), Cut({2: 1.0}, rhs=0.0)]
    x = [0.5, 0.2, 0.9]
    assert select_cuts(cuts, x, 2) == [2, 0]
    # stored efficacies are used when no LP point is given
    for c, e in zip(cuts, (0.5, 0.2, 0.9)):
        c.efficacy = e
    assert select_cuts(cuts, None, 2) == [2, 0]


def test_select_cuts_tie_break_by_index():
    cuts = [Cut({0: 1.0}, rhs=0.0), Cut({1: 1.0}, rhs=0.0), Cut({2: 1.0}, rhs=0.0)]
    assert select_cuts(cuts, [1.0, 1.0, 1.0], 3) == [0, 1, 2]
