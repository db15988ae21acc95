"""Decomposition model and the DPS / PADM primal heuristics."""

import itertools
import random

import pytest

from minicip.decomp import (
    FOUND,
    LINKING,
    NOT_FOUND,
    Decomposition,
    DecompositionShapeError,
    DpsParams,
    PadmParams,
    check_original_feasibility,
    default_subsolver,
    dps,
    dps_improve,
    dps_init,
    dps_iteration,
    dps_update,
    padm,
    padm_improve,
    validate_decomposition,
)
from minicip.io import parse_instance
from minicip.model import Instance

from oracles import milp_brute_force


def _two_block(ub1=3, sense="min x1"):
    return parse_instance(f"[VARS]\nx1 integer [0, {ub1}]; x2 integer [0, 3]\n"
                          f"[OBJ]\n{sense}\n[LINEAR]\nlink: x1 + x2 >= 4\n")


LINK_ONLY = Decomposition(2, [LINKING], [0, 1], [])


# ---------------------------------------------------------------------------
# block condition

BLOCKS = """[VARS]
a continuous [0, 1]; b continuous [0, 1]
[OBJ]
min a + b
[LINEAR]
r1: a >= 0.5
r2: b >= 0.5
"""


def test_block_diagonal_is_valid():
    inst = parse_instance(BLOCKS)
    assert validate_decomposition(inst, Decomposition(2, [0, 1], [0, 1], [])) == []


def test_dense_row_in_block_is_reported():
    inst = parse_instance(BLOCKS + "r3: a + b <= 2\n")
    dec = Decomposition(2, [0, 1, 0], [0, 1], [])
    assert validate_decomposition(inst, dec) == [("r3", 1)]


def test_dense_row_linking_is_exempt():
    inst = parse_instance(BLOCKS + "r3: a + b <= 2\n")
    assert validate_decomposition(inst, Decomposition(2, [0, 1, LINKING], [0, 1], [])) == []


# ---------------------------------------------------------------------------
# DPS examples

def test_dps_equal_split():
    inst = _two_block()
    state = dps_init(inst, LINK_ONLY)
    assert state.p == [{0: 2.0, 1: 2.0}]
    res = dps(inst, LINK_ONLY, DpsParams(improve=False))
    assert res.status == FOUND and res.x == [2.0, 2.0] and res.iterations == 1


def test_dps_partition_update_shifts_toward_capacity():
    inst = _two_block(ub1=1)
    res = dps(inst, LINK_ONLY, DpsParams(improve=False))
    assert res.status == FOUND and res.iterations == 2
    assert res.trace[0]["p"] == [{0: 2.0, 1: 2.0}]
    p = res.trace[1]["p"][0]
    assert p[0] == pytest.approx(1.0, abs=1e-6) and p[1] == pytest.approx(3.0, abs=1e-6)
    assert res.x == pytest.approx([1.0, 3.0])


def test_dps_single_block_solves_instance():
    inst = _two_block()
    res = dps(inst, Decomposition(1, [LINKING], [0, 0], []), DpsParams(improve=False))
    assert res.status == FOUND
    assert check_original_feasibility(inst, res.x) <= 1e-6


def test_dps_infeasible_is_not_found():
    inst = parse_instance("[VARS]\nx1 integer [0, 1]; x2 integer [0, 1]\n[OBJ]\nmin x1\n"
                          "[LINEAR]\nlink: x1 + x2 >= 3\n")
    res = dps(inst, LINK_ONLY, DpsParams(max_iters=10))
    assert res.status == NOT_FOUND and res.x is None


def test_dps_rejects_linking_columns():
    inst = parse_instance(BLOCKS + "r3: a + b <= 2\n")
    with pytest.raises(DecompositionShapeError):
        dps(inst, Decomposition(2, [0, 1, LINKING], [0, LINKING], []))


def test_dps_improve_reaches_optimum():
    inst = _two_block()
    assert dps_improve(inst, LINK_ONLY, [2.0, 2.0]) == pytest.approx([1.0, 3.0])


def test_dps_improve_keeps_optimal_input():
    inst = _two_block()
    assert dps_improve(inst, LINK_ONLY, [1.0, 3.0]) == pytest.approx([1.0, 3.0])


def test_improve_rejects_infeasible_input():
    inst = _two_block()
    with pytest.raises(ValueError):
        dps_improve(inst, LINK_ONLY, [0.0, 0.0])


# ---------------------------------------------------------------------------
# PADM examples

def _shared(lo_row, hi_row):
    return parse_instance(
        "[VARS]\nx1 integer [0, 1]; x2 integer [0, 1]; y continuous [0, 5]\n"
        "[OBJ]\nmin x1 + x2 + y\n[LINEAR]\n"
        f"a: {lo_row}\nb: {hi_row}\n")


SHARED = Decomposition(2, [0, 1], [0, 1, LINKING], [])


def test_padm_copies_converge():
    inst = _shared("y - x1 >= 2", "y + x2 <= 2")
    res = padm(inst, SHARED, PadmParams(improve=False))
    assert res.status == FOUND
    assert res.x[2] == pytest.approx(2.0, abs=1e-6)
    assert check_original_feasibility(inst, res.x) <= 1e-6


def test_padm_without_linking_variables():
    inst = parse_instance(BLOCKS)
    res = padm(inst, Decomposition(2, [0, 1], [0, 1], []))
    assert res.status == FOUND and res.x == pytest.approx([0.5, 0.5])


def test_padm_disagreement_is_not_found():
    inst = _shared("y >= 3", "y <= 1")
    state_params = PadmParams(max_outer=4, max_inner=5)
    res = padm(inst, SHARED, state_params)
    assert res.status == NOT_FOUND


def test_padm_rejects_linking_rows():
    with pytest.raises(DecompositionShapeError):
        padm(_two_block(), LINK_ONLY)


def test_padm_penalties_grow():
    from minicip.decomp import PadmState

    inst = _shared("y >= 3", "y <= 1")
    state = PadmState()
    padm(inst, SHARED, PadmParams(max_outer=4, max_inner=3), state=state)
    assert len(state.mu_trace) >= 2
    for before, after in zip(state.mu_trace, state.mu_trace[1:]):
        assert all(after[k] >= before[k] > 0 for k in before)
    assert max(state.mu_trace[-1].values()) > 1.0


# ---------------------------------------------------------------------------
# properties on random block instances

def random_linking_rows(seed: int):
    """Integer blocks with private rows plus coupling rows (linking rows only)."""
    rng = random.Random(seed)
    k = rng.randint(2, 3)
    inst = Instance(name=f"dps{seed}")
    col_label = []
    for q in range(k):
        for t in range(rng.randint(1, 2)):
            inst.add_var(f"x{q}_{t}", 0.0, float(rng.randint(1, 3)), True)
            col_label.append(q)
    inst.objective = {j: float(rng.randint(-3, 3)) for j in range(inst.n)}
    row_label = []
    for q in range(k):
        cols = [j for j in range(inst.n) if col_label[j] == q]
        coeffs = {j: float(rng.randint(1, 3)) for j in cols}
        inst.add_linear(coeffs, -float("inf"), float(sum(c * inst.variables[j].ub
                                                         for j, c in coeffs.items()) - 1))
        row_label.append(q)
    for r in range(rng.randint(1, 2)):
        coeffs = {j: float(rng.randint(1, 2)) for j in range(inst.n) if rng.random() < 0.8}
        if not coeffs:
            coeffs = {0: 1.0}
        top = sum(c * inst.variables[j].ub for j, c in coeffs.items())
        inst.add_linear(coeffs, float(rng.randint(1, max(1, int(top) - 1))), float("inf"))
        row_label.append(LINKING)
    return inst, Decomposition(k, row_label, col_label, [])


def random_linking_vars(seed: int):
    """Blocks coupled through shared continuous variables (linking columns only)."""
    rng = random.Random(seed)
    k = 2
    inst = Instance(name=f"padm{seed}")
    col_label = []
    for q in range(k):
        for t in range(2):
            inst.add_var(f"x{q}_{t}", 0.0, 2.0, True)
            col_label.append(q)
    y = inst.add_var("y", 0.0, 4.0, False)
    col_label.append(LINKING)
    inst.objective = {j: float(rng.randint(-2, 3)) for j in range(inst.n)}
    row_label = []
    for q in range(k):
        cols = [j for j in range(inst.n) if col_label[j] == q]
        coeffs = {j: float(rng.randint(1, 2)) for j in cols}
        coeffs[y] = float(rng.choice([-1, 1]))
        lo = float(rng.randint(-2, 2))
        inst.add_linear(coeffs, lo, lo + rng.randint(1, 4))
        row_label.append(q)
    return inst, Decomposition(k, row_label, col_label, [])


DPS_SEEDS = range(25)
PADM_SEEDS = range(25)


@pytest.mark.parametrize("seed", DPS_SEEDS)
def test_dps_conservation_and_feasibility(seed):
    inst, dec = random_linking_rows(seed)
    assert validate_decomposition(inst, dec) == []
    res = dps(inst, dec, DpsParams(max_iters=15, improve=False))
    for entry in res.trace:
        state_b = dps_init(inst, dec).b
        for p, b in zip(entry["p"], state_b):
            assert abs(sum(p.values()) - b) <= 1e-9
    if res.status == FOUND:
        assert check_original_feasibility(inst, res.x) <= 1e-6
        better = dps_improve(inst, dec, res.x)
        assert check_original_feasibility(inst, better) <= 1e-6
        assert inst.objective_value(better) <= inst.objective_value(res.x) + 1e-9
        opt, _ = milp_brute_force(inst)
        assert inst.objective_value(better) >= opt - 1e-9
    else:
        assert res.x is None


@pytest.mark.parametrize("seed", range(10))
def test_dps_update_conserves_partition(seed):
    rng = random.Random(seed)
    inst, dec = random_linking_rows(seed)
    state = dps_init(inst, dec)
    for _ in range(20):
        z = [{q: rng.choice([0.0, rng.uniform(0, 3)]) for q in p} for p in state.p]
        act = [{q: rng.uniform(-2, 6) for q in p} for p in state.p]
        dps_update(state, z, act)
        assert state.partition_error() <= 1e-9


@pytest.mark.parametrize("seed", range(10))
def test_dps_blocks_independent_of_order(seed):
    inst, dec = random_linking_rows(seed)
    state = dps_init(inst, dec)
    solver = default_subsolver()
    fwd = dps_iteration(inst, dec, state, solver)
    bwd = dps_iteration(inst, dec, state, solver, order=list(reversed(range(dec.k))))
    assert fwd == bwd


@pytest.mark.parametrize("seed", PADM_SEEDS)
def test_padm_outputs_feasible_and_improve_monotone(seed):
    inst, dec = random_linking_vars(seed)
    assert validate_decomposition(inst, dec) == []
    res = padm(inst, dec, PadmParams(improve=False))
    if res.status == FOUND:
        assert check_original_feasibility(inst, res.x) <= 1e-6
        better = padm_improve(inst, dec, res.x)
        assert check_original_feasibility(inst, better) <= 1e-6
        assert inst.objective_value(better) <= inst.objective_value(res.x) + 1e-9


def test_padm_finds_something_on_random_corpus():
    found = sum(padm(*random_linking_vars(s)).status == FOUND for s in PADM_SEEDS)
    assert found >= len(PADM_SEEDS) // 2


def test_dps_finds_something_on_random_corpus():
    found = sum(dps(*random_linking_rows(s), DpsParams(max_iters=15)).status == FOUND
                for s in DPS_SEEDS)
    feasible = sum(milp_brute_force(random_linking_rows(s)[0])[0] is not None for s in DPS_SEEDS)
    assert found >= feasible // 2
