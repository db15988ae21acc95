"""Shifted geometric means, subset tables and the command-line driver."""

import math
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from minicip.cli import main
from minicip.report import (
    ReportError,
    Run,
    aggregate_runs,
    parse_runs,
    read_runs,
    report,
    shifted_geometric_mean,
)

DATA = Path(__file__).parent / "data"
REPORT = DATA / "report"
FIXTURE_SUBSETS = "all,affected,[0,tilim],[1,tilim],[10,tilim],[1000,tilim],diff-timeouts,both-solved"

positive = st.floats(min_value=1e-3, max_value=1e4)


def test_sgm_examples():
    assert shifted_geometric_mean([7, 7, 7], 3.5) == pytest.approx(7)
    assert shifted_geometric_mean([2, 8], 0) == pytest.approx(4)
    assert shifted_geometric_mean([2, 8], 1) == pytest.approx(math.sqrt(27) - 1, abs=1e-12)
    assert abs(shifted_geometric_mean([2, 8], 1) - 4.19615) <= 1e-5


def test_sgm_errors():
    with pytest.raises(ReportError):
        shifted_geometric_mean([], 1)
    with pytest.raises(ReportError):
        shifted_geometric_mean([-2.0], 1)


@given(st.lists(positive, min_size=1, max_size=20))
def test_sgm_shift_zero_is_geometric_mean(vals):
    gm = math.exp(sum(math.log(v) for v in vals) / len(vals))
    assert shifted_geometric_mean(vals, 0) == pytest.approx(gm, rel=1e-9)


@given(st.lists(positive, min_size=1, max_size=20), st.floats(0.01, 100))
def test_sgm_homogeneous(vals, c):
    scaled = shifted_geometric_mean([c * v for v in vals], 0)
    assert scaled == pytest.approx(c * shifted_geometric_mean(vals, 0), rel=1e-9)


@given(st.lists(positive, min_size=1, max_size=20), st.integers(0, 19), st.floats(0.0, 50.0),
       st.floats(0.0, 100.0))
def test_sgm_monotone(vals, k, bump, shift):
    k %= len(vals)
    more = list(vals)
    more[k] += bump
    assert shifted_geometric_mean(more, shift) >= shifted_geometric_mean(vals, shift) - 1e-9


def test_single_run_all_counts_file_length():
    runs = read_runs(REPORT / "run_b")
    rows = aggregate_runs([runs], ["all"])
    assert rows[0].instances == len(runs) == 3
    assert rows[0].rel_time == []


def test_identical_runs_ratio_one():
    runs = read_runs(REPORT / "run_a")
    rows = aggregate_runs([runs, list(runs)])
    for row in rows:
        assert all(r == 1.0 or math.isnan(r) for r in row.rel_time + row.rel_nodes)


def test_timeouts_counted_at_limit():
    a = read_runs(REPORT / "run_a")
    p3 = [r for r in a if r.name == "p3"][0]
    assert not p3.solved(7200) and p3.effective_time(7200) == 7200


def test_fixture_table_matches_golden():
    subsets = ["all", "affected", "[0,tilim]", "[1,tilim]", "[10,tilim]", "[1000,tilim]",
               "diff-timeouts", "both-solved"]
    text = report([str(REPORT / "run_a") + "/", str(REPORT / "run_b")], subsets)
    assert text == (REPORT / "golden_table.txt").read_text()


def test_table_is_deterministic():
    paths = [str(REPORT / "run_a"), str(REPORT / "run_b")]
    assert report(paths) == report(paths)


def test_mismatched_instances_rejected():
    a = parse_runs("p1 optimal 1 1 0 0\np2 optimal 1 1 0 0\n")
    b = parse_runs("p1 optimal 1 1 0 0\n")
    with pytest.raises(ReportError):
        aggregate_runs([a, b])


def test_bad_run_lines():
    with pytest.raises(ReportError):
        parse_runs("p1 optimal 1\n")
    with pytest.raises(ReportError):
        parse_runs("p1 optimal x 1 0 0\n")
    with pytest.raises(ReportError):
        parse_runs("p1 optimal 1 1 0 0\np1 optimal 1 1 0 0\n")


# ---------------------------------------------------------------------------
# command line

def test_cli_solve_and_check(tmp_path, capsys):
    inst = tmp_path / "knap.inst"
    inst.write_text((DATA / "corpus" / "knapsack.inst").read_text())
    assert main(["solve", str(inst), "--record", str(tmp_path / "runs.res")]) == 0
    out = capsys.readouterr().out
    assert "status: optimal" in out and "primal bound: 9.0" in out
    assert f"solution: {tmp_path / 'knap.sol'}" in out
    assert (tmp_path / "knap.sol").read_text() == (DATA / "golden" / "knapsack.sol").read_text()
    assert main(["check", str(inst), str(tmp_path / "knap.sol")]) == 0
    assert "max violation: 0.000e+00" in capsys.readouterr().out
    runs = read_runs(tmp_path / "runs.res")
    assert runs[0].name == "knap" and runs[0].status == "optimal"


def test_cli_check_reports_violation(tmp_path, capsys):
    inst = tmp_path / "knap.inst"
    inst.write_text((DATA / "corpus" / "knapsack.inst").read_text())
    sol = tmp_path / "bad.sol"
    sol.write_text("status=optimal\nx1=1\nx2=1\nx3=1\n")
    assert main(["check", str(inst), str(sol)]) == 2
    assert "cap" in capsys.readouterr().out


def test_cli_report_reproduces_fixture(capsys):
    assert main(["report", str(REPORT / "run_a") + "/", str(REPORT / "run_b"),
                 "--subsets", FIXTURE_SUBSETS]) == 0
    assert capsys.readouterr().out == (REPORT / "golden_table.txt").read_text()


def test_cli_presolve(tmp_path, capsys):
    inst = tmp_path / "d.inst"
    inst.write_text("[VARS]\nx continuous [0, inf]; y continuous [0, inf]\n[OBJ]\nmin x + 2*y\n"
                    "[LINEAR]\ne: x + y == 1\n")
    assert main(["presolve", str(inst)]) == 0
    assert (tmp_path / "d.pre.inst").exists() and (tmp_path / "d.pre.stack").exists()


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["solve", str(tmp_path / "missing.inst")]) == 1
    bad = tmp_path / "bad.inst"
    bad.write_text("[VARS]\nx binary\nx binary\n")
    assert main(["solve", str(bad)]) == 1
    infeasible = tmp_path / "inf.inst"
    infeasible.write_text("[VARS]\nx binary\n[OBJ]\nmin x\n[LINEAR]\nr: x >= 2\n")
    assert main(["solve", str(infeasible)]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["solve"])
    assert exc.value.code == 1
    assert main(["solve", str(DATA / "corpus" / "knapsack.inst"), "--heuristics", "magic",
                 "-o", str(tmp_path / "k.sol")]) == 1
