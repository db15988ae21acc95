"""Command-line driver: ``minicip solve|presolve|check|report``.

Exit codes: 0 success, 1 usage or unreadable input, 2 infeasible (the
instance was proved infeasible, or ``check`` found a violation above 1e-6),
3 internal invariant breach.
"""

from __future__ import annotations

import argparse
import re
import sys
from pathlib import Path

from . import io as mio
from .model import FEASTOL

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with 2, which means "infeasible" here
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="minicip", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve an instance")
    s.add_argument("instance")
    s.add_argument("--time-limit", type=float, default=float("inf"))
    s.add_argument("--node-limit", type=int, default=100000)
    s.add_argument("--gap-rel", type=float, default=1e-4)
    s.add_argument("--gap-abs", type=float, default=1e-6)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--sym", metavar="FILE", help="symmetry generators (.sym)")
    s.add_argument("--dec", metavar="FILE", help="decomposition (.dec)")
    s.add_argument("--heuristics", default="dps,padm",
                   help="comma-separated decomposition heuristics (dps, padm; empty for none)")
    s.add_argument("--no-presolve", action="store_true")
    s.add_argument("-o", "--out", help="solution file (default: instance path with .sol)")
    s.add_argument("--record", metavar="FILE", help="append a run-result line to FILE")

    s = sub.add_parser("presolve", help="write the presolved instance and its postsolve stack")
    s.add_argument("instance")
    s.add_argument("-o", "--out", help="reduced instance (default: <stem>.pre.inst)")
    s.add_argument("--stack", help="postsolve stack (default: <stem>.pre.stack)")
    s.add_argument("--rounds", type=int, default=25)

    s = sub.add_parser("check", help="check a solution against an instance")
    s.add_argument("instance")
    s.add_argument("solution")

    s = sub.add_parser("report", help="aggregate run-result files into a subset table")
    s.add_argument("runs", nargs="+", help="result files or directories of *.res files")
    s.add_argument("--subsets", default=None, help="comma-separated subsets (default: all)")
    s.add_argument("--time-limit", type=float, default=7200.0)
    return p


def _solve(args) -> int:
    from .sbb import INFEASIBLE, SolveParams, check_original_feasibility, solve

    inst = mio.read_instance(args.instance)
    heur = tuple(h for h in args.heuristics.split(",") if h)
    unknown = set(heur) - {"dps", "padm"}
    if unknown:
        print(f"unknown heuristic(s): {', '.join(sorted(unknown))}", file=sys.stderr)
        return EXIT_USAGE
    params = SolveParams(time_limit=args.time_limit, node_limit=args.node_limit,
                         gap_rel=args.gap_rel, gap_abs=args.gap_abs, seed=args.seed,
                         presolve=not args.no_presolve, decomposition_heuristics=heur)
    sym = mio.read_symmetries(args.sym, inst.n) if args.sym else None
    dec = mio.read_decomposition(args.dec, inst) if args.dec else None
    res = solve(inst, params, symmetries=sym, decomposition=dec)
    if res.incumbent is not None and not check_original_feasibility(inst, res.incumbent).feasible:
        print("internal error: incumbent violates the original instance", file=sys.stderr)
        return EXIT_INTERNAL
    out = Path(args.out) if args.out else Path(args.instance).with_suffix(".sol")
    mio.write_solution(out, res, inst)
    print(f"status: {res.status}")
    print(f"primal bound: {res.primal_bound!r}")
    print(f"dual bound: {res.dual_bound!r}")
    print(f"nodes: {res.nodes_processed}")
    print(f"time: {res.time:.3f}")
    print(f"solution: {out}")
    if args.record:
        from .report import format_run

        with open(args.record, "a") as fh:
            fh.write(format_run(Path(args.instance).stem, res.status, res.time, res.nodes_processed,
                                res.primal_bound, res.dual_bound, res.lp_iterations) + "\n")
    return EXIT_INFEASIBLE if res.status == INFEASIBLE else EXIT_OK


def _presolve(args) -> int:
    from .presolve import INFEASIBLE, run_presolve

    inst = mio.read_instance(args.instance)
    reduced, stack, stats = run_presolve(inst, rounds=args.rounds)
    if stats.status == INFEASIBLE:
        print(f"infeasible: {stats.certificate.kind} {stats.certificate.payload}")
        return EXIT_INFEASIBLE
    src = Path(args.instance)
    out = Path(args.out) if args.out else src.with_suffix(".pre.inst")
    stack_path = Path(args.stack) if args.stack else src.with_suffix(".pre.stack")
    mio.write_instance(out, reduced)
    stack_path.write_text(stack.to_text())
    applied = ", ".join(f"{k}={v}" for k, v in stats.applied.items() if v)
    print(f"rounds: {stats.rounds}; applied: {applied or 'none'}; rejected: {stats.rejected}")
    print(f"columns: {inst.n} -> {reduced.n}; linear rows: {len(inst.linear)} -> {len(reduced.linear)}")
    print(f"reduced instance: {out}")
    print(f"postsolve stack: {stack_path}")
    return EXIT_OK


def _check(args) -> int:
    from .sbb import check_original_feasibility

    inst = mio.read_instance(args.instance)
    status, x = mio.parse_solution(Path(args.solution).read_text(), inst)
    if x is None:
        print(f"status: {status}; no solution values to check")
        return EXIT_INFEASIBLE
    rep = check_original_feasibility(inst, x)
    worst = sorted(rep.violations.items(), key=lambda kv: -kv[1])
    print(f"objective: {inst.objective_value(x)!r}")
    print(f"max violation: {rep.max_violation:.3e}")
    for name, v in worst[:10]:
        if v > 0:
            print(f"  {name}: {v:.3e}")
    return EXIT_OK if rep.max_violation <= FEASTOL else EXIT_INFEASIBLE


def _report(args) -> int:
    from .report import DEFAULT_SUBSETS, report

    # commas separate subsets, except inside brackets such as "[10,tilim]"
    subsets = tuple(re.findall(r"\[[^\]]*\]|[^,]+", args.subsets)) if args.subsets \
        else DEFAULT_SUBSETS
    sys.stdout.write(report(args.runs, subsets, args.time_limit))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"solve": _solve, "presolve": _presolve, "check": _check, "report": _report}
    try:
        return handler[args.command](args)
    except (mio.ParseError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AssertionError as exc:
        print(f"internal invariant breach: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
