"""Benchmark aggregation: shifted geometric means and subset tables.

Run-result files hold one line per instance::

    name status time nodes primal dual [lp_iterations]

separated by whitespace; ``#`` starts a comment.  ``time`` may be the token
``tilim`` for a run stopped by the time limit.  Runs whose status is not
``optimal`` or ``infeasible`` count as unsolved, and their time is taken to
be the time limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

SOLVED = ("optimal", "infeasible")
TIME_SHIFT = 1.0
NODE_SHIFT = 100.0
DEFAULT_TIME_LIMIT = 7200.0
DEFAULT_SUBSETS = ("all", "affected", "[0,tilim]", "[1,tilim]", "[10,tilim]", "[100,tilim]",
                   "[1000,tilim]", "diff-timeouts", "both-solved")


class ReportError(ValueError):
    pass


def shifted_geometric_mean(values: Iterable[float], shift: float = 0.0) -> float:
    """``(prod (v_i + s))^(1/n) - s`` evaluated in log space."""
    vals = [float(v) for v in values]
    if not vals:
        raise ReportError("shifted geometric mean of an empty set")
    if shift < 0:
        raise ReportError("shift must be nonnegative")
    if any(v + shift <= 0 for v in vals):
        raise ReportError("values plus shift must be positive")
    return math.exp(math.fsum(math.log(v + shift) for v in vals) / len(vals)) - shift


@dataclass(frozen=True)
class Run:
    name: str
    status: str
    time: float
    nodes: float
    primal: float
    dual: float
    iterations: int | None = None

    def solved(self, time_limit: float) -> bool:
        return self.status in SOLVED and self.time <= time_limit

    def effective_time(self, time_limit: float) -> float:
        return self.time if self.solved(time_limit) else time_limit


def format_run(name: str, status: str, time: float, nodes: int, primal: float, dual: float,
               iterations: int | None = None) -> str:
    fields = [name, status, f"{time:.3f}", str(nodes), repr(float(primal)), repr(float(dual))]
    if iterations is not None:
        fields.append(str(iterations))
    return " ".join(fields)


def parse_runs(text: str, source: str = "<runs>") -> list[Run]:
    runs = []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if len(tok) not in (6, 7):
            raise ReportError(f"{source}:{lineno}: expected 6 or 7 fields, found {len(tok)}")
        if tok[0] in seen:
            raise ReportError(f"{source}:{lineno}: instance {tok[0]!r} listed twice")
        seen.add(tok[0])
        try:
            time = math.inf if tok[2] == "tilim" else float(tok[2])
            run = Run(tok[0], tok[1], time, float(tok[3]), float(tok[4]), float(tok[5]),
                      int(tok[6]) if len(tok) == 7 else None)
        except ValueError as exc:
            raise ReportError(f"{source}:{lineno}: {exc}") from None
        runs.append(run)
    return runs


def read_runs(path) -> list[Run]:
    """A result file, or a directory whose ``*.res`` files are concatenated."""
    path = Path(path)
    if path.is_dir():
        runs: list[Run] = []
        for f in sorted(path.glob("*.res")):
            runs += parse_runs(f.read_text(), str(f))
        names = [r.name for r in runs]
        if len(set(names)) != len(names):
            raise ReportError(f"{path}: instance listed in more than one file")
        return runs
    return parse_runs(path.read_text(), str(path))


def _bracket(subset: str) -> float | None:
    if subset.startswith("[") and subset.endswith(",tilim]"):
        return float(subset[1:-len(",tilim]")])
    return None


def subset_members(subset: str, configs: Sequence[Mapping[str, Run]], time_limit: float) -> list[str]:
    names = sorted(configs[0])
    solved = {n: [c[n].solved(time_limit) for c in configs] for n in names}
    if subset == "all":
        return names
    if subset == "both-solved":
        return [n for n in names if all(solved[n])]
    if subset == "diff-timeouts":
        return [n for n in names if any(solved[n]) and not all(solved[n])]
    if subset == "affected":
        out = []
        for n in names:
            its = [c[n].iterations for c in configs]
            if None not in its and len(set(its)) > 1:
                out.append(n)
        return out
    t = _bracket(subset)
    if t is not None:
        return [n for n in names if any(solved[n])
                and max(c[n].effective_time(time_limit) for c in configs) >= t]
    raise ReportError(f"unknown subset {subset!r}")


@dataclass
class TableRow:
    subset: str
    instances: int
    solved: list[int]
    time: list[float]
    nodes: list[float]
    rel_time: list[float]
    rel_nodes: list[float]


def aggregate_runs(runs: Mapping[str, Sequence[Run]] | Sequence[Sequence[Run]],
                   subsets: Sequence[str] = DEFAULT_SUBSETS,
                   time_limit: float = DEFAULT_TIME_LIMIT) -> list[TableRow]:
    """Per-subset counts, shifted geometric means and ratios to the first configuration."""
    groups = list(runs.values()) if isinstance(runs, Mapping) else list(runs)
    if not groups:
        raise ReportError("no configurations given")
    configs = [{r.name: r for r in g} for g in groups]
    for c in configs[1:]:
        if set(c) != set(configs[0]):
            diff = sorted(set(c) ^ set(configs[0]))
            raise ReportError(f"configurations cover different instances: {', '.join(diff)}")
    rows = []
    for subset in subsets:
        members = subset_members(subset, configs, time_limit)
        solved, times, nodes = [], [], []
        for c in configs:
            solved.append(sum(c[n].solved(time_limit) for n in members))
            if members:
                times.append(shifted_geometric_mean(
                    (c[n].effective_time(time_limit) for n in members), TIME_SHIFT))
                nodes.append(shifted_geometric_mean((c[n].nodes for n in members), NODE_SHIFT))
            else:
                times.append(math.nan)
                nodes.append(math.nan)
        rel_t = [_ratio(t, times[0]) for t in times[1:]]
        rel_n = [_ratio(v, nodes[0]) for v in nodes[1:]]
        rows.append(TableRow(subset, len(members), solved, times, nodes, rel_t, rel_n))
    return rows


def _ratio(a: float, b: float) -> float:
    if math.isnan(a) or math.isnan(b):
        return math.nan
    if a == b:
        return 1.0
    return a / b if b > 0 else math.inf


def _num(v: float, digits: int) -> str:
    return "-" if math.isnan(v) else f"{v:.{digits}f}"


def format_table(rows: Sequence[TableRow], names: Sequence[str]) -> str:
    """Fixed-width text table: per configuration solved/time/nodes, then relative columns."""
    head = ["Subset", "instances"]
    for name in names:
        head += [f"{name}:solved", f"{name}:time", f"{name}:nodes"]
    for name in names[1:]:
        head += [f"rel({name}):time", f"rel({name}):nodes"]
    body = []
    for r in rows:
        line = [r.subset, str(r.instances)]
        for s, t, nd in zip(r.solved, r.time, r.nodes):
            line += [str(s), _num(t, 1), _num(nd, 0)]
        for t, nd in zip(r.rel_time, r.rel_nodes):
            line += [_num(t, 2), _num(nd, 2)]
        body.append(line)
    widths = [max(len(x[k]) for x in [head] + body) for k in range(len(head))]

    def fmt(cells):
        first = cells[0].ljust(widths[0])
        rest = [c.rjust(w) for c, w in zip(cells[1:], widths[1:])]
        return "  ".join([first] + rest).rstrip()

    return "\n".join([fmt(head)] + [fmt(b) for b in body]) + "\n"


def report(paths: Sequence[str], subsets: Sequence[str] = DEFAULT_SUBSETS,
           time_limit: float = DEFAULT_TIME_LIMIT) -> str:
    names = [Path(str(p).rstrip("/")).name for p in paths]
    rows = aggregate_runs([read_runs(p) for p in paths], subsets, time_limit)
    return format_table(rows, names)
