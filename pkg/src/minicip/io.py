"""Readers and writers for instances, solutions, decompositions and symmetries.

See ``docs/formats.md`` for the grammars.  Floats are written with the
shortest repr that round-trips (instances) or with 17 significant digits
(solutions), so every value survives a write/read cycle bit-for-bit.
"""
from __future__ import annotations

import math
import re
from pathlib import Path
from typing import Sequence

from .expr import ExprDag, ExprSyntaxError, UnknownIdentifier, linear_coefficients, parse_expression, to_text
from .model import INF, Instance, LinearRow, NonlinearRow, Variable

__all__ = [
    "ParseError", "Instance", "read_instance", "parse_instance", "write_instance", "format_instance",
    "write_solution", "read_solution", "format_solution", "parse_solution",
    "read_decomposition", "write_decomposition", "read_symmetries", "write_symmetries",
    "read_mps",
]


class ParseError(ValueError):
    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


def fmt_num(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def parse_num(text: str, line: int | None = None) -> float:
    t = text.strip().lower()
    if t in ("inf", "+inf", "infinity", "+infinity"):
        return INF
    if t in ("-inf", "-infinity"):
        return -INF
    try:
        return float(t)
    except ValueError:
        raise ParseError(f"expected a number, found {text.strip()!r}", line) from None


# ---------------------------------------------------------------------------
# instances

_SECTION = re.compile(r"^\[(VARS|OBJ|LINEAR|NONLINEAR)\]$", re.IGNORECASE)
_VARDECL = re.compile(r"^([A-Za-z_][A-Za-z0-9_.\[\]]*)\s+(binary|integer|continuous)\b\s*(.*)$", re.IGNORECASE)
_OBJ = re.compile(r"^(min|max|minimize|maximize)\b\s*(.*)$", re.IGNORECASE)
_CMP = re.compile(r"(<=|>=|==|=<|=>|=)")
_ROWNAME = re.compile(r"^([A-Za-z_][A-Za-z0-9_.\[\]]*)\s*:(?!=)\s*(.*)$")


def _statements(text: str):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        for part in line.split(";"):
            part = part.strip()
            if part:
                yield lineno, part


def parse_instance(text: str, name: str = "") -> Instance:
    inst = Instance(name=name)
    section = None
    names: dict[str, int] = {}
    pending: list[tuple[int, str, str | None]] = []
    obj_seen = False
    for lineno, stmt in _statements(text):
        m = _SECTION.match(stmt)
        if m:
            section = m.group(1).upper()
            continue
        if section == "VARS" or (section is None and _VARDECL.match(stmt)):
            _parse_var(inst, names, stmt, lineno)
        elif section == "OBJ" or (section is None and _OBJ.match(stmt)):
            if obj_seen:
                raise ParseError("duplicate objective", lineno)
            obj_seen = True
            pending.append((lineno, stmt, "OBJ"))
        else:
            pending.append((lineno, stmt, section))
    for lineno, stmt, sect in pending:
        if sect == "OBJ":
            _parse_objective(inst, names, stmt, lineno)
        else:
            _parse_row(inst, names, stmt, lineno, sect)
    return inst


def _parse_var(inst: Instance, names: dict[str, int], stmt: str, lineno: int) -> None:
    m = _VARDECL.match(stmt)
    if not m:
        raise ParseError(f"bad variable declaration {stmt!r}", lineno)
    vname, kind, rest = m.group(1), m.group(2).lower(), m.group(3).strip()
    if vname in names:
        raise ParseError(f"duplicate variable name {vname!r}", lineno)
    lb, ub = (0.0, 1.0) if kind == "binary" else (0.0, INF)
    if rest:
        bm = re.match(r"^\[\s*([^,\]]+)\s*,\s*([^\]]+)\s*\]$", rest)
        if not bm:
            raise ParseError(f"bad bounds {rest!r}", lineno)
        lb, ub = parse_num(bm.group(1), lineno), parse_num(bm.group(2), lineno)
    if lb > ub:
        raise ParseError(f"crossed bounds for {vname!r}", lineno)
    names[vname] = inst.add_var(vname, lb, ub, kind != "continuous")


def _parse_expr(inst: Instance, names, text: str, lineno: int) -> int:
    try:
        _, root = parse_expression(text, names, inst.dag)
    except UnknownIdentifier as e:
        raise ParseError(f"unknown variable {e.name!r}", lineno) from None
    except ExprSyntaxError as e:
        raise ParseError(str(e), lineno) from None
    return inst.dag.simplify(root)


def _parse_objective(inst: Instance, names, stmt: str, lineno: int) -> None:
    m = _OBJ.match(stmt)
    if not m:
        raise ParseError(f"objective must start with min or max: {stmt!r}", lineno)
    inst.sense = "min" if m.group(1).lower().startswith("min") else "max"
    body = m.group(2).strip() or "0"
    root = _parse_expr(inst, names, body, lineno)
    lin = linear_coefficients(inst.dag, root)
    if lin is None:
        raise ParseError("objective must be linear", lineno)
    inst.objective = {j: a for j, a in sorted(lin[0].items()) if a != 0.0}
    inst.obj_offset = lin[1]


def _is_number(text: str) -> bool:
    try:
        parse_num(text)
    except ParseError:
        return False
    return True


def _parse_row(inst: Instance, names, stmt: str, lineno: int, section: str | None) -> None:
    m = _ROWNAME.match(stmt)
    rname = None
    if m:
        rname, stmt = m.group(1), m.group(2)
        if any(r.name == rname for r in inst.linear) or any(r.name == rname for r in inst.nonlinear):
            raise ParseError(f"duplicate row name {rname!r}", lineno)
    parts = _CMP.split(stmt)
    if len(parts) not in (3, 5):
        raise ParseError(f"expected a constraint, found {stmt!r}", lineno)
    ops = [p.replace("=<", "<=").replace("=>", ">=") for p in parts[1::2]]
    ops = ["==" if o == "=" else o for o in ops]
    lhs, rhs = -INF, INF
    if len(parts) == 5:
        if ops != ["<=", "<="] and ops != [">=", ">="]:
            raise ParseError("ranged constraints need matching <= or >=", lineno)
        a, b = parse_num(parts[0], lineno), parse_num(parts[4], lineno)
        lhs, rhs = (a, b) if ops[0] == "<=" else (b, a)
        body_text = parts[2]
    else:
        left, op, right = parts[0], ops[0], parts[2]
        if _is_number(left) and not _is_number(right):
            # "v <= expr" reads as "expr >= v"
            left, right = right, left
            op = {"<=": ">=", ">=": "<=", "==": "=="}[op]
        if _is_number(right):
            val = parse_num(right, lineno)
            body_text = left
        else:
            body_text = f"({left}) - ({right})"
            val = 0.0
        if op == "<=":
            rhs = val
        elif op == ">=":
            lhs = val
        else:
            lhs = rhs = val
    root = _parse_expr(inst, names, body_text, lineno)
    if lhs > rhs:
        raise ParseError("constraint sides cross", lineno)
    node = inst.dag[root]
    lin = linear_coefficients(inst.dag, root)
    if section == "LINEAR" and lin is None:
        raise ParseError("nonlinear expression in [LINEAR] section", lineno)
    if lin is not None and section != "NONLINEAR":
        coeffs, const = lin
        inst.add_linear({j: a for j, a in sorted(coeffs.items()) if a != 0.0},
                        lhs - const, rhs - const, rname or f"c{len(inst.linear) + 1}")
        return
    if node.op == "sum" and node.value != 0.0:
        const = node.value
        root = inst.dag.sum(node.children, node.coeffs, 0.0)
        lhs, rhs = lhs - const, rhs - const
    inst.add_nonlinear(root, lhs, rhs, rname or f"n{len(inst.nonlinear) + 1}")


def read_instance(path) -> Instance:
    path = Path(path)
    if path.suffix.lower() == ".mps":
        return read_mps(path)
    return parse_instance(path.read_text(), name=path.stem)


def _linear_text(coeffs: dict[int, float], names: Sequence[str]) -> str:
    parts = []
    for j in sorted(coeffs):
        a = coeffs[j]
        mag = abs(a)
        term = names[j] if mag == 1.0 else f"{fmt_num(mag)}*{names[j]}"
        parts.append(("-" if a < 0 else "+", term))
    if not parts:
        return "0"
    out = ("-" if parts[0][0] == "-" else "") + parts[0][1]
    for sign, term in parts[1:]:
        out += f" {sign} {term}"
    return out


def _sides(body: str, lhs: float, rhs: float) -> str:
    if lhs == rhs:
        return f"{body} == {fmt_num(rhs)}"
    if math.isfinite(lhs) and math.isfinite(rhs):
        return f"{fmt_num(lhs)} <= {body} <= {fmt_num(rhs)}"
    if math.isfinite(lhs):
        return f"{body} >= {fmt_num(lhs)}"
    return f"{body} <= {fmt_num(rhs)}"


def format_instance(inst: Instance) -> str:
    names = inst.names
    out = ["[VARS]"]
    for v in inst.variables:
        if v.integer and v.lb == 0.0 and v.ub == 1.0:
            out.append(f"{v.name} binary")
        else:
            kind = "integer" if v.integer else "continuous"
            out.append(f"{v.name} {kind} [{fmt_num(v.lb)}, {fmt_num(v.ub)}]")
    out.append("[OBJ]")
    obj = _linear_text(inst.objective, names) if inst.objective else ""
    if inst.obj_offset:
        off = fmt_num(abs(inst.obj_offset))
        obj = (f"{obj} {'-' if inst.obj_offset < 0 else '+'} {off}" if obj
               else fmt_num(inst.obj_offset))
    out.append(f"{inst.sense} {obj or '0'}")
    out.append("[LINEAR]")
    for row in inst.linear:
        out.append(f"{row.name}: {_sides(_linear_text(row.coeffs, names), row.lhs, row.rhs)}")
    out.append("[NONLINEAR]")
    for row in inst.nonlinear:
        out.append(f"{row.name}: {_sides(to_text(inst.dag, row.root, names), row.lhs, row.rhs)}")
    return "\n".join(out) + "\n"


def write_instance(path, inst: Instance) -> None:
    Path(path).write_text(format_instance(inst))


# ---------------------------------------------------------------------------
# solutions

def format_solution(status: str, x: Sequence[float] | None, names: Sequence[str],
                    objective: float | None = None) -> str:
    out = [f"status={status}"]
    if x is not None:
        if objective is not None:
            out.append(f"objective={format(objective, '.17g')}")
        for name, v in zip(names, x):
            out.append(f"{name}={format(float(v), '.17g')}")
    return "\n".join(out) + "\n"


def write_solution(path, result, instance: Instance) -> None:
    """Write ``result`` (anything with status/incumbent/primal_bound) as name=value lines."""
    x = getattr(result, "incumbent", None)
    obj = getattr(result, "primal_bound", None) if x is not None else None
    Path(path).write_text(format_solution(result.status, x, instance.names, obj))


def parse_solution(text: str, instance: Instance) -> tuple[str | None, list[float] | None]:
    idx = instance.name_map()
    status = None
    x: list[float | None] = [None] * instance.n
    seen_value = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected name=value, found {line!r}", lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        if key == "status":
            status = val
            continue
        if key == "objective":
            continue
        if key not in idx:
            raise ParseError(f"unknown variable {key!r}", lineno)
        x[idx[key]] = parse_num(val, lineno)
        seen_value = True
    if not seen_value:
        return status, None
    missing = [instance.names[j] for j, v in enumerate(x) if v is None]
    if missing:
        raise ParseError(f"solution lacks values for {', '.join(missing)}")
    return status, [float(v) for v in x]  # type: ignore[arg-type]


def read_solution(path, instance: Instance) -> list[float] | None:
    return parse_solution(Path(path).read_text(), instance)[1]


# ---------------------------------------------------------------------------
# decompositions

def read_decomposition(path, instance: Instance):
    return parse_decomposition(Path(path).read_text(), instance)


def parse_decomposition(text: str, instance: Instance):
    from .decomp import LINKING, Decomposition

    rows = {r.name: i for i, r in enumerate(instance.linear)}
    nrows = {r.name: i for i, r in enumerate(instance.nonlinear)}
    cols = instance.name_map()
    k = None
    row_label = [LINKING] * len(instance.linear)
    nl_label = [LINKING] * len(instance.nonlinear)
    col_label: list[int | None] = [None] * instance.n
    section = None
    block = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        key = toks[0].upper()
        if key == "NBLOCKS":
            k = int(toks[1]) if len(toks) > 1 else None
            section = "NBLOCKS"
            continue
        if key == "BLOCK":
            if k is None:
                raise ParseError("BLOCK before NBLOCKS", lineno)
            block = int(toks[1]) - 1
            if not 0 <= block < k:
                raise ParseError(f"block {toks[1]} out of range", lineno)
            section = "BLOCK"
            continue
        if key in ("MASTERCONSS", "LINKINGVARS"):
            section = key
            continue
        if section == "NBLOCKS" and k is None:
            k = int(toks[0])
            continue
        for name in toks:
            if section == "BLOCK":
                if name in rows:
                    row_label[rows[name]] = block
                elif name in nrows:
                    nl_label[nrows[name]] = block
                elif name in cols:
                    col_label[cols[name]] = block
                else:
                    raise ParseError(f"unknown row or variable {name!r}", lineno)
            elif section == "MASTERCONSS":
                if name in rows:
                    row_label[rows[name]] = LINKING
                elif name in nrows:
                    nl_label[nrows[name]] = LINKING
                else:
                    raise ParseError(f"unknown row {name!r}", lineno)
            elif section == "LINKINGVARS":
                if name not in cols:
                    raise ParseError(f"unknown variable {name!r}", lineno)
                col_label[cols[name]] = LINKING
            else:
                raise ParseError(f"unexpected entry {name!r}", lineno)
    if k is None:
        raise ParseError("missing NBLOCKS")
    # unlabeled columns: the unique block of the rows they appear in, else linking
    touch: list[set[int]] = [set() for _ in range(instance.n)]
    for i, row in enumerate(instance.linear):
        if row_label[i] != LINKING:
            for j in row.coeffs:
                touch[j].add(row_label[i])
    for i, row in enumerate(instance.nonlinear):
        if nl_label[i] != LINKING:
            for j in instance.dag.variables(row.root):
                touch[j].add(nl_label[i])
    final_cols = []
    for j in range(instance.n):
        if col_label[j] is not None:
            final_cols.append(col_label[j])
        elif len(touch[j]) == 1:
            final_cols.append(next(iter(touch[j])))
        else:
            final_cols.append(LINKING)
    return Decomposition(k, row_label, final_cols, nl_label)


def format_decomposition(dec, instance: Instance) -> str:
    from .decomp import LINKING

    out = [f"NBLOCKS {dec.k}"]
    for q in range(dec.k):
        out.append(f"BLOCK {q + 1}")
        out += [instance.linear[i].name for i, lab in enumerate(dec.row_label) if lab == q]
        out += [instance.nonlinear[i].name for i, lab in enumerate(dec.nl_label) if lab == q]
        out += [instance.variables[j].name for j, lab in enumerate(dec.col_label) if lab == q]
    out.append("MASTERCONSS")
    out += [instance.linear[i].name for i, lab in enumerate(dec.row_label) if lab == LINKING]
    out += [instance.nonlinear[i].name for i, lab in enumerate(dec.nl_label) if lab == LINKING]
    out.append("LINKINGVARS")
    out += [instance.variables[j].name for j, lab in enumerate(dec.col_label) if lab == LINKING]
    return "\n".join(out) + "\n"


def write_decomposition(path, dec, instance: Instance) -> None:
    Path(path).write_text(format_decomposition(dec, instance))


# ---------------------------------------------------------------------------
# symmetries

_CYCLE = re.compile(r"\(([^()]*)\)")


def parse_symmetries(text: str, n: int):
    from .symmetry import Permutation

    perms = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if _CYCLE.sub("", line).strip():
            raise ParseError(f"expected cycle notation, found {line!r}", lineno)
        image = list(range(n))
        used: set[int] = set()
        for cyc in _CYCLE.findall(line):
            try:
                elems = [int(t) - 1 for t in cyc.replace(",", " ").split()]
            except ValueError:
                raise ParseError(f"bad cycle ({cyc})", lineno) from None
            for e in elems:
                if not 0 <= e < n:
                    raise ParseError(f"index {e + 1} out of range 1..{n}", lineno)
                if e in used:
                    raise ParseError(f"index {e + 1} appears twice", lineno)
                used.add(e)
            for a, b in zip(elems, elems[1:] + elems[:1]):
                image[a] = b
        perms.append(Permutation(tuple(image)))
    return perms


def read_symmetries(path, n: int):
    return parse_symmetries(Path(path).read_text(), n)


def write_symmetries(path, perms) -> None:
    Path(path).write_text("".join(p.cycle_text() + "\n" for p in perms))


# ---------------------------------------------------------------------------
# MPS (linear subset, free format)

def read_mps(path) -> Instance:
    return parse_mps(Path(path).read_text(), Path(path).stem)


def parse_mps(text: str, name: str = "") -> Instance:
    inst = Instance(name=name)
    section = None
    row_sense: dict[str, str] = {}
    row_index: dict[str, int] = {}
    obj_row = None
    cols: dict[str, int] = {}
    integer_mode = False
    coeffs: dict[str, dict[int, float]] = {}
    rhs_vals: dict[str, float] = {}
    ranges: dict[str, float] = {}
    bounded: set[int] = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        if not raw.strip() or raw.lstrip().startswith("*"):
            continue
        toks = raw.split()
        if not raw[0].isspace():
            section = toks[0].upper()
            if section == "NAME" and len(toks) > 1:
                inst.name = toks[1]
            if section == "OBJSENSE" and len(toks) > 1:
                inst.sense = "max" if toks[1].upper().startswith("MAX") else "min"
            if section == "ENDATA":
                break
            continue
        if section == "OBJSENSE":
            inst.sense = "max" if toks[0].upper().startswith("MAX") else "min"
        elif section == "ROWS":
            sense, rname = toks[0].upper(), toks[1]
            if sense == "N":
                if obj_row is None:
                    obj_row = rname
                continue
            if sense not in ("L", "G", "E"):
                raise ParseError(f"unknown row type {sense}", lineno)
            row_sense[rname] = sense
            row_index[rname] = len(row_index)
            coeffs[rname] = {}
        elif section == "COLUMNS":
            if len(toks) >= 3 and toks[1].upper() == "'MARKER'":
                integer_mode = "'INTORG'" in (t.upper() for t in toks[2:])
                continue
            cname = toks[0]
            if cname not in cols:
                cols[cname] = inst.add_var(cname, 0.0, INF, integer_mode)
                if integer_mode:
                    inst.variables[cols[cname]].ub = INF
            j = cols[cname]
            for rname, val in zip(toks[1::2], toks[2::2]):
                v = parse_num(val, lineno)
                if rname == obj_row:
                    inst.objective[j] = v
                elif rname in coeffs:
                    coeffs[rname][j] = v
                else:
                    raise ParseError(f"unknown row {rname!r}", lineno)
        elif section == "RHS":
            pairs = toks[1:] if len(toks) % 2 == 1 else toks
            for rname, val in zip(pairs[0::2], pairs[1::2]):
                if rname == obj_row:
                    inst.obj_offset = -parse_num(val, lineno)
                else:
                    rhs_vals[rname] = parse_num(val, lineno)
        elif section == "RANGES":
            pairs = toks[1:] if len(toks) % 2 == 1 else toks
            for rname, val in zip(pairs[0::2], pairs[1::2]):
                ranges[rname] = parse_num(val, lineno)
        elif section == "BOUNDS":
            btype = toks[0].upper()
            cname = toks[2] if len(toks) >= 3 else toks[1]
            if cname not in cols:
                raise ParseError(f"unknown column {cname!r}", lineno)
            var = inst.variables[cols[cname]]
            val = parse_num(toks[3], lineno) if len(toks) >= 4 else 0.0
            bounded.add(cols[cname])
            if btype == "UP":
                var.ub = val
                if val < 0 and var.lb == 0.0:
                    var.lb = -INF
            elif btype == "LO":
                var.lb = val
            elif btype == "FX":
                var.lb = var.ub = val
            elif btype == "FR":
                var.lb, var.ub = -INF, INF
            elif btype == "MI":
                var.lb = -INF
            elif btype == "PL":
                var.ub = INF
            elif btype == "BV":
                var.lb, var.ub, var.integer = 0.0, 1.0, True
            elif btype == "LI":
                var.lb, var.integer = val, True
            elif btype == "UI":
                var.ub, var.integer = val, True
            else:
                raise ParseError(f"unsupported bound type {btype}", lineno)
        else:
            raise ParseError(f"unsupported section {section}", lineno)
    for j, var in enumerate(inst.variables):
        if var.integer and j not in bounded:
            var.ub = 1.0  # MPS convention for unbounded integer markers
    for rname, idx in row_index.items():
        sense = row_sense[rname]
        b = rhs_vals.get(rname, 0.0)
        lhs, rhs = {"L": (-INF, b), "G": (b, INF), "E": (b, b)}[sense]
        if rname in ranges:
            r = ranges[rname]
            if sense == "L":
                lhs = b - abs(r)
            elif sense == "G":
                rhs = b + abs(r)
            else:
                lhs, rhs = (b, b + r) if r > 0 else (b + r, b)
        inst.add_linear(coeffs[rname], lhs, rhs, rname)
    return inst
