"""Expression DAG: hash-consed storage, parsing, printing, and evaluation.

Node operators are deliberately few (var, const, sum, product, power, exp,
log, abs).  Everything else is built from them; ``a / b`` is stored as
``a * b^(-1)``.  Children always have smaller ids than their parents, so
iterating ids in ascending order is a topological order.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from . import interval as iv
from .interval import EMPTY, Interval

OPS = ("var", "const", "sum", "product", "power", "exp", "log", "abs")
UNARY = ("power", "exp", "log", "abs")


class DomainError(ValueError):
    """Raised when an expression is evaluated outside an operator's domain."""


class ExprSyntaxError(ValueError):
    def __init__(self, msg: str, pos: int):
        super().__init__(f"{msg} at position {pos}")
        self.pos = pos


class UnknownIdentifier(ValueError):
    def __init__(self, name: str, pos: int):
        super().__init__(f"unknown identifier {name!r} at position {pos}")
        self.name = name
        self.pos = pos


@dataclass(frozen=True)
class ExprNode:
    """One operator node.

    ``value`` holds the variable index (var), the constant (const), the
    exponent (power) or the constant offset (sum).  ``coeffs`` is only used
    by sum nodes.
    """

    op: str
    children: tuple[int, ...] = ()
    value: float = 0.0
    coeffs: tuple[float, ...] = ()

    @property
    def index(self) -> int:
        return int(self.value)


class ExprDag:
    def __init__(self) -> None:
        self.nodes: list[ExprNode] = []
        self.roots: list[int] = []
        self._ids: dict[tuple, int] = {}

    def __len__(self) -> int:
        return len(self.nodes)

    def __getitem__(self, i: int) -> ExprNode:
        return self.nodes[i]

    def _add(self, node: ExprNode) -> int:
        key = (node.op, node.children, node.value, node.coeffs)
        nid = self._ids.get(key)
        if nid is None:
            nid = len(self.nodes)
            self.nodes.append(node)
            self._ids[key] = nid
        return nid

    # -- constructors --------------------------------------------------
    def var(self, index: int) -> int:
        return self._add(ExprNode("var", value=float(index)))

    def const(self, value: float) -> int:
        return self._add(ExprNode("const", value=float(value)))

    def sum(self, children: Sequence[int], coeffs: Sequence[float] | None = None,
            constant: float = 0.0) -> int:
        if coeffs is None:
            coeffs = [1.0] * len(children)
        flat_c: list[int] = []
        flat_a: list[float] = []
        for ch, a in zip(children, coeffs):
            node = self.nodes[ch]
            if node.op == "sum":
                flat_c.extend(node.children)
                flat_a.extend(a * b for b in node.coeffs)
                constant += a * node.value
            else:
                flat_c.append(ch)
                flat_a.append(float(a))
        if not flat_c:
            return self.const(constant)
        if len(flat_c) == 1 and flat_a[0] == 1.0 and constant == 0.0:
            return flat_c[0]
        return self._add(ExprNode("sum", tuple(flat_c), float(constant), tuple(flat_a)))

    def product(self, children: Sequence[int]) -> int:
        flat: list[int] = []
        for ch in children:
            node = self.nodes[ch]
            if node.op == "product":
                flat.extend(node.children)
            else:
                flat.append(ch)
        if len(flat) == 1:
            return flat[0]
        return self._add(ExprNode("product", tuple(flat)))

    def power(self, child: int, exponent: float) -> int:
        return self._add(ExprNode("power", (child,), float(exponent)))

    def exp(self, child: int) -> int:
        return self._add(ExprNode("exp", (child,)))

    def log(self, child: int) -> int:
        return self._add(ExprNode("log", (child,)))

    def abs(self, child: int) -> int:
        return self._add(ExprNode("abs", (child,)))

    # -- structure -----------------------------------------------------
    def reachable(self, root: int) -> list[int]:
        """Ids reachable from ``root`` in ascending (topological) order."""
        seen = {root}
        stack = [root]
        while stack:
            n = stack.pop()
            for ch in self.nodes[n].children:
                if ch not in seen:
                    seen.add(ch)
                    stack.append(ch)
        return sorted(seen)

    def variables(self, root: int) -> list[int]:
        return sorted({self.nodes[n].index for n in self.reachable(root)
                       if self.nodes[n].op == "var"})

    def is_constant(self, root: int) -> bool:
        return all(self.nodes[n].op != "var" for n in self.reachable(root))

    def copy_into(self, other: "ExprDag", root: int, varmap: Mapping[int, int] | None = None,
                  replace: Mapping[int, int] | None = None) -> int:
        """Rebuild the subgraph at ``root`` inside ``other``.

        ``varmap`` renames variable indices; ``replace`` maps node ids of this
        DAG to already-built node ids of ``other`` (used to cut out
        subexpressions).
        """
        memo: dict[int, int] = dict(replace or {})
        for n in self.reachable(root):
            if n in memo:
                continue
            node = self.nodes[n]
            kids = [memo[c] for c in node.children]
            if node.op == "var":
                j = node.index if varmap is None else varmap[node.index]
                memo[n] = other.var(j)
            elif node.op == "const":
                memo[n] = other.const(node.value)
            elif node.op == "sum":
                memo[n] = other.sum(kids, node.coeffs, node.value)
            elif node.op == "product":
                memo[n] = other.product(kids)
            elif node.op == "power":
                memo[n] = other.power(kids[0], node.value)
            else:
                memo[n] = getattr(other, node.op)(kids[0])
        return memo[root]

    def simplify(self, root: int) -> int:
        """Constant folding plus merging of repeated sum/product children."""
        memo: dict[int, int] = {}
        for n in self.reachable(root):
            memo[n] = self._simplify_node(n, memo)
        return memo[root]

    def _const_of(self, n: int) -> float | None:
        node = self.nodes[n]
        return node.value if node.op == "const" else None

    def _simplify_node(self, n: int, memo: dict[int, int]) -> int:
        node = self.nodes[n]
        if node.op in ("var", "const"):
            return n
        kids = [memo[c] for c in node.children]
        if node.op == "sum":
            constant = node.value
            acc: dict[int, float] = {}
            order: list[int] = []
            # re-flatten through the sum constructor first
            tmp = self.sum(kids, node.coeffs, 0.0)
            tnode = self.nodes[tmp]
            if tnode.op == "sum":
                pairs = list(zip(tnode.children, tnode.coeffs))
                constant += tnode.value
            elif tnode.op == "const":
                pairs = []
                constant += tnode.value
            else:
                pairs = [(tmp, 1.0)]
            for ch, a in pairs:
                c = self._const_of(ch)
                if c is not None:
                    constant += a * c
                    continue
                if ch not in acc:
                    acc[ch] = 0.0
                    order.append(ch)
                acc[ch] += a
            order = [ch for ch in order if acc[ch] != 0.0]
            if not order:
                return self.const(constant)
            return self.sum(order, [acc[ch] for ch in order], constant)
        if node.op == "product":
            coef = 1.0
            counts: dict[int, int] = {}
            order = []
            flat = self.product(kids)
            fnode = self.nodes[flat]
            for ch in (fnode.children if fnode.op == "product" else (flat,)):
                c = self._const_of(ch)
                if c is not None:
                    coef *= c
                    continue
                cn = self.nodes[ch]
                if cn.op == "sum" and len(cn.children) == 1 and cn.value == 0.0:
                    # scalar multiple c*x: pull the scalar out
                    coef *= cn.coeffs[0]
                    ch = cn.children[0]
                if ch not in counts:
                    counts[ch] = 0
                    order.append(ch)
                counts[ch] += 1
            if not order:
                return self.const(coef)
            if coef == 0.0:
                return self.const(0.0)
            factors = [ch if counts[ch] == 1 else self.power(ch, float(counts[ch])) for ch in order]
            body = self.product(factors) if len(factors) > 1 else factors[0]
            if coef == 1.0:
                return body
            return self.sum([body], [coef])
        if node.op == "power":
            ch = kids[0]
            p = node.value
            if p == 1.0:
                return ch
            if p == 0.0:
                return self.const(1.0)
            c = self._const_of(ch)
            if c is not None:
                try:
                    return self.const(_pow_value(c, p))
                except DomainError:
                    return self.power(ch, p)
            inner = self.nodes[ch]
            if inner.op == "power" and float(inner.value).is_integer() and float(p).is_integer():
                return self.power(inner.children[0], inner.value * p)
            return self.power(ch, p)
        ch = kids[0]
        c = self._const_of(ch)
        if c is not None:
            try:
                return self.const(_unary_value(node.op, c))
            except DomainError:
                pass
        return getattr(self, node.op)(ch)


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_][A-Za-z0-9_.\[\]]*)|(\*\*|[-+*/^(),]))")
FUNCS = ("exp", "log", "abs")


def tokenize(text: str) -> list[tuple[str, str, int]]:
    toks = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        start = m.start(m.lastindex)
        if m.group(1) is not None:
            toks.append(("num", m.group(1), start))
        elif m.group(2) is not None:
            toks.append(("name", m.group(2), start))
        else:
            op = m.group(3)
            toks.append(("op", "^" if op == "**" else op, start))
        pos = m.end()
    toks.append(("end", "", n))
    return toks


class _Parser:
    def __init__(self, text: str, dag: ExprDag, names: Mapping[str, int]):
        self.toks = tokenize(text)
        self.i = 0
        self.dag = dag
        self.names = names

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, value: str):
        t = self.take()
        if t[1] != value or t[0] == "num":
            raise ExprSyntaxError(f"expected {value!r}, found {t[1] or 'end of input'!r}", t[2])
        return t

    def parse(self) -> int:
        root = self.expr()
        t = self.peek()
        if t[0] != "end":
            raise ExprSyntaxError(f"unexpected token {t[1]!r}", t[2])
        return root

    def expr(self) -> int:
        kids = [self.term()]
        coeffs = [1.0]
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            sign = 1.0 if self.take()[1] == "+" else -1.0
            kids.append(self.term())
            coeffs.append(sign)
        if len(kids) == 1:
            return kids[0]
        return self.dag.sum(kids, coeffs)

    def term(self) -> int:
        factors = [self.unary()]
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            f = self.unary()
            factors.append(f if op == "*" else self.dag.power(f, -1.0))
        if len(factors) == 1:
            return factors[0]
        return self.dag.product(factors)

    def unary(self) -> int:
        t = self.peek()
        if t[0] == "op" and t[1] in "+-":
            self.take()
            inner = self.unary()
            return inner if t[1] == "+" else self.dag.sum([inner], [-1.0])
        return self.powexpr()

    def powexpr(self) -> int:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            t = self.take()
            exp_root = self.unary()  # right associative, allows 2^-1
            value = _fold_constant(self.dag, exp_root)
            if value is None:
                raise ExprSyntaxError("exponent must be constant", t[2])
            return self.dag.power(base, value)
        return base

    def atom(self) -> int:
        t = self.take()
        kind, text, pos = t
        if kind == "num":
            return self.dag.const(float(text))
        if kind == "name":
            if text in FUNCS and self.peek()[1] == "(":
                self.take()
                arg = self.expr()
                self.expect(")")
                return getattr(self.dag, text)(arg)
            if text in self.names:
                return self.dag.var(self.names[text])
            if text in ("inf", "e", "pi"):
                return self.dag.const({"inf": math.inf, "e": math.e, "pi": math.pi}[text])
            raise UnknownIdentifier(text, pos)
        if kind == "op" and text == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        raise ExprSyntaxError(f"unexpected token {text or 'end of input'!r}", pos)


def _fold_constant(dag: ExprDag, root: int) -> float | None:
    if not dag.is_constant(root):
        return None
    try:
        return evaluate(dag, root, [])
    except DomainError:
        return None


def parse_expression(text: str, var_names: Mapping[str, int], dag: ExprDag | None = None) -> tuple[ExprDag, int]:
    """Parse infix ``text`` into ``dag`` (a fresh one if omitted).

    Returns ``(dag, root_id)``.  No folding happens here beyond flattening;
    call :meth:`ExprDag.simplify` for that.
    """
    if dag is None:
        dag = ExprDag()
    root = _Parser(text, dag, var_names).parse()
    return dag, root


# ---------------------------------------------------------------------------
# printing

def _fmt(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_text(dag: ExprDag, root: int, names: Sequence[str]) -> str:
    """Deterministic, re-parsable infix text for ``root``."""
    memo: dict[int, str] = {}

    def atomic(n: int) -> str:
        s = memo[n]
        node = dag[n]
        if node.op in ("var", "exp", "log", "abs") or (node.op == "const" and node.value >= 0 and not math.isinf(node.value)):
            return s
        return f"({s})"

    for n in dag.reachable(root):
        node = dag[n]
        if node.op == "var":
            memo[n] = names[node.index]
        elif node.op == "const":
            memo[n] = _fmt(node.value)
        elif node.op == "sum":
            parts = []
            for ch, a in zip(node.children, node.coeffs):
                mag = abs(a)
                body = atomic(ch) if dag[ch].op != "product" else memo[ch]
                term = body if mag == 1.0 else f"{_fmt(mag)}*{body}"
                parts.append(("-" if a < 0 else "+", term))
            if node.value != 0.0:
                parts.append(("-" if node.value < 0 else "+", _fmt(abs(node.value))))
            out = ("-" if parts[0][0] == "-" else "") + parts[0][1]
            for sign, term in parts[1:]:
                out += f" {sign} {term}"
            memo[n] = out
        elif node.op == "product":
            memo[n] = "*".join(atomic(ch) for ch in node.children)
        elif node.op == "power":
            p = node.value
            ptxt = _fmt(p) if p >= 0 else f"({_fmt(p)})"
            memo[n] = f"{atomic(node.children[0])}^{ptxt}"
        else:
            memo[n] = f"{node.op}({memo[node.children[0]]})"
    return memo[root]


# ---------------------------------------------------------------------------
# point evaluation

def _pow_value(x: float, p: float) -> float:
    if x == 0.0 and p < 0:
        raise DomainError("0 raised to a negative power")
    if x < 0.0 and not float(p).is_integer():
        raise DomainError("negative base with non-integer exponent")
    try:
        return math.pow(x, p)
    except OverflowError:
        return math.inf if (x > 0 or int(p) % 2 == 0) else -math.inf


def _unary_value(op: str, x: float) -> float:
    if op == "exp":
        try:
            return math.exp(x)
        except OverflowError:
            return math.inf
    if op == "log":
        if x <= 0.0:
            raise DomainError("log of nonpositive value")
        return math.log(x)
    if op == "abs":
        return abs(x)
    raise ValueError(op)


def forward_values(dag: ExprDag, root: int, point: Sequence[float]) -> dict[int, float]:
    vals: dict[int, float] = {}
    for n in dag.reachable(root):
        node = dag[n]
        op = node.op
        if op == "var":
            v = float(point[node.index])
        elif op == "const":
            v = node.value
        elif op == "sum":
            v = node.value
            for ch, a in zip(node.children, node.coeffs):
                v += a * vals[ch]
        elif op == "product":
            v = 1.0
            for ch in node.children:
                v *= vals[ch]
        elif op == "power":
            v = _pow_value(vals[node.children[0]], node.value)
        else:
            v = _unary_value(op, vals[node.children[0]])
        if math.isnan(v):
            raise DomainError(f"NaN at node {n}")
        vals[n] = v
    return vals


def evaluate(dag: ExprDag, root: int, point: Sequence[float]) -> float:
    return forward_values(dag, root, point)[root]


# ---------------------------------------------------------------------------
# interval evaluation and backward propagation

def forward_intervals(dag: ExprDag, root: int, box: Sequence[Interval]) -> dict[int, Interval]:
    ivs: dict[int, Interval] = {}
    for n in dag.reachable(root):
        node = dag[n]
        op = node.op
        if op == "var":
            r = box[node.index]
        elif op == "const":
            r = Interval(node.value, node.value)
        elif op == "sum":
            r = iv.linear([(a, ivs[ch]) for ch, a in zip(node.children, node.coeffs)], node.value)
        elif op == "product":
            r = ivs[node.children[0]]
            for ch in node.children[1:]:
                r = iv.mul(r, ivs[ch])
        elif op == "power":
            r = iv.power(ivs[node.children[0]], node.value)
        elif op == "exp":
            r = iv.exp(ivs[node.children[0]])
        elif op == "log":
            r = iv.log(ivs[node.children[0]])
        else:
            r = iv.absval(ivs[node.children[0]])
        ivs[n] = r
    return ivs


def interval_eval(dag: ExprDag, root: int, box: Sequence[Interval]) -> Interval:
    r = forward_intervals(dag, root, box)[root]
    return EMPTY if r.is_empty else r


def _invert_power(target: Interval, child: Interval, p: float) -> Interval:
    """Values of the child consistent with ``child^p in target``."""
    if float(p).is_integer():
        k = int(p)
        if k < 0:
            if target.lo < 0.0 < target.hi:
                return child
            return _invert_power(iv.reciprocal(target), child, -p)
        if k % 2 == 1:
            lo = -_root(-target.lo, k) if target.lo < 0 else _root(target.lo, k)
            hi = -_root(-target.hi, k) if target.hi < 0 else _root(target.hi, k)
            return child.intersect(iv.widen(Interval(lo, hi)))
        t = target.intersect(Interval(0.0, math.inf))
        if t.is_empty:
            return EMPTY
        r = iv.widen(Interval(_root(t.lo, k), _root(t.hi, k)))
        return iv.even_preimage(child, max(0.0, r.lo), r.hi)
    t = target.intersect(Interval(0.0, math.inf))
    if t.is_empty:
        return EMPTY
    if p > 0:
        r = Interval(iv._powf(t.lo, 1.0 / p), iv._powf(t.hi, 1.0 / p))
    else:
        if t.hi == 0.0:
            return EMPTY
        r = Interval(iv._powf(t.hi, 1.0 / p), iv._powf(t.lo, 1.0 / p))
    return child.intersect(iv.widen(r)).intersect(Interval(0.0, math.inf))


def _root(v: float, k: int) -> float:
    if math.isinf(v):
        return v
    return v ** (1.0 / k)


def backward_propagate(dag: ExprDag, root: int, target: Interval,
                       box: Sequence[Interval]) -> list[Interval] | None:
    """One root-to-leaves tightening pass.

    Returns the tightened box (a new list) or ``None`` when the constraint
    ``f(x) in target`` has no solution within ``box``.
    """
    ivs = forward_intervals(dag, root, box)
    cur = ivs[root].intersect(target)
    if cur.is_empty:
        return None
    ivs[root] = cur
    order = dag.reachable(root)
    for n in reversed(order):
        node = dag[n]
        here = ivs[n]
        if here.is_empty:
            return None
        op = node.op
        if op in ("var", "const"):
            if op == "const" and here.is_empty:
                return None
            continue
        kids = node.children
        if op == "sum":
            for k, (ch, a) in enumerate(zip(kids, node.coeffs)):
                if a == 0.0:
                    continue
                rest = iv.linear([(b, ivs[c]) for j, (c, b) in enumerate(zip(kids, node.coeffs)) if j != k],
                                 node.value)
                # a * child in here - rest
                diff = Interval(here.lo - rest.hi, here.hi - rest.lo)
                if math.isnan(diff.lo) or math.isnan(diff.hi):
                    continue
                new = iv.scale(1.0 / a, iv.widen(diff))
                ivs[ch] = ivs[ch].intersect(new)
        elif op == "product":
            for k, ch in enumerate(kids):
                rest = Interval(1.0, 1.0)
                for j, c in enumerate(kids):
                    if j != k:
                        rest = iv.mul(rest, ivs[c])
                if rest.lo <= 0.0 <= rest.hi:
                    continue
                ivs[ch] = ivs[ch].intersect(iv.divide(here, rest))
        elif op == "power":
            ivs[kids[0]] = _invert_power(here, ivs[kids[0]], node.value)
        elif op == "exp":
            t = here.intersect(Interval(0.0, math.inf))
            if t.is_empty or t.hi <= 0.0:
                return None
            ivs[kids[0]] = ivs[kids[0]].intersect(iv.log(t))
        elif op == "log":
            ivs[kids[0]] = ivs[kids[0]].intersect(iv.exp(here))
        else:  # abs
            t = here.intersect(Interval(0.0, math.inf))
            if t.is_empty:
                return None
            ivs[kids[0]] = iv.even_preimage(ivs[kids[0]], t.lo, t.hi)
        for ch in kids:
            if ivs[ch].is_empty:
                return None
    out = list(box)
    for n in order:
        node = dag[n]
        if node.op == "var":
            out[node.index] = out[node.index].intersect(ivs[n])
            if out[node.index].is_empty:
                return None
    return out


# ---------------------------------------------------------------------------
# reverse-mode differentiation

def gradient(dag: ExprDag, root: int, point: Sequence[float]) -> list[float]:
    vals = forward_values(dag, root, point)
    adj: dict[int, float] = {n: 0.0 for n in vals}
    adj[root] = 1.0
    grad = [0.0] * len(point)
    for n in sorted(vals, reverse=True):
        a = adj[n]
        if a == 0.0:
            continue
        node = dag[n]
        op = node.op
        if op == "var":
            grad[node.index] += a
        elif op == "sum":
            for ch, c in zip(node.children, node.coeffs):
                adj[ch] += a * c
        elif op == "product":
            kids = node.children
            for k, ch in enumerate(kids):
                rest = 1.0
                for j, c in enumerate(kids):
                    if j != k:
                        rest *= vals[c]
                adj[ch] += a * rest
        elif op == "power":
            x = vals[node.children[0]]
            p = node.value
            if x == 0.0 and p < 1.0:
                raise DomainError("power not differentiable at 0")
            adj[node.children[0]] += a * p * _pow_value(x, p - 1.0)
        elif op == "exp":
            adj[node.children[0]] += a * vals[n]
        elif op == "log":
            adj[node.children[0]] += a / vals[node.children[0]]
        elif op == "abs":
            x = vals[node.children[0]]
            adj[node.children[0]] += a * (1.0 if x > 0 else -1.0 if x < 0 else 0.0)
    return grad


def linear_coefficients(dag: ExprDag, root: int) -> tuple[dict[int, float], float] | None:
    """Return ``(coeffs, constant)`` if ``root`` is affine in its variables."""
    node = dag[root]
    if node.op == "const":
        return {}, node.value
    if node.op == "var":
        return {node.index: 1.0}, 0.0
    if node.op == "product":
        # constant multiples of one affine factor
        scale = 1.0
        inner = None
        for ch in node.children:
            if dag[ch].op == "const":
                scale *= dag[ch].value
            elif inner is None:
                inner = ch
            else:
                return None
        if inner is None:
            return {}, scale
        sub = linear_coefficients(dag, inner)
        if sub is None:
            return None
        return {j: scale * b for j, b in sub[0].items()}, scale * sub[1]
    if node.op != "sum":
        return None
    coeffs: dict[int, float] = {}
    constant = node.value
    for ch, a in zip(node.children, node.coeffs):
        sub = linear_coefficients(dag, ch)
        if sub is None:
            return None
        for j, b in sub[0].items():
            coeffs[j] = coeffs.get(j, 0.0) + a * b
        constant += a * sub[1]
    return coeffs, constant


def node_count(dag: ExprDag, roots: Iterable[int]) -> int:
    seen: set[int] = set()
    for r in roots:
        seen.update(dag.reachable(r))
    return len(seen)
