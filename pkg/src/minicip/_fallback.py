"""Pure-Python implementations of the hot kernels.

Same signatures and results as the compiled ``_native`` module; used when
the extension is not built or ``MINICIP_PURE_PYTHON=1`` is set.
"""
import numpy as np


def pivot(T, r, c):
    """Gauss-Jordan pivot of the dense tableau ``T`` on entry (r, c), in place."""
    prow = T[r] / T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    T -= np.outer(col, prow)
    T[r] = prow


def _find(parent, a):
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


def lex_feasible(inv, fixed):
    """Is there a 0/1 completion of ``fixed`` (-1 = free) with x >=_lex gamma(x)?

    ``inv[i]`` is the preimage of ``i`` under gamma, i.e. gamma(x)_i = x[inv[i]].
    """
    n = len(inv)
    parent = list(range(n))
    val = [int(v) for v in fixed]
    for i in range(n):
        b = int(inv[i])
        if b == i:
            continue
        ra = _find(parent, i)
        rb = _find(parent, b)
        if ra == rb:
            continue
        va, vb = val[ra], val[rb]
        if va != 0 and vb != 1:
            return True
        if va != -1 and vb != -1 and va != vb:
            return False
        parent[rb] = ra
        if va == -1:
            val[ra] = vb
    return True


def lex_propagate(inv, fixed):
    """Complete fixing for one lexicographic constraint on binaries.

    Returns ``(feasible, new_fixed)``; new_fixed contains every value implied
    by all completions of ``fixed``.
    """
    fixed = [int(v) for v in fixed]
    if not lex_feasible(inv, fixed):
        return False, fixed
    out = list(fixed)
    for j in range(len(fixed)):
        if fixed[j] != -1:
            continue
        for v in (0, 1):
            fixed[j] = v
            ok = lex_feasible(inv, fixed)
            fixed[j] = -1
            if not ok:
                out[j] = 1 - v
                break
    return True, out


def cover_scan(inv, xstar):
    """Linear scan for the cheapest cover over all violation positions.

    Returns ``(k, cost, ops)``: the position whose cover has the smallest
    left-hand side at ``xstar`` (-1 if none), that value, and an operation
    count for complexity checks.
    """
    n = len(inv)
    parent = list(range(n))
    s0 = [float(v) for v in xstar]
    s1 = [1.0 - float(v) for v in xstar]
    edged = [False] * n
    total = 0.0
    best = float("inf")
    bestk = -1
    ops = 0
    for k in range(n):
        ops += 1
        b = int(inv[k])
        if b == k:
            continue
        ra = _find(parent, k)
        rb = _find(parent, b)
        if ra == rb:
            continue
        ma = min(s0[ra], s1[ra]) if edged[ra] else 0.0
        mb = min(s0[rb], s1[rb]) if edged[rb] else 0.0
        cost = total - ma - mb + s0[ra] + s1[rb]
        if cost < best:
            best = cost
            bestk = k
        total -= ma + mb
        parent[rb] = ra
        s0[ra] += s0[rb]
        s1[ra] += s1[rb]
        edged[ra] = True
        total += min(s0[ra], s1[ra])
    return bestk, best, ops
