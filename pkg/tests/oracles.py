"""Brute-force reference solvers used as test oracles.

None of these share code with the package's solving paths.
"""
import itertools
import math
from fractions import Fraction

import numpy as np

INF = math.inf


def lp_vertex_oracle(c, A, lhs, rhs, lb, ub, tol=1e-9):
    """Optimum of a bounded LP by enumerating all vertices.

    Every vertex is the unique solution of n linearly independent active
    hyperplanes (row sides and column bounds).  Returns ``(status, value)``.
    """
    c = np.asarray(c, float)
    A = np.asarray(A, float).reshape(-1, len(c))
    n = len(c)
    planes = []
    for i in range(A.shape[0]):
        for side in (lhs[i], rhs[i]):
            if math.isfinite(side):
                planes.append((A[i], side))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        for side in (lb[j], ub[j]):
            if math.isfinite(side):
                planes.append((e, side))
    # dedupe identical hyperplanes (equality rows contribute twice)
    uniq = {}
    for a, b in planes:
        uniq[(tuple(a), b)] = (a, b)
    planes = list(uniq.values())
    P = np.array([p[0] for p in planes])
    q = np.array([p[1] for p in planes])
    best = INF
    combos = list(itertools.combinations(range(len(planes)), n))
    if not combos:
        return "infeasible", None
    idx = np.array(combos)
    for start in range(0, len(idx), 20000):
        chunk = idx[start:start + 20000]
        M = P[chunk]
        rhs_v = q[chunk]
        det = np.linalg.det(M)
        ok = np.abs(det) > 1e-9
        if not ok.any():
            continue
        X = np.linalg.solve(M[ok], rhs_v[ok][..., None])[..., 0]
        act = X @ A.T if A.shape[0] else np.zeros((len(X), 0))
        feas = np.all(X >= np.asarray(lb) - tol, axis=1) & np.all(X <= np.asarray(ub) + tol, axis=1)
        if A.shape[0]:
            feas &= np.all(act >= np.asarray(lhs) - tol, axis=1) & np.all(act <= np.asarray(rhs) + tol, axis=1)
        if feas.any():
            best = min(best, float((X[feas] @ c).min()))
    if best == INF:
        return "infeasible", None
    return "optimal", best


def milp_brute_force(instance):
    """Enumerate every integer point of a pure-integer linear instance.

    Returns ``(value, point)`` in the instance's own sense, or ``(None, None)``.
    """
    ranges = []
    for v in instance.variables:
        assert v.integer and math.isfinite(v.lb) and math.isfinite(v.ub)
        ranges.append(range(int(math.ceil(v.lb)), int(math.floor(v.ub)) + 1))
    sign = 1 if instance.sense == "min" else -1
    best = None
    best_x = None
    for x in itertools.product(*ranges):
        ok = True
        for row in instance.linear:
            a = sum(Fraction(cf).limit_denominator(10**9) * x[j] for j, cf in row.coeffs.items())
            if a < row.lhs - 1e-9 or a > row.rhs + 1e-9:
                ok = False
                break
        if not ok:
            continue
        val = instance.obj_offset + sum(cf * x[j] for j, cf in instance.objective.items())
        if best is None or sign * val < sign * best:
            best, best_x = val, x
    return best, best_x


def lex_completions(perm, fixed):
    """All 0/1 completions of ``fixed`` (-1 free) with x >=_lex gamma(x).

    ``perm[i]`` is gamma(i); gamma(x)_i = x[gamma^-1(i)].
    """
    n = len(perm)
    inv = [0] * n
    for i, g in enumerate(perm):
        inv[g] = i
    free = [j for j in range(n) if fixed[j] == -1]
    out = []
    for bits in itertools.product((0, 1), repeat=len(free)):
        x = list(fixed)
        for j, b in zip(free, bits):
            x[j] = b
        gx = [x[inv[i]] for i in range(n)]
        if x >= gx:
            out.append(tuple(x))
    return out
