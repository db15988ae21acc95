# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_fallback``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def pivot(double[:, ::1] T, Py_ssize_t r, Py_ssize_t c):
    cdef Py_ssize_t m = T.shape[0], n = T.shape[1], i, j
    cdef double inv = 1.0 / T[r, c]
    cdef double f
    for j in range(n):
        T[r, j] *= inv
    T[r, c] = 1.0
    for i in range(m):
        if i == r:
            continue
        f = T[i, c]
        if f == 0.0:
            continue
        for j in range(n):
            T[i, j] -= f * T[r, j]
        T[i, c] = 0.0


cdef inline Py_ssize_t _find(Py_ssize_t[::1] parent, Py_ssize_t a) nogil:
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


cdef bint _lex_feasible(Py_ssize_t[::1] inv, long[::1] fixed,
                        Py_ssize_t[::1] parent, long[::1] val) nogil:
    cdef Py_ssize_t n = inv.shape[0], i, b, ra, rb
    cdef long va, vb
    for i in range(n):
        parent[i] = i
        val[i] = fixed[i]
    for i in range(n):
        b = inv[i]
        if b == i:
            continue
        ra = _find(parent, i)
        rb = _find(parent, b)
        if ra == rb:
            continue
        va = val[ra]
        vb = val[rb]
        if va != 0 and vb != 1:
            return True
        if va != -1 and vb != -1 and va != vb:
            return False
        parent[rb] = ra
        if va == -1:
            val[ra] = vb
    return True


def lex_feasible(inv, fixed):
    cdef Py_ssize_t[::1] inv_v = np.ascontiguousarray(inv, dtype=np.intp)
    cdef long[::1] fx = np.ascontiguousarray(fixed, dtype=np.int_)
    n = inv_v.shape[0]
    cdef Py_ssize_t[::1] parent = np.empty(n, dtype=np.intp)
    cdef long[::1] val = np.empty(n, dtype=np.int_)
    return bool(_lex_feasible(inv_v, fx, parent, val))


def lex_propagate(inv, fixed):
    cdef Py_ssize_t[::1] inv_v = np.ascontiguousarray(inv, dtype=np.intp)
    cdef long[::1] fx = np.array(fixed, dtype=np.int_)
    cdef Py_ssize_t n = inv_v.shape[0], j
    cdef Py_ssize_t[::1] parent = np.empty(n, dtype=np.intp)
    cdef long[::1] val = np.empty(n, dtype=np.int_)
    cdef long v
    out = [int(fx[j]) for j in range(n)]
    if not _lex_feasible(inv_v, fx, parent, val):
        return False, out
    for j in range(n):
        if fx[j] != -1:
            continue
        for v in range(2):
            fx[j] = v
            ok = _lex_feasible(inv_v, fx, parent, val)
            fx[j] = -1
            if not ok:
                out[j] = 1 - v
                break
    return True, out


def cover_scan(inv, xstar):
    cdef Py_ssize_t[::1] inv_v = np.ascontiguousarray(inv, dtype=np.intp)
    cdef double[::1] xs = np.ascontiguousarray(xstar, dtype=np.float64)
    cdef Py_ssize_t n = inv_v.shape[0], k, b, ra, rb
    cdef Py_ssize_t[::1] parent = np.arange(n, dtype=np.intp)
    cdef double[::1] s0 = np.empty(n)
    cdef double[::1] s1 = np.empty(n)
    cdef cnp.uint8_t[::1] edged = np.zeros(n, dtype=np.uint8)
    cdef double total = 0.0, best = float("inf"), ma, mb, cost
    cdef Py_ssize_t bestk = -1
    cdef long ops = 0
    for k in range(n):
        s0[k] = xs[k]
        s1[k] = 1.0 - xs[k]
    for k in range(n):
        ops += 1
        b = inv_v[k]
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
        edged[ra] = 1
        total += min(s0[ra], s1[ra])
    return bestk, best, ops
