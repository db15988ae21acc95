"""Closed intervals over the extended reals with outward epsilon-inflation.

Results of inexact operations are widened by a relative 1e-12 instead of
switching the FPU rounding mode; exact results (sums of exact zeros, bounds
at infinity) are left alone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

INF = math.inf
REL_INFLATE = 1e-12


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    @property
    def is_empty(self) -> bool:
        return self.lo > self.hi

    @property
    def width(self) -> float:
        if self.is_empty:
            return 0.0
        return self.hi - self.lo

    def __contains__(self, v: float) -> bool:
        return self.lo <= v <= self.hi

    def contains(self, other: "Interval") -> bool:
        return other.is_empty or (self.lo <= other.lo and other.hi <= self.hi)

    def intersect(self, other: "Interval") -> "Interval":
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        return Interval(lo, hi) if lo <= hi else EMPTY

    def hull(self, other: "Interval") -> "Interval":
        if self.is_empty:
            return other
        if other.is_empty:
            return self
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def __repr__(self) -> str:
        if self.is_empty:
            return "Interval(EMPTY)"
        return f"Interval({self.lo!r}, {self.hi!r})"


EMPTY = Interval(INF, -INF)
ENTIRE = Interval(-INF, INF)


def point(v: float) -> Interval:
    return Interval(v, v)


def _down(v: float, scale: float | None = None) -> float:
    if math.isinf(v) or math.isnan(v):
        return v
    s = abs(v) if scale is None else scale
    return v - REL_INFLATE * s


def _up(v: float, scale: float | None = None) -> float:
    if math.isinf(v) or math.isnan(v):
        return v
    s = abs(v) if scale is None else scale
    return v + REL_INFLATE * s


def _mul(a: float, b: float) -> float:
    # 0 * inf is 0 in interval arithmetic
    if a == 0.0 or b == 0.0:
        return 0.0
    return a * b


def widen(iv: Interval) -> Interval:
    if iv.is_empty:
        return iv
    return Interval(_down(iv.lo), _up(iv.hi))


def add(a: Interval, b: Interval) -> Interval:
    if a.is_empty or b.is_empty:
        return EMPTY
    return linear([(1.0, a), (1.0, b)], 0.0)


def scale(c: float, a: Interval) -> Interval:
    if a.is_empty:
        return EMPTY
    if c == 0.0:
        return Interval(0.0, 0.0)
    lo, hi = _mul(c, a.lo), _mul(c, a.hi)
    if c < 0:
        lo, hi = hi, lo
    return Interval(_down(lo), _up(hi))


def linear(terms, constant: float = 0.0) -> Interval:
    """Enclosure of ``constant + sum(c * iv for c, iv in terms)``."""
    lo = hi = constant
    mag = abs(constant)
    for c, iv in terms:
        if iv.is_empty:
            return EMPTY
        if c == 0.0:
            continue
        a, b = _mul(c, iv.lo), _mul(c, iv.hi)
        if c < 0:
            a, b = b, a
        lo += a
        hi += b
        if not math.isinf(a):
            mag += abs(a)
        if not math.isinf(b):
            mag += abs(b)
    if math.isnan(lo) or math.isnan(hi):
        # -inf + inf on one side cannot happen since lo only collects lower ends
        return ENTIRE
    return Interval(_down(lo, mag), _up(hi, mag))


def mul(a: Interval, b: Interval) -> Interval:
    if a.is_empty or b.is_empty:
        return EMPTY
    cands = [_mul(a.lo, b.lo), _mul(a.lo, b.hi), _mul(a.hi, b.lo), _mul(a.hi, b.hi)]
    return Interval(_down(min(cands)), _up(max(cands)))


def reciprocal(a: Interval) -> Interval:
    """Hull of 1/x over ``a``; ENTIRE when zero is interior, EMPTY for [0, 0]."""
    if a.is_empty or (a.lo == 0.0 and a.hi == 0.0):
        return EMPTY
    if a.lo < 0.0 < a.hi:
        return ENTIRE
    if a.lo >= 0.0:
        lo = 1.0 / a.hi if not math.isinf(a.hi) else 0.0
        hi = 1.0 / a.lo if a.lo > 0.0 else INF
    else:
        lo = 1.0 / a.hi if a.hi < 0.0 else -INF
        hi = 1.0 / a.lo if not math.isinf(a.lo) else 0.0
    return Interval(_down(lo), _up(hi))


def divide(a: Interval, b: Interval) -> Interval:
    return mul(a, reciprocal(b))


def _is_int(p: float) -> bool:
    return float(p).is_integer()


def _powf(x: float, p: float) -> float:
    """x**p on the extended reals for the cases reached by ``power``."""
    if x == 0.0:
        if p > 0:
            return 0.0
        return INF
    if math.isinf(x):
        if p > 0:
            if x > 0 or (_is_int(p) and int(p) % 2 == 0):
                return INF
            return -INF
        return 0.0
    try:
        return math.pow(x, p)
    except OverflowError:
        if x > 0 or (_is_int(p) and int(p) % 2 == 0):
            return INF
        return -INF


def power(a: Interval, p: float) -> Interval:
    if a.is_empty:
        return EMPTY
    if p == 0.0:
        return Interval(1.0, 1.0)
    if p == 1.0:
        return a
    if _is_int(p):
        k = int(p)
        if k > 0:
            if k % 2 == 1:
                return Interval(_down(_powf(a.lo, p)), _up(_powf(a.hi, p)))
            if a.lo >= 0.0:
                return Interval(_down(_powf(a.lo, p)), _up(_powf(a.hi, p)))
            if a.hi <= 0.0:
                return Interval(_down(_powf(a.hi, p)), _up(_powf(a.lo, p)))
            return Interval(0.0, _up(max(_powf(a.lo, p), _powf(a.hi, p))))
        return power(reciprocal(a), -p) if not (a.lo < 0.0 < a.hi) else _neg_int_power_straddle(a, k)
    # real exponent: domain is x >= 0 (x > 0 for p < 0)
    dom = a.intersect(Interval(0.0, INF))
    if dom.is_empty or (p < 0 and dom.hi == 0.0):
        return EMPTY
    lo, hi = _powf(dom.lo, p), _powf(dom.hi, p)
    if p < 0:
        lo, hi = hi, lo
    return Interval(_down(lo), _up(hi))


def _neg_int_power_straddle(a: Interval, k: int) -> Interval:
    # x**k, k < 0, zero strictly inside a: pole at zero
    if (-k) % 2 == 0:
        m = min(_powf(a.lo, k), _powf(a.hi, k))
        return Interval(_down(m), INF)
    return ENTIRE


def exp(a: Interval) -> Interval:
    if a.is_empty:
        return EMPTY

    def e(v: float) -> float:
        try:
            return math.exp(v)
        except OverflowError:
            return INF

    return Interval(max(0.0, _down(e(a.lo))), _up(e(a.hi)))


def log(a: Interval) -> Interval:
    if a.is_empty or a.hi <= 0.0:
        return EMPTY

    def lg(v: float) -> float:
        if v <= 0.0:
            return -INF
        if math.isinf(v):
            return INF
        return math.log(v)

    return Interval(_down(lg(a.lo)), _up(lg(a.hi)))


def absval(a: Interval) -> Interval:
    if a.is_empty:
        return EMPTY
    if a.lo >= 0.0:
        return a
    if a.hi <= 0.0:
        return Interval(-a.hi, -a.lo)
    return Interval(0.0, max(-a.lo, a.hi))


def even_preimage(child: Interval, root_lo: float, root_hi: float) -> Interval:
    """Intersect ``child`` with [-hi, -lo] U [lo, hi] and return the hull."""
    pos = child.intersect(Interval(root_lo, root_hi))
    neg = child.intersect(Interval(-root_hi, -root_lo))
    return pos.hull(neg)
