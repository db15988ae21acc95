"""Compare the compiled kernels with their pure-Python fallbacks.

    python3 benchmarks/bench_kernels.py [--quick]

Prints one line per kernel and size: best-of-N wall time for each backend and
the speed-up.  Both backends are fed identical inputs and their results are
checked for agreement before timing.
"""

import argparse
import sys
import timeit

import numpy as np

from minicip import _fallback

try:
    from minicip import _native
except ImportError:  # extension not built
    _native = None


def _perm_inv(rng, n):
    perm = rng.permutation(n)
    inv = np.empty(n, dtype=np.intp)
    inv[perm] = np.arange(n)
    return inv


def cases(sizes, rng):
    for n in sizes["pivot"]:
        T = rng.standard_normal((n, 2 * n)) + np.eye(n, 2 * n) * n

        def run(mod, T=T):
            A = T.copy()
            for k in range(min(10, n)):
                mod.pivot(A, k, k)
            return A

        yield "pivot x10", n, run
    for n in sizes["lex"]:
        inv = _perm_inv(rng, n)
        fixed = np.full(n, -1, dtype=np.int64)
        fixed[rng.choice(n, n // 4, replace=False)] = rng.integers(0, 2, n // 4)
        yield "lex_propagate", n, lambda mod, inv=inv, f=fixed: mod.lex_propagate(inv, f)
    for n in sizes["cover"]:
        inv = _perm_inv(rng, n)
        x = rng.random(n)
        yield "cover_scan", n, lambda mod, inv=inv, x=x: mod.cover_scan(inv, x)


def _same(a, b) -> bool:
    if isinstance(a, np.ndarray):
        return np.allclose(a, b)
    if isinstance(a, (tuple, list)):
        return len(a) == len(b) and all(_same(x, y) for x, y in zip(a, b))
    if isinstance(a, float):
        return abs(a - b) <= 1e-9 * max(1.0, abs(a))
    return a == b


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true", help="small sizes, one repeat")
    args = ap.parse_args(argv)
    if _native is None:
        print("compiled extension not available; nothing to compare")
        return 1
    rng = np.random.default_rng(0)
    if args.quick:
        sizes = {"pivot": [20], "lex": [16], "cover": [1000]}
        repeat = 1
    else:
        sizes = {"pivot": [20, 60, 150], "lex": [16, 64, 200], "cover": [1000, 10000, 100000]}
        repeat = 5
    print(f"{'kernel':<14} {'n':>7} {'python [s]':>12} {'native [s]':>12} {'speed-up':>9}")
    for name, n, run in cases(sizes, rng):
        if not _same(run(_fallback), run(_native)):
            print(f"{name} n={n}: backends disagree", file=sys.stderr)
            return 2
        t_py = min(timeit.repeat(lambda: run(_fallback), number=1, repeat=repeat))
        t_nat = min(timeit.repeat(lambda: run(_native), number=1, repeat=repeat))
        print(f"{name:<14} {n:>7} {t_py:>12.6f} {t_nat:>12.6f} {t_py / t_nat:>8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
