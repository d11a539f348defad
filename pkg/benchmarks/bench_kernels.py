"""Compare the compiled and numpy kernels.

Usage::

    python3 benchmarks/bench_kernels.py [--size 4000000] [--repeat 5]

Prints the best wall time per kernel and backend, the speedup, and
whether both backends returned identical output.
"""

import argparse
import time

import numpy as np

from sparseshare import kernels
from sparseshare.field import FieldOrder
from sparseshare.leakage import SourceModel, SparsityTargets
from sparseshare.optimizer import solve_optimal_pmf
from sparseshare.sharing import generate_source


def best_time(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def same(a, b):
    if isinstance(a, tuple):
        return all(np.array_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return np.array_equal(a, b)
    return a == b


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=4_000_000, help="entries per call")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    impls = kernels.backends()
    if "cython" not in impls:
        print("compiled backend not built; only the numpy kernels are available")

    f = FieldOrder.binary(8)
    src = SourceModel(f, 0.95)
    pmf = solve_optimal_pmf(src, SparsityTargets(0.5, 0.5, f.q)).pmf
    a = generate_source(1, args.size, src, 0).dense_range(0, args.size)

    # a sub-share worth of records: 10^4-element blocks, half nonzero
    rng = np.random.default_rng(0)
    nrec = args.size // 2
    idx = np.sort(rng.choice(args.size, nrec, replace=False)).astype(np.int64)
    val = rng.integers(1, 256, nrec, dtype=np.uint64)
    ib = int(np.ceil(np.log2(args.size)))
    packed = kernels.pack_records(idx, val, ib, 8)

    cases = {
        "sample_padding q=256": lambda m: kernels.sample_padding(
            a, 1234, 0, f.q - 1, True, pmf.p1, pmf.p2, pmf.p3, impl=m),
        "sample_padding q=2^61-1": lambda m: kernels.sample_padding(
            a, 1234, 0, 2 ** 61 - 2, False, pmf.p1, pmf.p2, pmf.p3, impl=m),
        "pack_records": lambda m: kernels.pack_records(idx, val, ib, 8, impl=m),
        "unpack_records": lambda m: kernels.unpack_records(packed, nrec, ib, 8, impl=m),
    }

    print(f"{'kernel':<26}{'backend':<9}{'seconds':>10}{'Mentries/s':>12}")
    for name, fn in cases.items():
        results = {}
        for label, mod in impls.items():
            t, out = best_time(lambda: fn(mod), args.repeat)
            results[label] = (t, out)
            print(f"{name:<26}{label:<9}{t:>10.4f}{args.size / t / 1e6:>12.1f}")
        if len(results) == 2:
            (tp, op), (tc, oc) = results["python"], results["cython"]
            print(f"{'':<26}speedup {tp / tc:.1f}x, identical output: {same(op, oc)}")


if __name__ == "__main__":
    main()
