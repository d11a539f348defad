"""Fast invariant checks bundled with the library (``sparseshare selftest``)."""

from __future__ import annotations

import itertools
import time

import numpy as np

__all__ = ["CHECKS", "run_selftest"]


def _field_arithmetic():
    from .field import FieldOrder

    rng = np.random.default_rng(1)
    for f in (FieldOrder.prime(2 ** 64 - 59), FieldOrder.prime(257), FieldOrder.binary(64)):
        a = rng.integers(0, f.q - 1, 1000, dtype=np.uint64, endpoint=True)
        b = rng.integers(0, f.q - 1, 1000, dtype=np.uint64, endpoint=True)
        assert np.array_equal(f.sub(f.add(a, b), b), a), f"a+b-b != a over {f}"
        assert not f.add(a, f.neg(a)).any(), f"a + (-a) != 0 over {f}"
        exact = [(int(x) + int(y)) % f.q for x, y in zip(a[:50], b[:50])] if not f.is_binary \
            else [int(x) ^ int(y) for x, y in zip(a[:50], b[:50])]
        assert f.add(a[:50], b[:50]).tolist() == exact, f"addition mismatch over {f}"
    return "prime and binary addition exact"


def _calibration():
    from .field import FieldOrder
    from .leakage import SourceModel, SparsityTargets
    from .optimizer import solve_optimal_pmf

    src = SourceModel(FieldOrder.binary(8), 0.95)
    v = solve_optimal_pmf(src, SparsityTargets(0.5, 0.5, 256)).leakage.total
    assert abs(v - 0.0864609149) < 1e-6, f"optimum {v}"
    return f"q=256 s=0.95 s_avg=0.5 optimum {v:.10f} bits"


def _cubic_vs_grid():
    from .field import FieldOrder
    from .leakage import SourceModel, build_conditional_pmf, sparsity_levels, total_leakage
    from .optimizer import feasible_p1_window, recover_pmf_from_p1, solve_optimal_pmf

    rng = np.random.default_rng(7)
    worst = -np.inf
    for _ in range(5):
        src = SourceModel(FieldOrder.binary(8), float(rng.uniform(0.6, 0.99)))
        # targets reached by some random PMF are feasible by construction
        p2, p3 = rng.dirichlet([1, 1, 1])[:2]
        t = sparsity_levels(build_conditional_pmf(float(rng.uniform()), p2, p3, 256), src)
        res = solve_optimal_pmf(src, t, "e")
        lo, hi = feasible_p1_window(src, t)
        grid = np.linspace(lo, hi, 2001)
        vals = [total_leakage(recover_pmf_from_p1(p, src, t), src, "e").total for p in grid]
        worst = max(worst, res.leakage.total - min(vals))
    assert worst <= 1e-8, f"closed form exceeds grid minimum by {worst}"
    return f"closed form <= grid minimum (worst gap {worst:.2e})"


def _structured_vs_general():
    from .field import FieldOrder
    from .leakage import SourceModel, build_conditional_pmf, expand_pmf, general_leakage, total_leakage

    for q in (3, 5, 7):
        src = SourceModel(FieldOrder.prime(q), 0.8)
        pmf = build_conditional_pmf(0.6, 0.3, 0.25, q)
        a = total_leakage(pmf, src).total
        b = general_leakage(expand_pmf(pmf, src.field), src).total
        assert abs(a - b) < 1e-12, f"q={q}: {a} vs {b}"
    return "closed-form leakage equals q x q evaluation"


def _plans():
    from .frscheme import assignment_plan

    count = 0
    for n in range(2, 21, 2):
        for xi in range(n // 2):
            assignment_plan(n, xi)
            count += 1
    return f"{count} plans safe with exact replication"


def _reconstruction():
    from .field import FieldOrder
    from .frscheme import InsufficientNodesError, assignment_plan, reconstruct_from_nodes, split_pair
    from .leakage import SourceModel, SparsityTargets
    from .optimizer import solve_optimal_pmf
    from .sharing import generate_source, make_shares

    src = SourceModel(FieldOrder.binary(8), 0.9)
    pmf = solve_optimal_pmf(src, SparsityTargets(0.7, 0.7, 256)).pmf
    a = generate_source(13, 7, src, 3)
    pair = make_shares(a, pmf, 4)
    for n in (2, 4, 6, 8):
        ar, r = split_pair(pair, n)
        for xi in range(n // 2):
            plan = assignment_plan(n, xi)
            for sub in itertools.combinations(range(n), n - xi):
                assert reconstruct_from_nodes(plan, ar, r, sub) == a, f"n={n} xi={xi} {sub}"
            failed = False
            for sub in itertools.combinations(range(n), n - xi - 1):
                try:
                    reconstruct_from_nodes(plan, ar, r, sub)
                except InsufficientNodesError:
                    failed = True
                    break
            assert failed, f"n={n} xi={xi}: every {n - xi - 1}-subset reconstructs"
    return "every (n - xi)-subset reconstructs; tolerance is tight"


def _codec():
    from .codec import decode_sub_share, encode_sub_share
    from .field import FieldOrder
    from .frscheme import partition_share
    from .leakage import SourceModel
    from .sharing import generate_source

    for f in (FieldOrder.prime(65521), FieldOrder.binary(13)):
        for seed in range(10):
            m = generate_source(17, 9, SourceModel(f, 0.7), seed)
            for sub in partition_share(m, 4):
                assert decode_sub_share(encode_sub_share(sub)).matrix == sub.matrix
    return "encode/decode round trip"


def _backends():
    from . import kernels

    impls = kernels.backends()
    if len(impls) < 2:
        return "compiled backend unavailable; skipped"
    a = np.arange(5000, dtype=np.uint64) % 251
    outs = [kernels.sample_padding(a, 99, 12345, 250, False, 0.5, 0.3, 0.2, impl=m)
            for m in impls.values()]
    assert all(np.array_equal(outs[0], o) for o in outs[1:]), "backends disagree on sampling"
    idx = np.arange(0, 3000, 3, dtype=np.int64)
    val = (idx % 1000 + 1).astype(np.uint64)
    packed = [kernels.pack_records(idx, val, 12, 10, impl=m) for m in impls.values()]
    assert all(p == packed[0] for p in packed), "backends disagree on packing"
    return "backends bit-identical"


CHECKS = [
    ("field_arithmetic", _field_arithmetic),
    ("base_calibration", _calibration),
    ("cubic_vs_grid", _cubic_vs_grid),
    ("structured_vs_general", _structured_vs_general),
    ("plan_invariants", _plans),
    ("reconstruction", _reconstruction),
    ("codec_round_trip", _codec),
    ("backend_equivalence", _backends),
]


def run_selftest() -> list[dict]:
    """Run every check; each result has name, passed, detail and seconds."""
    out = []
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            detail, ok = fn(), True
        except AssertionError as e:
            detail, ok = str(e) or "assertion failed", False
        except Exception as e:  # report, don't abort the suite
            detail, ok = f"{type(e).__name__}: {e}", False
        out.append({"name": name, "passed": ok, "detail": detail,
                    "seconds": round(time.perf_counter() - t0, 3)})
    return out


if __name__ == "__main__":  # pragma: no cover
    res = run_selftest()
    for r in res:
        print(("PASS" if r["passed"] else "FAIL"), r["name"], "-", r["detail"])
    raise SystemExit(0 if all(r["passed"] for r in res) else 1)
