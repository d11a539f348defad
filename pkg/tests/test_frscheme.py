import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sparseshare.field import FieldOrder
from sparseshare.frscheme import (
    AssignmentPlan,
    InsufficientNodesError,
    PlanError,
    assemble_share,
    assignment_plan,
    break_even_s_avg,
    ceil_log2,
    cost_report,
    missing_sub_shares,
    node_contents,
    partition_share,
    per_node_leakage,
    reconstruct_from_nodes,
    reconstruct_from_stores,
    reference_rows,
    sparsity_threshold,
    split_pair,
    storage_cost_classical,
    storage_cost_sparse,
)
from sparseshare.leakage import SourceModel, build_conditional_pmf
from sparseshare.sharing import generate_source, make_shares

SRC = SourceModel(FieldOrder.binary(8), 0.8)
PMF = build_conditional_pmf(0.7, 0.4, 0.3, 256)


def shares(r, c, seed=0):
    a = generate_source(r, c, SRC, seed)
    return a, make_shares(a, PMF, seed + 1)


@pytest.mark.parametrize("n", range(2, 21, 2))
def test_every_plan_safe_and_replicated(n):
    for xi in range(n // 2):
        plan = assignment_plan(n, xi)
        for kind in ("AR", "R"):
            for t in range(n):
                assert len(plan.holders(kind, t)) == xi + 1
        for i in range(n):
            assert not plan.ar_sets[i] & plan.r_sets[i]
            assert len(plan.ar_sets[i]) == len(plan.r_sets[i]) == xi + 1
        assert plan.k == n - xi and plan.z == 1


@pytest.mark.parametrize("n", range(2, 11, 2))
def test_reconstruction_from_any_k_nodes(n):
    a, pair = shares(2 * n + 1, 5, n)
    ar, r = split_pair(pair, n)
    for xi in range(n // 2):
        plan = assignment_plan(n, xi)
        for avail in itertools.combinations(range(n), n - xi):
            assert reconstruct_from_nodes(plan, ar, r, avail) == a
        # tight: some (n - xi - 1)-subset is missing a block
        fails = 0
        for avail in itertools.combinations(range(n), n - xi - 1):
            try:
                reconstruct_from_nodes(plan, ar, r, avail)
            except InsufficientNodesError:
                fails += 1
        assert fails > 0


def test_missing_names():
    plan = assignment_plan(4, 1)
    assert missing_sub_shares(plan, [0, 1]) == ([3], [1])
    a, pair = shares(8, 3)
    ar, r = split_pair(pair, 4)
    with pytest.raises(InsufficientNodesError, match=r"missing \(A\+R\)_3, R_1"):
        reconstruct_from_nodes(plan, ar, r, [0, 1])
    with pytest.raises(PlanError):
        missing_sub_shares(plan, [7])


def test_example_n2_xi0():
    plan = assignment_plan(2, 0)
    assert plan.ar_sets == (frozenset({0}), frozenset({1}))
    assert plan.r_sets == (frozenset({1}), frozenset({0}))
    a, pair = shares(6, 4)
    ar, r = split_pair(pair, 2)
    assert reconstruct_from_nodes(plan, ar, r, [0, 1]) == a
    with pytest.raises(InsufficientNodesError):
        reconstruct_from_nodes(plan, ar, r, [0])


def test_bad_parameters():
    with pytest.raises(PlanError):
        assignment_plan(4, 2)
    with pytest.raises(PlanError):
        assignment_plan(5, 1)
    with pytest.raises(PlanError):
        assignment_plan(0, 0)


def test_padding_rows():
    a, pair = shares(10, 3)
    subs = partition_share(pair.padded, 4)
    assert [s.block_rows for s in subs] == [3] * 4
    # the last block covers row 9 plus two zero rows
    assert subs[-1].matrix.row_block(1, 2).nnz == 0
    assert assemble_share(subs) == pair.padded
    with pytest.raises(ValueError):
        assemble_share(subs[:3])


def test_stores_with_extra_copies():
    plan = assignment_plan(6, 2)
    a, pair = shares(12, 4)
    ar, r = split_pair(pair, 6)
    contents = node_contents(plan, ar, r)
    assert all(len(v) == 6 for v in contents.values())
    assert reconstruct_from_stores(plan, contents) == a


def test_custom_plan():
    good = AssignmentPlan.custom([{0, 1}, {2, 3}, {0, 1}, {2, 3}], [{2, 3}, {0, 1}, {2, 3}, {0, 1}])
    assert good.xi == 1
    back = AssignmentPlan.from_text(good.to_text())
    assert back == good
    with pytest.raises(PlanError, match="both"):
        AssignmentPlan.custom([{0}, {1}], [{0}, {1}])
    with pytest.raises(PlanError, match="expected"):
        AssignmentPlan.custom([{0}, {0}], [{1}, {1}], xi=0)


def test_plan_text_canonical():
    text = assignment_plan(4, 1).to_text()
    assert text.splitlines() == ["# n=4 xi=1 k=3 z=1", "node\tAR\tR",
                                 "0\t0,1\t2,3", "1\t1,2\t0,3", "2\t2,3\t0,1", "3\t0,3\t1,2"]
    assert AssignmentPlan.from_text(text) == assignment_plan(4, 1)
    with pytest.raises(PlanError):
        AssignmentPlan.from_text("0\t0\n")


@given(st.integers(1, 10 ** 30), st.integers(1, 10 ** 6))
def test_ceil_log2(num, den):
    x = Fraction(num, den)
    k = ceil_log2(x)
    assert Fraction(2) ** k >= x > Fraction(2) ** (k - 1)


def test_ceil_log2_exact_powers():
    assert ceil_log2(1) == 0 and ceil_log2(2) == 1 and ceil_log2(3) == 2
    assert ceil_log2(2 ** 64) == 64 and ceil_log2(2 ** 64 + 1) == 65
    assert ceil_log2(Fraction(1, 2)) == -1
    with pytest.raises(ValueError):
        ceil_log2(0)


def test_cost_examples():
    assert storage_cost_sparse(1.0, 100, 100, 4, 1, 256) == 0.0
    rl = 10 ** 20
    assert storage_cost_classical(rl, 1, 60, 2, 2 ** 32) == pytest.approx(rl / 57 * 32, rel=1e-15)
    with pytest.raises(PlanError):
        storage_cost_classical(10, 10, 2, 1, 256)
    assert sparsity_threshold(4, 0, 256, 100, 100) is None
    # sparse cost at the break-even point equals the classical cost
    for n, xi in ((4, 1), (60, 2), (100, 5)):
        be = break_even_s_avg(n, xi, 2 ** 16, 10 ** 6, 10)
        assert storage_cost_sparse(be, 10 ** 6, 10, n, xi, 2 ** 16) == pytest.approx(
            storage_cost_classical(10 ** 6, 10, n, xi, 2 ** 16), rel=1e-9)


def test_threshold_limit_large_q():
    # with log q dominating the index bits the threshold approaches 1 - n / (2 xi (n - xi))
    n, xi = 60, 2
    thr = sparsity_threshold(n, xi, 2 ** 4000, 2, 1)
    assert thr == pytest.approx(1 - n / (2 * xi * (n - xi)), abs=1e-3)


def test_cost_report_fields():
    rep = cost_report(0.99, 1000, 1000, 4, 1, 256, measured_bits=123)
    d = rep.as_dict()
    assert d["measured_bits"] == 123 and d["beneficial"] == rep.beneficial
    assert rep.beneficial


def test_per_node_leakage_scaling():
    assert per_node_leakage(0.1, 100, 10, 4, 1) == pytest.approx(2 * 0.1 * 250)
    with pytest.raises(PlanError):
        per_node_leakage(0.1, 10, 10, 4, 2)


def test_reference_break_even():
    for row in reference_rows():
        assert abs(row["break_even_delta"]) < 5e-5
        assert row["threshold_formula"] < row["s_avg_reference"]
        assert row["relative_leakage_computed"] > 0
