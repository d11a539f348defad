"""Row-block sub-shares, fractional-repetition placement and storage costs.

Each share is cut into ``n`` row blocks. Node ``i`` stores the padded
blocks ``(A+R)_t`` for ``t`` in ``S_AR(i)`` and the padding blocks ``R_t``
for ``t`` in ``S_R(i)``, each block on ``xi + 1`` nodes, so any
``n - xi`` nodes cover both shares while no node sees both halves of the
same block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .field import FieldOrder
from .leakage import SourceModel, log_base
from .sharing import SharePair, class_counts, symmetry_class_mi
from .sparse import SparseMatrix

__all__ = [
    "KINDS",
    "SubShare",
    "AssignmentPlan",
    "PlanError",
    "InsufficientNodesError",
    "CostReport",
    "REFERENCE_TABLE",
    "partition_share",
    "split_pair",
    "assemble_share",
    "assignment_plan",
    "node_contents",
    "missing_sub_shares",
    "reconstruct_from_stores",
    "reconstruct_from_nodes",
    "per_node_leakage",
    "empirical_node_leakage",
    "ceil_log2",
    "storage_cost_sparse",
    "storage_cost_classical",
    "sparsity_threshold",
    "break_even_s_avg",
    "cost_report",
    "reference_rows",
]

KINDS = ("AR", "R")


class PlanError(ValueError):
    """Invalid scheme parameters or an unsafe assignment."""


class InsufficientNodesError(ValueError):
    """The available nodes do not cover every sub-share."""

    def __init__(self, missing_ar, missing_r):
        self.missing_ar = sorted(missing_ar)
        self.missing_r = sorted(missing_r)
        names = [f"(A+R)_{t}" for t in self.missing_ar] + [f"R_{t}" for t in self.missing_r]
        super().__init__("insufficient nodes; missing " + ", ".join(names))


def _check_n(n: int):
    if n < 2 or n % 2:
        raise PlanError(f"n must be even and >= 2, got {n}")


# -- sub-shares -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SubShare:
    """Row block ``t`` of share ``kind`` ("AR" or "R") out of ``n``."""

    kind: str
    t: int
    n: int
    rows: int        # original (unpadded) row count of the full share
    matrix: SparseMatrix

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not 0 <= self.t < self.n:
            raise ValueError(f"block index {self.t} outside 0..{self.n - 1}")

    @property
    def name(self) -> str:
        return f"{self.kind}_{self.t}"

    @property
    def cols(self) -> int:
        return self.matrix.cols

    @property
    def block_rows(self) -> int:
        return self.matrix.rows


def partition_share(m: SparseMatrix, n: int, kind: str = "AR") -> list[SubShare]:
    """Cut ``m`` into ``n`` equal row blocks, padding with zero rows when n does not divide r."""
    _check_n(n)
    block = -(-m.rows // n)
    return [SubShare(kind, t, n, m.rows, m.row_block(t * block, block)) for t in range(n)]


def split_pair(pair: SharePair, n: int) -> tuple[list[SubShare], list[SubShare]]:
    """Sub-shares of (A+R) and of R."""
    return partition_share(pair.padded, n, "AR"), partition_share(pair.padding, n, "R")


def assemble_share(subs) -> SparseMatrix:
    """Inverse of :func:`partition_share`; drops padding rows."""
    subs = sorted(subs, key=lambda s: s.t)
    if not subs:
        raise ValueError("no sub-shares given")
    n, rows, kind = subs[0].n, subs[0].rows, subs[0].kind
    if [s.t for s in subs] != list(range(n)):
        raise ValueError(f"need blocks 0..{n - 1}, got {[s.t for s in subs]}")
    if any(s.n != n or s.rows != rows or s.kind != kind for s in subs):
        raise ValueError("sub-shares come from different partitions")
    return SparseMatrix.vstack([s.matrix for s in subs], rows)


# -- assignment plan ------------------------------------------------------------

@dataclass(frozen=True)
class AssignmentPlan:
    """Which sub-shares each node stores.

    ``ar_sets[i]`` and ``r_sets[i]`` are the block indices of (A+R) and R
    held by node ``i``. Construction verifies safety (no node holds both
    blocks with the same index) and exact ``xi + 1``-fold replication.
    """

    n: int
    xi: int
    ar_sets: tuple
    r_sets: tuple

    def __post_init__(self):
        _check_n(self.n)
        if not 0 <= self.xi <= self.n // 2 - 1:
            raise PlanError(f"xi must lie in [0, {self.n // 2 - 1}] for n={self.n}, got {self.xi}")
        ar = tuple(frozenset(int(t) for t in s) for s in self.ar_sets)
        r = tuple(frozenset(int(t) for t in s) for s in self.r_sets)
        object.__setattr__(self, "ar_sets", ar)
        object.__setattr__(self, "r_sets", r)
        self.validate()

    @property
    def k(self) -> int:
        return self.n - self.xi

    @property
    def z(self) -> int:
        return 1

    def validate(self):
        n, copies = self.n, self.xi + 1
        if len(self.ar_sets) != n or len(self.r_sets) != n:
            raise PlanError(f"plan must list exactly {n} nodes")
        for name, sets in (("(A+R)", self.ar_sets), ("R", self.r_sets)):
            for i, s in enumerate(sets):
                if any(not 0 <= t < n for t in s):
                    raise PlanError(f"node {i}: {name} index outside 0..{n - 1}")
            counts = np.bincount([t for s in sets for t in s], minlength=n)
            bad = np.flatnonzero(counts != copies)
            if bad.size:
                t = int(bad[0])
                raise PlanError(f"{name}_{t} stored on {counts[t]} nodes, expected {copies}")
        for i, (a, r) in enumerate(zip(self.ar_sets, self.r_sets)):
            both = a & r
            if both:
                raise PlanError(f"node {i} holds both (A+R)_t and R_t for t in {sorted(both)}")

    @classmethod
    def custom(cls, ar_sets, r_sets, xi=None) -> "AssignmentPlan":
        """User-supplied placement; ``xi`` defaults to the replication found."""
        ar_sets, r_sets = list(ar_sets), list(r_sets)
        if xi is None:
            total = sum(len(s) for s in ar_sets)
            xi = total // max(len(ar_sets), 1) - 1
        return cls(len(ar_sets), xi, tuple(ar_sets), tuple(r_sets))

    def holders(self, kind: str, t: int) -> list[int]:
        sets = self.ar_sets if kind == "AR" else self.r_sets
        return [i for i, s in enumerate(sets) if t in s]

    def to_text(self) -> str:
        """Canonical table: one line per node with sorted index lists."""
        lines = [f"# n={self.n} xi={self.xi} k={self.k} z={self.z}", "node\tAR\tR"]
        for i in range(self.n):
            ar = ",".join(str(t) for t in sorted(self.ar_sets[i]))
            r = ",".join(str(t) for t in sorted(self.r_sets[i]))
            lines.append(f"{i}\t{ar}\t{r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "AssignmentPlan":
        xi = None
        rows = {}
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    key, _, val = tok.partition("=")
                    if key == "xi":
                        xi = int(val)
                continue
            if line.startswith("node"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise PlanError(f"malformed plan line: {line!r}")
            sets = [frozenset(int(x) for x in p.split(",") if x) for p in parts[1:]]
            rows[int(parts[0])] = sets
        if sorted(rows) != list(range(len(rows))):
            raise PlanError("plan table must list nodes 0..n-1")
        order = [rows[i] for i in range(len(rows))]
        return cls.custom([a for a, _ in order], [r for _, r in order], xi)


def assignment_plan(n: int, xi: int) -> AssignmentPlan:
    """Cyclic placement: node i stores (A+R)_{i..i+xi} and R_{n/2+i..n/2+i+xi} (mod n)."""
    _check_n(n)
    if not 0 <= xi <= n // 2 - 1:
        raise PlanError(f"xi must lie in [0, {n // 2 - 1}] for n={n}, got {xi}")
    ar = tuple(frozenset((i + j) % n for j in range(xi + 1)) for i in range(n))
    r = tuple(frozenset((n // 2 + i + j) % n for j in range(xi + 1)) for i in range(n))
    return AssignmentPlan(n, xi, ar, r)


def node_contents(plan: AssignmentPlan, ar_subs, r_subs) -> dict[int, list[SubShare]]:
    """The sub-shares each node stores under ``plan``."""
    ar = {s.t: s for s in ar_subs}
    r = {s.t: s for s in r_subs}
    return {i: [ar[t] for t in sorted(plan.ar_sets[i])] + [r[t] for t in sorted(plan.r_sets[i])]
            for i in range(plan.n)}


def missing_sub_shares(plan: AssignmentPlan, available) -> tuple[list[int], list[int]]:
    """Block indices of (A+R) and of R not held by any available node."""
    available = set(available)
    bad = available - set(range(plan.n))
    if bad:
        raise PlanError(f"unknown nodes {sorted(bad)}")
    have_ar = set().union(*(plan.ar_sets[i] for i in available)) if available else set()
    have_r = set().union(*(plan.r_sets[i] for i in available)) if available else set()
    everything = set(range(plan.n))
    return sorted(everything - have_ar), sorted(everything - have_r)


def reconstruct_from_stores(plan: AssignmentPlan, stores: dict) -> SparseMatrix:
    """Recover A from ``{node: iterable of SubShare}`` for the reachable nodes."""
    miss_ar, miss_r = missing_sub_shares(plan, stores.keys())
    if miss_ar or miss_r:
        raise InsufficientNodesError(miss_ar, miss_r)
    found = {"AR": {}, "R": {}}
    for node in sorted(stores):
        for s in stores[node]:
            held = plan.ar_sets[node] if s.kind == "AR" else plan.r_sets[node]
            if s.t not in held:
                raise PlanError(f"node {node} returned {s.name}, which the plan does not place there")
            found[s.kind].setdefault(s.t, s)
    if len(found["AR"]) < plan.n or len(found["R"]) < plan.n:
        miss_ar = sorted(set(range(plan.n)) - set(found["AR"]))
        miss_r = sorted(set(range(plan.n)) - set(found["R"]))
        raise InsufficientNodesError(miss_ar, miss_r)
    padded = assemble_share(found["AR"].values())
    padding = assemble_share(found["R"].values())
    return padded.sub(padding)


def reconstruct_from_nodes(plan: AssignmentPlan, ar_subs, r_subs, available) -> SparseMatrix:
    """Recover A using only the sub-shares stored on ``available`` nodes."""
    contents = node_contents(plan, ar_subs, r_subs)
    available = sorted(set(available))
    missing_sub_shares(plan, available)  # rejects unknown node ids
    return reconstruct_from_stores(plan, {i: contents[i] for i in available})


# -- leakage per node -------------------------------------------------------------

def per_node_leakage(elementwise_total: float, r: int, l: int, n: int, xi: int) -> float:
    """Leakage of one node's store about the whole matrix.

    ``elementwise_total`` is L1 + L2 per entry in any log base; the result
    is in the same unit. Sub-shares cover disjoint entries, so their
    leakages add: the node holds ``2 (xi + 1)`` blocks of ``r l / n``
    entries, half from each share.
    """
    _check_n(n)
    if not 0 <= xi <= n // 2 - 1:
        raise PlanError(f"xi must lie in [0, {n // 2 - 1}] for n={n}, got {xi}")
    return (xi + 1) * elementwise_total * r * l / n


def _block_of(a: SparseMatrix, sub: SubShare) -> SparseMatrix:
    return a.row_block(sub.t * sub.block_rows, sub.block_rows)


def empirical_node_leakage(a: SparseMatrix, subs, src: SourceModel, base=2) -> float:
    """Plug-in estimate of I(A; node store) summed over the node's sub-shares.

    Each block's per-entry mutual information is estimated with the
    symmetry-class estimator and scaled by the number of real (unpadded)
    entries in the block.
    """
    total = 0.0
    for sub in subs:
        blk = _block_of(a, sub)
        real_rows = max(0, min(sub.block_rows, sub.rows - sub.t * sub.block_rows))
        if real_rows == 0:
            continue
        if real_rows < sub.block_rows:
            blk = blk.row_block(0, real_rows)
            share = sub.matrix.row_block(0, real_rows)
        else:
            share = sub.matrix
        special = "same" if sub.kind == "AR" else "neg"
        mi = symmetry_class_mi(class_counts(blk, share, special), src.q)
        total += mi * blk.size
    return total / log_base(base, src.q)


# -- storage cost -----------------------------------------------------------------

def ceil_log2(x) -> int:
    """Smallest integer k with 2^k >= x, exact for ints and rationals."""
    x = Fraction(x)
    if x <= 0:
        raise ValueError("ceil_log2 needs a positive argument")
    k = x.numerator.bit_length() - x.denominator.bit_length()
    while Fraction(2) ** k < x:
        k += 1
    while Fraction(2) ** (k - 1) >= x:
        k -= 1
    return k


def _log2q(q) -> tuple[int, float]:
    q = q.q if isinstance(q, FieldOrder) else int(q)
    return ceil_log2(q), math.log2(q)


def storage_cost_sparse(s_avg: float, r: int, l: int, n: int, xi: int, q) -> float:
    """Expected bits per node for the sparse scheme with index + value records."""
    cq, _ = _log2q(q)
    elems = Fraction(r * l, n)
    return (2 * xi + 2) * (1.0 - s_avg) * float(elems) * (cq + ceil_log2(elems))


def storage_cost_classical(r: int, l: int, n: int, xi: int, q) -> float:
    """Bits per node for a dense threshold scheme with the same n and xi."""
    if n - xi - 1 < 1:
        raise PlanError(f"classical baseline needs n - xi - 1 >= 1, got n={n}, xi={xi}")
    cq, _ = _log2q(q)
    return r * l / (n - xi - 1) * cq


def sparsity_threshold(n: int, xi: int, q, r: int, l: int) -> float | None:
    """Smallest s_avg at which the sparse scheme stores less; None when xi = 0."""
    if xi == 0:
        return None
    _, lq = _log2q(q)
    return 1.0 - (1.0 / (2 * xi)) * (n / (n - xi)) * lq / (lq + ceil_log2(Fraction(r * l, n)))


def break_even_s_avg(n: int, xi: int, q, r: int, l: int) -> float:
    """The s_avg at which :func:`storage_cost_sparse` equals :func:`storage_cost_classical`."""
    if n - xi - 1 < 1:
        raise PlanError(f"classical baseline needs n - xi - 1 >= 1, got n={n}, xi={xi}")
    cq, _ = _log2q(q)
    ci = ceil_log2(Fraction(r * l, n))
    return 1.0 - n * cq / ((2 * xi + 2) * (n - xi - 1) * (cq + ci))


@dataclass(frozen=True)
class CostReport:
    sparse_bound_bits: float
    classical_bits: float
    threshold_s_avg: float | None
    measured_bits: int | None = None

    @property
    def beneficial(self) -> bool:
        return self.sparse_bound_bits < self.classical_bits

    def as_dict(self) -> dict:
        return {"sparse_bound_bits": self.sparse_bound_bits,
                "measured_bits": self.measured_bits,
                "classical_bits": self.classical_bits,
                "threshold_s_avg": self.threshold_s_avg,
                "beneficial": self.beneficial}


def cost_report(s_avg, r, l, n, xi, q, measured_bits=None) -> CostReport:
    return CostReport(storage_cost_sparse(s_avg, r, l, n, xi, q),
                      storage_cost_classical(r, l, n, xi, q),
                      sparsity_threshold(n, xi, q, r, l),
                      measured_bits)


# reference rows for r*l = 10^20:
# (log2 q, s, xi, n, minimum s_avg, relative leakage)
REFERENCE_TABLE = (
    (32, 0.95, 2, 60, 0.9396, 0.0135),
    (32, 0.95, 4, 60, 0.9625, 0.0502),
    (32, 0.99, 4, 60, 0.9625, 0.0206),
    (32, 0.99, 5, 100, 0.9692, 0.0206),
    (20, 0.99, 5, 100, 0.9778, 0.0176),
)
REFERENCE_ELEMENTS = 10 ** 20


def reference_rows(base=2) -> list[dict]:
    """Evaluate the cost formulas at each reference row and report deltas.

    Both the closed-form threshold and the exact break-even point of the
    two cost expressions are given against the reference s_avg.

    The relative leakage is that of one node's store, (xi+1)(L1+L2)/(n H(A)),
    with the optimal equal-sparsity padding at the reference s_avg.
    """
    from .optimizer import solve_optimal_pmf
    from .leakage import SparsityTargets, source_entropy

    out = []
    for lq, s, xi, n, s_pub, eps_pub in REFERENCE_TABLE:
        f = FieldOrder.binary(lq)
        src = SourceModel(f, s)
        rl = REFERENCE_ELEMENTS
        thr = sparsity_threshold(n, xi, f.q, rl, 1)
        be = break_even_s_avg(n, xi, f.q, rl, 1)
        res = solve_optimal_pmf(src, SparsityTargets(s_pub, s_pub, f.q), base=base)
        eps = (xi + 1) * res.leakage.total / (n * source_entropy(src, base))
        out.append({
            "log2_q": lq, "s": s, "xi": xi, "n": n, "r_l": rl,
            "s_avg_reference": s_pub,
            "threshold_formula": thr,
            "threshold_delta": thr - s_pub,
            "break_even_s_avg": be,
            "break_even_delta": be - s_pub,
            "sparse_bits_at_reference": storage_cost_sparse(s_pub, rl, 1, n, xi, f.q),
            "classical_bits": storage_cost_classical(rl, 1, n, xi, f.q),
            "relative_leakage_reference": eps_pub,
            "relative_leakage_computed": eps,
            "relative_leakage_delta": eps - eps_pub,
        })
    return out
