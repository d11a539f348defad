"""Source model, conditional padding distributions and their leakage.

All logarithms are taken in nats internally and converted to the
requested base (2, e or q) only when a report is produced. Terms of the
form 0 * log(0 / x) are treated as 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .field import FieldOrder

__all__ = [
    "ModelError",
    "SourceModel",
    "SparsityTargets",
    "ConditionalPmf",
    "GeneralConditionalPmf",
    "LeakageReport",
    "ClassPmf",
    "log_base",
    "build_conditional_pmf",
    "sparsity_levels",
    "total_leakage",
    "general_leakage",
    "source_entropy",
    "marginal_share_pmfs",
    "expand_pmf",
]

GENERAL_Q_LIMIT = 4096
_SLACK = 1e-12


class ModelError(ValueError):
    """Probabilities or parameters outside their valid range."""


def log_base(base, q: int) -> float:
    """Natural log of a reporting base given as 2, "e", "q" or a number."""
    if isinstance(base, str):
        b = base.strip().lower()
        if b == "e":
            return 1.0
        if b == "q":
            return math.log(q)
        base = float(b)
    base = float(base)
    if base <= 1:
        raise ModelError(f"log base must exceed 1, got {base}")
    return math.log(base)


def _base_label(base) -> str:
    if isinstance(base, str):
        return base.strip().lower()
    return "e" if base == math.e else f"{base:g}"


def _xlog(p: float, ratio_den: float) -> float:
    # p * ln(p / den) with the 0 log 0 convention
    if p <= 0.0:
        return 0.0
    return p * math.log(p / ratio_den)


def _check_prob(name: str, v: float):
    if not (math.isfinite(v) and -_SLACK <= v <= 1 + _SLACK):
        raise ModelError(f"{name}={v!r} is not a probability")


@dataclass(frozen=True)
class SourceModel:
    """I.i.d. entries: zero with probability ``s``, else uniform on F_q*.

    The regime of interest is 1/q < s < 1; anything in (0, 1) is accepted
    so limits such as the uniform source can be evaluated.
    """

    field: FieldOrder
    s: float

    def __post_init__(self):
        if not 0.0 < self.s < 1.0:
            raise ModelError(f"source sparsity must lie in (0, 1), got s={self.s}")

    @property
    def q(self) -> int:
        return self.field.q

    @property
    def nonzero_mass(self) -> float:
        return (1.0 - self.s) / (self.q - 1)

    @property
    def is_sparse_regime(self) -> bool:
        return self.s > 1.0 / self.q

    def pmf(self) -> np.ndarray:
        """Full PMF of one entry of A (only for enumerable q)."""
        if self.q > GENERAL_Q_LIMIT:
            raise ModelError(f"q={self.q} too large to enumerate")
        p = np.full(self.q, self.nonzero_mass)
        p[0] = self.s
        return p


@dataclass(frozen=True)
class SparsityTargets:
    """Desired zero probabilities of the padding share R and the padded share A+R."""

    s_R: float
    s_AR: float
    q: int

    def __post_init__(self):
        _check_prob("s_R", self.s_R)
        _check_prob("s_AR", self.s_AR)

    @classmethod
    def from_average(cls, s_avg: float, s_delta: float, q: int) -> "SparsityTargets":
        return cls(s_avg - s_delta / 2.0, s_avg + s_delta / 2.0, q)

    @property
    def s_avg(self) -> float:
        return (self.s_R + self.s_AR) / 2.0

    @property
    def s_delta(self) -> float:
        return self.s_AR - self.s_R

    @property
    def sr_inv(self) -> float:
        return (1.0 - self.s_R) / (self.q - 1)

    @property
    def sar_inv(self) -> float:
        return (1.0 - self.s_AR) / (self.q - 1)

    def swapped(self) -> "SparsityTargets":
        return SparsityTargets(self.s_AR, self.s_R, self.q)


@dataclass(frozen=True)
class ConditionalPmf:
    """Structured law of one padding entry R given the source entry A.

    A = 0:  R = 0 w.p. p1, otherwise uniform on F_q*  (p1_inv each).
    A = a:  R = 0 w.p. p2, R = -a w.p. p3, otherwise uniform on
            F_q minus {0, -a}  (p23_inv each).
    """

    p1: float
    p2: float
    p3: float
    q: int

    @property
    def p1_inv(self) -> float:
        return (1.0 - self.p1) / (self.q - 1)

    @property
    def p23_inv(self) -> float:
        return (1.0 - self.p2 - self.p3) / (self.q - 2)

    def as_dict(self) -> dict:
        return {"p1": self.p1, "p1_inv": self.p1_inv, "p2": self.p2,
                "p3": self.p3, "p23_inv": self.p23_inv}


def build_conditional_pmf(p1: float, p2: float, p3: float, q) -> ConditionalPmf:
    """Validate and build a :class:`ConditionalPmf`.

    Values within 1e-12 of the unit interval are clipped into it.
    """
    q = q.q if isinstance(q, FieldOrder) else int(q)
    if q < 3:
        raise ModelError("structured PMF needs q >= 3")
    for name, v in (("p1", p1), ("p2", p2), ("p3", p3)):
        _check_prob(name, v)
    p1, p2, p3 = (min(max(float(v), 0.0), 1.0) for v in (p1, p2, p3))
    if p2 + p3 > 1 + _SLACK:
        raise ModelError(f"p2 + p3 = {p2 + p3!r} exceeds 1")
    if p2 + p3 > 1:
        p3 = 1.0 - p2
    return ConditionalPmf(p1, p2, p3, q)


def sparsity_levels(pmf: ConditionalPmf, src: SourceModel) -> SparsityTargets:
    """Zero probabilities of R and A+R induced by ``pmf`` on ``src``."""
    s = src.s
    return SparsityTargets(pmf.p1 * s + pmf.p2 * (1 - s),
                           pmf.p1 * s + pmf.p3 * (1 - s), src.q)


@dataclass(frozen=True)
class ClassPmf:
    """A PMF on F_q that is constant on F_q*."""

    p_zero: float
    p_nonzero: float
    q: int

    def full(self) -> np.ndarray:
        p = np.full(self.q, self.p_nonzero)
        p[0] = self.p_zero
        return p


def marginal_share_pmfs(pmf: ConditionalPmf, src: SourceModel) -> tuple[ClassPmf, ClassPmf]:
    t = sparsity_levels(pmf, src)
    return ClassPmf(t.s_R, t.sr_inv, src.q), ClassPmf(t.s_AR, t.sar_inv, src.q)


@dataclass(frozen=True)
class LeakageReport:
    """Per-entry leakage I(A;R) = L1 and I(A;A+R) = L2 in one log base."""

    L1: float
    L2: float
    base: str = "2"
    entropy: float = field(default=float("nan"))

    @property
    def total(self) -> float:
        return self.L1 + self.L2

    @property
    def relative(self) -> float:
        """Total leakage normalised by the source entropy H(A)."""
        return self.total / self.entropy

    def per_matrix(self, rows: int, cols: int) -> float:
        return self.total * rows * cols

    def as_dict(self) -> dict:
        return {"L1": self.L1, "L2": self.L2, "total": self.total, "base": self.base}


def _report(l1_nats: float, l2_nats: float, src: SourceModel, base) -> LeakageReport:
    ln_b = log_base(base, src.q)
    return LeakageReport(l1_nats / ln_b, l2_nats / ln_b, _base_label(base),
                         source_entropy(src, base))


def _structured_leakage_nats(pmf: ConditionalPmf, src: SourceModel) -> tuple[float, float]:
    q, s = src.q, src.s
    if pmf.q != q:
        raise ModelError(f"PMF built for q={pmf.q}, source has q={q}")
    t = sparsity_levels(pmf, src)
    p1, p1i, p2, p3, p23 = pmf.p1, pmf.p1_inv, pmf.p2, pmf.p3, pmf.p23_inv
    sr, sri, sar, sari = t.s_R, t.sr_inv, t.s_AR, t.sar_inv
    # A = a != 0: R = 0 leaves A+R = a (nonzero); R = -a gives A+R = 0
    l1 = (s * (_xlog(p1, sr) + (q - 1) * _xlog(p1i, sri))
          + (1 - s) * (_xlog(p2, sr) + _xlog(p3, sri) + (q - 2) * _xlog(p23, sri)))
    l2 = (s * (_xlog(p1, sar) + (q - 1) * _xlog(p1i, sari))
          + (1 - s) * (_xlog(p2, sari) + _xlog(p3, sar) + (q - 2) * _xlog(p23, sari)))
    return max(l1, 0.0), max(l2, 0.0)


def total_leakage(pmf: ConditionalPmf, src: SourceModel, base=2) -> LeakageReport:
    """Closed-form L1 and L2 of a structured PMF.

    Each term pairs a conditional probability with the marginal of the
    share value it produces, so the result is the exact mutual
    information for any q (no enumeration).
    """
    l1, l2 = _structured_leakage_nats(pmf, src)
    return _report(l1, l2, src, base)


def source_entropy(src: SourceModel, base=2) -> float:
    s, q = src.s, src.q
    h = s * math.log(1.0 / s) + (1 - s) * math.log((q - 1) / (1 - s))
    return h / log_base(base, q)


@dataclass(frozen=True)
class GeneralConditionalPmf:
    """Unstructured table with ``table[r, a] = Pr(R = r | A = a)``."""

    table: np.ndarray
    field: FieldOrder

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        q = self.field.q
        if t.shape != (q, q):
            raise ModelError(f"table must be {q}x{q}, got {t.shape}")
        if (t < 0).any():
            raise ModelError("table has negative entries")
        err = np.abs(t.sum(axis=0) - 1.0).max()
        if err > 1e-9:
            raise ModelError(f"columns do not sum to 1 (max error {err:.3g})")
        object.__setattr__(self, "table", t)

    @classmethod
    def uniform(cls, f: FieldOrder) -> "GeneralConditionalPmf":
        return cls(np.full((f.q, f.q), 1.0 / f.q), f)


def _index_tables(f: FieldOrder):
    q = f.q
    if q > GENERAL_Q_LIMIT:
        raise ModelError(f"q={q} exceeds the enumeration limit {GENERAL_Q_LIMIT}")
    elems = np.arange(q, dtype=np.uint64)
    plus = f.add(elems[:, None], elems[None, :]).astype(np.intp)  # plus[r, a] = r + a
    neg = f.neg(elems).astype(np.intp)
    return plus, neg


def expand_pmf(pmf: ConditionalPmf, f: FieldOrder) -> GeneralConditionalPmf:
    """The q x q table of a structured PMF."""
    if f.q != pmf.q:
        raise ModelError("field and PMF disagree on q")
    _, neg = _index_tables(f)
    q = f.q
    t = np.full((q, q), pmf.p23_inv)
    t[:, 0] = pmf.p1_inv
    t[0, 0] = pmf.p1
    cols = np.arange(1, q)
    t[0, cols] = pmf.p2
    t[neg[cols], cols] = pmf.p3
    return GeneralConditionalPmf(t, f)


def _general_terms(table: np.ndarray, pa: np.ndarray, plus: np.ndarray):
    q = table.shape[0]
    joint = table * pa[None, :]
    p_r = joint.sum(axis=1)
    p_ar = np.bincount(plus.ravel(), weights=joint.ravel(), minlength=q)
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = table > 0
        l1 = np.where(pos, joint * np.log(table / p_r[:, None]), 0.0)
        l2 = np.where(pos, joint * np.log(table / p_ar[plus]), 0.0)
    return l1, l2


def general_leakage(g: GeneralConditionalPmf, src: SourceModel, base=2) -> LeakageReport:
    """Leakage of an arbitrary conditional table, by direct enumeration.

    Sums are compensated (``math.fsum``) since q^2 terms are involved.
    """
    if g.field.q != src.q:
        raise ModelError("table and source disagree on q")
    plus, _ = _index_tables(g.field)
    l1, l2 = _general_terms(g.table, src.pmf(), plus)
    return _report(max(math.fsum(l1.ravel()), 0.0), max(math.fsum(l2.ravel()), 0.0), src, base)


def with_base(report: LeakageReport, src: SourceModel, base) -> LeakageReport:
    """Re-express a report in another log base."""
    factor = log_base(report.base, src.q) / log_base(base, src.q)
    return replace(report, L1=report.L1 * factor, L2=report.L2 * factor,
                   base=_base_label(base), entropy=source_entropy(src, base))
