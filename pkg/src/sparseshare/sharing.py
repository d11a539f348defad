"""Sampling the padding matrix, forming shares and estimating leakage.

Every matrix entry draws from its own counter in a seeded SplitMix64
stream (see :mod:`sparseshare.kernels`), so results do not depend on
chunk sizes or processing order.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .field import FieldError, FieldOrder
from .leakage import ConditionalPmf, LeakageReport, SourceModel, _report
from .sparse import SparseMatrix

__all__ = [
    "SharePair",
    "SourceFitWarning",
    "derive_seed",
    "generate_source",
    "sample_padding",
    "make_shares",
    "reconstruct",
    "class_counts",
    "symmetry_class_mi",
    "empirical_leakage",
    "check_source_fit",
]

CHUNK = 1 << 20
MIN_ESTIMATOR_ENTRIES = 10 ** 4


class SourceFitWarning(UserWarning):
    """Input sparsity is far from the declared source model."""


def derive_seed(seed: int, purpose: str) -> int:
    """Independent 64-bit stream key for one purpose of a user seed."""
    h = hashlib.blake2b(f"{int(seed)}:{purpose}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True, eq=False)
class SharePair:
    padding: SparseMatrix   # R
    padded: SparseMatrix    # A + R
    pmf: ConditionalPmf
    seed: int

    def __post_init__(self):
        if self.padding.shape != self.padded.shape or self.padding.field != self.padded.field:
            raise ValueError("shares disagree on shape or field")

    @property
    def field(self) -> FieldOrder:
        return self.padding.field

    @property
    def shape(self):
        return self.padding.shape


def _chunks(total):
    for start in range(0, total, CHUNK):
        yield start, min(start + CHUNK, total)


def _collect(parts, rows, cols, field):
    if parts:
        idx = np.concatenate([p[0] for p in parts])
        val = np.concatenate([p[1] for p in parts])
    else:
        idx, val = np.zeros(0, np.int64), np.zeros(0, np.uint64)
    return SparseMatrix(rows, cols, field, idx, val)


def _nonzeros(chunk, start):
    nz = np.flatnonzero(chunk)
    return nz.astype(np.int64) + start, chunk[nz]


def generate_source(rows: int, cols: int, src: SourceModel, seed: int) -> SparseMatrix:
    """Random matrix whose entries are i.i.d. under ``src``."""
    f = src.field
    key = derive_seed(seed, "source")
    parts = []
    for start, stop in _chunks(rows * cols):
        zeros = np.zeros(stop - start, dtype=np.uint64)
        vals = kernels.sample_padding(zeros, key, start, f.q - 1, f.is_binary, src.s, 0.0, 0.0)
        parts.append(_nonzeros(vals, start))
    return _collect(parts, rows, cols, f)


def _check_pmf(a: SparseMatrix, pmf: ConditionalPmf):
    if pmf.q != a.field.q:
        raise FieldError(f"PMF is for q={pmf.q} but the matrix is over {a.field}")


def sample_padding(a: SparseMatrix, pmf: ConditionalPmf, seed: int) -> SparseMatrix:
    """Padding matrix R drawn entry-wise from ``pmf`` given A."""
    return make_shares(a, pmf, seed).padding


def make_shares(a: SparseMatrix, pmf: ConditionalPmf, seed: int) -> SharePair:
    """Sample R given A and return the pair (R, A + R)."""
    _check_pmf(a, pmf)
    f = a.field
    key = derive_seed(seed, "padding")
    r_parts, ar_parts = [], []
    for start, stop in _chunks(a.size):
        dense_a = a.dense_range(start, stop)
        r = kernels.sample_padding(dense_a, key, start, f.q - 1, f.is_binary,
                                   pmf.p1, pmf.p2, pmf.p3)
        r_parts.append(_nonzeros(r, start))
        ar_parts.append(_nonzeros(f.add(dense_a, r), start))
    return SharePair(_collect(r_parts, a.rows, a.cols, f),
                     _collect(ar_parts, a.rows, a.cols, f), pmf, int(seed))


def reconstruct(pair: SharePair) -> SparseMatrix:
    """A = (A + R) - R."""
    return pair.padded.sub(pair.padding)


# -- leakage estimation ---------------------------------------------------------

def class_counts(a: SparseMatrix, share: SparseMatrix, special: str) -> dict:
    """Joint counts of (A entry, share entry) over the five symmetry classes.

    ``special`` names the distinguished nonzero share value when A = a:
    ``"neg"`` (share R, value -a) or ``"same"`` (share A+R, value a).
    """
    if a.shape != share.shape:
        raise ValueError("matrix and share differ in shape")
    f = a.field
    n = a.size
    at_a = share.values_at(a.index)
    mark = f.neg(a.values) if special == "neg" else a.values
    a_zero_share = int((at_a == 0).sum())
    a_special = int((at_a == mark).sum())
    a_other = a.nnz - a_zero_share - a_special
    share_nz_on_a = a.nnz - a_zero_share
    zero_nz = share.nnz - share_nz_on_a
    n_a0 = n - a.nnz
    return {"total": n, "a_zero": n_a0, "share_zero": n - share.nnz,
            "0,0": n_a0 - zero_nz, "0,x": zero_nz,
            "a,0": a_zero_share, "a,special": a_special, "a,other": a_other}


def symmetry_class_mi(counts: dict, q: int) -> float:
    """Plug-in mutual information (nats) from :func:`class_counts`.

    Within each class the joint law is taken as uniform over its cells,
    which is exact for the structured padding distribution, so no q x q
    table is needed.
    """
    n = counts["total"]
    na0, ns0 = counts["a_zero"], counts["share_zero"]
    na1, ns1 = n - na0, n - ns0
    # (count, count * n / (marginal products) including the class cell multiplicity)
    terms = [
        (counts["0,0"], lambda c: c * n / (na0 * ns0)),
        (counts["0,x"], lambda c: c * n / (na0 * ns1)),
        (counts["a,0"], lambda c: c * n / (na1 * ns0)),
        (counts["a,special"], lambda c: c * n * (q - 1) / (na1 * ns1)),
        (counts["a,other"], lambda c: c * n * (q - 1) / ((q - 2) * na1 * ns1)),
    ]
    return max(math.fsum(c / n * math.log(ratio(c)) for c, ratio in terms if c > 0), 0.0)


def check_source_fit(a: SparseMatrix, src: SourceModel, nsigma: float = 5.0) -> bool:
    """Warn when A's zero fraction is more than ``nsigma`` binomial sigmas off ``s``."""
    sigma = math.sqrt(src.s * (1 - src.s) / a.size)
    dev = abs(a.zero_fraction - src.s)
    if dev > nsigma * sigma:
        warnings.warn(
            f"input zero fraction {a.zero_fraction:.6g} deviates from declared s={src.s:.6g} "
            f"by {dev / sigma:.1f} sigma; leakage guarantees assume the declared i.i.d. model",
            SourceFitWarning, stacklevel=2)
        return False
    return True


def empirical_leakage(a: SparseMatrix, pair: SharePair, src: SourceModel, base=2) -> LeakageReport:
    """Estimate per-entry L1 = I(A;R) and L2 = I(A;A+R) from one sample."""
    if a.size < MIN_ESTIMATOR_ENTRIES:
        raise ValueError(f"need at least {MIN_ESTIMATOR_ENTRIES} entries, got {a.size}")
    if a.field != src.field:
        raise FieldError("matrix and source model disagree on the field")
    check_source_fit(a, src)
    l1 = symmetry_class_mi(class_counts(a, pair.padding, "neg"), src.q)
    l2 = symmetry_class_mi(class_counts(a, pair.padded, "same"), src.q)
    return _report(l1, l2, src, base)
