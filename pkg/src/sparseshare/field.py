"""Finite fields F_q for prime q and q = 2^m.

Only addition and additive inverse are needed by the sharing scheme, so
elements are plain integers in ``[0, q)``: residues for prime fields and
polynomial bit-vectors for binary fields (where addition is XOR and every
element is its own inverse). Arrays of elements are ``numpy.uint64``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import kernels

__all__ = [
    "FieldError",
    "FieldOrder",
    "ff_add",
    "ff_neg",
    "ff_sub",
    "ff_sample",
    "irreducible_polynomial",
]


class FieldError(ValueError):
    """Invalid field order or element out of range."""


_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for n < 3.3e24."""
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for b in _MR_BASES:
        x = pow(b, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


# -- GF(2)[x] helpers for picking the binary-field modulus -------------------

def _pmod(a: int, f: int) -> int:
    df = f.bit_length() - 1
    while a.bit_length() - 1 >= df:
        a ^= f << (a.bit_length() - 1 - df)
    return a


def _pmulmod(a: int, b: int, f: int) -> int:
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
    return _pmod(r, f)


def _pgcd(a: int, b: int) -> int:
    while b:
        a, b = b, _pmod(a, b)
    return a


def _is_irreducible(f: int) -> bool:
    # Rabin's test
    m = f.bit_length() - 1
    x = 2

    def frob(k):
        t = x
        for _ in range(k):
            t = _pmulmod(t, t, f)
        return t

    if frob(m) != x:
        return False
    primes = [p for p in range(2, m + 1) if m % p == 0 and is_prime(p)]
    for p in primes:
        if _pgcd(frob(m // p) ^ x, f) != 1:
            return False
    return True


@lru_cache(maxsize=None)
def irreducible_polynomial(m: int) -> int:
    """Low-weight irreducible polynomial of degree m, as a bit mask.

    Uses the usual convention of the published low-weight tables: the
    trinomial x^m + x^k + 1 with the smallest k if one exists, else the
    pentanomial x^m + x^k1 + x^k2 + x^k3 + 1 minimising (k1, k2, k3)
    lexicographically. For m = 8 this is 0x11B.
    """
    if not 2 <= m <= 64:
        raise FieldError(f"binary field exponent must be in [2, 64], got {m}")
    top = (1 << m) | 1
    for k in range(1, m):
        f = top | (1 << k)
        if _is_irreducible(f):
            return f
    for k1 in range(3, m):
        for k2 in range(2, k1):
            for k3 in range(1, k2):
                f = top | (1 << k1) | (1 << k2) | (1 << k3)
                if _is_irreducible(f):
                    return f
    raise FieldError(f"no low-weight irreducible polynomial of degree {m}")  # pragma: no cover


@dataclass(frozen=True)
class FieldOrder:
    """Order and kind of a finite field.

    Build with :meth:`prime`, :meth:`binary` or :meth:`from_q`. q = 2 is
    rejected because the structured padding distribution needs at least
    one element outside {0, -a}.
    """

    q: int
    kind: str  # "prime" or "binary"
    m: int = 0
    poly: int = field(default=0, compare=False)

    def __post_init__(self):
        if self.kind == "prime":
            if self.q < 3 or not is_prime(self.q):
                raise FieldError(f"q={self.q} is not an odd prime")
            if self.q >= 1 << 64:
                raise FieldError("prime fields are limited to q < 2^64")
        elif self.kind == "binary":
            if not 1 < self.m <= 64 or self.q != 1 << self.m:
                raise FieldError(f"binary field needs q = 2^m with 1 < m <= 64, got q={self.q}")
        else:
            raise FieldError(f"unknown field kind {self.kind!r}")

    @classmethod
    def prime(cls, q: int) -> "FieldOrder":
        return cls(int(q), "prime")

    @classmethod
    def binary(cls, m: int) -> "FieldOrder":
        m = int(m)
        if not 1 < m <= 64:
            raise FieldError(f"binary field needs 1 < m <= 64, got m={m}")
        return cls(1 << m, "binary", m, irreducible_polynomial(m))

    @classmethod
    def from_q(cls, q) -> "FieldOrder":
        """Accepts an int or a string like ``"256"`` or ``"2^8"``."""
        if isinstance(q, str):
            q = q.strip()
            if "^" in q:
                base, exp = q.split("^", 1)
                q = int(base) ** int(exp)
            else:
                q = int(q)
        q = int(q)
        if q == 2:
            raise FieldError("q = 2 is not supported (needs q >= 3)")
        if q > 2 and q & (q - 1) == 0:
            return cls.binary(q.bit_length() - 1)
        if q < 3 or not is_prime(q):
            raise FieldError(f"q={q} is neither a prime nor a power of two")
        return cls.prime(q)

    @property
    def is_binary(self) -> bool:
        return self.kind == "binary"

    @property
    def value_bits(self) -> int:
        """ceil(log2 q)."""
        return (self.q - 1).bit_length()

    def __str__(self):
        return f"GF(2^{self.m})" if self.is_binary else f"GF({self.q})"

    # -- element operations (scalars or uint64 arrays) ----------------------

    def check(self, a):
        if isinstance(a, np.ndarray):
            if a.size and (a.dtype.kind not in "ui" or int(a.max()) >= self.q or int(a.min()) < 0):
                raise FieldError(f"array holds values outside {self}")
            return a.astype(np.uint64, copy=False)
        a = int(a)
        if not 0 <= a < self.q:
            raise FieldError(f"{a} is not an element of {self}")
        return a

    def add(self, a, b):
        if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
            a = np.asarray(a, dtype=np.uint64)
            b = np.asarray(b, dtype=np.uint64)
            if self.is_binary:
                return a ^ b
            q = np.uint64(self.q)
            gap = q - b
            # a + b without overflowing uint64
            with np.errstate(over="ignore"):
                return np.where(a >= gap, a - gap, a + b)
        a, b = self.check(a), self.check(b)
        return a ^ b if self.is_binary else (a + b) % self.q

    def neg(self, a):
        if isinstance(a, np.ndarray):
            a = a.astype(np.uint64, copy=False)
            if self.is_binary:
                return a.copy()
            with np.errstate(over="ignore"):
                return np.where(a == 0, np.uint64(0), np.uint64(self.q) - a)
        a = self.check(a)
        return a if self.is_binary else (-a) % self.q

    def sub(self, a, b):
        return self.add(a, self.neg(b))


def ff_add(a, b, f: FieldOrder):
    return f.add(a, b)


def ff_neg(a, f: FieldOrder):
    return f.neg(a)


def ff_sub(a, b, f: FieldOrder):
    return f.sub(a, b)


def ff_sample(f: FieldOrder, size: int, seed: int, *, p_zero: float = 0.0,
              p_point: float = 0.0, point: int | None = None, start: int = 0) -> np.ndarray:
    """Sample ``size`` field elements from a three-part categorical mixture.

    With probability ``p_zero`` the sample is 0, with ``p_point`` it is
    ``point``, otherwise it is uniform over F_q minus {0} (no ``point``)
    or over F_q minus {0, point}. Entry i uses the counter ``start + i``
    of the seeded stream, so results do not depend on chunking.
    """
    total = p_zero + p_point
    if p_zero < 0 or p_point < 0 or total > 1 + 1e-12:
        raise FieldError("category probabilities must be nonnegative and sum to at most 1")
    if point is None:
        if p_point:
            raise FieldError("p_point given without a point")
        a = np.zeros(size, dtype=np.uint64)
        return kernels.sample_padding(a, seed, start, f.q - 1, f.is_binary, p_zero, 0.0, 0.0)
    point = f.check(point)
    if point == 0:
        raise FieldError("point must be nonzero; use p_zero for the zero element")
    # the padding kernel emits -a for the point category; choose a = -point
    a = np.full(size, f.neg(point), dtype=np.uint64)
    return kernels.sample_padding(a, seed, start, f.q - 1, f.is_binary, 0.0, p_zero, p_point)
