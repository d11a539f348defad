import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sparseshare.field import (
    FieldError,
    FieldOrder,
    ff_add,
    ff_neg,
    ff_sample,
    ff_sub,
    irreducible_polynomial,
    is_prime,
)

FIELDS = [FieldOrder.prime(5), FieldOrder.prime(17), FieldOrder.prime(2 ** 61 - 1),
          FieldOrder.prime(2 ** 64 - 59), FieldOrder.binary(8), FieldOrder.binary(32),
          FieldOrder.binary(64)]


def elements(f):
    return st.integers(min_value=0, max_value=f.q - 1)


def test_prime_addition_example():
    assert ff_add(3, 4, FieldOrder.prime(5)) == 2


def test_binary_self_inverse():
    f = FieldOrder.binary(8)
    a = np.arange(256, dtype=np.uint64)
    assert not ff_add(a, a, f).any()


@pytest.mark.parametrize("f", FIELDS, ids=str)
def test_zero_is_identity(f):
    for a in (0, 1, f.q - 1):
        assert ff_add(0, a, f) == a
        assert ff_neg(0, f) == 0


def test_negation_examples():
    assert ff_neg(2, FieldOrder.prime(5)) == 3
    f = FieldOrder.binary(16)
    assert ff_neg(12345, f) == 12345


@pytest.mark.parametrize("f", FIELDS, ids=str)
def test_field_axioms_property(f):
    @given(elements(f), elements(f), elements(f))
    def check(a, b, c):
        assert ff_add(a, ff_neg(a, f), f) == 0
        assert ff_add(a, b, f) == ff_add(b, a, f)
        assert ff_add(ff_add(a, b, f), c, f) == ff_add(a, ff_add(b, c, f), f)
        assert ff_add(ff_add(a, b, f), ff_neg(b, f), f) == a
        assert ff_sub(ff_add(a, b, f), b, f) == a

    check()


@pytest.mark.parametrize("f", FIELDS, ids=str)
def test_vector_ops_match_python_ints(f):
    # big-int arithmetic as the oracle, including values near 2^64
    rng = np.random.default_rng(3)
    a = rng.integers(0, f.q - 1, 2000, dtype=np.uint64, endpoint=True)
    b = rng.integers(0, f.q - 1, 2000, dtype=np.uint64, endpoint=True)
    a[:3] = [0, f.q - 1, f.q - 1]
    b[:3] = [f.q - 1, f.q - 1, 1]
    got = f.add(a, b).tolist()
    if f.is_binary:
        want = [int(x) ^ int(y) for x, y in zip(a, b)]
    else:
        want = [(int(x) + int(y)) % f.q for x, y in zip(a, b)]
    assert got == want
    assert f.neg(a).tolist() == [ff_neg(int(x), f) for x in a]


def test_out_of_range_rejected():
    f = FieldOrder.prime(5)
    with pytest.raises(FieldError):
        ff_add(5, 1, f)
    with pytest.raises(FieldError):
        f.check(np.array([0, 7], dtype=np.uint64))


@pytest.mark.parametrize("q", [2, 1, 0, 9, 15, 2 ** 64 + 13])
def test_bad_orders(q):
    with pytest.raises(FieldError):
        FieldOrder.from_q(q)


def test_from_q_strings():
    assert FieldOrder.from_q("2^8") == FieldOrder.binary(8)
    assert FieldOrder.from_q("257").kind == "prime"
    assert FieldOrder.from_q(2 ** 64) == FieldOrder.binary(64)


def test_is_prime_against_sieve():
    n = 5000
    sieve = np.ones(n, bool)
    sieve[:2] = False
    for p in range(2, int(n ** 0.5) + 1):
        sieve[p * p::p] &= False
    assert [is_prime(k) for k in range(n)] == sieve.tolist()
    assert is_prime(2 ** 61 - 1) and is_prime(2 ** 64 - 59)
    assert not is_prime(2 ** 64 - 1) and not is_prime(3215031751)  # strong pseudoprime to 2,3,5,7


def test_irreducible_polynomials_known():
    # standard low-weight choices
    assert irreducible_polynomial(8) == 0x11B
    assert irreducible_polynomial(20) == (1 << 20) | (1 << 3) | 1
    assert irreducible_polynomial(32) == 0x10000008D
    assert irreducible_polynomial(64) == 0x1000000000000001B


def _poly_has_root_free_factorisation(f, m):
    # brute force: no factor of degree <= m/2 (small m only)
    def pmod(a, b):
        db = b.bit_length()
        while a and a.bit_length() >= db:
            a ^= b << (a.bit_length() - db)
        return a
    for g in range(2, 1 << (m // 2 + 1)):
        if pmod(f, g) == 0:
            return False
    return True


@pytest.mark.parametrize("m", range(2, 13))
def test_irreducible_by_trial_division(m):
    f = irreducible_polynomial(m)
    assert f.bit_length() == m + 1
    assert _poly_has_root_free_factorisation(f, m)


def test_sample_point_mass_zero():
    f = FieldOrder.prime(17)
    assert not ff_sample(f, 1000, 1, p_zero=1.0).any()


def test_sample_uniform_nonzero_frequencies():
    f = FieldOrder.prime(5)
    n = 10 ** 6
    x = ff_sample(f, n, 42)
    counts = np.bincount(x.astype(np.int64), minlength=5)
    assert counts[0] == 0
    sigma = np.sqrt(0.25 * 0.75 / n)
    assert np.all(np.abs(counts[1:] / n - 0.25) < 3 * sigma)


def test_sample_excludes_point():
    f = FieldOrder.prime(17)
    x = ff_sample(f, 10 ** 5, 9, point=14)
    assert not np.isin(x, [0, 14]).any()
    assert set(np.unique(x).tolist()) == set(range(1, 17)) - {14}


def test_sample_deterministic_and_chunk_independent():
    f = FieldOrder.binary(32)
    whole = ff_sample(f, 5000, 77, p_zero=0.3, p_point=0.2, point=123)
    again = ff_sample(f, 5000, 77, p_zero=0.3, p_point=0.2, point=123)
    parts = np.concatenate([ff_sample(f, 1000, 77, p_zero=0.3, p_point=0.2, point=123, start=s)
                            for s in range(0, 5000, 1000)])
    assert np.array_equal(whole, again) and np.array_equal(whole, parts)


def test_sample_rejects_bad_probabilities():
    with pytest.raises(FieldError):
        ff_sample(FieldOrder.prime(7), 10, 0, p_zero=0.7, p_point=0.5, point=1)
