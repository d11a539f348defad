# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Must stay bit-identical to ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, uint8_t

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef int MAX_DRAWS = 255


cdef inline uint64_t mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t draw(uint64_t key, uint64_t k, uint64_t d) nogil:
    return mix64(key + (k * 256ULL + d) * GOLDEN)


def sample_padding(cnp.uint64_t[::1] a, uint64_t seed, uint64_t start,
                   uint64_t q_minus_1, bint binary,
                   double p1, double p2, double p3):
    cdef Py_ssize_t n = a.shape[0], i
    out_arr = np.empty(n, dtype=np.uint64)
    cdef cnp.uint64_t[::1] out = out_arr
    cdef uint64_t key = mix64(seed)
    cdef uint64_t max_accept = 0xFFFFFFFFFFFFFFFFULL - ((0xFFFFFFFFFFFFFFFFULL % q_minus_1) + 1) % q_minus_1
    cdef double p23 = p2 + p3
    cdef double u
    cdef uint64_t k, ai, excl, x, v
    cdef bint has_excl, done
    cdef int d
    cdef bint failed = False
    with nogil:
        for i in range(n):
            k = start + <uint64_t>i
            ai = a[i]
            u = <double>(draw(key, k, 0) >> 11) * (1.0 / 9007199254740992.0)
            has_excl = False
            excl = 0
            if ai == 0:
                if u < p1:
                    out[i] = 0
                    continue
            else:
                excl = ai if binary else (q_minus_1 - ai + 1)
                if u < p2:
                    out[i] = 0
                    continue
                if u < p23:
                    out[i] = excl
                    continue
                has_excl = True
            done = False
            for d in range(1, MAX_DRAWS + 1):
                x = draw(key, k, <uint64_t>d)
                if x > max_accept:
                    continue
                v = 1 + x % q_minus_1
                if has_excl and v == excl:
                    continue
                out[i] = v
                done = True
                break
            if not done:
                failed = True
                break
    if failed:
        raise RuntimeError("sampler exhausted its per-entry draw budget")
    return out_arr


cdef inline Py_ssize_t put_bits(uint8_t* buf, Py_ssize_t bitpos, uint64_t v, int k) nogil:
    # OR k bits of v (MSB first) into a zeroed buffer, at most one byte per step
    cdef int off, take
    while k > 0:
        off = bitpos & 7
        take = 8 - off
        if take > k:
            take = k
        buf[bitpos >> 3] |= <uint8_t>(((v >> (k - take)) & ((1ULL << take) - 1)) << (8 - off - take))
        bitpos += take
        k -= take
    return bitpos


def pack_records(cnp.uint64_t[::1] index, cnp.uint64_t[::1] value,
                 int index_bits, int value_bits):
    cdef Py_ssize_t n = index.shape[0], i
    cdef Py_ssize_t total_bits = n * (index_bits + value_bits)
    out_arr = np.zeros((total_bits + 7) // 8, dtype=np.uint8)
    if total_bits == 0:
        return out_arr.tobytes()
    cdef uint8_t[::1] out = out_arr
    cdef uint8_t* buf = &out[0]
    cdef Py_ssize_t pos = 0
    with nogil:
        for i in range(n):
            pos = put_bits(buf, pos, index[i], index_bits)
            pos = put_bits(buf, pos, value[i], value_bits)
    return out_arr.tobytes()


cdef inline uint64_t get_bits(const uint8_t* buf, Py_ssize_t bitpos, int k) nogil:
    cdef uint64_t v = 0
    cdef int off, take
    while k > 0:
        off = bitpos & 7
        take = 8 - off
        if take > k:
            take = k
        v = (v << take) | ((buf[bitpos >> 3] >> (8 - off - take)) & ((1U << take) - 1))
        bitpos += take
        k -= take
    return v


def unpack_records(const uint8_t[::1] buf, Py_ssize_t n, int index_bits, int value_bits):
    cdef int w = index_bits + value_bits
    if (n * w + 7) // 8 > buf.shape[0]:
        raise ValueError("buffer too short for record count")
    index_arr = np.zeros(n, dtype=np.uint64)
    value_arr = np.zeros(n, dtype=np.uint64)
    if n == 0 or w == 0:
        return index_arr, value_arr
    cdef cnp.uint64_t[::1] idx = index_arr
    cdef cnp.uint64_t[::1] val = value_arr
    cdef Py_ssize_t i, bitpos = 0
    with nogil:
        for i in range(n):
            idx[i] = get_bits(&buf[0], bitpos, index_bits)
            bitpos += index_bits
            val[i] = get_bits(&buf[0], bitpos, value_bits)
            bitpos += value_bits
    return index_arr, value_arr
