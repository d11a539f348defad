"""Pure numpy versions of the hot loops in ``_ckernels.pyx``.

Both backends draw from the same counter-based SplitMix64 stream: the
``d``-th 64-bit word for global entry ``k`` is
``mix64(mix64(seed) + (k * 256 + d) * GOLDEN)``. Word 0 picks the
category, words 1.. feed rejection sampling of nonzero values.
"""

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MAX_DRAWS = 255
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_U64_MAX = (1 << 64) - 1


def mix64(z):
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _draw(key, k, d):
    with np.errstate(over="ignore"):
        ctr = k * np.uint64(256) + np.uint64(d)
        return mix64(key + ctr * GOLDEN)


def max_accept(q_minus_1):
    return _U64_MAX - ((_U64_MAX % q_minus_1) + 1) % q_minus_1


def sample_padding(a, seed, start, q_minus_1, binary, p1, p2, p3):
    a = np.ascontiguousarray(a, dtype=np.uint64)
    n = a.shape[0]
    key = mix64(np.array([seed], dtype=np.uint64))[0:1]
    with np.errstate(over="ignore"):
        k = np.uint64(start) + np.arange(n, dtype=np.uint64)
    u = (_draw(key, k, 0) >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)

    nz = a != 0
    if binary:
        excl = a.copy()
    else:
        with np.errstate(over="ignore"):
            excl = np.where(nz, np.uint64(q_minus_1) - a + np.uint64(1), np.uint64(0))

    out = np.zeros(n, dtype=np.uint64)
    p23 = p2 + p3
    zero_cat = np.where(nz, u < p2, u < p1)
    point_cat = nz & ~zero_cat & (u < p23)
    out[point_cat] = excl[point_cat]

    pending = np.flatnonzero(~zero_cat & ~point_cat)
    m = np.uint64(q_minus_1)
    limit = np.uint64(max_accept(q_minus_1))
    for d in range(1, MAX_DRAWS + 1):
        if pending.size == 0:
            break
        x = _draw(key, k[pending], d)
        v = np.uint64(1) + x % m
        ok = (x <= limit) & ~(nz[pending] & (v == excl[pending]))
        out[pending[ok]] = v[ok]
        pending = pending[~ok]
    if pending.size:
        raise RuntimeError("sampler exhausted its per-entry draw budget")
    return out


def _bit_columns(v, nbits):
    if nbits == 0:
        return np.zeros((v.shape[0], 0), dtype=np.uint8)
    shifts = np.arange(nbits - 1, -1, -1, dtype=np.uint64)
    return ((v[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.uint8)


def pack_records(index, value, index_bits, value_bits):
    index = np.asarray(index, dtype=np.uint64)
    value = np.asarray(value, dtype=np.uint64)
    if index.size == 0 or index_bits + value_bits == 0:
        return b""
    bits = np.hstack([_bit_columns(index, index_bits), _bit_columns(value, value_bits)])
    return np.packbits(bits.ravel()).tobytes()


def _from_bits(cols):
    acc = np.zeros(cols.shape[0], dtype=np.uint64)
    for j in range(cols.shape[1]):
        acc = (acc << np.uint64(1)) | cols[:, j].astype(np.uint64)
    return acc


def unpack_records(buf, n, index_bits, value_bits):
    w = index_bits + value_bits
    raw = np.frombuffer(bytes(buf), dtype=np.uint8)
    if (n * w + 7) // 8 > raw.shape[0]:
        raise ValueError("buffer too short for record count")
    if n == 0 or w == 0:
        return np.zeros(n, dtype=np.uint64), np.zeros(n, dtype=np.uint64)
    bits = np.unpackbits(raw)[: n * w].reshape(n, w)
    return _from_bits(bits[:, :index_bits]), _from_bits(bits[:, index_bits:])
