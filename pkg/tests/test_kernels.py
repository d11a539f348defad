import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sparseshare import _pykernels, kernels

BACKENDS = kernels.backends()
needs_both = pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled backend not built")


def test_backend_selected():
    assert kernels.BACKEND in ("python", "cython")


@needs_both
@given(st.integers(0, 2 ** 64 - 1), st.integers(0, 2 ** 40),
       st.sampled_from([(2, False), (4, False), (255, True), (2 ** 61 - 2, False),
                        (2 ** 64 - 1, True), (2 ** 64 - 60, False)]),
       st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_sampler_identical(seed, start, field, p1, p2, p3):
    qm1, binary = field
    if p2 + p3 > 1:
        return
    rng = np.random.default_rng(seed % 1000)
    a = rng.integers(0, qm1, 500, dtype=np.uint64, endpoint=True)
    a[::3] = 0
    outs = [kernels.sample_padding(a, seed, start, qm1, binary, p1, p2, p3, impl=m)
            for m in BACKENDS.values()]
    assert np.array_equal(outs[0], outs[1])
    assert (outs[0] <= qm1).all()


@needs_both
@given(st.integers(0, 63), st.integers(1, 64), st.integers(0, 200), st.integers(0, 2 ** 32))
def test_packing_identical(ib, vb, n, seed):
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, 2 ** ib, n, dtype=np.uint64) if ib else np.zeros(n, np.uint64)
    val = rng.integers(0, 2 ** vb - 1, n, dtype=np.uint64, endpoint=True)
    packed = [kernels.pack_records(idx, val, ib, vb, impl=m) for m in BACKENDS.values()]
    assert packed[0] == packed[1]
    assert len(packed[0]) == (n * (ib + vb) + 7) // 8
    for m in BACKENDS.values():
        i2, v2 = kernels.unpack_records(packed[0], n, ib, vb, impl=m)
        assert np.array_equal(i2, idx) and np.array_equal(v2, val)


def test_hand_packed_fixture():
    # (0,1) (5,2) (7,3) with 3 index bits and 2 value bits:
    # 000 01 101 10 111 11 + 6 zero pad bits -> 0x0D 0xBE
    data = bytes([0x0D, 0xBE])
    for m in BACKENDS.values():
        idx, val = kernels.unpack_records(data, 3, 3, 2, impl=m)
        assert idx.tolist() == [0, 5, 7] and val.tolist() == [1, 2, 3]
        assert kernels.pack_records(idx, val, 3, 2, impl=m) == data


def test_unpack_short_buffer():
    for m in BACKENDS.values():
        with pytest.raises(ValueError):
            kernels.unpack_records(b"\x00", 3, 3, 2, impl=m)


def test_sampler_stream_layout():
    # entry k draws word 0 for its category; an all-zero input with p1 = 1 stays zero
    a = np.zeros(100, np.uint64)
    out = kernels.sample_padding(a, 5, 0, 255, True, 1.0, 0.0, 0.0, impl=_pykernels)
    assert not out.any()
    out = kernels.sample_padding(a, 5, 0, 255, True, 0.0, 0.0, 0.0, impl=_pykernels)
    assert (out > 0).all()


def test_excluded_value_never_drawn():
    a = np.full(20000, 7, np.uint64)
    for m in BACKENDS.values():
        # prime q = 11: the excluded value is -7 = 4
        out = kernels.sample_padding(a, 1, 0, 10, False, 0.0, 0.0, 0.0, impl=m)
        assert not np.isin(out, [0, 4]).any()
        assert set(np.unique(out).tolist()) == set(range(1, 11)) - {4}
        # binary: -7 = 7
        out = kernels.sample_padding(a, 1, 0, 15, True, 0.0, 0.0, 0.0, impl=m)
        assert not np.isin(out, [0, 7]).any()


def test_pure_python_env(monkeypatch):
    import importlib

    monkeypatch.setenv("SPARSESHARE_PURE_PYTHON", "1")
    mod = importlib.reload(kernels)
    try:
        assert mod.BACKEND == "python"
    finally:
        monkeypatch.delenv("SPARSESHARE_PURE_PYTHON")
        importlib.reload(kernels)
