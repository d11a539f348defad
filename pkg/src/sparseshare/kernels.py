"""Backend selection for the hot loops.

The compiled ``_ckernels`` extension is used when it imports; otherwise
the numpy implementation in ``_pykernels`` takes over. Setting
``SPARSESHARE_PURE_PYTHON=1`` forces the fallback. Both backends produce
identical outputs for identical inputs.
"""

import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("SPARSESHARE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:  # extension not built
        pass

_MASK64 = (1 << 64) - 1


def sample_padding(a, seed, start, q_minus_1, binary, p1, p2, p3, impl=None):
    """Draw one padding entry per element of ``a`` (field values as uint64).

    ``start`` is the global linear index of ``a[0]``; entry ``i`` consumes
    only the stream words of counter ``start + i``, so chunked calls give
    the same result as one big call.
    """
    impl = impl or _impl
    a = np.ascontiguousarray(a, dtype=np.uint64)
    return impl.sample_padding(a, int(seed) & _MASK64, int(start), int(q_minus_1),
                               bool(binary), float(p1), float(p2), float(p3))


def pack_records(index, value, index_bits, value_bits, impl=None):
    impl = impl or _impl
    index = np.ascontiguousarray(index, dtype=np.uint64)
    value = np.ascontiguousarray(value, dtype=np.uint64)
    return impl.pack_records(index, value, int(index_bits), int(value_bits))


def unpack_records(buf, n, index_bits, value_bits, impl=None):
    impl = impl or _impl
    buf = np.frombuffer(bytes(buf), dtype=np.uint8)
    return impl.unpack_records(buf, int(n), int(index_bits), int(value_bits))


def backends():
    """Return the importable backend modules keyed by name."""
    found = {"python": _pykernels}
    try:
        from . import _ckernels
        found["cython"] = _ckernels
    except ImportError:
        pass
    return found
