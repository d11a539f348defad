"""Sub-share files: fixed header, packed (index, value) records, CRC-32.

Layout, all integers little-endian::

    "SPSH" | version 0x01 | kind (0x00 prime, 0x01 binary) | q or m (u64)
    | r (u64) | l (u64) | n (u32) | t (u32) | nnz (u64)
    | payload | crc32(payload) (u32)

The payload is ``nnz`` records of ``index_bits`` then ``value_bits``
bits, most significant bit first, concatenated without alignment and
zero-padded to a whole byte at the end. Indices are row-major linear
positions inside the sub-share block of ``ceil(r/n)`` rows by ``l``
columns.

A binary field's reduction polynomial is not stored. Only addition is
applied to share entries, and that is XOR for every choice of
polynomial, so ``m`` alone fixes the arithmetic.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .field import FieldError, FieldOrder
from .frscheme import SubShare, ceil_log2
from .sparse import SparseMatrix

__all__ = [
    "MAGIC",
    "VERSION",
    "HEADER",
    "CodecError",
    "ShareHeader",
    "record_bits",
    "encode_sub_share",
    "decode_sub_share",
    "read_header",
    "measured_size_bits",
    "write_sub_share",
    "read_sub_share",
]

MAGIC = b"SPSH"
VERSION = 1
HEADER = struct.Struct("<4sBBQQQIIQ")
CRC = struct.Struct("<I")
KIND_CODES = {"prime": 0, "binary": 1}


class CodecError(ValueError):
    """Malformed sub-share stream; ``offset`` is the byte where parsing failed."""

    def __init__(self, msg: str, offset: int):
        super().__init__(f"{msg} (at byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class ShareHeader:
    field: FieldOrder
    rows: int      # original r of the full share
    cols: int
    n: int
    t: int
    nnz: int

    @property
    def block_rows(self) -> int:
        return -(-self.rows // self.n)

    @property
    def block_size(self) -> int:
        return self.block_rows * self.cols

    @property
    def index_bits(self) -> int:
        return ceil_log2(self.block_size)

    @property
    def value_bits(self) -> int:
        return self.field.value_bits

    @property
    def payload_bits(self) -> int:
        return self.nnz * (self.index_bits + self.value_bits)

    @property
    def payload_bytes(self) -> int:
        return -(-self.payload_bits // 8)

    def pack(self) -> bytes:
        f = self.field
        order = f.m if f.is_binary else f.q
        return HEADER.pack(MAGIC, VERSION, KIND_CODES[f.kind], order,
                           self.rows, self.cols, self.n, self.t, self.nnz)


def record_bits(sub: SubShare) -> tuple[int, int]:
    """(index_bits, value_bits) for a sub-share."""
    return ceil_log2(sub.block_rows * sub.cols), sub.matrix.field.value_bits


def _header_of(sub: SubShare) -> ShareHeader:
    return ShareHeader(sub.matrix.field, sub.rows, sub.cols, sub.n, sub.t, sub.matrix.nnz)


def encode_sub_share(sub: SubShare) -> bytes:
    """Serialize one sub-share; identical input gives identical bytes."""
    h = _header_of(sub)
    if sub.block_rows != h.block_rows:
        raise ValueError(f"block has {sub.block_rows} rows, expected ceil(r/n) = {h.block_rows}")
    m = sub.matrix
    if m.nnz > h.block_size:
        raise ValueError("more nonzeros than block entries")
    payload = kernels.pack_records(m.index, m.values, h.index_bits, h.value_bits)
    return h.pack() + payload + CRC.pack(zlib.crc32(payload))


def read_header(buf: bytes) -> ShareHeader:
    if len(buf) < HEADER.size:
        raise CodecError(f"stream shorter than the {HEADER.size}-byte header", len(buf))
    magic, version, kind, order, rows, cols, n, t, nnz = HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise CodecError(f"bad magic {magic!r}", 0)
    if version != VERSION:
        raise CodecError(f"unsupported version {version}", 4)
    try:
        if kind == KIND_CODES["prime"]:
            f = FieldOrder.prime(order)
        elif kind == KIND_CODES["binary"]:
            f = FieldOrder.binary(order)
        else:
            raise CodecError(f"unknown field kind byte {kind}", 5)
    except FieldError as e:
        raise CodecError(f"invalid field order: {e}", 6) from None
    if rows < 1 or cols < 1:
        raise CodecError(f"bad dimensions r={rows}, l={cols}", 14)
    if n < 2 or n % 2 or t >= n:
        raise CodecError(f"bad partition n={n}, t={t}", 30)
    h = ShareHeader(f, rows, cols, n, t, nnz)
    if nnz > h.block_size:
        raise CodecError(f"nonzero count {nnz} exceeds block size {h.block_size}", 38)
    return h


def decode_sub_share(buf: bytes, kind: str = "AR") -> SubShare:
    """Parse a stream produced by :func:`encode_sub_share`."""
    buf = bytes(buf)
    h = read_header(buf)
    start = HEADER.size
    end = start + h.payload_bytes
    if len(buf) < end + CRC.size:
        raise CodecError(f"truncated stream: need {end + CRC.size} bytes, have {len(buf)}", len(buf))
    if len(buf) > end + CRC.size:
        raise CodecError(f"{len(buf) - end - CRC.size} trailing bytes after checksum", end + CRC.size)
    payload = buf[start:end]
    (crc,) = CRC.unpack_from(buf, end)
    if crc != zlib.crc32(payload):
        raise CodecError("payload checksum mismatch", end)
    idx, val = kernels.unpack_records(payload, h.nnz, h.index_bits, h.value_bits)
    rec = h.index_bits + h.value_bits
    bad = np.flatnonzero(np.diff(idx.astype(np.int64)) <= 0) if h.nnz > 1 else np.zeros(0, int)
    if bad.size:
        raise CodecError(f"record {bad[0] + 1}: index not increasing", start + (bad[0] + 1) * rec // 8)
    checks = ((idx >= h.block_size, "index outside block"),
              (val == 0, "explicit zero value"),
              (val > np.uint64(h.field.q - 1), f"value >= q={h.field.q}"))
    for mask, what in checks:
        hit = np.flatnonzero(mask)
        if hit.size:
            raise CodecError(f"record {hit[0]}: {what}", start + hit[0] * rec // 8)
    m = SparseMatrix(h.block_rows, h.cols, h.field, idx.astype(np.int64), val)
    return SubShare(kind, h.t, h.n, h.rows, m)


def measured_size_bits(buf: bytes) -> int:
    """Payload bits before byte padding; header and checksum excluded."""
    return read_header(bytes(buf[:HEADER.size])).payload_bits


def write_sub_share(path, sub: SubShare):
    with open(path, "wb") as fh:
        fh.write(encode_sub_share(sub))


def read_sub_share(path, kind: str | None = None) -> SubShare:
    """Read a sub-share file; the kind defaults to the ``AR_``/``R_`` file-name prefix."""
    p = Path(path)
    if kind is None:
        kind = "AR" if p.name.startswith("AR") else "R"
    with open(p, "rb") as fh:
        return decode_sub_share(fh.read(), kind)
