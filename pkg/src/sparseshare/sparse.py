"""Coordinate-form sparse matrices over F_q.

Nonzeros are stored as sorted row-major linear indices (int64) with
their values (uint64). Zeros are implicit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import FieldError, FieldOrder

__all__ = ["SparseMatrix", "DENSE_LIMIT", "matrix_market_text", "read_matrix_market",
           "write_matrix_market"]

# dense staging is refused above this many elements
DENSE_LIMIT = 10 ** 8


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    rows: int
    cols: int
    field: FieldOrder
    index: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"matrix dimensions must be positive, got {self.rows}x{self.cols}")
        idx = np.ascontiguousarray(self.index, dtype=np.int64)
        val = np.ascontiguousarray(self.values, dtype=np.uint64)
        if idx.shape != val.shape or idx.ndim != 1:
            raise ValueError("index and values must be 1-D arrays of equal length")
        if idx.size:
            if idx[0] < 0 or idx[-1] >= self.rows * self.cols:
                raise ValueError("entry index outside the matrix")
            if (np.diff(idx) <= 0).any():
                raise ValueError("entry indices must be strictly increasing (no duplicates)")
            if (val == 0).any():
                raise ValueError("explicit zero stored; zeros are implicit")
            self.field.check(val)
        object.__setattr__(self, "index", idx)
        object.__setattr__(self, "values", val)

    # -- constructors ---------------------------------------------------------

    @classmethod
    def zeros(cls, rows, cols, field):
        return cls(rows, cols, field, np.zeros(0, np.int64), np.zeros(0, np.uint64))

    @classmethod
    def from_triples(cls, rows, cols, field, i, j, v):
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        v = np.asarray(v, dtype=np.uint64)
        if i.size and (i.min() < 0 or i.max() >= rows or j.min() < 0 or j.max() >= cols):
            raise ValueError("triple coordinates outside the matrix")
        lin = i * cols + j
        order = np.argsort(lin, kind="stable")
        return cls(rows, cols, field, lin[order], v[order])

    @classmethod
    def from_dense(cls, arr, field):
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise ValueError("expected a 2-D array")
        if arr.size > DENSE_LIMIT:
            raise ValueError("dense input above the staging limit")
        flat = arr.astype(np.uint64).ravel()
        lin = np.flatnonzero(flat)
        return cls(arr.shape[0], arr.shape[1], field, lin, flat[lin])

    # -- views -------------------------------------------------------------------

    @property
    def shape(self):
        return self.rows, self.cols

    @property
    def size(self) -> int:
        return self.rows * self.cols

    @property
    def nnz(self) -> int:
        return int(self.index.size)

    @property
    def zero_fraction(self) -> float:
        return 1.0 - self.nnz / self.size

    @property
    def row_idx(self) -> np.ndarray:
        return self.index // self.cols

    @property
    def col_idx(self) -> np.ndarray:
        return self.index % self.cols

    def triples(self):
        return list(zip(self.row_idx.tolist(), self.col_idx.tolist(), self.values.tolist()))

    def to_dense(self) -> np.ndarray:
        if self.size > DENSE_LIMIT:
            raise ValueError("matrix too large to densify")
        out = np.zeros(self.size, dtype=np.uint64)
        out[self.index] = self.values
        return out.reshape(self.rows, self.cols)

    def dense_range(self, start: int, stop: int) -> np.ndarray:
        """Values at linear indices [start, stop) as a dense uint64 vector."""
        out = np.zeros(stop - start, dtype=np.uint64)
        lo, hi = np.searchsorted(self.index, [start, stop])
        out[self.index[lo:hi] - start] = self.values[lo:hi]
        return out

    def values_at(self, index: np.ndarray) -> np.ndarray:
        """Values at the given linear indices (0 where no entry is stored)."""
        if self.nnz == 0:
            return np.zeros(len(index), dtype=np.uint64)
        pos = np.minimum(np.searchsorted(self.index, index), self.nnz - 1)
        hit = self.index[pos] == index
        return np.where(hit, self.values[pos], np.uint64(0))

    def __eq__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (self.shape == other.shape and self.field == other.field
                and np.array_equal(self.index, other.index)
                and np.array_equal(self.values, other.values))

    def __repr__(self):
        return f"SparseMatrix({self.rows}x{self.cols} over {self.field}, nnz={self.nnz})"

    # -- arithmetic ---------------------------------------------------------

    def _check_compatible(self, other):
        if self.shape != other.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")
        if self.field != other.field:
            raise FieldError(f"field mismatch {self.field} vs {other.field}")

    def add(self, other: "SparseMatrix") -> "SparseMatrix":
        self._check_compatible(other)
        idx = np.concatenate([self.index, other.index])
        val = np.concatenate([self.values, other.values])
        order = np.argsort(idx, kind="stable")
        idx, val = idx[order], val[order]
        dup = np.flatnonzero(idx[1:] == idx[:-1])
        if dup.size:
            val[dup] = self.field.add(val[dup], val[dup + 1])
            keep = np.ones(idx.size, dtype=bool)
            keep[dup + 1] = False
            idx, val = idx[keep], val[keep]
        nz = val != 0
        return SparseMatrix(self.rows, self.cols, self.field, idx[nz], val[nz])

    def neg(self) -> "SparseMatrix":
        return SparseMatrix(self.rows, self.cols, self.field, self.index, self.field.neg(self.values))

    def sub(self, other: "SparseMatrix") -> "SparseMatrix":
        return self.add(other.neg())

    # -- row blocks -----------------------------------------------------------

    def row_block(self, start: int, nrows: int) -> "SparseMatrix":
        """Rows [start, start + nrows); rows past the end read as zero."""
        lo, hi = np.searchsorted(self.index, [start * self.cols, (start + nrows) * self.cols])
        return SparseMatrix(nrows, self.cols, self.field,
                            self.index[lo:hi] - start * self.cols, self.values[lo:hi])

    @classmethod
    def vstack(cls, blocks, rows=None):
        """Stack row blocks, optionally truncating to ``rows`` rows."""
        blocks = list(blocks)
        cols, field = blocks[0].cols, blocks[0].field
        total = sum(b.rows for b in blocks)
        rows = total if rows is None else rows
        parts_i, parts_v, offset = [], [], 0
        for b in blocks:
            if b.cols != cols or b.field != field:
                raise ValueError("blocks disagree on columns or field")
            parts_i.append(b.index + offset * cols)
            parts_v.append(b.values)
            offset += b.rows
        idx = np.concatenate(parts_i)
        val = np.concatenate(parts_v)
        keep = idx < rows * cols
        if (val[~keep] != 0).any():
            raise ValueError("nonzero entries in truncated padding rows")
        return cls(rows, cols, field, idx[keep], val[keep])


# -- Matrix Market coordinate files -----------------------------------------

_MM_HEADER = "%%MatrixMarket matrix coordinate integer general"


def matrix_market_text(m: SparseMatrix) -> str:
    """Canonical 1-based Matrix Market coordinates in row-major order."""
    lines = [_MM_HEADER, f"% field q={m.field.q} kind={m.field.kind}", f"{m.rows} {m.cols} {m.nnz}"]
    lines += [f"{i} {j} {v}" for i, j, v in
              zip((m.row_idx + 1).tolist(), (m.col_idx + 1).tolist(), m.values.tolist())]
    return "\n".join(lines) + "\n"


def write_matrix_market(path, m: SparseMatrix):
    """Write ``m`` as Matrix Market; the same matrix always gives the same bytes."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(matrix_market_text(m))


def read_matrix_market(path, field: FieldOrder | None = None) -> SparseMatrix:
    """Read a coordinate Matrix Market file; the field comes from the
    ``% field q=...`` comment unless given explicitly."""
    with open(path, encoding="ascii") as fh:
        header = fh.readline().strip()
        if not header.lower().startswith("%%matrixmarket matrix coordinate"):
            raise ValueError(f"{path}: not a coordinate Matrix Market file")
        line = fh.readline()
        while line.startswith("%"):
            if field is None and "q=" in line:
                q = int(line.split("q=", 1)[1].split()[0])
                field = FieldOrder.from_q(q)
            line = fh.readline()
        rows, cols, nnz = (int(x) for x in line.split())
        if field is None:
            raise ValueError(f"{path}: field order not recorded; pass it explicitly")
        data = [fh.readline().split() for _ in range(nnz)]
    if any(len(d) != 3 for d in data):
        raise ValueError(f"{path}: truncated or malformed entry list")
    i = np.array([int(d[0]) - 1 for d in data], dtype=np.int64)
    j = np.array([int(d[1]) - 1 for d in data], dtype=np.int64)
    v = np.array([int(d[2]) for d in data], dtype=np.uint64)
    return SparseMatrix.from_triples(rows, cols, field, i, j, v)
