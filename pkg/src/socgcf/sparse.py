"""Minimal CSR kernels: storage, sparse x dense products, transpose and
degree-based symmetric normalization.

Dense matrices are plain 2-D ``float64`` numpy arrays. Degree matrices are
never materialized; a degree is the count of stored entries in a row or
column.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Literal, Union

import numpy as np
import scipy.sparse as sp

__all__ = [
    "SparseMatrix",
    "spmm",
    "transpose",
    "nnz_degrees",
    "sym_normalize",
    "bipartite_normalize",
    "save_coo",
    "load_coo",
]


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Immutable CSR matrix with sorted, unique column indices per row and no
    stored zeros."""

    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        ro = np.ascontiguousarray(self.row_offsets, dtype=np.int64)
        ci = np.ascontiguousarray(self.col_indices, dtype=np.int64)
        va = np.ascontiguousarray(self.values, dtype=np.float64)
        for arr in (ro, ci, va):
            arr.setflags(write=False)
        object.__setattr__(self, "row_offsets", ro)
        object.__setattr__(self, "col_indices", ci)
        object.__setattr__(self, "values", va)
        self._validate()

    def _validate(self) -> None:
        ro, ci, va = self.row_offsets, self.col_indices, self.values
        if self.n_rows < 0 or self.n_cols < 0:
            raise ValueError("negative shape")
        if ro.shape != (self.n_rows + 1,) or ro[0] != 0:
            raise ValueError("row_offsets must have length n_rows + 1 and start at 0")
        if np.any(np.diff(ro) < 0):
            raise ValueError("row_offsets must be non-decreasing")
        if ro[-1] != len(ci) or len(ci) != len(va):
            raise ValueError("row_offsets[-1], len(col_indices) and len(values) disagree")
        if len(ci):
            if ci.min() < 0 or ci.max() >= self.n_cols:
                raise ValueError("column index out of range")
            # strictly increasing within each row: every step that is not a row start
            steps = np.diff(ci)
            row_start = np.zeros(len(ci), dtype=bool)
            row_start[ro[:-1][ro[:-1] < len(ci)]] = True
            if np.any(steps[~row_start[1:]] <= 0):
                raise ValueError("col_indices must be strictly increasing within each row")
            if np.any(va == 0.0):
                raise ValueError("explicit zeros are not allowed")
            if not np.all(np.isfinite(va)):
                raise ValueError("non-finite stored value")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return len(self.values)

    def row_indices(self) -> np.ndarray:
        """Row index of every stored entry (COO expansion)."""
        return np.repeat(np.arange(self.n_rows, dtype=np.int64), np.diff(self.row_offsets))

    @classmethod
    def from_coo(cls, rows, cols, values, shape: tuple[int, int]) -> "SparseMatrix":
        """Build from triplets. Duplicates are summed, zeros dropped."""
        n, m = shape
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        values = np.broadcast_to(np.asarray(values, dtype=np.float64), rows.shape).ravel()
        if len(rows) and (rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= m):
            raise ValueError("COO index out of range for shape %s" % (shape,))
        order = np.lexsort((cols, rows))
        rows, cols, values = rows[order], cols[order], values[order]
        if len(rows):
            new = np.ones(len(rows), dtype=bool)
            new[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            starts = np.flatnonzero(new)
            values = np.add.reduceat(values, starts)
            rows, cols = rows[starts], cols[starts]
            keep = values != 0.0
            rows, cols, values = rows[keep], cols[keep], values[keep]
        offsets = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=offsets[1:])
        return cls(n, m, offsets, cols, values)

    @classmethod
    def from_dense(cls, a) -> "SparseMatrix":
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError("expected a 2-D array")
        r, c = np.nonzero(a)
        return cls.from_coo(r, c, a[r, c], a.shape)

    @classmethod
    def from_scipy(cls, m) -> "SparseMatrix":
        coo = sp.coo_matrix(m)
        return cls.from_coo(coo.row, coo.col, coo.data, coo.shape)

    @classmethod
    def zeros(cls, n_rows: int, n_cols: int) -> "SparseMatrix":
        return cls(n_rows, n_cols, np.zeros(n_rows + 1, dtype=np.int64),
                   np.zeros(0, dtype=np.int64), np.zeros(0))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.row_indices(), self.col_indices] = self.values
        return out

    @cached_property
    def _csr(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.values, self.col_indices, self.row_offsets), shape=self.shape)

    def to_scipy(self) -> sp.csr_matrix:
        return self._csr.copy()

    def equals(self, other: "SparseMatrix") -> bool:
        """Bit-exact structural and value equality."""
        return (self.shape == other.shape
                and np.array_equal(self.row_offsets, other.row_offsets)
                and np.array_equal(self.col_indices, other.col_indices)
                and np.array_equal(self.values, other.values))

    def __repr__(self) -> str:
        return f"SparseMatrix(shape={self.shape}, nnz={self.nnz})"


def spmm(a: SparseMatrix, b: np.ndarray) -> np.ndarray:
    """Sparse x dense product ``a @ b``; empty rows of ``a`` give zero rows."""
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 2 or a.n_cols != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} @ {b.shape}")
    return np.asarray(a._csr @ b)


def transpose(a: SparseMatrix) -> SparseMatrix:
    rows = a.row_indices()
    # stable counting sort by column keeps rows ascending inside each output row
    order = np.argsort(a.col_indices, kind="stable")
    offsets = np.zeros(a.n_cols + 1, dtype=np.int64)
    np.cumsum(np.bincount(a.col_indices, minlength=a.n_cols), out=offsets[1:])
    return SparseMatrix(a.n_cols, a.n_rows, offsets, rows[order], a.values[order])


def nnz_degrees(a: SparseMatrix, axis: Literal["rows", "cols"] = "rows") -> np.ndarray:
    if axis == "rows":
        return np.diff(a.row_offsets)
    if axis == "cols":
        return np.bincount(a.col_indices, minlength=a.n_cols).astype(np.int64)
    raise ValueError(f"axis must be 'rows' or 'cols', got {axis!r}")


def _scale(a: SparseMatrix, row_deg: np.ndarray, col_deg: np.ndarray) -> SparseMatrix:
    rows = a.row_indices()
    denom = np.sqrt(row_deg[rows].astype(np.float64) * col_deg[a.col_indices].astype(np.float64))
    return SparseMatrix(a.n_rows, a.n_cols, a.row_offsets, a.col_indices, a.values / denom)


def sym_normalize(a: SparseMatrix) -> SparseMatrix:
    """``D^-1/2 A D^-1/2`` with ``D`` the stored-entry count of each row.

    Column degrees are the row degrees of the same index, so a symmetric
    input yields a symmetric output.
    """
    if a.n_rows != a.n_cols:
        raise ValueError(f"sym_normalize needs a square matrix, got {a.shape}")
    deg = nnz_degrees(a, "rows")
    return _scale(a, deg, deg)


def bipartite_normalize(r: SparseMatrix) -> SparseMatrix:
    """Upper-right block of the normalized bipartite adjacency ``[[0, R], [R^T, 0]]``.

    Entry ``(u, i)`` becomes ``r[u, i] / sqrt(deg_u * deg_i)`` with ``deg_u`` the
    row count and ``deg_i`` the column count of ``r``.
    """
    return _scale(r, nnz_degrees(r, "rows"), nnz_degrees(r, "cols"))


PathLike = Union[str, Path]


def save_coo(a: SparseMatrix, path: PathLike) -> None:
    """Text COO: header ``rows cols nnz`` then one ``i j v`` line per entry."""
    rows = a.row_indices()
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"{a.n_rows} {a.n_cols} {a.nnz}\n")
        for i, j, v in zip(rows.tolist(), a.col_indices.tolist(), a.values.tolist()):
            fh.write(f"{i} {j} {v!r}\n")


def load_coo(path: PathLike) -> SparseMatrix:
    with open(path, encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise ValueError(f"{path}: bad COO header")
        n, m, nnz = (int(x) for x in header)
        body = np.loadtxt(fh, ndmin=2) if nnz else np.zeros((0, 3))
    if body.shape[0] != nnz:
        raise ValueError(f"{path}: header says {nnz} entries, found {body.shape[0]}")
    return SparseMatrix.from_coo(body[:, 0].astype(np.int64), body[:, 1].astype(np.int64),
                                 body[:, 2], (n, m))
