"""Sparse CSR matrices, validated vectors, and implicitly masked operators.

The masked operators apply (I - P + T P) or (I + T P) without assembling
them; P is a boolean diagonal that changes every outer solver step while T
never does.
"""

import numpy as np

from . import _kernels

ELLIPTIC = "elliptic"
PARABOLIC = "parabolic"

_INDEX_DTYPE = np.int64  # must hold n up to 1e6 and nnz well beyond


class DimensionError(ValueError):
    """Operand dimensions do not line up."""


def as_vector(values):
    """Return values as a float64 array, rejecting NaN/Inf entries."""
    v = np.ascontiguousarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"expected a 1-d vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    return v


class SparseMatrix:
    """Compressed-row matrix with sorted, duplicate-free, zero-free rows.

    Treated as immutable after construction; all mutating-style operations
    return new instances.
    """

    def __init__(self, n_rows, n_cols, row_offsets, col_indices, values):
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        self.row_offsets = np.ascontiguousarray(row_offsets, dtype=_INDEX_DTYPE)
        self.col_indices = np.ascontiguousarray(col_indices, dtype=_INDEX_DTYPE)
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        self._transpose = None

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self):
        return self.values.size

    def matvec(self, x):
        return spmv(self, x)

    def rmatvec(self, x):
        return spmv(self.transpose(), x)

    def transpose(self):
        if self._transpose is None:
            t = _csr_from_arrays(
                self.col_indices,
                np.repeat(
                    np.arange(self.n_rows, dtype=_INDEX_DTYPE),
                    np.diff(self.row_offsets),
                ),
                self.values,
                self.n_cols,
                self.n_rows,
            )
            t._transpose = self
            self._transpose = t
        return self._transpose

    def diagonal(self):
        d = np.zeros(min(self.n_rows, self.n_cols))
        rows = np.repeat(
            np.arange(self.n_rows, dtype=_INDEX_DTYPE), np.diff(self.row_offsets)
        )
        on_diag = rows == self.col_indices
        d[rows[on_diag]] = self.values[on_diag]
        return d

    def scaled(self, s):
        """Return s * A (same sparsity; s must be nonzero to keep it exact)."""
        return SparseMatrix(
            self.n_rows, self.n_cols, self.row_offsets, self.col_indices,
            self.values * float(s),
        )

    def add_diagonal(self, d):
        """Return A + diag(d); d may be a scalar or a vector."""
        n = min(self.n_rows, self.n_cols)
        d = np.broadcast_to(np.asarray(d, dtype=np.float64), (n,))
        rows = np.repeat(
            np.arange(self.n_rows, dtype=_INDEX_DTYPE), np.diff(self.row_offsets)
        )
        idx = np.arange(n, dtype=_INDEX_DTYPE)
        return _csr_from_arrays(
            np.concatenate([rows, idx]),
            np.concatenate([self.col_indices, idx]),
            np.concatenate([self.values, d]),
            self.n_rows,
            self.n_cols,
        )

    def norm_inf(self):
        if self.nnz == 0:
            return 0.0
        return float(
            np.max(_kernels._row_sums(np.abs(self.values), self.row_offsets))
        )

    def to_dense(self):
        dense = np.zeros((self.n_rows, self.n_cols))
        rows = np.repeat(
            np.arange(self.n_rows, dtype=_INDEX_DTYPE), np.diff(self.row_offsets)
        )
        dense[rows, self.col_indices] = self.values
        return dense


def _csr_from_arrays(rows, cols, vals, n_rows, n_cols, drop_zeros=True):
    rows = np.asarray(rows, dtype=_INDEX_DTYPE)
    cols = np.asarray(cols, dtype=_INDEX_DTYPE)
    vals = np.asarray(vals, dtype=np.float64)
    if rows.size:
        if rows.min() < 0 or rows.max() >= n_rows:
            raise IndexError("row index out of range")
        if cols.min() < 0 or cols.max() >= n_cols:
            raise IndexError("column index out of range")
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        # sum duplicates: first entry of each (row, col) run keeps the sum
        first = np.ones(rows.size, dtype=bool)
        first[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        starts = np.flatnonzero(first)
        summed = np.add.reduceat(vals, starts)
        rows, cols, vals = rows[starts], cols[starts], summed
        if drop_zeros:
            keep = vals != 0.0
            rows, cols, vals = rows[keep], cols[keep], vals[keep]
    counts = np.bincount(rows, minlength=n_rows)
    row_offsets = np.zeros(n_rows + 1, dtype=_INDEX_DTYPE)
    np.cumsum(counts, out=row_offsets[1:])
    return SparseMatrix(n_rows, n_cols, row_offsets, cols, vals)


def csr_from_triplets(triplets, n_rows, n_cols):
    """Build a SparseMatrix from (row, col, value) entries.

    Duplicates are summed, rows sorted by column, and exact zeros dropped.
    Out-of-range indices raise IndexError.
    """
    triplets = list(triplets)
    if triplets:
        rows, cols, vals = zip(*triplets)
    else:
        rows, cols, vals = (), (), ()
    return _csr_from_arrays(rows, cols, vals, int(n_rows), int(n_cols))


def spmv(matrix, x):
    """Sparse matrix-vector product in row order."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (matrix.n_cols,):
        raise DimensionError(
            f"matrix is {matrix.shape}, vector has shape {x.shape}"
        )
    return _kernels.csr_matvec(
        matrix.values, matrix.col_indices, matrix.row_offsets, x
    )


class MaskedOperator:
    """Matrix-free (I - P + T P) or (I + T P) with P = diag(mask).

    The transpose product needs T^T, which is built once per base matrix
    and shared across mask updates.
    """

    def __init__(self, base, mask, kind):
        if base.n_rows != base.n_cols:
            raise DimensionError("masked operators need a square base matrix")
        if kind not in (ELLIPTIC, PARABOLIC):
            raise ValueError(f"unknown operator kind {kind!r}")
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (base.n_rows,):
            raise DimensionError("mask length must equal the matrix dimension")
        self.base = base
        self.mask = mask
        self.kind = kind

    @property
    def n(self):
        return self.base.n_rows

    def matvec(self, z):
        return masked_matvec(self, z)

    def rmatvec(self, z):
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (self.n,):
            raise DimensionError("vector length must equal the operator dimension")
        t = self.base.transpose()
        kernel = (
            _kernels.masked_rmatvec_elliptic
            if self.kind == ELLIPTIC
            else _kernels.masked_rmatvec_parabolic
        )
        return kernel(t.values, t.col_indices, t.row_offsets, self.mask, z)

    def diagonal(self):
        d = self.base.diagonal()
        if self.kind == ELLIPTIC:
            return np.where(self.mask, d, 1.0)
        return 1.0 + np.where(self.mask, d, 0.0)


def masked_matvec(op, z):
    """Apply the masked operator without assembling it."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (op.n,):
        raise DimensionError("vector length must equal the operator dimension")
    kernel = (
        _kernels.masked_matvec_elliptic
        if op.kind == ELLIPTIC
        else _kernels.masked_matvec_parabolic
    )
    return kernel(
        op.base.values, op.base.col_indices, op.base.row_offsets, op.mask, z
    )


def load_matrix_market(path):
    """Read a Matrix Market coordinate file (real, general)."""
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip().lower().split()
        if (
            len(header) < 5
            or header[0] != "%%matrixmarket"
            or header[1] != "matrix"
            or header[2] != "coordinate"
        ):
            raise ValueError("not a Matrix Market coordinate file")
        if header[3] not in ("real", "integer"):
            raise ValueError(f"unsupported field type {header[3]!r}")
        if header[4] != "general":
            raise ValueError(f"unsupported symmetry {header[4]!r}")
        line = fh.readline()
        while line.startswith("%"):
            line = fh.readline()
        n_rows, n_cols, nnz = (int(tok) for tok in line.split())
        rows = np.empty(nnz, dtype=_INDEX_DTYPE)
        cols = np.empty(nnz, dtype=_INDEX_DTYPE)
        vals = np.empty(nnz)
        for k in range(nnz):
            tok = fh.readline().split()
            rows[k] = int(tok[0]) - 1
            cols[k] = int(tok[1]) - 1
            vals[k] = float(tok[2])
    return _csr_from_arrays(rows, cols, vals, n_rows, n_cols)
