"""Compressed sparse row storage, one-time LU factorization, batched solves.

The factorization is built once per coefficient matrix and reused for every
right-hand side, which is where the whole scheme gets its speed: the build
phase is paid a single time while the (much cheaper) solve phase runs once
per sample and per iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SingularMatrixError(ValueError):
    """Raised when a factorization hits a zero pivot."""

    def __init__(self, pivot_row, message=None):
        self.pivot_row = pivot_row
        if message is None:
            if pivot_row is None:
                message = "matrix is singular (pivot row could not be identified)"
            else:
                message = f"matrix is singular at pivot row {pivot_row}"
        super().__init__(message)


@dataclass
class CsrMatrix:
    """Plain CSR storage: within each row, columns are strictly increasing."""

    nrows: int
    ncols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.row_offsets = np.ascontiguousarray(self.row_offsets, dtype=np.int64)
        self.col_indices = np.ascontiguousarray(self.col_indices, dtype=np.int64)
        self.values = np.ascontiguousarray(self.values, dtype=float)
        if len(self.row_offsets) != self.nrows + 1:
            raise ValueError("row_offsets must have length nrows + 1")
        if np.any(np.diff(self.row_offsets) < 0):
            raise ValueError("row_offsets must be non-decreasing")
        if self.row_offsets[0] != 0 or self.row_offsets[-1] != len(self.values):
            raise ValueError("row_offsets must start at 0 and end at nnz")

    @property
    def nnz(self) -> int:
        return len(self.values)

    def to_scipy(self) -> sp.csr_matrix:
        # Wraps the existing arrays, no copy.
        return sp.csr_matrix(
            (self.values, self.col_indices, self.row_offsets),
            shape=(self.nrows, self.ncols),
        )

    def toarray(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def dump_text(self) -> str:
        """Coordinate format, one 'row col value' line per stored entry."""
        rows = np.repeat(np.arange(self.nrows), np.diff(self.row_offsets))
        lines = [f"{r} {c} {float(v)!r}"
                 for r, c, v in zip(rows, self.col_indices, self.values)]
        return "\n".join(lines) + ("\n" if lines else "")


def from_scipy(mat) -> CsrMatrix:
    """Wrap a scipy sparse matrix (deduplicated, sorted) as CsrMatrix."""
    mat = sp.csr_matrix(mat)
    mat.sum_duplicates()
    mat.sort_indices()
    return CsrMatrix(mat.shape[0], mat.shape[1], mat.indptr, mat.indices, mat.data)


def assemble_from_triplets(nrows: int, ncols: int, triplets) -> CsrMatrix:
    """Build a CSR matrix from (row, col, value) triplets, summing duplicates."""
    if len(triplets) == 0:
        rows = cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0)
    elif isinstance(triplets, tuple) and len(triplets) == 3:
        rows, cols, vals = (np.asarray(t) for t in triplets)
    else:
        arr = np.asarray(triplets, dtype=float)
        rows = arr[:, 0].astype(np.int64)
        cols = arr[:, 1].astype(np.int64)
        vals = arr[:, 2]
    if len(rows) and (
        rows.min() < 0 or rows.max() >= nrows or cols.min() < 0 or cols.max() >= ncols
    ):
        raise ValueError("triplet index out of range")
    coo = sp.coo_matrix((vals, (rows, cols)), shape=(nrows, ncols))
    return from_scipy(coo)


@dataclass
class Factorization:
    """Reusable LU decomposition; built once, never mutated by solves."""

    n: int
    _lu: spla.SuperLU

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.n:
            raise ValueError(f"right-hand side has length {b.shape[0]}, expected {self.n}")
        return self._lu.solve(b)


def _first_bad_pivot(dense: np.ndarray):
    """Partial-pivot elimination, returns the step with no usable pivot."""
    a = dense.astype(float).copy()
    n = a.shape[0]
    scale = np.abs(a).max() or 1.0
    for k in range(n):
        p = k + np.argmax(np.abs(a[k:, k]))
        if abs(a[p, k]) <= 1e-14 * scale:
            return k
        a[[k, p]] = a[[p, k]]
        a[k + 1:, k:] -= np.outer(a[k + 1:, k] / a[k, k], a[k, k:])
    return None


def factorize(A: CsrMatrix) -> Factorization:
    """Row-pivoted sparse LU of a square nonsingular matrix."""
    if A.nrows != A.ncols:
        raise ValueError(f"matrix must be square, got {A.nrows}x{A.ncols}")
    mat = A.to_scipy().tocsc()
    try:
        lu = spla.splu(mat)
    except RuntimeError as exc:
        pivot = _first_bad_pivot(A.toarray()) if A.nrows <= 2000 else None
        raise SingularMatrixError(pivot) from exc
    # SuperLU can return a factorization with an exactly/near zero pivot for
    # some singular inputs instead of raising; reject those as well.
    diag = lu.U.diagonal()
    bad = np.abs(diag) <= 1e-300
    if np.any(bad):
        pivot = _first_bad_pivot(A.toarray()) if A.nrows <= 2000 else int(np.argmax(bad))
        raise SingularMatrixError(pivot)
    return Factorization(A.nrows, lu)


def solve_many(F: Factorization, B: np.ndarray) -> np.ndarray:
    """Solve against J right-hand columns; column j matches a single solve bit for bit."""
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        return F.solve(B)
    if B.shape[0] != F.n:
        raise ValueError(f"right-hand sides have {B.shape[0]} rows, expected {F.n}")
    return F._lu.solve(np.asfortranarray(B))


def spmv(A: CsrMatrix, x: np.ndarray) -> np.ndarray:
    """Sparse matrix-vector (or matrix-matrix) product."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != A.ncols:
        raise ValueError(f"operand has {x.shape[0]} rows, expected {A.ncols}")
    return A.to_scipy() @ x


def estimate_speedup(N: float, J: float, K: float, p: float, Cs: float) -> float:
    """Cost ratio of J individual solves to the factor-once iterative path.

    With an O(N^p) build phase and O(Cs) solve phase, solving J problems
    separately costs J*(N^p + Cs) while the shared-factorization scheme with
    K solves per problem costs N^p + K*J*Cs.
    """
    if min(N, J, K, Cs) <= 0:
        raise ValueError("all inputs must be positive")
    build = float(N) ** p
    return J * (build + Cs) / (build + K * J * Cs)
