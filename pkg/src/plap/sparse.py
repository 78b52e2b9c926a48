"""Minimal sparse linear algebra for the reweighted least-squares solves.

A thin CSR matrix type (canonical form: sorted, duplicate-free column indices
per row) plus a Jacobi-preconditioned conjugate gradient for systems of the
form ``Bf^T diag(a) Bf x = rhs`` restricted to a set of free columns.  The
normal matrix is never assembled; each CG application runs three sparse
passes.  scipy.sparse provides the matvec kernels behind this interface.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse

from .errors import CgConvergenceError, SingularSystemError

__all__ = ["SparseMatrix", "CgConfig", "pcg", "solve_weighted_normal"]


class SparseMatrix:
    """Compressed sparse row matrix over float64.

    Canonical form is enforced: ``row_offsets`` non-decreasing with length
    ``rows + 1``, and strictly increasing column indices within each row.
    Instances are immutable after construction and safe to share.
    """

    def __init__(self, rows, cols, row_offsets, col_indices, values, validate=True):
        self.rows = int(rows)
        self.cols = int(cols)
        self.row_offsets = np.ascontiguousarray(row_offsets, dtype=np.int64)
        self.col_indices = np.ascontiguousarray(col_indices, dtype=np.int64)
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        if validate:
            self._validate()
        self._sp = scipy.sparse.csr_matrix(
            (self.values, self.col_indices, self.row_offsets),
            shape=(self.rows, self.cols),
        )

    def _validate(self):
        off = self.row_offsets
        if off.shape != (self.rows + 1,) or off[0] != 0 or off[-1] != len(self.values):
            raise ValueError("row_offsets inconsistent with matrix shape")
        if np.any(np.diff(off) < 0):
            raise ValueError("row_offsets must be non-decreasing")
        if len(self.col_indices) != len(self.values):
            raise ValueError("col_indices and values must have equal length")
        if len(self.col_indices) and (
            self.col_indices.min() < 0 or self.col_indices.max() >= self.cols
        ):
            raise ValueError("column index out of range")
        for i in range(self.rows):
            cols = self.col_indices[off[i] : off[i + 1]]
            if np.any(np.diff(cols) <= 0):
                raise ValueError(f"row {i}: column indices not strictly increasing")

    # --- constructors -----------------------------------------------------
    @classmethod
    def from_scipy(cls, mat):
        sp = scipy.sparse.csr_matrix(mat)
        sp.sum_duplicates()
        sp.sort_indices()
        return cls(
            sp.shape[0], sp.shape[1], sp.indptr, sp.indices, sp.data, validate=False
        )

    @classmethod
    def from_coo(cls, rows, cols, i, j, v):
        """Build from coordinate triplets; duplicate entries are summed."""
        sp = scipy.sparse.coo_matrix((v, (i, j)), shape=(rows, cols))
        return cls.from_scipy(sp)

    @classmethod
    def from_dense(cls, arr):
        return cls.from_scipy(scipy.sparse.csr_matrix(np.asarray(arr, dtype=float)))

    @classmethod
    def identity(cls, n):
        return cls.from_scipy(scipy.sparse.identity(n, format="csr"))

    # --- basic ops ----------------------------------------------------------
    @property
    def shape(self):
        return (self.rows, self.cols)

    @property
    def nnz(self):
        return len(self.values)

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.cols,):
            raise ValueError(f"expected vector of length {self.cols}, got {x.shape}")
        return self._sp @ x

    def matvec_transpose(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape != (self.rows,):
            raise ValueError(f"expected vector of length {self.rows}, got {y.shape}")
        return self._sp.T @ y

    def select_columns(self, cols):
        """Submatrix keeping the given columns (index array or boolean mask)."""
        cols = np.asarray(cols)
        if cols.dtype == bool:
            cols = np.flatnonzero(cols)
        return SparseMatrix.from_scipy(self._sp[:, cols])

    def to_dense(self):
        return self._sp.toarray()

    def to_scipy(self):
        return self._sp

    def row_sums_of_squares_weighted(self, a):
        """Column vector of ``sum_alpha a_alpha * M[alpha, j]^2`` (Jacobi diagonal)."""
        sq = self._sp.multiply(self._sp)
        return np.asarray(sq.T @ np.asarray(a, dtype=float)).ravel()

    def __repr__(self):
        return f"SparseMatrix({self.rows}x{self.cols}, nnz={self.nnz})"


def read_matrix_market(path):
    """Read a coordinate-format .mtx file into canonical CSR."""
    return SparseMatrix.from_scipy(scipy.io.mmread(str(path)))


def write_matrix_market(path, mat):
    scipy.io.mmwrite(str(path), mat.to_scipy())


@dataclass
class CgConfig:
    """Inner-solver knobs.

    ``rel_tol`` bounds the final residual relative to the right-hand side;
    ``abs_tol`` (optional, 0 disables) additionally bounds it absolutely,
    whichever target is smaller.  ``max_iters`` defaults to 10n when None.
    """

    rel_tol: float = 1e-12
    max_iters: int | None = None
    preconditioner: str = "jacobi"
    abs_tol: float = 0.0

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.preconditioner not in ("none", "jacobi"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")


def pcg(apply_op, rhs, diag=None, x0=None, rel_tol=1e-12, abs_tol=0.0, max_iters=None):
    """Preconditioned conjugate gradient on an SPD operator.

    Returns ``(x, iterations, final_residual_norm)``.  Raises
    SingularSystemError on an indefinite pivot or residual stagnation, and
    CgConvergenceError when the iteration budget runs out before the target
    ``max(rel_tol * |rhs|, 0) `` / ``abs_tol`` combination is met.
    """
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.shape[0]
    if max_iters is None:
        max_iters = max(10 * n, 50)
    target = rel_tol * float(np.linalg.norm(rhs))
    if abs_tol > 0.0:
        target = min(target, abs_tol)

    if x0 is None:
        x = np.zeros(n)
        r = rhs.copy()
    else:
        x = np.asarray(x0, dtype=float).copy()
        r = rhs - apply_op(x)

    if diag is not None:
        inv_diag = np.where(diag > 0.0, 1.0 / np.where(diag > 0.0, diag, 1.0), 1.0)
    else:
        inv_diag = None

    res = float(np.linalg.norm(r))
    if res <= target:
        return x, 0, res

    z = r * inv_diag if inv_diag is not None else r
    p = z.copy()
    rz = float(r @ z)
    # an essentially flat residual over a whole window signals a singular
    # system (e.g. a residual floor from a right-hand side outside the range)
    window = max(100, n)
    window_ref = res

    for k in range(1, max_iters + 1):
        ap = apply_op(p)
        pap = float(p @ ap)
        if pap <= 0.0 or not math.isfinite(pap):
            raise SingularSystemError(
                "non-positive curvature in CG; the operator restricted to the "
                "free coordinates is not positive definite (kernel intersects "
                "the constraint space?)"
            )
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        res = float(np.linalg.norm(r))
        if res <= target:
            return x, k, res
        if k % window == 0:
            if res > 0.99 * window_ref:
                raise SingularSystemError(
                    f"CG stagnated at residual {res:.3e} (target {target:.3e}); "
                    "the system looks singular, check that the operator kernel "
                    "only meets the constraint space at 0"
                )
            window_ref = res
        z = r * inv_diag if inv_diag is not None else r
        rz_next = float(r @ z)
        p = z + (rz_next / rz) * p
        rz = rz_next

    raise CgConvergenceError(
        f"CG did not reach residual {target:.3e} within {max_iters} iterations "
        f"(final residual {res:.3e})",
        residual=res,
        iterations=max_iters,
    )


def solve_weighted_normal(B, a, rhs, free_cols=None, cfg=None, x0=None):
    """Solve ``Bf^T diag(a) Bf x = rhs`` for the columns selected by free_cols.

    ``a`` must be strictly positive.  The weights are rescaled by their
    geometric median before the solve (and the right-hand side with them),
    which leaves the solution invariant but keeps the system near unit scale
    for extreme weight spreads.  Returns ``(x, iterations, residual)`` with
    the residual measured on the original (unscaled) system.
    """
    cfg = cfg or CgConfig()
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0.0) or not np.all(np.isfinite(a)):
        raise ValueError("weights must be strictly positive and finite")
    Bf = B if free_cols is None else B.select_columns(free_cols)
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (Bf.cols,):
        raise ValueError(f"rhs length {rhs.shape} does not match {Bf.cols} free columns")

    log_a = np.log(a)
    scale = math.exp(float(np.median(log_a)))
    a_s = a / scale
    rhs_s = rhs / scale

    sp = Bf.to_scipy()
    spT = sp.T.tocsr()

    def apply_op(x):
        return spT @ (a_s * (sp @ x))

    diag = Bf.row_sums_of_squares_weighted(a_s) if cfg.preconditioner == "jacobi" else None
    x, iters, res = pcg(
        apply_op,
        rhs_s,
        diag=diag,
        x0=x0,
        rel_tol=cfg.rel_tol,
        abs_tol=cfg.abs_tol / scale if cfg.abs_tol > 0.0 else 0.0,
        max_iters=cfg.max_iters,
    )
    return x, iters, res * scale
