"""lp regression instances lifted into the constrained framework.

``min |Av - b|_p^p`` becomes a coordinate-constrained problem over the
stacked operator ``B = (A  -I)`` with the last block fixed to ``b``: the row
values ``B(v+g)`` on the variable block are exactly the residuals ``Av - b``,
so the solvers apply unchanged and the solution splits as ``(u, b)``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse

from .problem import ProblemSpec
from .sparse import SparseMatrix

__all__ = ["RegressionInstance", "random_instance", "build_lifted", "lp_residual"]


@dataclass
class RegressionInstance:
    """Overdetermined design A (M x N, M >= N), targets b, exponent p."""

    A: SparseMatrix
    b: np.ndarray
    p: float

    def __post_init__(self):
        if not isinstance(self.A, SparseMatrix):
            self.A = SparseMatrix.from_dense(np.asarray(self.A, dtype=float))
        self.b = np.asarray(self.b, dtype=float)
        m, n = self.A.shape
        if m < n:
            raise ValueError(f"need M >= N, got {m} < {n}")
        if self.b.shape != (m,):
            raise ValueError("b must have one entry per row of A")
        if not self.p >= 2.0:
            raise ValueError("regression targets exponents p >= 2")

    @property
    def shape(self):
        return self.A.shape


def random_instance(m, n, seed, p=2.0):
    """Dense instance with entries drawn uniformly from the open unit interval.

    Deterministic for a fixed seed; exact zeros (probability ~2^-53 per draw)
    are redrawn so every entry is strictly inside (0, 1).
    """
    if not m > n or n < 1:
        raise ValueError(f"need M > N >= 1, got M={m}, N={n}")
    rng = np.random.default_rng(seed)

    def open_uniform(size):
        x = rng.random(size)
        while True:
            zeros = x == 0.0
            if not np.any(zeros):
                return x
            x[zeros] = rng.random(int(np.sum(zeros)))

    a = open_uniform((m, n))
    b = open_uniform(m)
    return RegressionInstance(SparseMatrix.from_dense(a), b, float(p))


def build_lifted(inst, nfun, validate="probe"):
    """Constrained form over ``B = (A  -I)`` with the last M coordinates fixed
    to b.  Rank deficiency of A surfaces through the kernel probe."""
    m, n = inst.A.shape
    sp = scipy.sparse.hstack(
        [inst.A.to_scipy(), -scipy.sparse.identity(m, format="csr")], format="csr"
    )
    B = SparseMatrix.from_scipy(sp)
    w = np.ones(m)
    f = np.zeros(n + m)
    g = np.concatenate([np.zeros(n), inst.b])
    fixed = np.concatenate([np.zeros(n, dtype=bool), np.ones(m, dtype=bool)])
    return ProblemSpec(B, w, f, g, fixed, nfun, validate=validate)


def lp_residual(inst, u_tilde):
    """The residual norm ``|A u - b|_p`` (the norm itself, not its p-th power).

    Accumulated in scaled form so large exponents neither overflow nor lose
    the leading magnitude.
    """
    r = inst.A.matvec(np.asarray(u_tilde, dtype=float)) - inst.b
    return float(p_norm(r, inst.p))


def p_norm(r, p):
    """Stable ``(sum |r_i|^p)^(1/p)`` via factoring out the max entry."""
    r = np.abs(np.asarray(r, dtype=float))
    m = float(r.max()) if r.size else 0.0
    if m == 0.0:
        return 0.0
    return m * float(np.sum(np.power(r / m, p))) ** (1.0 / p)
