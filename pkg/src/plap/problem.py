"""Constrained minimization problems of p-Dirichlet type and their duals.

A problem is described by a sparse operator ``B``, positive weights ``w``, a
linear term ``f``, a coordinate-fixing constraint (boolean mask plus the
prescribed values baked into the offset ``g``), and a scalar integrand
family.  This module evaluates the primal and dual energies

    J(v)    = sum_a w_a phi(|(Bv)_a|) - f . v
    J*(tau) = sum_a w_a phi*(w_a^{-1} |tau_a|) - tau . Bg

the relaxed quadratic dual energy, dual feasibility, the guaranteed
duality-gap certificate ``J(v+g) + J*(tau) + f.g``, and the natural squared
distance between dual vectors.  Constraints more general than coordinate
fixing are out of scope.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import SingularSystemError
from .nfunction import PowerNFunction, RegularizedNFunction, RelaxationInterval
from .sparse import CgConfig, SparseMatrix, pcg

__all__ = ["ProblemSpec", "DualVector", "reg_gap_bound", "project_dual_feasible"]


@dataclass
class DualVector:
    """A dual candidate; ``feasibility`` caches its constraint residual."""

    sigma: np.ndarray
    feasibility: float | None = None


def _as_sigma(tau):
    if isinstance(tau, DualVector):
        return np.asarray(tau.sigma, dtype=float)
    return np.asarray(tau, dtype=float)


class ProblemSpec:
    """Immutable description of one constrained minimization problem.

    Parameters
    ----------
    B : SparseMatrix, shape (M, N)
    w : positive weights, length M
    f : linear term, length N
    g : constraint representative, length N; free coordinates must be 0
    fixed : boolean mask, length N, True where the coordinate is prescribed
    nfun : scalar integrand family (PowerNFunction or RegularizedNFunction)
    validate : 'probe' runs a randomized kernel check on the free columns,
        'skip' trusts the caller (builders that already checked structure).
    """

    def __init__(self, B, w, f, g, fixed, nfun, validate="probe"):
        self.B = B
        self.w = np.ascontiguousarray(w, dtype=float)
        self.f = np.ascontiguousarray(f, dtype=float)
        self.g = np.ascontiguousarray(g, dtype=float)
        self.fixed = np.ascontiguousarray(fixed, dtype=bool)
        self.nfun = nfun

        M, N = B.shape
        if self.w.shape != (M,):
            raise ValueError("w must have one entry per row of B")
        if np.any(self.w <= 0.0):
            raise ValueError("weights must be positive")
        for name, vec in (("f", self.f), ("g", self.g), ("fixed", self.fixed)):
            if vec.shape != (N,):
                raise ValueError(f"{name} must have length {N}")
        if np.any(self.g[~self.fixed] != 0.0):
            raise ValueError("free coordinates of g must be 0")

        self.free = np.flatnonzero(~self.fixed)
        self.n_free = len(self.free)
        self.B_free = B.select_columns(self.free)
        self.Bg = B.matvec(self.g)
        self.f_free = self.f[self.free]

        if validate == "probe":
            self._kernel_probe()
        elif validate != "skip":
            raise ValueError(f"unknown validate mode {validate!r}")

        self.scale = self._compute_scale()

    # --- validation ---------------------------------------------------------
    def _kernel_probe(self):
        """Randomized check that ker(B) meets the free subspace only at 0.

        Solves three unweighted normal systems with random right-hand sides;
        a singular system makes CG stagnate at a residual floor.
        """
        if self.n_free == 0:
            return
        sp = self.B_free.to_scipy()
        spT = sp.T.tocsr()
        diag = self.B_free.row_sums_of_squares_weighted(np.ones(self.B.rows))
        if np.any(diag == 0.0):
            raise SingularSystemError(
                "a free coordinate is untouched by the operator; "
                "ker(B) intersects the constraint kernel"
            )
        rng = np.random.default_rng(0x5EED)
        for _ in range(3):
            rhs = rng.standard_normal(self.n_free)
            try:
                pcg(
                    lambda x: spT @ (sp @ x),
                    rhs,
                    diag=diag,
                    rel_tol=1e-6,
                    max_iters=max(20 * self.n_free, 200),
                )
            except SingularSystemError:
                raise SingularSystemError(
                    "kernel probe failed: ker(B) appears to intersect the "
                    "free subspace (operator restricted to free columns is "
                    "rank deficient)"
                ) from None

    def _compute_scale(self):
        """Fixed per-instance magnitude reference for relative tolerances."""
        jg = self.primal_energy(self.g)
        jg = abs(jg) if np.isfinite(jg) else 1.0
        return 1.0 + jg + float(np.linalg.norm(self.f) * np.linalg.norm(self.g))

    # --- assembly helpers -----------------------------------------------------
    def assemble(self, u_free):
        """Scatter free coordinates into a full vector and add the offset g."""
        v = self.g.copy()
        v[self.free] += np.asarray(u_free, dtype=float)
        return v

    # --- energies -------------------------------------------------------------
    def primal_energy(self, v):
        """``J(v) = sum w_a phi(|(Bv)_a|) - f.v`` for any full-length v."""
        v = np.asarray(v, dtype=float)
        return self.primal_energy_given_rows(self.B.matvec(v), v)

    def primal_energy_given_rows(self, Bv, v):
        """Same as primal_energy when ``Bv`` is already available."""
        terms = self.w * self.nfun.phi(np.abs(Bv))
        return float(np.sum(terms) - self.f @ v)

    def dual_energy(self, tau):
        """``J*(tau) = sum w_a phi*(w_a^{-1}|tau_a|) - tau . Bg``."""
        sigma = _as_sigma(tau)
        terms = self.w * self.nfun.conj(np.abs(sigma) / self.w)
        return float(np.sum(terms) - sigma @ self.Bg)

    def relaxed_dual_energy(self, tau, chi):
        """Quadratic majorant of the dual energy frozen at weights from chi.

        Entries with ``chi_a = 0`` use the right-limit of the weight ratio;
        the corresponding quadratic term is dropped when ``tau_a = 0`` too.
        """
        tau = _as_sigma(tau)
        chi = _as_sigma(chi)
        r = np.abs(chi) / self.w
        ratio = self.nfun.conj_prime_over_r(r) / self.w  # (phi*)'(w^-1|chi|)/|chi|
        with np.errstate(invalid="ignore"):
            quad = 0.5 * ratio * np.square(tau)
        quad = np.where(tau == 0.0, 0.0, quad)
        linear = 0.5 * np.abs(chi) * self.nfun.conj_prime(r)
        const = self.w * self.nfun.conj(r)
        return float(np.sum(quad - linear + const) - tau @ self.Bg)

    # --- feasibility and certificates ----------------------------------------
    def dual_feasibility_residual(self, tau):
        """Euclidean norm of ``(B^T tau - f)`` on the free coordinates."""
        sigma = _as_sigma(tau)
        res = self.B.matvec_transpose(sigma) - self.f
        return float(np.linalg.norm(res[self.free]))

    def duality_gap(self, v, tau, feas_tol=None):
        """Guaranteed upper bound ``J(v+g) + J*(tau) + f.g`` on both energy errors.

        ``tau`` must be feasible: its constraint residual has to stay below
        ``feas_tol`` (default ``1e-6 * scale``), otherwise the certificate is
        meaningless and a ValueError is raised.  ``v`` must vanish on the
        fixed coordinates.
        """
        v = np.asarray(v, dtype=float)
        if np.any(v[self.fixed] != 0.0):
            raise ValueError("v must vanish on fixed coordinates")
        tol = 1e-6 * self.scale if feas_tol is None else feas_tol
        res = self.dual_feasibility_residual(tau)
        if res > tol:
            raise ValueError(
                f"dual vector infeasible (residual {res:.3e} > {tol:.3e}); "
                "the gap certificate only holds on the feasible set"
            )
        return self.primal_energy(v + self.g) + self.dual_energy(tau) + float(
            self.f @ self.g
        )

    def natural_dual_distance(self, tau, sigma_ref):
        """Squared natural distance between dual vectors,
        ``sum w_a |V*(w_a^{-1} tau_a) - V*(w_a^{-1} sigma_a)|^2``."""
        tau = _as_sigma(tau) / self.w
        sig = _as_sigma(sigma_ref) / self.w
        d = self.nfun.v_phi_star(tau) - self.nfun.v_phi_star(sig)
        return float(np.sum(self.w * np.square(d)))

    # --- serialization ---------------------------------------------------------
    def to_json(self):
        return json.dumps(
            {
                "rows": self.B.rows,
                "cols": self.B.cols,
                "row_offsets": self.B.row_offsets.tolist(),
                "col_indices": self.B.col_indices.tolist(),
                "values": self.B.values.tolist(),
                "w": self.w.tolist(),
                "f": self.f.tolist(),
                "g": self.g.tolist(),
                "fixed": self.fixed.astype(int).tolist(),
                "integrand": self.nfun.descriptor(),
            }
        )

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        B = SparseMatrix(
            doc["rows"],
            doc["cols"],
            np.asarray(doc["row_offsets"]),
            np.asarray(doc["col_indices"]),
            np.asarray(doc["values"]),
        )
        desc = doc["integrand"]
        if desc["kind"] == "power":
            nfun = PowerNFunction(desc["p"])
        elif desc["kind"] == "regularized":
            nfun = RegularizedNFunction(
                PowerNFunction(desc["p"]),
                RelaxationInterval(desc["delta"][0], desc["delta"][1]),
            )
        else:
            raise ValueError(f"unknown integrand kind {desc['kind']!r}")
        return cls(
            B,
            np.asarray(doc["w"], dtype=float),
            np.asarray(doc["f"], dtype=float),
            np.asarray(doc["g"], dtype=float),
            np.asarray(doc["fixed"], dtype=bool),
            nfun,
            validate="skip",
        )


def reg_gap_bound(spec_unreg, spec_reg, sigma, u_g):
    """Bound on the energy offset caused by clipping the integrand.

    Evaluates ``sum w_a e*(w_a^{-1}|sigma_a|) - sum w_a e(|(B u_g)_a|)`` from
    the (approximate) minimizers of the unclipped problem; this dominates the
    relaxed-energy difference between the unclipped and clipped minimizers.
    """
    nfun = spec_reg.nfun
    sigma = _as_sigma(sigma)
    dual_args = np.abs(sigma) / spec_reg.w
    primal_args = np.abs(spec_reg.B.matvec(np.asarray(u_g, dtype=float)))
    dual_sum = float(np.sum(spec_reg.w * nfun.reg_error_dual(dual_args)))
    primal_sum = float(np.sum(spec_reg.w * nfun.reg_error(primal_args)))
    return dual_sum - primal_sum


def project_dual_feasible(spec, tau, cfg=None):
    """Project ``tau`` onto the affine feasible set of the dual problem.

    Returns ``tau - Bf y`` with ``y`` solving the unweighted normal equations
    ``Bf^T Bf y = Bf^T tau - f_free``; useful for generating feasible dual
    candidates in tests and diagnostics.
    """
    cfg = cfg or CgConfig()
    tau = _as_sigma(tau)
    sp = spec.B_free.to_scipy()
    spT = sp.T.tocsr()
    rhs = spT @ tau - spec.f_free
    diag = spec.B_free.row_sums_of_squares_weighted(np.ones(spec.B.rows))
    y, _, _ = pcg(
        lambda x: spT @ (sp @ x),
        rhs,
        diag=diag,
        rel_tol=cfg.rel_tol,
        max_iters=cfg.max_iters,
    )
    return tau - sp @ y
