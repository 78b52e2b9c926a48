"""Damped Newton baseline on the smoothed primal energy.

Minimizes ``sum_a w_a ((B(v+g))_a^2 + eps^2)^(p/2) - f.v`` over the free
coordinates with backtracking line search on the Armijo condition.  The
smoothed integrand carries no 1/p factor on purpose; recorded energies use
the problem's own integrand so comparisons against other solvers are fair.

The Newton systems are solved by preconditioned CG.  For large exponents
their conditioning collapses (row curvatures spread like residuals to the
power p-2), so failed direction solves retry through an escalating Levenberg
shift ladder; if no usable direction emerges the run stops with a
'hessian-solve-failed' status.  Line-search exhaustion likewise becomes a
status, never an exception, so a comparison table can always be emitted.
"""

import time
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .records import ConvergenceRecord
from .sparse import pcg

__all__ = ["NewtonConfig", "NewtonResult", "newton_solve", "smoothed_energy_parts"]

_LEVENBERG_LADDER = (0.0, 1e-12, 1e-8, 1e-4, 1e-2, 1.0)


@dataclass
class NewtonConfig:
    eps: float = 1e-8
    armijo_c: float = 1e-4
    shrink: float = 0.5
    max_outer: int = 500
    max_backtracks: int = 60
    grad_tol: float = 1e-8  # relative to spec.scale
    inner_rel_tol: float = 1e-8
    init: str = "zero"  # 'ls' starts from the quadratic solution instead

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not 0 < self.armijo_c < 1:
            raise ValueError("armijo_c must lie in (0,1)")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0,1)")
        if self.max_outer < 1 or self.max_backtracks < 1:
            raise ValueError("iteration budgets must be >= 1")
        if self.init not in ("ls", "zero"):
            raise ValueError(f"unknown init mode {self.init!r}")


class NewtonResult(NamedTuple):
    u_g: np.ndarray
    record: ConvergenceRecord


def smoothed_energy_parts(spec, eps, r):
    """Value/derivative/curvature rows of the smoothed integrand at rows r."""
    p = spec.nfun.p
    s2 = np.square(r) + eps * eps
    with np.errstate(over="ignore"):
        val = np.power(s2, 0.5 * p)
        d1 = p * r * np.power(s2, 0.5 * p - 1.0)
        d2 = p * np.power(s2, 0.5 * p - 2.0) * ((p - 1.0) * np.square(r) + eps * eps)
    return val, d1, d2


def _solve_direction(sp, spT, h, diag, grad, rel_tol, n, start=0):
    """Newton direction through the Levenberg ladder.

    Starts at rung ``start`` (remembered across iterations so chronically
    ill-conditioned Hessians do not re-burn the cheap attempts every time).
    Returns ``(d, iters, rung)`` or ``(None, 0, start)`` if hopeless.
    """
    trace_avg = float(np.mean(diag)) if len(diag) else 1.0
    for idx in range(start, len(_LEVENBERG_LADDER)):
        shift = _LEVENBERG_LADDER[idx] * trace_avg
        try:
            d, iters, _ = pcg(
                lambda x: spT @ (h * (sp @ x)) + shift * x,
                -grad,
                diag=diag + shift,
                rel_tol=rel_tol,
                max_iters=2 * max(n, 20),
            )
        except Exception:
            continue
        if float(grad @ d) < 0.0:
            return d, iters, idx
    return None, 0, start


def newton_solve(spec, cfg=None, callback=None):
    """Newton iteration with backtracking; returns ``(u_g, record)``.

    Terminates when the free-coordinate gradient norm of the smoothed energy
    drops below ``grad_tol * spec.scale``, or on the iteration budget.  The
    record's dual-energy and gap columns are NaN (this solver certifies
    nothing); its primal column is the unsmoothed energy.
    """
    cfg = cfg or NewtonConfig()
    record = ConvergenceRecord(series="Newton")
    sp = spec.B_free.to_scipy()
    spT = sp.T.tocsr()
    n = spec.n_free
    v = np.zeros(n)
    if cfg.init == "ls" and n:
        try:
            v, _, _ = pcg(
                lambda x: spT @ (spec.w * (sp @ x)),
                spec.f_free - spT @ (spec.w * spec.Bg),
                diag=spec.B_free.row_sums_of_squares_weighted(spec.w),
                rel_tol=1e-10,
            )
        except Exception:
            v = np.zeros(n)
    r = sp @ v + spec.Bg
    tol = cfg.grad_tol * spec.scale

    def energy(rows, vec):
        with np.errstate(over="ignore"):
            val = np.sum(
                spec.w * np.power(np.square(rows) + cfg.eps**2, 0.5 * spec.nfun.p)
            )
        return float(val - spec.f_free @ vec)

    e_curr = energy(r, v)
    record.status = "max-iterations"
    rung = 0
    for it in range(1, cfg.max_outer + 1):
        start = time.perf_counter()
        _, d1, d2 = smoothed_energy_parts(spec, cfg.eps, r)
        grad = spT @ (spec.w * d1) - spec.f_free
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol:
            record.status = "converged"
            break

        h = spec.w * d2
        diag = spec.B_free.row_sums_of_squares_weighted(h)
        d, inner_iters, used = _solve_direction(
            sp, spT, h, diag, grad, cfg.inner_rel_tol, n, start=rung
        )
        if d is None:
            record.status = "hessian-solve-failed"
            break
        rung = max(0, used - 1)

        slope = float(grad @ d)
        step = 1.0
        accepted = False
        for _ in range(cfg.max_backtracks):
            v_try = v + step * d
            r_try = sp @ v_try + spec.Bg
            e_try = energy(r_try, v_try)
            if e_try <= e_curr + cfg.armijo_c * step * slope:
                accepted = True
                break
            step *= cfg.shrink
        if not accepted:
            record.status = "line-search-exhausted"
            break

        v, r, e_curr = v_try, r_try, e_try
        elapsed = time.perf_counter() - start
        u_g = spec.assemble(v)
        primal = spec.primal_energy_given_rows(r, u_g)
        record.append(it, primal, np.nan, np.nan, np.nan, inner_iters, elapsed)
        if callback is not None:
            callback(it, v, gnorm, step)

    return NewtonResult(spec.assemble(v), record)
