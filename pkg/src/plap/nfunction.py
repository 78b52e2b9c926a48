"""Scalar convex integrands of power type and their clipped relaxations.

The solvers in this package minimize sums of terms ``w * phi(|Bv|)``.  This
module provides the scalar layer: the power integrand ``phi(t) = t^p / p``,
its convex conjugate, the relaxation that clips the derivative ratio
``phi'(t)/t`` to a positive interval, and the derived maps (vector fields,
square-root weights, relaxation errors, least-squares weight ratios) that the
energies and the reweighting scheme are built from.

All evaluation maps accept scalars or numpy arrays and are vectorized.
Exponentials are evaluated through a signed log-space helper so that extreme
exponents saturate to ``0`` or ``+/-inf`` instead of producing NaN; callers
can detect saturation with ``np.isfinite``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateWeightError, UnboundedGrowthError

__all__ = [
    "PowerNFunction",
    "RelaxationInterval",
    "RegularizedNFunction",
]


def _scaled_exp(log_scale, factor):
    """Evaluate ``exp(log_scale) * factor`` without forming exp(log_scale).

    Used for piecewise values of the form ``d^p * h(x)`` whose scale ``d^p``
    may over- or underflow double precision while the product is meaningful.
    ``factor == 0`` yields exactly 0; overflow saturates to signed infinity.
    """
    factor = np.asarray(factor, dtype=float)
    with np.errstate(divide="ignore", over="ignore", under="ignore", invalid="ignore"):
        mag = np.exp(log_scale + np.log(np.abs(factor)))
    out = np.where(factor == 0.0, 0.0, np.sign(factor) * mag)
    return out


def _check_nonneg(x, name):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError(f"{name} must be nonnegative")
    return x


class _NFunctionBase:
    """Shared derived maps; subclasses provide phi/phi', conj/conj' and ratios."""

    # --- unsigned ratio maps, subclass responsibility -------------------
    def phi_prime_over_t(self, t):
        raise NotImplementedError

    def conj_prime_over_r(self, r):
        raise NotImplementedError

    # --- signed vector fields -------------------------------------------
    def a_phi(self, t):
        """Signed map ``(phi'(|t|)/|t|) t`` with value 0 at t = 0."""
        t = np.asarray(t, dtype=float)
        with np.errstate(invalid="ignore", over="ignore"):
            val = self.phi_prime_over_t(np.abs(t)) * t
        return np.where(t == 0.0, 0.0, val)

    def a_phi_star(self, t):
        """Signed map ``((phi*)'(|t|)/|t|) t`` with value 0 at t = 0."""
        t = np.asarray(t, dtype=float)
        with np.errstate(invalid="ignore", over="ignore"):
            val = self.conj_prime(np.abs(t)) * np.sign(t)
        return np.where(t == 0.0, 0.0, val)

    def v_phi(self, t):
        """Square-root-weighted map ``sqrt(phi'(|t|)/|t|) t``, 0 at t = 0."""
        t = np.asarray(t, dtype=float)
        with np.errstate(invalid="ignore", over="ignore"):
            val = np.sqrt(self.phi_prime_over_t(np.abs(t))) * t
        return np.where(t == 0.0, 0.0, val)

    def v_phi_star(self, t):
        """Dual square-root-weighted map, 0 at t = 0."""
        t = np.asarray(t, dtype=float)
        with np.errstate(invalid="ignore", over="ignore"):
            val = np.sqrt(self.conj_prime_over_r(np.abs(t))) * t
        return np.where(t == 0.0, 0.0, val)


@dataclass(frozen=True)
class PowerNFunction(_NFunctionBase):
    """The power integrand ``phi(t) = t^p / p`` on [0, inf), p > 1.

    The conjugate is ``phi*(r) = r^{p'} / p'`` with the dual exponent
    ``p' = p / (p - 1)``.
    """

    p: float

    def __post_init__(self):
        if not (self.p > 1.0 and math.isfinite(self.p)):
            raise ValueError(f"exponent must satisfy p > 1, got {self.p}")

    @property
    def p_dual(self):
        return self.p / (self.p - 1.0)

    @property
    def is_regularized(self):
        return False

    def phi(self, t):
        t = _check_nonneg(t, "t")
        with np.errstate(over="ignore"):
            return np.power(t, self.p) / self.p

    def phi_prime(self, t):
        t = _check_nonneg(t, "t")
        with np.errstate(over="ignore"):
            return np.power(t, self.p - 1.0)

    def conj(self, r):
        r = _check_nonneg(r, "r")
        q = self.p_dual
        with np.errstate(over="ignore"):
            return np.power(r, q) / q

    def conj_prime(self, r):
        r = _check_nonneg(r, "r")
        with np.errstate(over="ignore"):
            return np.power(r, self.p_dual - 1.0)

    def phi_prime_over_t(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(over="ignore", divide="ignore"):
            return np.power(t, self.p - 2.0)

    def conj_prime_over_r(self, r):
        """``(phi*)'(r)/r`` extended by its limit at r = 0 (0, 1 or inf)."""
        r = np.asarray(r, dtype=float)
        e = self.p_dual - 2.0
        if e == 0.0:
            return np.ones_like(r)
        with np.errstate(over="ignore", divide="ignore"):
            val = np.power(r, e)
        # limit at 0: 0^negative -> inf, 0^positive -> 0; numpy already agrees
        return val

    def growth_bounds(self):
        """Lower/upper bounds of ``phi'(t)/t``; finite only for p = 2."""
        if self.p == 2.0:
            return (1.0, 1.0)
        raise UnboundedGrowthError(
            f"phi'(t)/t is unbounded for the pure power family with p={self.p}; "
            "use a RegularizedNFunction"
        )

    def weight_ratio(self, r):
        """Least-squares weight map ``r / (phi*)'(r)`` with right-limit at 0.

        For p != 2 the limit at 0 degenerates (0 for p > 2, inf for p < 2),
        which breaks the reweighted solve; that case is rejected.
        """
        r = _check_nonneg(r, "r")
        if self.p == 2.0:
            return np.ones_like(r)
        if np.any(r == 0.0):
            raise DegenerateWeightError(
                "weight ratio at 0 degenerates for the pure power family with "
                f"p={self.p}; regularize with a relaxation interval"
            )
        e = (self.p - 2.0) / (self.p - 1.0)
        with np.errstate(over="ignore"):
            return np.power(r, e)

    def descriptor(self):
        return {"kind": "power", "p": self.p}


@dataclass(frozen=True)
class RelaxationInterval:
    """Clipping interval ``[lo, hi]`` for the derivative ratio, 0 < lo <= hi."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (0.0 < self.lo <= self.hi and math.isfinite(self.hi)):
            raise ValueError(f"need 0 < lo <= hi < inf, got [{self.lo}, {self.hi}]")

    def contains(self, other):
        """True if ``other`` is nested inside this interval."""
        return self.lo <= other.lo and other.hi <= self.hi


class RegularizedNFunction(_NFunctionBase):
    """Power integrand with derivative ratio clipped to a relaxation interval.

    Outside ``[lo, hi]`` the integrand continues quadratically, with the
    additive constants chosen so the power part is matched with value and
    slope.  The value at 0 is therefore the (negative, for p > 2) shift
    ``phi(lo) - (lo/2) phi'(lo)``.  The conjugate carries the opposite shift,
    so the pair remains an exact convex-conjugate pair and every duality
    identity of the unrelaxed family applies verbatim.

    Requires p >= 2; for p < 2 the clipped ratio interval would be reversed.
    """

    def __init__(self, base, delta):
        if not isinstance(base, PowerNFunction):
            base = PowerNFunction(float(base))
        if base.p < 2.0:
            raise ValueError(f"relaxation requires p >= 2, got p={base.p}")
        self.base = base
        self.delta = delta
        p, lo, hi = base.p, delta.lo, delta.hi
        self._log_lo = math.log(lo)
        self._log_hi = math.log(hi)
        # clipped ratio bounds lo^(p-2) <= phi'(t)/t <= hi^(p-2); may saturate
        with np.errstate(over="ignore", under="ignore"):
            self._ratio_lo = float(np.power(lo, p - 2.0))
            self._ratio_hi = float(np.power(hi, p - 2.0))
            # derivative values at the clip points, phi'(lo) and phi'(hi)
            self._r_lo = float(np.power(lo, p - 1.0))
            self._r_hi = float(np.power(hi, p - 1.0))

    @property
    def p(self):
        return self.base.p

    @property
    def p_dual(self):
        return self.base.p_dual

    @property
    def is_regularized(self):
        return True

    @property
    def shift(self):
        """Value of the relaxed integrand at 0: ``phi(lo) - (lo/2) phi'(lo)``."""
        p = self.p
        return float(_scaled_exp(p * self._log_lo, 1.0 / p - 0.5))

    def phi(self, t):
        t = _check_nonneg(t, "t")
        p, lo, hi = self.p, self.delta.lo, self.delta.hi
        with np.errstate(over="ignore"):
            mid = np.power(t, p) / p
        below = _scaled_exp(p * self._log_lo, 0.5 * np.square(t / lo) + (1.0 / p - 0.5))
        above = _scaled_exp(p * self._log_hi, 0.5 * np.square(t / hi) + (1.0 / p - 0.5))
        return np.where(t < lo, below, np.where(t > hi, above, mid))

    def phi_prime(self, t):
        t = _check_nonneg(t, "t")
        with np.errstate(over="ignore", under="ignore"):
            return self.phi_prime_over_t(t) * t

    def phi_prime_over_t(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(over="ignore", under="ignore"):
            return np.power(np.clip(t, self.delta.lo, self.delta.hi), self.p - 2.0)

    def conj(self, r):
        r = _check_nonneg(r, "r")
        p, q = self.p, self.p_dual
        with np.errstate(over="ignore", invalid="ignore"):
            mid = np.power(r, q) / q
            xb = np.divide(r, self._r_lo, out=np.zeros_like(r), where=self._r_lo > 0.0)
            below = _scaled_exp(p * self._log_lo, 0.5 * np.square(xb) + (0.5 - 1.0 / p))
            xa = r / self._r_hi
            above = _scaled_exp(p * self._log_hi, 0.5 * np.square(xa) + (0.5 - 1.0 / p))
        return np.where(r < self._r_lo, below, np.where(r > self._r_hi, above, mid))

    def conj_prime(self, r):
        r = _check_nonneg(r, "r")
        p = self.p
        with np.errstate(over="ignore"):
            mid = np.power(r, self.p_dual - 1.0)
        below = _scaled_exp((2.0 - p) * self._log_lo, r)
        above = _scaled_exp((2.0 - p) * self._log_hi, r)
        return np.where(r < self._r_lo, below, np.where(r > self._r_hi, above, mid))

    def conj_prime_over_r(self, r):
        """``(phi*)'(r)/r`` with its (finite) right-limit ``lo^(2-p)`` at 0."""
        r = np.asarray(r, dtype=float)
        p = self.p
        with np.errstate(over="ignore", divide="ignore", under="ignore"):
            mid = np.power(r, (2.0 - p) / (p - 1.0))
            lo_val = np.power(self.delta.lo, 2.0 - p)
            hi_val = np.power(self.delta.hi, 2.0 - p)
        return np.where(r <= self._r_lo, lo_val, np.where(r > self._r_hi, hi_val, mid))

    def growth_bounds(self):
        """The clip bounds ``(lo^(p-2), hi^(p-2))`` of ``phi'(t)/t``."""
        return (self._ratio_lo, self._ratio_hi)

    def weight_ratio(self, r):
        """Least-squares weight map ``r / (phi*)'(r)``, right-limit at 0.

        Piecewise: the constant ``lo^(p-2)`` below the clip, ``r^((p-2)/(p-1))``
        on the power range, the constant ``hi^(p-2)`` above.  Never produces
        NaN; saturated clip bounds (0 or inf) are reported as degenerate.
        """
        r = _check_nonneg(r, "r")
        p = self.p
        with np.errstate(over="ignore", under="ignore"):
            mid = np.power(r, (p - 2.0) / (p - 1.0))
        out = np.where(
            r <= self._r_lo,
            self._ratio_lo,
            np.where(r > self._r_hi, self._ratio_hi, mid),
        )
        if np.any(out == 0.0) or not np.all(np.isfinite(out)):
            raise DegenerateWeightError(
                f"weight ratio left (0, inf) for p={p}, "
                f"delta=[{self.delta.lo}, {self.delta.hi}]"
            )
        return out

    # --- relaxation errors ----------------------------------------------
    def reg_error(self, t):
        """Pointwise relaxation defect ``phi(t) - phi_relaxed(t)`` (>= 0).

        Vanishes on [lo, hi]; bounded by ``(lo/2) phi'(lo) - phi(lo)`` below and
        by ``phi(t) - phi(hi)`` above.
        """
        t = _check_nonneg(t, "t")
        p, lo, hi = self.p, self.delta.lo, self.delta.hi
        xb = t / lo
        with np.errstate(over="ignore"):
            hb = (1.0 - np.square(xb)) / 2.0 - (1.0 - np.power(xb, p)) / p
            xa = t / hi
            ha = (np.power(xa, p) - 1.0) / p - (np.square(xa) - 1.0) / 2.0
        below = _scaled_exp(p * self._log_lo, np.maximum(hb, 0.0))
        above = _scaled_exp(p * self._log_hi, np.maximum(ha, 0.0))
        zero = np.zeros_like(t)
        return np.where(t < lo, below, np.where(t > hi, above, zero))

    def reg_error_dual(self, t):
        """Pointwise conjugate defect ``conj_relaxed(t) - conj(t)`` (>= 0).

        Vanishes on [phi'(lo), phi'(hi)].
        """
        t = _check_nonneg(t, "t")
        p, q = self.p, self.p_dual
        with np.errstate(over="ignore", invalid="ignore"):
            xb = np.divide(t, self._r_lo, out=np.zeros_like(t), where=self._r_lo > 0.0)
            hb = (1.0 - np.power(xb, q)) / q - (1.0 - np.square(xb)) / 2.0
            xa = t / self._r_hi
            ha = (np.square(xa) - 1.0) / 2.0 - (np.power(xa, q) - 1.0) / q
        below = _scaled_exp(p * self._log_lo, np.maximum(hb, 0.0))
        above = _scaled_exp(p * self._log_hi, np.maximum(ha, 0.0))
        zero = np.zeros_like(t)
        return np.where(
            t < self._r_lo, below, np.where(t > self._r_hi, above, zero)
        )

    def descriptor(self):
        return {
            "kind": "regularized",
            "p": self.p,
            "delta": [self.delta.lo, self.delta.hi],
        }

    def __repr__(self):
        return (
            f"RegularizedNFunction(p={self.p}, "
            f"delta=[{self.delta.lo}, {self.delta.hi}])"
        )
