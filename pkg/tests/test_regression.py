"""Regression lifting, random instances, and the residual-norm map."""

import numpy as np
import pytest

from conftest import make_nfun

from plap.dirls import DirlsConfig, solve
from plap.errors import SingularSystemError
from plap.regression import (
    RegressionInstance,
    build_lifted,
    lp_residual,
    random_instance,
)
from plap.sparse import SparseMatrix


def golden_section(fn, lo, hi, tol=1e-12):
    """Independent 1-D minimizer used as oracle."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


class TestRandomInstance:
    def test_deterministic(self):
        a = random_instance(12, 7, seed=42)
        b = random_instance(12, 7, seed=42)
        np.testing.assert_array_equal(a.A.to_dense(), b.A.to_dense())
        np.testing.assert_array_equal(a.b, b.b)

    def test_entries_strictly_inside_unit_interval(self):
        inst = random_instance(40, 30, seed=7)
        dense = inst.A.to_dense()
        assert np.all(dense > 0.0) and np.all(dense < 1.0)
        assert np.all(inst.b > 0.0) and np.all(inst.b < 1.0)

    def test_mean_within_standard_error(self):
        inst = random_instance(120, 100, seed=3)
        mean = float(np.mean(inst.A.to_dense()))
        assert abs(mean - 0.5) <= 3.0 / np.sqrt(120 * 100)

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            random_instance(5, 5, seed=0)
        with pytest.raises(ValueError):
            RegressionInstance(np.ones((3, 2)), np.ones(3), 1.5)


class TestBuildLifted:
    def test_interpolation_case(self):
        inst = RegressionInstance(np.eye(2), np.array([1.0, 2.0]), 4.0)
        spec = build_lifted(inst, make_nfun(4.0, (1e-9, 1e9)), validate="skip")
        u_g, _, rec = solve(spec, DirlsConfig(max_outer=80))
        np.testing.assert_allclose(u_g[:2], [1.0, 2.0], atol=1e-6)
        np.testing.assert_allclose(lp_residual(inst, u_g[:2]), 0.0, atol=1e-6)

    def test_fixed_block_equals_targets(self):
        inst = random_instance(9, 4, seed=5, p=10.0)
        spec = build_lifted(inst, make_nfun(10.0, (1e-9, 1e9)), validate="skip")
        u_g, _, _ = solve(spec, DirlsConfig(max_outer=60))
        np.testing.assert_array_equal(u_g[4:], inst.b)

    def test_scalar_instance_against_golden_section(self):
        """min |t|^4 + |t|^4 + |3-t|^4 via an independent 1-D search."""
        inst = RegressionInstance(
            np.array([[1.0], [1.0], [1.0]]), np.array([0.0, 0.0, 3.0]), 4.0
        )
        spec = build_lifted(inst, make_nfun(4.0, (1e-9, 1e9)), validate="skip")
        u_g, _, rec = solve(spec, DirlsConfig(gap_tol=1e-12, max_outer=200))
        oracle = golden_section(
            lambda t: t**4 + t**4 + (3.0 - t) ** 4, -1.0, 4.0
        )
        assert abs(u_g[0] - oracle) <= 1e-8

    def test_lifted_rows_equal_affine_residual(self, rng):
        """B(v+g) on the lifted operator reproduces Au - b exactly."""
        inst = random_instance(11, 6, seed=9, p=4.0)
        spec = build_lifted(inst, make_nfun(4.0, (1e-9, 1e9)), validate="skip")
        for _ in range(10):
            u = rng.standard_normal(6)
            v = np.zeros(17)
            v[:6] = u
            rows = spec.B.matvec(v + spec.g)
            direct = inst.A.matvec(u) - inst.b
            np.testing.assert_array_equal(rows, direct)

    def test_rank_deficient_rejected(self):
        col = np.ones((6, 1))
        inst = RegressionInstance(np.hstack([col, col]), np.ones(6), 4.0)
        with pytest.raises(SingularSystemError):
            build_lifted(inst, make_nfun(4.0, (1e-9, 1e9)), validate="probe")

    def test_optimality_condition_at_convergence(self):
        """Residual orthogonality sum_a |r_a|^(p-1) sign(r_a) A_aj ~ 0."""
        inst = random_instance(16, 10, seed=11, p=10.0)
        spec = build_lifted(inst, make_nfun(10.0, (1e-9, 1e9)), validate="skip")
        u_g, _, rec = solve(spec, DirlsConfig(gap_tol=1e-12, max_outer=300))
        assert rec.converged
        r = inst.A.matvec(u_g[:10]) - inst.b
        grad = inst.A.matvec_transpose(np.abs(r) ** 9 * np.sign(r))
        assert np.max(np.abs(grad)) <= 1e-5 * spec.scale


class TestLpResidual:
    def test_interpolating_zero(self):
        inst = RegressionInstance(np.eye(3), np.array([1.0, 2.0, 3.0]), 4.0)
        assert lp_residual(inst, np.array([1.0, 2.0, 3.0])) == 0.0

    def test_euclidean_case(self):
        inst = RegressionInstance(np.eye(2), np.array([3.0, 4.0]), 2.0)
        np.testing.assert_allclose(lp_residual(inst, np.zeros(2)), 5.0)

    def test_high_exponent_closed_form(self):
        inst = RegressionInstance(np.eye(2), np.array([1.0, 1.0]), 80.0)
        np.testing.assert_allclose(
            lp_residual(inst, np.zeros(2)), 2.0 ** (1.0 / 80.0), rtol=1e-14
        )

    def test_norm_sandwich_and_monotonicity(self, rng):
        r = rng.uniform(-1.0, 1.0, 50)
        m = len(r)
        inst = RegressionInstance(np.eye(m), r, 2.0)
        prev = None
        for p in (2.0, 4.0, 10.0, 40.0, 80.0):
            inst_p = RegressionInstance(np.eye(m), r, p)
            val = lp_residual(inst_p, np.zeros(m))
            rmax = np.max(np.abs(r))
            assert rmax <= val <= m ** (1.0 / p) * rmax + 1e-15
            if prev is not None:
                assert val <= prev + 1e-15  # entries <= 1: norm shrinks in p
            prev = val
