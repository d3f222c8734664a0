#!/usr/bin/env python3
"""
Test Suite for the ConvexKernels Module

Analytic SDP instances, status detection, eigen and MMSE oracles and the
trust-region linear subproblem. The cross-checks against a general-purpose
conic modeller run only when cvxpy is installed.

Author: MA-FD Optimizer
Version: 1.0
"""

import io
import math
import unittest

import numpy as np

from convex_kernels import (SdpProblem, SdpStatus, Sense, TrLpStatus, TrustRegionLp,
                            complex_from_embedding, dominant_eigpair, real_embedding, solve_sdp,
                            solve_tr_lp, whitened_mmse_direction)

try:
    import cvxpy as cp
    HAS_CVXPY = True
except ImportError:
    HAS_CVXPY = False


def random_hermitian(rng, n: int) -> np.ndarray:
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return 0.5 * (A + A.conj().T)


class TestSdpSolver(unittest.TestCase):
    """solve_sdp on instances with known optima."""

    def setUp(self):
        self.rng = np.random.default_rng(17)

    def assertPsd(self, W, tol=1e-7):
        self.assertGreaterEqual(float(np.linalg.eigvalsh(0.5 * (W + W.conj().T))[0]), -tol)

    def test_trace_bound(self):
        problem = SdpProblem(objective=np.eye(2)).with_constraint(np.eye(2), Sense.LE, 1.0)
        result = solve_sdp(problem)
        self.assertEqual(result.status, SdpStatus.OPTIMAL)
        self.assertAlmostEqual(result.objective, 1.0, delta=1e-6)
        self.assertPsd(result.W)

    def test_eigen_aligned_optimum(self):
        problem = SdpProblem(objective=np.diag([1.0, -1.0])).with_constraint(np.eye(2), Sense.LE, 1.0)
        result = solve_sdp(problem)
        self.assertEqual(result.status, SdpStatus.OPTIMAL)
        self.assertAlmostEqual(result.objective, 1.0, delta=1e-6)
        np.testing.assert_allclose(result.W, np.diag([1.0, 0.0]), atol=1e-5)

    def test_largest_eigenvalue_oracle(self):
        for n in (2, 3, 4):
            C = random_hermitian(self.rng, n)
            problem = SdpProblem(objective=C).with_constraint(np.eye(n), Sense.EQ, 1.0)
            result = solve_sdp(problem)
            self.assertEqual(result.status, SdpStatus.OPTIMAL)
            lam = float(np.linalg.eigvalsh(C)[-1])
            self.assertLess(abs(result.objective - lam), 1e-5 * (1.0 + abs(lam)))
            self.assertLess(problem.max_violation(result.W), 1e-6)
            self.assertPsd(result.W)

    def test_complex_objective(self):
        C = np.array([[0.0, 1j], [-1j, 0.0]])
        result = solve_sdp(SdpProblem(objective=C).with_constraint(np.eye(2), Sense.EQ, 1.0))
        self.assertAlmostEqual(result.objective, 1.0, delta=1e-6)
        np.testing.assert_allclose(result.W, result.W.conj().T, atol=1e-12)
        self.assertAlmostEqual(result.W[0, 1].imag, 0.5, delta=1e-4)

    def test_constant_row_infeasible(self):
        problem = SdpProblem(objective=np.eye(2)).with_constraint(np.zeros((2, 2)), Sense.GE, 1.0)
        result = solve_sdp(problem)
        self.assertEqual(result.status, SdpStatus.INFEASIBLE)
        self.assertIsNone(result.W)

    def test_negative_trace_is_not_optimal(self):
        problem = SdpProblem(objective=np.eye(2)).with_constraint(np.eye(2), Sense.LE, -1.0)
        self.assertNotEqual(solve_sdp(problem).status, SdpStatus.OPTIMAL)

    def test_unbounded_is_not_optimal(self):
        corner = np.diag([0.0, 1.0])
        problem = SdpProblem(objective=np.diag([1.0, 0.0])).with_constraint(corner, Sense.EQ, 1.0)
        self.assertNotEqual(solve_sdp(problem).status, SdpStatus.OPTIMAL)

    def test_validation(self):
        with self.assertRaises(ValueError):
            solve_sdp(SdpProblem(objective=np.array([[0.0, 1.0], [0.0, 0.0]])))
        with self.assertRaises(ValueError):
            solve_sdp(SdpProblem(objective=np.eye(3), size_cap=2))
        with self.assertRaises(ValueError):
            solve_sdp(SdpProblem(objective=np.eye(2)).with_constraint(np.eye(3), Sense.LE, 1.0))

    def test_debug_stream(self):
        stream = io.StringIO()
        problem = SdpProblem(objective=np.eye(2)).with_constraint(np.eye(2), Sense.LE, 1.0)
        result = solve_sdp(problem, debug_stream=stream)
        self.assertEqual(len(stream.getvalue().splitlines()), result.iterations)

    def test_embedding_preserves_trace(self):
        C, W = random_hermitian(self.rng, 3), random_hermitian(self.rng, 3)
        lhs = float(np.real(np.trace(C @ W)))
        rhs = 0.5 * float(np.trace(real_embedding(C) @ real_embedding(W)))
        self.assertAlmostEqual(lhs, rhs, delta=1e-12)
        np.testing.assert_allclose(complex_from_embedding(real_embedding(W), 3), W, atol=1e-14)

    @unittest.skipUnless(HAS_CVXPY, "cvxpy not installed")
    def test_matches_reference_modeller(self):
        for _ in range(5):
            n = 4
            C = random_hermitian(self.rng, n)
            A = random_hermitian(self.rng, n)
            A = A @ A.conj().T
            problem = (SdpProblem(objective=C)
                       .with_constraint(np.eye(n), Sense.LE, 2.0)
                       .with_constraint(A, Sense.GE, 0.1 * float(np.trace(A).real)))
            result = solve_sdp(problem)
            W = cp.Variable((n, n), hermitian=True)
            ref = cp.Problem(cp.Maximize(cp.real(cp.trace(C @ W))),
                             [W >> 0, cp.real(cp.trace(W)) <= 2.0,
                              cp.real(cp.trace(A @ W)) >= 0.1 * float(np.trace(A).real)])
            ref.solve()
            self.assertEqual(result.status, SdpStatus.OPTIMAL)
            self.assertLess(abs(result.objective - ref.value), 1e-3 * (1.0 + abs(ref.value)))


class TestEigenKernels(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(5)

    def test_diagonal(self):
        lam, u = dominant_eigpair(np.diag([3.0, 1.0]))
        self.assertAlmostEqual(lam, 3.0, delta=1e-12)
        np.testing.assert_allclose(u, [1.0, 0.0], atol=1e-12)

    def test_identity_residual(self):
        lam, u = dominant_eigpair(np.eye(4))
        self.assertAlmostEqual(lam, 1.0, delta=1e-12)
        self.assertAlmostEqual(float(np.linalg.norm(u)), 1.0, delta=1e-12)
        self.assertLess(float(np.linalg.norm(u - lam * u)), 1e-10)

    def test_random_against_full_spectrum(self):
        for _ in range(20):
            M = random_hermitian(self.rng, 8)
            lam, u = dominant_eigpair(M)
            self.assertAlmostEqual(lam, float(np.linalg.eigvalsh(M)[-1]), delta=1e-9)
            self.assertLessEqual(float(np.linalg.norm(M @ u - lam * u)), 1e-10 * np.linalg.norm(M, 2))

    def test_phase_is_fixed(self):
        M = random_hermitian(self.rng, 5)
        _, u = dominant_eigpair(M)
        lead = int(np.argmax(np.abs(u) > 1e-8))
        self.assertAlmostEqual(u[lead].imag, 0.0, delta=1e-12)
        self.assertGreater(u[lead].real, 0.0)

    def test_mmse_without_interference_is_matched(self):
        a = self.rng.normal(size=3) + 1j * self.rng.normal(size=3)
        np.testing.assert_allclose(whitened_mmse_direction(a, np.zeros((3, 3)), 0.7),
                                   a / np.linalg.norm(a), atol=1e-12)

    def test_mmse_isotropic_interference(self):
        a = self.rng.normal(size=3) + 1j * self.rng.normal(size=3)
        v = whitened_mmse_direction(a, 0.7 * np.eye(3), 0.7)
        self.assertAlmostEqual(abs(np.vdot(v, a)) / np.linalg.norm(a), 1.0, delta=1e-12)

    def test_mmse_zero_channel(self):
        v = whitened_mmse_direction(np.zeros(3, dtype=complex), np.eye(3), 1.0)
        np.testing.assert_array_equal(v, [1.0, 0.0, 0.0])

    def test_mmse_beats_random_search(self):
        for _ in range(10):
            n = 3
            a = self.rng.normal(size=n) + 1j * self.rng.normal(size=n)
            B = self.rng.normal(size=(n, 2)) + 1j * self.rng.normal(size=(n, 2))
            S = B @ B.conj().T
            sigma2 = 0.3
            v = whitened_mmse_direction(a, S, sigma2)
            Q = S + sigma2 * np.eye(n)

            def quotient(x):
                return np.abs(x.conj().T @ a) ** 2 / np.real(np.einsum('ij,ik,kj->j', x.conj(), Q, x))

            probes = self.rng.normal(size=(n, 10000)) + 1j * self.rng.normal(size=(n, 10000))
            best = float(np.max(quotient(probes)))
            self.assertGreaterEqual(float(quotient(v[:, None])[0]), best * (1.0 - 1e-12))


class TestTrustRegionLp(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(23)

    def problem(self, c, radius=1.0, lower=-10.0, upper=10.0, rows=None, rhs=None, center=None):
        n = len(c)
        kwargs = {}
        if rows is not None:
            kwargs = dict(rows=np.asarray(rows, dtype=float), rhs=np.asarray(rhs, dtype=float))
        return TrustRegionLp(gradient=np.asarray(c, dtype=float),
                             center=np.zeros(n) if center is None else np.asarray(center, dtype=float),
                             radius=radius, lower=np.broadcast_to(lower, (n,)).astype(float),
                             upper=np.broadcast_to(upper, (n,)).astype(float), **kwargs)

    def test_zero_gradient_stays(self):
        x, status = solve_tr_lp(self.problem([0.0, 0.0], center=[0.3, -0.2]))
        np.testing.assert_array_equal(x, [0.3, -0.2])
        self.assertEqual(status, TrLpStatus.OPTIMAL)

    def test_ball_boundary(self):
        x, status = solve_tr_lp(self.problem([3.0, 4.0], radius=0.5))
        np.testing.assert_allclose(x, [0.3, 0.4], atol=1e-14)
        self.assertEqual(status, TrLpStatus.OPTIMAL)

    def test_active_box(self):
        prob = self.problem([1.0, 1.0], upper=[0.1, 10.0])
        x, status = solve_tr_lp(prob)
        self.assertEqual(status, TrLpStatus.OPTIMAL)
        self.assertAlmostEqual(float(x.sum()), 0.1 + math.sqrt(0.99), delta=1e-6)
        self.assertTrue(prob.is_feasible(x, 1e-8))

    def test_active_row(self):
        prob = self.problem([1.0, 0.0], rows=[[-1.0, 0.0]], rhs=[-0.5])
        x, status = solve_tr_lp(prob)
        self.assertEqual(status, TrLpStatus.OPTIMAL)
        self.assertAlmostEqual(float(x[0]), 0.5, delta=1e-6)
        self.assertTrue(prob.is_feasible(x, 1e-8))

    def test_infeasible_center(self):
        prob = self.problem([1.0, 0.0], rows=[[1.0, 0.0]], rhs=[1.0])
        x, status = solve_tr_lp(prob)
        self.assertEqual(status, TrLpStatus.INFEASIBLE_RESTORE)
        np.testing.assert_array_equal(x, [0.0, 0.0])

    def test_never_worse_than_center(self):
        for _ in range(50):
            n = 6
            c = self.rng.normal(size=n)
            center = self.rng.uniform(-0.5, 0.5, size=n)
            rows = self.rng.normal(size=(3, n))
            rhs = rows @ center - self.rng.uniform(0.0, 0.2, size=3)
            prob = self.problem(c, radius=0.3, lower=-0.6, upper=0.6, rows=rows, rhs=rhs, center=center)
            x, _ = solve_tr_lp(prob)
            self.assertGreaterEqual(float(c @ x), float(c @ center))
            self.assertTrue(prob.is_feasible(x, 1e-6))

    @unittest.skipUnless(HAS_CVXPY, "cvxpy not installed")
    def test_matches_reference_modeller(self):
        for _ in range(10):
            n = 6
            c = self.rng.normal(size=n)
            center = self.rng.uniform(-0.5, 0.5, size=n)
            rows = self.rng.normal(size=(3, n))
            rhs = rows @ center - self.rng.uniform(0.0, 0.2, size=3)
            prob = self.problem(c, radius=0.3, lower=-0.6, upper=0.6, rows=rows, rhs=rhs, center=center)
            x, _ = solve_tr_lp(prob)
            z = cp.Variable(n)
            ref = cp.Problem(cp.Maximize(c @ z), [rows @ z >= rhs, z >= -0.6, z <= 0.6,
                                                  cp.norm(z - center) <= 0.3])
            ref.solve()
            self.assertLess(abs(float(c @ x) - ref.value), 1e-5 * (1.0 + abs(ref.value)))


if __name__ == "__main__":
    print("🧪 ConvexKernels Module - Test Suite")
    print("=" * 50)
    unittest.main(verbosity=2)
