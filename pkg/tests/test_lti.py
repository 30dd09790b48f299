import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lqrlimits import (
    InstabilityError,
    DegenerateInputError,
    SystemInstance,
    lqr_synthesize,
    solve_dare,
    solve_dlyap,
    spectral_radius,
    tail_sum_J,
    tau,
)
from lqrlimits.verify import random_stable_instance, scalar_system

# Scalar oracle: positive root of P^2 - 0.81 P - 1 = 0 (a=0.9, b=q=r=1).
P_SCALAR = (0.81 + math.sqrt(0.81**2 + 4.0)) / 2.0


def dlyap_series(A, Q, terms=3000):
    P = np.zeros_like(Q)
    M = np.eye(A.shape[0])
    for _ in range(terms):
        P += M.T @ Q @ M
        M = A @ M
        if np.linalg.norm(M, 2) < 1e-16:
            break
    return P


class TestSpectralRadius:
    def test_zero_matrix(self):
        assert spectral_radius(np.zeros((2, 2))) == 0.0

    def test_diagonal(self):
        assert spectral_radius(np.diag([0.5, -0.9])) == pytest.approx(0.9, abs=1e-14)

    def test_nilpotent(self):
        assert spectral_radius(np.array([[0.0, 2.0], [0.0, 0.0]])) == pytest.approx(0.0, abs=1e-12)

    @given(st.floats(min_value=-10, max_value=10, allow_nan=False))
    def test_scaled_identity(self, c):
        assert spectral_radius(c * np.eye(3)) == pytest.approx(abs(c), rel=1e-12, abs=1e-12)


class TestDlyap:
    def test_zero_dynamics(self):
        P = solve_dlyap(np.zeros((3, 3)), np.eye(3))
        np.testing.assert_allclose(P, np.eye(3), atol=1e-14)

    def test_scalar_geometric_series(self):
        P = solve_dlyap(np.array([[0.5]]), np.array([[1.0]]))
        assert P[0, 0] == pytest.approx(4.0 / 3.0, rel=1e-12)

    def test_matches_truncated_series(self, rng):
        A = rng.normal(size=(4, 4))
        A *= 0.8 / spectral_radius(A)
        P = solve_dlyap(A, np.eye(4))
        np.testing.assert_allclose(P, dlyap_series(A, np.eye(4)), atol=1e-8)

    @pytest.mark.parametrize("trial", range(10))
    def test_series_suite(self, trial):
        rng = np.random.default_rng(100 + trial)
        n = int(rng.integers(2, 9))
        A = rng.normal(size=(n, n))
        A *= rng.uniform(0.2, 0.95) / spectral_radius(A)
        Q = rng.normal(size=(n, n))
        Q = Q @ Q.T
        P = solve_dlyap(A, Q)
        assert np.linalg.norm(P - dlyap_series(A, Q), 2) <= 1e-8
        resid = np.linalg.norm(A.T @ P @ A - P + Q, 2)
        assert resid <= 1e-10 * (1.0 + np.linalg.norm(P, 2))
        assert np.min(np.linalg.eigvalsh(P)) >= -1e-10

    def test_smith_path_matches_kron_path(self, rng):
        # d_x = 16 goes through the doubling branch; compare to the series.
        A = rng.normal(size=(16, 16))
        A *= 0.7 / spectral_radius(A)
        P = solve_dlyap(A, np.eye(16))
        np.testing.assert_allclose(P, dlyap_series(A, np.eye(16)), atol=1e-8)

    def test_rejects_unstable(self):
        with pytest.raises(InstabilityError):
            solve_dlyap(np.eye(2), np.eye(2))

    def test_rejects_marginal(self):
        with pytest.raises(InstabilityError):
            solve_dlyap(np.array([[1.0 - 1e-9]]), np.array([[1.0]]))


class TestDare:
    def test_zero_a_returns_q(self, rng):
        Q = np.diag([1.0, 2.0, 3.0])
        P = solve_dare(np.zeros((3, 3)), rng.normal(size=(3, 2)), Q, np.eye(2))
        np.testing.assert_allclose(P, Q, atol=1e-12)

    def test_scalar_quadratic_root(self):
        P = solve_dare([[0.9]], [[1.0]], [[1.0]], [[1.0]])
        assert abs(P[0, 0] - P_SCALAR) <= 1e-8

    def test_scalar_closed_form_sign_resolution(self):
        # The closed form for q = r = 1 has numerator
        # -(1 - a^2 - b^2) + sqrt((1-a^2)^2 + 2(1+a^2) b^2 + b^4): the first
        # radical collapses to |1 - a^2 - b^2| and must enter with its sign.
        for a, b in [(0.9, 1.0), (0.2, 0.5), (-0.7, 1.5), (0.99, 0.05)]:
            P = solve_dare([[a]], [[b]], [[1.0]], [[1.0]])[0, 0]
            disc = (1 - a**2) ** 2 + 2 * (1 + a**2) * b**2 + b**4
            closed = (-(1 - a**2 - b**2) + math.sqrt(disc)) / (2 * b**2)
            assert P == pytest.approx(closed, rel=1e-12)
            root = np.roots([b**2, 1 - a**2 - b**2, -1.0])
            assert P == pytest.approx(float(np.max(root)), rel=1e-10)

    @pytest.mark.parametrize("trial", range(10))
    def test_residual_and_completed_square(self, trial):
        rng = np.random.default_rng(200 + trial)
        sys = random_stable_instance(rng, int(rng.integers(2, 7)), int(rng.integers(1, 4)))
        sol = lqr_synthesize(sys)
        P = sol.P
        resid = np.linalg.norm(
            sys.Q
            + sys.A.T @ P @ sys.A
            - sys.A.T
            @ P
            @ sys.B
            @ np.linalg.solve(sys.B.T @ P @ sys.B + sys.R, sys.B.T @ P @ sys.A)
            - P,
            2,
        )
        assert resid <= 1e-9 * (1.0 + np.linalg.norm(P, 2))
        # Completed-square identity P = Q + A_cl' P A_cl + K' R K.
        recon = sys.Q + sol.A_cl.T @ P @ sol.A_cl + sol.K.T @ sys.R @ sol.K
        assert np.linalg.norm(recon - P, 2) <= 1e-8 * (1.0 + np.linalg.norm(P, 2))


class TestLqrSynthesize:
    def test_zero_dynamics_identity(self):
        sys = SystemInstance(A=np.zeros((3, 3)), B=np.eye(3), Q=np.eye(3), R=np.eye(3),
                             Sigma_W=np.eye(3))
        sol = lqr_synthesize(sys)
        np.testing.assert_allclose(sol.P, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(sol.K, np.zeros((3, 3)), atol=1e-12)
        np.testing.assert_allclose(sol.Psi, 2.0 * np.eye(3), atol=1e-12)
        np.testing.assert_allclose(sol.Sigma_X, np.eye(3), atol=1e-12)
        assert sol.optimal_cost == pytest.approx(3.0, rel=1e-12)

    def test_scalar_oracle_values(self, scalar_09):
        sol = lqr_synthesize(scalar_09)
        assert sol.P[0, 0] == pytest.approx(P_SCALAR, abs=1e-10)
        assert sol.K[0, 0] == pytest.approx(-0.9 * P_SCALAR / (P_SCALAR + 1.0), abs=1e-10)
        assert sol.K[0, 0] == pytest.approx(-0.53767, abs=1e-5)
        assert sol.Psi[0, 0] == pytest.approx(P_SCALAR + 1.0, abs=1e-10)
        assert sol.optimal_cost == pytest.approx(P_SCALAR, abs=1e-10)

    @pytest.mark.parametrize("trial", range(20))
    def test_stationary_covariance_residual(self, trial):
        rng = np.random.default_rng(300 + trial)
        sys = random_stable_instance(rng, int(rng.integers(2, 6)), int(rng.integers(1, 4)))
        sol = lqr_synthesize(sys)
        resid = np.linalg.norm(
            sol.A_cl @ sol.Sigma_X @ sol.A_cl.T - sol.Sigma_X + sys.Sigma_W, 2
        )
        assert resid <= 1e-9 * (1.0 + np.linalg.norm(sol.Sigma_X, 2))
        assert spectral_radius(sol.A_cl) < 1.0
        assert np.min(np.linalg.eigvalsh(sol.Sigma_X - sys.Sigma_W)) >= -1e-9
        assert np.min(np.linalg.eigvalsh(sol.Psi)) > 0.0

    def test_gain_is_argmin(self, rng):
        sys = random_stable_instance(rng, 3, 2)
        sol = lqr_synthesize(sys)

        def stationary_cost(K):
            cov = solve_dlyap((sys.A + sys.B @ K).T, sys.Sigma_W)
            return float(np.trace(cov @ (sys.Q + K.T @ sys.R @ K)))

        assert stationary_cost(sol.K) == pytest.approx(sol.optimal_cost, rel=1e-9)
        for _ in range(10):
            delta = rng.normal(size=sol.K.shape)
            delta *= 1e-3 / np.linalg.norm(delta, 2)
            assert stationary_cost(sol.K + delta) > sol.optimal_cost


class TestTailSumJ:
    def test_zero(self):
        assert tail_sum_J(np.zeros((2, 2))) == pytest.approx(1.0, rel=1e-12)

    def test_scalar_geometric(self):
        assert tail_sum_J(np.array([[0.5]])) == pytest.approx(4.0 / 3.0, rel=1e-9)

    def test_nilpotent_two_terms(self):
        assert tail_sum_J(np.array([[0.0, 2.0], [0.0, 0.0]])) == pytest.approx(5.0, rel=1e-12)

    def test_rejects_unstable(self):
        with pytest.raises(InstabilityError):
            tail_sum_J(np.array([[1.01]]))

    @given(st.floats(min_value=-0.95, max_value=0.95))
    @settings(max_examples=25, deadline=None)
    def test_scalar_matches_geometric_formula(self, a):
        assert tail_sum_J(np.array([[a]])) == pytest.approx(1.0 / (1.0 - a * a), rel=1e-9)


class TestTau:
    def test_scalar(self):
        assert tau(np.array([[0.5]])) == pytest.approx(4.0 / 3.0, rel=1e-12)

    def test_normal_matrix(self, rng):
        # For symmetric A, ||A^k|| = rho^k so the sup is 1.
        M = rng.normal(size=(3, 3))
        A = M + M.T
        A *= 0.9 / spectral_radius(A)
        assert tau(A) == pytest.approx(1.0 / (1.0 - 0.81), rel=1e-9)

    def test_defective_matches_brute_force(self):
        A = np.array([[0.5, 10.0], [0.0, 0.5]])
        cap = 500
        brute = max(
            np.linalg.norm(np.linalg.matrix_power(A, k), 2) * 2.0**k for k in range(cap + 1)
        )
        expected = brute**2 / (1.0 - 0.25)
        assert tau(A, k_cap=cap) == pytest.approx(expected, rel=1e-9)

    def test_degenerate_rho_zero(self):
        with pytest.raises(DegenerateInputError):
            tau(np.array([[0.0, 2.0], [0.0, 0.0]]))

    def test_rejects_unstable(self):
        with pytest.raises(InstabilityError):
            tau(np.array([[1.0]]))


class TestSystemInstance:
    def test_rejects_asymmetric_q(self):
        with pytest.raises(ValueError, match="symmetric"):
            SystemInstance(
                A=np.zeros((2, 2)),
                B=np.ones((2, 1)),
                Q=np.array([[1.0, 0.5], [0.0, 1.0]]),
                R=[[1.0]],
                Sigma_W=np.eye(2),
            )

    def test_rejects_indefinite_weights(self):
        with pytest.raises(ValueError, match="positive"):
            SystemInstance(A=[[0.5]], B=[[1.0]], Q=[[-1.0]], R=[[1.0]], Sigma_W=[[1.0]])
        with pytest.raises(ValueError, match="positive"):
            SystemInstance(A=[[0.5]], B=[[1.0]], Q=[[1.0]], R=[[0.0]], Sigma_W=[[1.0]])
        with pytest.raises(ValueError, match="positive"):
            SystemInstance(A=[[0.5]], B=[[1.0]], Q=[[1.0]], R=[[1.0]], Sigma_W=[[0.0]])

    def test_rejects_dimension_mismatch(self):
        with pytest.raises(ValueError):
            SystemInstance(A=np.zeros((2, 2)), B=np.ones((3, 1)), Q=np.eye(2), R=[[1.0]],
                           Sigma_W=np.eye(2))
        with pytest.raises(ValueError):
            SystemInstance(A=np.zeros((2, 2)), B=np.ones((2, 1)), Q=np.eye(3), R=[[1.0]],
                           Sigma_W=np.eye(2))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="finite"):
            SystemInstance(A=[[np.nan]], B=[[1.0]], Q=[[1.0]], R=[[1.0]], Sigma_W=[[1.0]])

    def test_json_round_trip(self, rng):
        sys = random_stable_instance(rng, 3, 2)
        clone = SystemInstance.from_json_dict(sys.to_json_dict())
        np.testing.assert_array_equal(clone.A, sys.A)
        np.testing.assert_array_equal(clone.B, sys.B)
        np.testing.assert_array_equal(clone.Sigma_W, sys.Sigma_W)

    def test_json_missing_key(self):
        with pytest.raises(ValueError, match="Sigma_W"):
            SystemInstance.from_json_dict({"A": [[0.0]], "B": [[1.0]], "Q": [[1.0]], "R": [[1.0]]})

    def test_theta_round_trip(self, rng):
        sys = random_stable_instance(rng, 3, 2)
        clone = sys.with_theta(sys.theta)
        np.testing.assert_array_equal(clone.A, sys.A)
        np.testing.assert_array_equal(clone.B, sys.B)

    def test_arrays_immutable(self, scalar_09):
        with pytest.raises(ValueError):
            scalar_09.A[0, 0] = 2.0
