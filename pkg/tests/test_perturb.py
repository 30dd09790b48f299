import numpy as np
import pytest

from lqrlimits import (
    DegenerateInputError,
    PerturbationBasis,
    PerturbationDirection,
    PerturbationTooLargeError,
    SystemInstance,
    canonical_basis,
    controller_jacobian,
    directional_gain_derivative,
    finite_difference_gain_derivative,
    input_direction,
    lqr_synthesize,
    polderman_basis,
    self_direction,
)
from lqrlimits.lti import solve_dlyap, unvec, vec
from lqrlimits.perturb import gain_derivative_raw
from lqrlimits.verify import random_stable_instance, scalar_system


def random_direction(rng, d_x, d_u):
    raw = rng.normal(size=d_x * d_x + d_x * d_u)
    return PerturbationDirection.normalized(
        unvec(raw[: d_x * d_x], d_x, d_x), unvec(raw[d_x * d_x :], d_x, d_u)
    )


def zero_dynamics_instance(n=3):
    return SystemInstance(A=np.zeros((n, n)), B=np.eye(n), Q=np.eye(n), R=np.eye(n),
                          Sigma_W=np.eye(n))


class TestDirectionTypes:
    def test_unit_norm_enforced(self):
        with pytest.raises(ValueError, match="unit Frobenius"):
            PerturbationDirection(Delta_A=np.eye(2), Delta_B=np.zeros((2, 1)))

    def test_normalized_constructor(self, rng):
        d = PerturbationDirection.normalized(rng.normal(size=(3, 3)), rng.normal(size=(3, 2)))
        nrm = np.sqrt(
            np.linalg.norm(d.Delta_A, "fro") ** 2 + np.linalg.norm(d.Delta_B, "fro") ** 2
        )
        assert nrm == pytest.approx(1.0, abs=1e-12)

    def test_zero_direction_rejected(self):
        with pytest.raises(DegenerateInputError):
            PerturbationDirection.normalized(np.zeros((2, 2)), np.zeros((2, 1)))

    def test_empty_basis_rejected(self):
        with pytest.raises(DegenerateInputError):
            PerturbationBasis(directions=())

    def test_non_orthonormal_rejected(self, rng):
        d = random_direction(rng, 2, 1)
        with pytest.raises(ValueError, match="orthonormal"):
            PerturbationBasis(directions=(d, d))

    def test_json_round_trip(self, rng):
        sys = random_stable_instance(rng, 3, 2)
        basis = polderman_basis(lqr_synthesize(sys))
        clone = PerturbationBasis.from_json_list(basis.to_json_list())
        np.testing.assert_array_equal(clone.V, basis.V)


class TestDirectionalDerivative:
    def test_zero_dynamics_closed_form(self, rng):
        # A = 0, B = I, Q = R = I: K = 0, A_cl = 0 so d_vK = -Psi^-1 Q Delta_A.
        sys = zero_dynamics_instance()
        sol = lqr_synthesize(sys)
        Delta_A = rng.normal(size=(3, 3))
        Delta_A /= np.linalg.norm(Delta_A, "fro")
        d = PerturbationDirection(Delta_A=Delta_A, Delta_B=np.zeros((3, 3)))
        np.testing.assert_allclose(
            directional_gain_derivative(sol, sys, d), -Delta_A / 2.0, atol=1e-12
        )

    @pytest.mark.parametrize("trial", range(20))
    def test_matches_finite_differences(self, trial):
        rng = np.random.default_rng(400 + trial)
        sys = random_stable_instance(rng, int(rng.integers(2, 6)), int(rng.integers(1, 4)))
        sol = lqr_synthesize(sys)
        d = random_direction(rng, sys.d_x, sys.d_u)
        exact = directional_gain_derivative(sol, sys, d)
        fd = finite_difference_gain_derivative(sys, d)
        assert np.linalg.norm(exact - fd, 2) <= 1e-5 * max(1.0, np.linalg.norm(exact, 2))

    def test_linear_in_direction(self, rng):
        sys = random_stable_instance(rng, 3, 2)
        sol = lqr_synthesize(sys)
        dA1, dB1 = rng.normal(size=(3, 3)), rng.normal(size=(3, 2))
        dA2, dB2 = rng.normal(size=(3, 3)), rng.normal(size=(3, 2))
        alpha, beta = 0.7, -1.3
        combo = gain_derivative_raw(sol, sys, alpha * dA1 + beta * dA2, alpha * dB1 + beta * dB2)
        parts = alpha * gain_derivative_raw(sol, sys, dA1, dB1) + beta * gain_derivative_raw(
            sol, sys, dA2, dB2
        )
        assert np.linalg.norm(combo - parts, 2) <= 1e-10 * max(1.0, np.linalg.norm(parts, 2))


class TestFiniteDifference:
    def test_zero_dynamics_matches(self, rng):
        sys = zero_dynamics_instance()
        Delta_A = rng.normal(size=(3, 3))
        Delta_A /= np.linalg.norm(Delta_A, "fro")
        d = PerturbationDirection(Delta_A=Delta_A, Delta_B=np.zeros((3, 3)))
        fd = finite_difference_gain_derivative(sys, d, h=1e-5)
        np.testing.assert_allclose(fd, -Delta_A / 2.0, atol=1e-8)

    def test_quadratic_error_decay(self, rng):
        # Central differences converge at O(h^2): shrinking h by 10 should
        # cut the error by roughly 100.
        sys = random_stable_instance(rng, 3, 1)
        sol = lqr_synthesize(sys)
        d = random_direction(rng, 3, 1)
        exact = directional_gain_derivative(sol, sys, d)
        errs = [
            np.linalg.norm(finite_difference_gain_derivative(sys, d, h=h) - exact, 2)
            for h in (1e-2, 1e-3)
        ]
        assert errs[1] < errs[0]
        assert 20.0 <= errs[0] / errs[1] <= 500.0

    def test_too_large_step_raises(self):
        # Unstable plant: stepping b to zero leaves the stabilizable set.
        sys = scalar_system(1.5, 1.0)
        d = PerturbationDirection(Delta_A=np.zeros((1, 1)), Delta_B=np.eye(1))
        with pytest.raises(PerturbationTooLargeError):
            finite_difference_gain_derivative(sys, d, h=1.0)

    def test_single_entry_direction_matches_jacobian_column(self, rng):
        sys = random_stable_instance(rng, 2, 2)
        jac = controller_jacobian(sys)
        j = 3
        e = np.zeros(sys.d_theta)
        e[j] = 1.0
        d = PerturbationDirection(
            Delta_A=unvec(e[:4], 2, 2), Delta_B=unvec(e[4:], 2, 2)
        )
        fd = vec(finite_difference_gain_derivative(sys, d))
        assert np.linalg.norm(fd - jac[:, j]) <= 1e-5 * max(1.0, np.linalg.norm(jac[:, j]))


class TestControllerJacobian:
    def test_zero_dynamics_blocks(self):
        sys = zero_dynamics_instance(2)
        jac = controller_jacobian(sys)
        # A-block: d_vK = -Delta_A / 2 so the block is -I/2; B-block vanishes
        # because A_cl = 0 and K = 0 kill every term.
        np.testing.assert_allclose(jac[:, :4], -0.5 * np.eye(4), atol=1e-12)
        np.testing.assert_allclose(jac[:, 4:], np.zeros((4, 4)), atol=1e-12)

    def test_scalar_db_matches_appendix_chain(self, scalar_09):
        sol = lqr_synthesize(scalar_09)
        P, K, a_cl = sol.P[0, 0], sol.K[0, 0], sol.A_cl[0, 0]
        a, b = 0.9, 1.0
        dP_db = solve_dlyap(np.array([[a_cl]]), np.array([[2.0 * a_cl * P * K]]))[0, 0]
        dK_db = (b**2 * P**2 * a - a * P - b * dP_db * a) / (b**2 * P + 1.0) ** 2
        jac = controller_jacobian(scalar_09)
        assert jac[0, 1] == pytest.approx(dK_db, abs=1e-10)

    def test_projects_onto_directional_derivatives(self, rng):
        sys = random_stable_instance(rng, 3, 2)
        sol = lqr_synthesize(sys)
        jac = controller_jacobian(sys)
        basis = polderman_basis(sol)
        for d in basis.directions:
            np.testing.assert_allclose(
                jac @ d.as_vector,
                vec(directional_gain_derivative(sol, sys, d)),
                atol=1e-10,
            )


class TestPoldermanBasis:
    def test_zero_gain_gives_canonical_b_directions(self):
        sys = zero_dynamics_instance(2)
        basis = polderman_basis(lqr_synthesize(sys))
        assert basis.k == 4
        for d in basis.directions:
            np.testing.assert_allclose(d.Delta_A, np.zeros((2, 2)), atol=1e-14)
            # each Delta_B is a distinct canonical unit matrix
            assert np.count_nonzero(np.abs(d.Delta_B) > 1e-12) == 1
            assert np.linalg.norm(d.Delta_B, "fro") == pytest.approx(1.0, abs=1e-14)

    def test_scalar_direction(self, scalar_09):
        sol = lqr_synthesize(scalar_09)
        basis = polderman_basis(sol)
        assert basis.k == 1
        K = sol.K[0, 0]
        scale = 1.0 / np.sqrt(1.0 + K**2)
        d = basis.directions[0]
        assert abs(d.Delta_B[0, 0]) == pytest.approx(scale, abs=1e-12)
        assert d.Delta_A[0, 0] == pytest.approx(-K * d.Delta_B[0, 0], abs=1e-12)

    @pytest.mark.parametrize("trial", range(10))
    def test_membership_and_orthonormality(self, trial):
        rng = np.random.default_rng(500 + trial)
        sys = random_stable_instance(rng, int(rng.integers(2, 6)), int(rng.integers(1, 4)))
        sol = lqr_synthesize(sys)
        basis = polderman_basis(sol)
        assert basis.k == sys.d_x * sys.d_u
        V = basis.V
        assert np.linalg.norm(V.T @ V - np.eye(basis.k), 2) <= 1e-10
        for d in basis.directions:
            # Closed-loop invariance and Polderman-set membership.
            assert np.linalg.norm(d.Delta_A + d.Delta_B @ sol.K, "fro") <= 1e-10
        # Eq-12 shortcut: P' vanishes so d_vK = -Psi^-1 Delta' P A_cl.
        for d in basis.directions:
            got = directional_gain_derivative(sol, sys, d)
            closed = -np.linalg.solve(sol.Psi, d.Delta_B.T @ sol.P @ sol.A_cl)
            assert np.linalg.norm(got - closed, 2) <= 1e-10


class TestNamedDirections:
    def test_self_direction_normalization(self):
        sys = SystemInstance(A=[[0.5]], B=[[0.5]], Q=[[1.0]], R=[[1.0]], Sigma_W=[[1.0]])
        d = self_direction(sys)
        assert d.Delta_A[0, 0] == pytest.approx(0.5 / np.sqrt(0.5), rel=1e-12)
        assert d.Delta_B[0, 0] == pytest.approx(0.5 / np.sqrt(0.5), rel=1e-12)

    def test_self_direction_zero_system(self):
        sys = SystemInstance(A=[[0.0]], B=[[0.0]], Q=[[1.0]], R=[[1.0]], Sigma_W=[[1.0]])
        with pytest.raises(DegenerateInputError):
            self_direction(sys)

    @pytest.mark.parametrize("trial", range(20))
    def test_self_direction_closed_form_up_to_sign(self, trial):
        rng = np.random.default_rng(600 + trial)
        sys = random_stable_instance(rng, int(rng.integers(2, 5)), int(rng.integers(1, 3)))
        sol = lqr_synthesize(sys)
        d = self_direction(sys)
        got = directional_gain_derivative(sol, sys, d)
        nAB = np.sqrt(np.linalg.norm(sys.A, "fro") ** 2 + np.linalg.norm(sys.B, "fro") ** 2)
        closed = 2.0 * np.linalg.solve(
            sol.Psi, sys.B.T @ solve_dlyap(sol.A_cl, sol.P) @ sol.A_cl
        ) / nAB
        gap = min(np.linalg.norm(got - closed, 2), np.linalg.norm(got + closed, 2))
        assert gap <= 1e-8 * max(1.0, np.linalg.norm(got, 2))
        fd = finite_difference_gain_derivative(sys, d)
        assert np.linalg.norm(got - fd, 2) <= 1e-5 * max(1.0, np.linalg.norm(got, 2))

    def test_input_direction_canonical_b(self):
        from lqrlimits import exponential_instance

        sys = exponential_instance(3, 0.5)
        d = input_direction(sys)
        np.testing.assert_allclose(d.Delta_B, sys.B, atol=1e-15)
        np.testing.assert_allclose(d.Delta_A, np.zeros((3, 3)), atol=1e-15)

    def test_input_direction_scalar(self):
        sys = scalar_system(0.5, 0.3)
        d = input_direction(sys)
        assert d.Delta_B[0, 0] == pytest.approx(1.0, abs=1e-15)

    def test_input_direction_zero_b(self):
        sys = SystemInstance(A=[[0.5]], B=[[0.0]], Q=[[1.0]], R=[[1.0]], Sigma_W=[[1.0]])
        with pytest.raises(DegenerateInputError):
            input_direction(sys)

    def test_canonical_basis_is_identity(self):
        basis = canonical_basis(2, 1)
        np.testing.assert_allclose(basis.V, np.eye(6), atol=1e-15)
