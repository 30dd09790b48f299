"""Self-contained verification suite behind ``lqr-limits verify``.

Every check pits an implementation path against an independent oracle
(truncated series, polynomial roots, finite differences, direct grid
evaluation, Monte Carlo) and returns a one-line verdict. The pytest suite
covers the same ground more finely; this module exists so a fresh checkout
can be sanity-checked without a test harness.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import bounds, lti, perturb, simulate
from .errors import NumericalFailureError
from .bounds import ExplorationSetup, GammaChoice
from .lti import SystemInstance
from .perturb import PerturbationBasis


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def random_stable_instance(rng, d_x, d_u, rho=None, r_scalar=True):
    """Random instance with rho(A) < 1 (so F = 0 is a valid exploration
    feedback), Q = Sigma_W = I and R = I (scalar multiple keeps every
    specialized bound applicable)."""
    rho = rho if rho is not None else rng.uniform(0.3, 0.9)
    A = rng.normal(size=(d_x, d_x))
    A *= rho / lti.spectral_radius(A)
    B = rng.normal(size=(d_x, d_u))
    R = np.eye(d_u) if r_scalar else np.diag(rng.uniform(0.5, 2.0, size=d_u))
    return SystemInstance(A=A, B=B, Q=np.eye(d_x), R=R, Sigma_W=np.eye(d_x))


def burned_in_setup(sol, d_x, d_u, sigma_u_sq=1.0, N=100):
    """F = 0 setup whose horizon satisfies the stationary-covariance
    burn-in for the given solution."""
    thr = 16.0 * np.linalg.norm(sol.Sigma_X, 2) ** 2 / np.min(np.linalg.eigvalsh(sol.Sigma_X))
    return ExplorationSetup(
        F=np.zeros((d_u, d_x)), sigma_u_sq=sigma_u_sq, N=N, T=int(math.ceil(thr)) + 1
    )


def scalar_system(a=0.9, b=1.0):
    return SystemInstance(A=[[a]], B=[[b]], Q=[[1.0]], R=[[1.0]], Sigma_W=[[1.0]])


def _dlyap_series_oracle(A, Q, terms=2000):
    P = np.zeros_like(Q)
    M = np.eye(A.shape[0])
    for _ in range(terms):
        P += M.T @ Q @ M
        M = A @ M
        if np.linalg.norm(M, 2) < 1e-16:
            break
    return P


def check_dlyap_series(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(10):
        d_x = int(rng.integers(2, 7))
        A = rng.normal(size=(d_x, d_x))
        A *= rng.uniform(0.3, 0.9) / lti.spectral_radius(A)
        Q = np.eye(d_x)
        err = np.linalg.norm(lti.solve_dlyap(A, Q) - _dlyap_series_oracle(A, Q), 2)
        worst = max(worst, err)
    ok = worst <= 1e-8
    return CheckResult("dlyap vs truncated series", ok, f"worst error {worst:.3g}")


def check_dare_scalar_root(seed):
    sys = scalar_system()
    P = lti.solve_dare(sys.A, sys.B, sys.Q, sys.R)[0, 0]
    root = (0.81 + math.sqrt(0.81**2 + 4.0)) / 2.0
    err = abs(P - root)
    return CheckResult("scalar DARE vs quadratic root", err <= 1e-8, f"error {err:.3g}")


def scalar_riccati_closed_form(a, b):
    """Appendix closed form for q = r = 1 with the sign pattern fixed: the
    first radical collapses to |1 - a^2 - b^2|, so the signed value is what
    belongs in the numerator, and the second radical enters with +."""
    disc = (1 - a**2) ** 2 + 2 * (1 + a**2) * b**2 + b**4
    return (-(1 - a**2 - b**2) + math.sqrt(disc)) / (2 * b**2)


def check_dare_closed_form(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        a = float(rng.uniform(-0.95, 0.95))
        b = float(rng.uniform(0.1, 2.0))
        sys = scalar_system(a, b)
        P = lti.solve_dare(sys.A, sys.B, sys.Q, sys.R)[0, 0]
        worst = max(worst, abs(P - scalar_riccati_closed_form(a, b)))
    return CheckResult(
        "scalar DARE vs closed form", worst <= 1e-9, f"worst error {worst:.3g}"
    )


def check_dare_residuals(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(10):
        sys = random_stable_instance(rng, int(rng.integers(2, 7)), int(rng.integers(1, 4)))
        P = lti.solve_dare(sys.A, sys.B, sys.Q, sys.R)
        res = np.linalg.norm(
            sys.Q
            + sys.A.T @ P @ sys.A
            - sys.A.T @ P @ sys.B @ np.linalg.solve(sys.B.T @ P @ sys.B + sys.R, sys.B.T @ P @ sys.A)
            - P,
            2,
        ) / (1.0 + np.linalg.norm(P, 2))
        worst = max(worst, res)
    return CheckResult("DARE residuals", worst <= 1e-9, f"worst relative residual {worst:.3g}")


def check_gain_derivative_fd(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(10):
        sys = random_stable_instance(rng, int(rng.integers(2, 5)), int(rng.integers(1, 3)))
        sol = lti.lqr_synthesize(sys)
        for _ in range(3):
            raw = rng.normal(size=sys.d_theta)
            d = perturb.PerturbationDirection.normalized(
                lti.unvec(raw[: sys.d_x**2], sys.d_x, sys.d_x),
                lti.unvec(raw[sys.d_x**2 :], sys.d_x, sys.d_u),
            )
            exact = perturb.directional_gain_derivative(sol, sys, d)
            fd = perturb.finite_difference_gain_derivative(sys, d)
            rel = np.linalg.norm(exact - fd, 2) / (1e-12 + np.linalg.norm(exact, 2))
            worst = max(worst, rel)
    return CheckResult(
        "gain derivative vs central differences", worst <= 1e-4, f"worst relative {worst:.3g}"
    )


def check_polderman_invariance(seed):
    rng = np.random.default_rng(seed)
    worst_eq = worst_cl = worst_gram = 0.0
    for _ in range(5):
        sys = random_stable_instance(rng, int(rng.integers(2, 5)), int(rng.integers(1, 3)))
        sol = lti.lqr_synthesize(sys)
        basis = perturb.polderman_basis(sol)
        V = basis.V
        worst_gram = max(worst_gram, np.linalg.norm(V.T @ V - np.eye(basis.k), 2))
        for d in basis.directions:
            worst_cl = max(
                worst_cl, np.linalg.norm(d.Delta_A + d.Delta_B @ sol.K, "fro")
            )
            closed = -np.linalg.solve(sol.Psi, d.Delta_B.T @ sol.P @ sol.A_cl)
            got = perturb.directional_gain_derivative(sol, sys, d)
            worst_eq = max(worst_eq, np.linalg.norm(closed - got, 2))
    ok = worst_eq <= 1e-10 and worst_cl <= 1e-10 and worst_gram <= 1e-10
    return CheckResult(
        "closed-loop-invariant directions",
        ok,
        f"derivative gap {worst_eq:.3g}, Delta_Acl {worst_cl:.3g}, Gram {worst_gram:.3g}",
    )


def check_self_direction_formula(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(5):
        sys = random_stable_instance(rng, int(rng.integers(2, 5)), int(rng.integers(1, 3)))
        sol = lti.lqr_synthesize(sys)
        d = perturb.self_direction(sys)
        got = perturb.directional_gain_derivative(sol, sys, d)
        nAB = math.sqrt(
            np.linalg.norm(sys.A, "fro") ** 2 + np.linalg.norm(sys.B, "fro") ** 2
        )
        closed = (
            2.0
            * np.linalg.solve(sol.Psi, sys.B.T @ lti.solve_dlyap(sol.A_cl, sol.P) @ sol.A_cl)
            / nAB
        )
        # Sign-free comparison: the closed form is stated up to overall sign.
        worst = max(
            worst, min(np.linalg.norm(got - closed, 2), np.linalg.norm(got + closed, 2))
        )
    return CheckResult("self-direction derivative formula", worst <= 1e-8, f"gap {worst:.3g}")


def check_fisher_scalar_exact(seed):
    sys = scalar_system(0.5, 1.0)
    for su2 in (0.25, 1.0, 3.0):
        setup = ExplorationSetup(F=np.zeros((1, 1)), sigma_u_sq=su2, N=10, T=10)
        basis = PerturbationBasis(directions=(perturb.input_direction(sys),))
        L = bounds.fisher_direction_bound(sys, setup, basis)
        if L != 8.0 * su2:
            return CheckResult(
                "scalar input-direction information constant",
                False,
                f"L = {L!r} != {8.0 * su2!r}",
            )
    return CheckResult(
        "scalar input-direction information constant", True, "L == 8 sigma_u^2 exactly"
    )


def _fisher_form_direct(sys, setup, w):
    """Evaluate the information bound integrand at one unit direction from
    its definition (separate path from the weight-matrix eigenvalue)."""
    d_x = sys.d_x
    w_A = w[: d_x * d_x]
    w_B = w[d_x * d_x :]
    W_c = bounds.exploration_gramian(sys, setup.F)
    h = bounds.hinf_input_sum(sys, setup.F)
    nu1 = float(w_A @ w_A) + 2.0 * float(w_B @ w_B) * np.linalg.norm(setup.F, 2) ** 2
    nu2 = float(w_B @ w_B)
    lam_min_w = float(np.min(np.linalg.eigvalsh(sys.Sigma_W)))
    total = nu1 * (np.linalg.norm(W_c, 2) + setup.sigma_u_sq * h**2) + 2 * setup.sigma_u_sq * nu2
    return 4.0 / lam_min_w * total


def check_fisher_grid_search(seed):
    rng = np.random.default_rng(seed)
    sys = random_stable_instance(rng, 3, 2)
    setup = ExplorationSetup(F=np.zeros((2, 3)), sigma_u_sq=0.7, N=10, T=10)
    basis = perturb.polderman_basis(lti.lqr_synthesize(sys))
    L = bounds.fisher_direction_bound(sys, setup, basis)
    V = basis.V
    # Random unit directions never beat the reported sup ...
    best = 0.0
    for _ in range(500):
        z = rng.normal(size=basis.k)
        z /= np.linalg.norm(z)
        best = max(best, _fisher_form_direct(sys, setup, V @ z))
    if best > L * (1 + 1e-12):
        return CheckResult("information sup vs grid search", False, f"grid {best} > L {L}")
    # ... and the top eigenvector attains it.
    d_x, d_u = sys.d_x, sys.d_u
    c_A, c_B = bounds._fisher_weights(sys, setup)
    weights = np.concatenate([np.full(d_x * d_x, c_A), np.full(d_x * d_u, c_B)])
    M = V.T @ (weights[:, None] * V)
    lam, U = np.linalg.eigh(0.5 * (M + M.T))
    attained = _fisher_form_direct(sys, setup, V @ U[:, -1])
    gap = abs(attained - L) / L
    return CheckResult(
        "information sup vs grid search", gap <= 1e-9, f"attainment gap {gap:.3g}"
    )


def check_kron_identity(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(5):
        sys = random_stable_instance(rng, int(rng.integers(2, 4)), int(rng.integers(1, 3)))
        sol = lti.lqr_synthesize(sys)
        basis = perturb.polderman_basis(sol)
        for choice in GammaChoice:
            G = bounds.G_numerator(sys, sol, basis, choice)
            Gamma = sys.Sigma_W if choice == GammaChoice.NOISE_FLOOR else 0.5 * sol.Sigma_X
            M = perturb.gain_derivative_matrix(sol, sys, basis)
            G_kron = float(np.trace(np.kron(Gamma, sol.Psi) @ M @ M.T))
            worst = max(worst, abs(G - G_kron) / (1.0 + abs(G)))
    return CheckResult("trace form vs Kronecker form", worst <= 1e-10, f"worst gap {worst:.3g}")


def check_relaxation_chain(seed):
    rng = np.random.default_rng(seed)
    for i in range(10):
        sys = random_stable_instance(rng, int(rng.integers(2, 5)), int(rng.integers(1, 3)))
        sol = lti.lqr_synthesize(sys)
        setup = burned_in_setup(sol, sys.d_x, sys.d_u)
        try:
            bounds.dimensional_bound(sys, setup)
            bounds.system_theoretic_bound(sys, setup)
        except NumericalFailureError as exc:
            return CheckResult("relaxation chains", False, f"instance {i}: {exc}")
    for d_x in range(3, 7):
        setup = ExplorationSetup(F=np.zeros((1, d_x)), sigma_u_sq=1.0, N=10, T=10)
        try:
            bounds.exponential_bound(d_x, 0.5, setup)
        except NumericalFailureError as exc:
            return CheckResult("relaxation chains", False, f"chain d_x={d_x}: {exc}")
    return CheckResult("relaxation chains", True, "all specialized bounds below exact bounds")


def check_jacobian_columns(seed):
    rng = np.random.default_rng(seed)
    sys = random_stable_instance(rng, 3, 2)
    jac = perturb.controller_jacobian(sys)
    worst = 0.0
    for j in rng.choice(sys.d_theta, size=5, replace=False):
        e = np.zeros(sys.d_theta)
        e[j] = 1.0
        d = perturb.PerturbationDirection(
            Delta_A=lti.unvec(e[: sys.d_x**2], sys.d_x, sys.d_x),
            Delta_B=lti.unvec(e[sys.d_x**2 :], sys.d_x, sys.d_u),
        )
        fd = lti.vec(perturb.finite_difference_gain_derivative(sys, d))
        rel = np.linalg.norm(jac[:, j] - fd) / (1e-12 + np.linalg.norm(fd))
        worst = max(worst, rel)
    return CheckResult("Jacobian columns vs finite differences", worst <= 1e-4, f"worst {worst:.3g}")


def check_scalar_db_chain(seed):
    worst = 0.0
    for a, b in ((0.9, 1.0), (0.5, 0.7), (-0.4, 1.3)):
        sys = scalar_system(a, b)
        sol = lti.lqr_synthesize(sys)
        P, K, a_cl = sol.P[0, 0], sol.K[0, 0], sol.A_cl[0, 0]
        dP_db = 2.0 * a_cl * P * K / (1.0 - a_cl**2)
        dK_db = (b**2 * P**2 * a - a * P - b * dP_db * a) / (b**2 * P + 1.0) ** 2
        jac = perturb.controller_jacobian(sys)
        worst = max(worst, abs(jac[0, 1] - dK_db))
    return CheckResult("scalar dK/db chain", worst <= 1e-6, f"worst gap {worst:.3g}")


def check_fisher_ratio_mc(seed):
    sys = scalar_system(0.5, 1.0)
    setup = ExplorationSetup(F=np.zeros((1, 1)), sigma_u_sq=1.0, N=100, T=50)
    basis = PerturbationBasis(directions=(perturb.input_direction(sys),))
    ratio = simulate.empirical_fisher_check(sys, setup, basis, trials=100, seed=seed)
    ok = 0.0 < ratio <= 1.05
    return CheckResult("empirical information ratio", ok, f"ratio {ratio:.4f}")


def check_budget_concentration(seed):
    sys = scalar_system(0.5, 1.0)
    setup = ExplorationSetup(F=np.zeros((1, 1)), sigma_u_sq=1.0, N=200, T=100)
    batch = simulate.rollout_offline(sys, setup, seed)
    energy = simulate.check_budget(batch)
    # chi-square mean 1, variance 2/(NT) => 5 sigma band
    dev = abs(energy - 1.0) / math.sqrt(2.0 / (setup.N * setup.T))
    return CheckResult("exploratory budget concentration", dev <= 5.0, f"{dev:.2f} sigma")


def check_bound_vs_learner(seed):
    sys = scalar_system()
    setup = ExplorationSetup(F=np.zeros((1, 1)), sigma_u_sq=1.0, N=500, T=50)
    basis = PerturbationBasis(directions=(perturb.input_direction(sys),))
    rep = bounds.asymptotic_lower_bound(sys, setup, basis, GammaChoice.NOISE_FLOOR)
    stats = simulate.monte_carlo_excess_cost(sys, setup, trials=60, seed=seed)
    lhs = stats.N_times_mean
    rhs = rep.bound_value - 3.0 * setup.N * stats.stderr
    return CheckResult(
        "learner consistent with lower bound",
        lhs >= rhs,
        f"N*mean {lhs:.4g} vs bound {rep.bound_value:.4g} (- 3 SE)",
    )


def check_figure_curve(seed):
    setup = ExplorationSetup(F=np.zeros((1, 1)), sigma_u_sq=1.0, N=10, T=10)
    pts = bounds.scalar_bound_curve(np.logspace(-3, -2, 9), setup)
    vals = np.array([p.bound_value for p in pts])
    mono = bool(np.all(np.diff(vals) < 0.0))
    span = vals[0] / vals[-1]
    return CheckResult(
        "hardness curve monotonicity", mono and span > 10.0, f"span factor {span:.1f}"
    )


ALL_CHECKS = (
    check_dlyap_series,
    check_dare_scalar_root,
    check_dare_closed_form,
    check_dare_residuals,
    check_gain_derivative_fd,
    check_polderman_invariance,
    check_self_direction_formula,
    check_fisher_scalar_exact,
    check_fisher_grid_search,
    check_kron_identity,
    check_relaxation_chain,
    check_jacobian_columns,
    check_scalar_db_chain,
    check_fisher_ratio_mc,
    check_budget_concentration,
    check_bound_vs_learner,
    check_figure_curve,
)


def run_all(seed=0):
    """Run every oracle check; returns the list of CheckResults."""
    return [check(seed) for check in ALL_CHECKS]
