"""Local-minimax lower bounds on the excess cost of offline LQR learning.

The generic bound has the shape G / (8 N T L):

* L bounds the Fisher information per sample in the chosen perturbation
  directions: with W_c the noise-to-state controllability gramian of the
  exploration loop and h the summed input-to-state impulse norms,

      L = sup_{w in Span(V), |w| <= 1} (4 / lambda_min(Sigma_W)) *
          (nu1(w) (|W_c| + sigma_u^2 h^2) + 2 sigma_u^2 nu2(w)),

  where, with all plant entries unknown, nu1(w) = |w_A|^2 + 2 |w_B|^2 |F|^2
  and nu2(w) = |w_B|^2. Those are quadratic forms with a block-diagonal
  weight, so the sup is an exact largest-eigenvalue computation.

* G is a weighted squared norm of the gain Jacobian restricted to the
  directions: trace((Gamma kron Psi) M M') with M = D_theta vec K * V, and
  Gamma either Sigma_W (always valid) or one half the stationary closed-loop
  covariance (valid after a horizon burn-in).

The finite-sample form replaces center quantities by extrema over a
parameter ball, which this module approximates by sampled boundary points
(reported as such). The specialized closed-form bounds (per-dimension,
integrator-chain, system-theoretic) are relaxations of the generic bound
and are checked against it numerically.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BallTooLargeError,
    DegenerateInputError,
    InstabilityError,
    LqrLimitsError,
    NumericalFailureError,
)
from .lti import (
    STABILITY_MARGIN,
    LqrSolution,
    SystemInstance,
    lqr_synthesize,
    solve_dlyap,
    spectral_radius,
    tail_sum_J,
    tau,
    vec,
)
from .perturb import (
    PerturbationBasis,
    gain_derivative_matrix,
    input_direction,
    polderman_basis,
    self_direction,
)


class GammaChoice(enum.Enum):
    """Which minorant of the evaluation-state covariance enters G."""

    NOISE_FLOOR = "noise_floor"  # Gamma = Sigma_W, valid unconditionally
    STATIONARY_HALF = "stationary_half"  # Gamma = Sigma_X / 2, needs the T burn-in


@dataclass(frozen=True)
class ExplorationSetup:
    """Offline experiment configuration: pre-stabilizing feedback F, average
    exploratory energy sigma_u_sq, number of experiments N, horizon T."""

    F: np.ndarray
    sigma_u_sq: float
    N: int
    T: int

    def __post_init__(self):
        F = np.atleast_2d(np.asarray(self.F, dtype=float))
        if not np.all(np.isfinite(F)):
            raise ValueError("F has non-finite entries")
        if self.sigma_u_sq < 0:
            raise ValueError("sigma_u_sq must be nonnegative")
        if int(self.N) < 1 or int(self.T) < 1:
            raise ValueError("N and T must be positive integers")
        F = F.copy()
        F.setflags(write=False)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "sigma_u_sq", float(self.sigma_u_sq))
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "T", int(self.T))

    def validate_for(self, sys: SystemInstance):
        """Check F has the right shape and stabilizes the paired instance."""
        if self.F.shape != (sys.d_u, sys.d_x):
            raise ValueError(f"F must be {sys.d_u} x {sys.d_x}, got {self.F.shape}")
        rho = spectral_radius(sys.A + sys.B @ self.F)
        if rho >= 1.0 - STABILITY_MARGIN:
            raise InstabilityError(f"exploration loop A + BF has spectral radius {rho:.6g}")


@dataclass(frozen=True)
class BurnInCondition:
    """One burn-in inequality with its threshold, the realized value, and
    whether it holds."""

    threshold: float
    actual: float
    passed: bool

    def to_json_dict(self):
        return {
            "threshold": float(self.threshold),
            "actual": float(self.actual),
            "passed": bool(self.passed),
        }


@dataclass(frozen=True)
class BoundReport:
    """A computed lower bound together with its constituents.

    ``bound_value`` is None when a required burn-in condition fails (the
    bound is then withheld rather than silently reported). ``constants``
    carries the event constant alpha and the perturbation constants
    (c1, c2, Phi, tau, J_cl) evaluated at the center instance; entries are
    NaN when degenerate (e.g. tau for a nilpotent closed loop).
    """

    form: str
    bound_value: float | None
    G: float
    L: float
    gamma_choice: GammaChoice | None
    N: int | None
    T: int
    burn_in: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    @property
    def burn_in_ok(self):
        return all(c.passed for c in self.burn_in.values())

    def to_json_dict(self):
        return {
            "form": self.form,
            "bound_value": None if self.bound_value is None else float(self.bound_value),
            "G": float(self.G),
            "L": float(self.L),
            "gamma_choice": self.gamma_choice.value if self.gamma_choice else None,
            "N": self.N,
            "T": self.T,
            "burn_in": {k: v.to_json_dict() for k, v in self.burn_in.items()},
            "constants": {k: float(v) for k, v in self.constants.items()},
            **self.extras,
        }


def exploration_gramian(sys: SystemInstance, F):
    """Noise-to-state controllability gramian of the exploration loop:
    dlyap((A + BF)', Sigma_W) = sum_t (A+BF)^t Sigma_W ((A+BF)^t)'."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    A_F = sys.A + sys.B @ F
    return solve_dlyap(A_F.T, sys.Sigma_W)


def hinf_input_sum(sys: SystemInstance, F, tol=1e-10, max_terms=1_000_000):
    """sum_t ||(A + BF)^t B||, truncated once a geometric tail bound is
    below ``tol``. Upper-bounds the input-to-state H-infinity norm of the
    exploration loop."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    A_F = sys.A + sys.B @ F
    rho = spectral_radius(A_F)
    if rho >= 1.0 - STABILITY_MARGIN:
        raise InstabilityError(f"A + BF has spectral radius {rho:.6g}")

    # m with ||A_F^m|| <= 1/2 certifies a geometric tail, as in tail_sum_J.
    m = 1
    M = A_F.copy()
    while np.linalg.norm(M, 2) > 0.5:
        M = M @ M
        m *= 2
        if m > 2**30:
            raise InstabilityError("could not certify decay of (A + BF) powers")
    eta = float(np.linalg.norm(M, 2))

    total = 0.0
    block = 0.0
    power = np.eye(sys.d_x)
    t = 0
    while t < max_terms:
        term = float(np.linalg.norm(power @ sys.B, 2))
        total += term
        if t < m:
            block += term
        t += 1
        if t % m == 0:
            tail = block * eta ** (t // m) / (1.0 - eta)
            if tail < tol:
                return total
        power = power @ A_F
    raise NumericalFailureError("hinf_input_sum did not converge within the term cap")


def _fisher_weights(sys: SystemInstance, setup: ExplorationSetup):
    """Quadratic-form weights (c_A, c_B) of the Fisher direction bound."""
    W_c = exploration_gramian(sys, setup.F)
    h = hinf_input_sum(sys, setup.F)
    c_A = float(np.linalg.norm(W_c, 2)) + setup.sigma_u_sq * h**2
    c_B = 2.0 * float(np.linalg.norm(setup.F, 2)) ** 2 * c_A + 2.0 * setup.sigma_u_sq
    return c_A, c_B


def fisher_direction_bound(sys: SystemInstance, setup: ExplorationSetup, basis: PerturbationBasis):
    """Upper bound L on the per-sample Fisher information restricted to the
    span of the basis.

    The sup over unit directions in Span(V) is the largest eigenvalue of
    V' D V with D = diag(c_A I, c_B I), c_A = |W_c| + sigma_u^2 h^2 and
    c_B = 2 |F|^2 c_A + 2 sigma_u^2; exact, no iterative maximization.
    """
    if basis.k == 0:
        raise DegenerateInputError("empty perturbation basis")
    setup.validate_for(sys)
    c_A, c_B = _fisher_weights(sys, setup)
    d_x, d_u = sys.d_x, sys.d_u
    weights = np.concatenate([np.full(d_x * d_x, c_A), np.full(d_x * d_u, c_B)])
    V = basis.V
    M = V.T @ (weights[:, None] * V)
    lam_max = float(np.max(np.linalg.eigvalsh(0.5 * (M + M.T))))
    lam_min_w = float(np.min(np.linalg.eigvalsh(sys.Sigma_W)))
    return 4.0 / lam_min_w * lam_max


def _pair_trace(Psi, Gamma, dKs_i, dKs_j):
    """trace((Gamma kron Psi) M_i M_j') computed column-wise as
    sum_c trace(X_c' Psi Y_c Gamma)."""
    return float(
        sum(np.trace(X.T @ Psi @ Y @ Gamma) for X, Y in zip(dKs_i, dKs_j))
    )


def _gamma_matrix(sys: SystemInstance, sol: LqrSolution, gamma_choice: GammaChoice):
    if gamma_choice == GammaChoice.NOISE_FLOOR:
        return sys.Sigma_W
    return 0.5 * sol.Sigma_X


def G_numerator(
    sys: SystemInstance, sol: LqrSolution, basis: PerturbationBasis, gamma_choice: GammaChoice
):
    """trace((Gamma kron Psi) (DvecK V)(DvecK V)') via the per-column trace
    form sum_v trace(Psi d_vK Gamma d_vK')."""
    dKs = [
        np.asarray(col) for col in _directional_derivatives(sys, sol, basis)
    ]
    Gamma = _gamma_matrix(sys, sol, gamma_choice)
    return _pair_trace(sol.Psi, Gamma, dKs, dKs)


def _directional_derivatives(sys, sol, basis):
    from .perturb import directional_gain_derivative

    return [directional_gain_derivative(sol, sys, d) for d in basis.directions]


def alpha_event_constant(sys: SystemInstance, sol: LqrSolution = None):
    """Event constant controlling when the learned gain is provably close to
    the optimal one:

        alpha = min( |A_cl| / |B|,
                     (lambda_min(Sigma_X) / 24) / (|A_cl| |B| J(A_cl) |Sigma_X|) ).

    Returns 0.0 (degenerate: the bound's second case becomes vacuous) when
    A_cl = 0.
    """
    if sol is None:
        sol = lqr_synthesize(sys)
    nB = float(np.linalg.norm(sys.B, 2))
    if nB == 0.0:
        raise DegenerateInputError("alpha undefined for B = 0")
    nAcl = float(np.linalg.norm(sol.A_cl, 2))
    if nAcl < 1e-300:
        return 0.0
    lam_min_sx = float(np.min(np.linalg.eigvalsh(sol.Sigma_X)))
    n_sx = float(np.linalg.norm(sol.Sigma_X, 2))
    J = tail_sum_J(sol.A_cl)
    return min(nAcl / nB, (lam_min_sx / 24.0) / (nAcl * nB * J * n_sx))


def _perturbation_constants(sys: SystemInstance, sol: LqrSolution):
    """alpha, c1 = 84 Phi^9 tau(A_cl), c2, Phi, tau, J_cl at one instance.
    Degenerate entries (nilpotent closed loop) come back NaN."""
    nan = float("nan")
    consts = {"alpha": nan, "c1": nan, "c2": nan, "Phi": nan, "tau": nan, "J_cl": nan}
    consts["J_cl"] = tail_sum_J(sol.A_cl)
    try:
        consts["alpha"] = alpha_event_constant(sys, sol)
    except DegenerateInputError:
        pass
    Phi = 1.0 + max(
        float(np.linalg.norm(sys.A, 2)),
        float(np.linalg.norm(sys.B, 2)),
        float(np.linalg.norm(sol.P, 2)),
        float(np.linalg.norm(sol.K, 2)),
        float(np.linalg.norm(np.linalg.inv(sys.R), 2)),
    )
    consts["Phi"] = Phi
    try:
        tau_cl = tau(sol.A_cl)
    except DegenerateInputError:
        return consts
    c1 = 84.0 * Phi**9 * tau_cl
    c2 = (
        1.0
        / (10.0 * tau_cl * c1)
        * min(
            (1.0 + float(np.linalg.norm(sol.A_cl, 2))) ** -2,
            (1.0 + float(np.linalg.norm(sol.P, 2))) ** -1,
        )
    )
    consts.update({"tau": tau_cl, "c1": c1, "c2": c2})
    return consts


def _t_burn_in_threshold(Sigma_X):
    """16 |Sigma_X|^2 / lambda_min(Sigma_X), the horizon burn-in for the
    stationary-covariance minorant."""
    return 16.0 * float(np.linalg.norm(Sigma_X, 2)) ** 2 / float(
        np.min(np.linalg.eigvalsh(Sigma_X))
    )


def _ratio(G, denom):
    """G / denom with the 0/0 convention 0 (vacuous bound) and inf for a
    zero-information direction with nonzero numerator."""
    if denom > 0.0:
        return G / denom
    return 0.0 if G <= 0.0 else math.inf


def asymptotic_lower_bound(
    sys: SystemInstance,
    setup: ExplorationSetup,
    basis: PerturbationBasis,
    gamma_choice: GammaChoice,
) -> BoundReport:
    """Large-N lower bound on N times the excess cost: G / (8 T L) at the
    center instance.

    With gamma_choice = STATIONARY_HALF the bound requires the horizon
    burn-in T >= 16 |Sigma_X|^2 / lambda_min(Sigma_X); on failure the report
    is flagged and bound_value is withheld (None), never silently computed.
    """
    setup.validate_for(sys)
    sol = lqr_synthesize(sys)
    L = fisher_direction_bound(sys, setup, basis)
    G = G_numerator(sys, sol, basis, gamma_choice)
    burn_in = {}
    withheld = False
    if gamma_choice == GammaChoice.STATIONARY_HALF:
        thr = _t_burn_in_threshold(sol.Sigma_X)
        ok = setup.T >= thr
        burn_in["T_min"] = BurnInCondition(threshold=thr, actual=float(setup.T), passed=ok)
        withheld = not ok
    bound = None if withheld else _ratio(G, 8.0 * setup.T * L)
    return BoundReport(
        form="asymptotic",
        bound_value=bound,
        G=G,
        L=L,
        gamma_choice=gamma_choice,
        N=None,
        T=setup.T,
        burn_in=burn_in,
        constants=_perturbation_constants(sys, sol),
        extras={"basis_size": basis.k},
    )


def _scaled_minorant_factor(M_center_inv_sqrt, M_sample):
    """lambda_min of the center-whitened sample matrix; scaling the center
    matrix by the minimum over samples gives a sampled Loewner minorant."""
    W = M_center_inv_sqrt @ M_sample @ M_center_inv_sqrt
    return float(np.min(np.linalg.eigvalsh(0.5 * (W + W.T))))


def _inv_sqrt(M):
    lam, U = np.linalg.eigh(M)
    if np.min(lam) <= 0:
        raise NumericalFailureError("matrix not positive definite in minorant computation")
    return (U / np.sqrt(lam)) @ U.T


def finite_sample_bound(
    sys: SystemInstance,
    setup: ExplorationSetup,
    basis: PerturbationBasis,
    epsilon: float,
    J_lambda_norm: float,
    gamma_choice: GammaChoice,
    ball_samples: int = 64,
    seed: int = 0,
) -> BoundReport:
    """Non-asymptotic lower bound G / (8 N T L_bar) on the epsilon-local
    minimax excess cost.

    Ball extrema (L_bar, the Psi and Sigma_X minorants, the pairwise-inf G,
    alpha) are approximated by the center plus ``ball_samples`` uniformly
    random boundary points drawn from a seeded counter-based stream; the
    report carries a sampled-extremum caveat. J_lambda_norm is the caller's
    prior concentration |J(lambda)| (see :func:`prior_fisher_norm`).
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    if ball_samples < 0:
        raise ValueError("ball_samples must be nonnegative")
    setup.validate_for(sys)
    sol_c = lqr_synthesize(sys)
    theta_c = sys.theta

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    thetas = [theta_c]
    for _ in range(ball_samples):
        u = rng.normal(size=sys.d_theta)
        nrm = float(np.linalg.norm(u))
        while nrm == 0.0:  # astronomically unlikely; keeps the map total
            u = rng.normal(size=sys.d_theta)
            nrm = float(np.linalg.norm(u))
        thetas.append(theta_c + epsilon * u / nrm)

    psi_c_inv_sqrt = _inv_sqrt(sol_c.Psi)
    sx_half_c = 0.5 * sol_c.Sigma_X
    sx_c_inv_sqrt = _inv_sqrt(sx_half_c)

    L_bar = -math.inf
    psi_scale = 1.0
    sx_scale = 1.0
    alpha = math.inf
    t_thr = 0.0
    deriv_sets = []
    for idx, theta in enumerate(thetas):
        try:
            sys_i = sys.with_theta(theta)
            setup.validate_for(sys_i)
            sol_i = lqr_synthesize(sys_i)
        except LqrLimitsError as exc:
            raise BallTooLargeError(
                f"ball sample {idx} (epsilon={epsilon:.3g}) is not stabilizable "
                f"under F: {exc}"
            ) from exc
        L_bar = max(L_bar, fisher_direction_bound(sys_i, setup, basis))
        deriv_sets.append(_directional_derivatives(sys_i, sol_i, basis))
        psi_scale = min(psi_scale, _scaled_minorant_factor(psi_c_inv_sqrt, sol_i.Psi))
        sx_scale = min(sx_scale, _scaled_minorant_factor(sx_c_inv_sqrt, 0.5 * sol_i.Sigma_X))
        try:
            alpha = min(alpha, alpha_event_constant(sys_i, sol_i))
        except DegenerateInputError:
            alpha = 0.0
        t_thr = max(t_thr, _t_burn_in_threshold(sol_i.Sigma_X))

    Psi_floor = max(psi_scale, 0.0) * sol_c.Psi
    if gamma_choice == GammaChoice.NOISE_FLOOR:
        Gamma = sys.Sigma_W
    else:
        Gamma = max(sx_scale, 0.0) * sx_half_c

    G = math.inf
    for i in range(len(deriv_sets)):
        for j in range(i, len(deriv_sets)):
            G = min(G, _pair_trace(Psi_floor, Gamma, deriv_sets[i], deriv_sets[j]))

    consts = _perturbation_constants(sys, sol_c)
    consts["alpha"] = alpha

    NT = float(setup.N) * float(setup.T)
    burn_in = {}
    if gamma_choice == GammaChoice.NOISE_FLOOR:
        thr = _ratio(J_lambda_norm, L_bar) if J_lambda_norm > 0 else 0.0
        burn_in["TN_min_prior"] = BurnInCondition(threshold=thr, actual=NT, passed=NT >= thr)
    else:
        burn_in["T_min"] = BurnInCondition(
            threshold=t_thr, actual=float(setup.T), passed=setup.T >= t_thr
        )
        est = _ratio(
            G,
            float(np.min(np.linalg.eigvalsh(sys.Sigma_W)))
            * float(np.min(np.linalg.eigvalsh(sys.R)))
            * alpha**2,
        )
        thr = _ratio(max(J_lambda_norm, est), L_bar)
        burn_in["TN_min_prior"] = BurnInCondition(threshold=thr, actual=NT, passed=NT >= thr)
        eps_thr = min(alpha / (2.0 * consts["c1"]), consts["c2"])
        if math.isnan(eps_thr):
            eps_thr = 0.0
        burn_in["epsilon_max"] = BurnInCondition(
            threshold=eps_thr, actual=epsilon, passed=epsilon <= eps_thr
        )

    withheld = not all(c.passed for c in burn_in.values())
    extras = {
        "basis_size": basis.k,
        "ball_samples": ball_samples,
        "seed": seed,
        "epsilon": epsilon,
        "J_lambda_norm": J_lambda_norm,
        "sampled_extremum": True,
        "psi_minorant_scale": psi_scale,
        "gamma_minorant_scale": sx_scale if gamma_choice == GammaChoice.STATIONARY_HALF else 1.0,
    }
    if withheld:
        bound = None
    else:
        bound = _ratio(G, 8.0 * setup.N * setup.T * L_bar)
        if bound < 0.0:
            # Sampled pairwise infimum went negative: the bound is vacuous.
            extras["vacuous"] = True
            bound = 0.0
    return BoundReport(
        form="finite_sample",
        bound_value=bound,
        G=G,
        L=L_bar,
        gamma_choice=gamma_choice,
        N=setup.N,
        T=setup.T,
        burn_in=burn_in,
        constants=consts,
        extras=extras,
    )


def prior_fisher_norm(prior_constant: float, epsilon: float):
    """|J(lambda)| = c / epsilon^2 for a prior obtained by shrinking a fixed
    smooth unit-ball density (with concentration constant c) to an
    epsilon-ball."""
    if prior_constant < 0:
        raise ValueError("prior_constant must be nonnegative")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return prior_constant / epsilon**2


def _L_tilde(sys: SystemInstance, setup: ExplorationSetup):
    """Direction-free Fisher bound: nu1 replaced by 1 and nu2 by
    1 + 2 |F|^2."""
    c_A, _ = _fisher_weights(sys, setup)
    nF2 = float(np.linalg.norm(setup.F, 2)) ** 2
    lam_min_w = float(np.min(np.linalg.eigvalsh(sys.Sigma_W)))
    return 4.0 / lam_min_w * (c_A + 2.0 * setup.sigma_u_sq * (1.0 + 2.0 * nF2))


def _lambda_min_psd_gap(Sigma_X, Sigma_W):
    """lambda_min(Sigma_X - Sigma_W), clamped at zero (the gap is PSD in
    exact arithmetic)."""
    return max(0.0, float(np.min(np.linalg.eigvalsh(Sigma_X - Sigma_W))))


def _check_relaxation(closed_value, exact_report, what):
    exact = exact_report.bound_value
    if exact is None:
        return None
    if closed_value > exact * (1.0 + 1e-9) + 1e-300:
        raise NumericalFailureError(
            f"{what} closed form {closed_value:.6g} exceeds the exact bound "
            f"{exact:.6g}; the relaxation chain is violated"
        )
    return exact


def dimensional_bound(sys: SystemInstance, setup: ExplorationSetup) -> BoundReport:
    """Closed-form bound exhibiting the d_x * d_u dimension dependence,
    obtained by relaxing the closed-loop-invariant-basis bound:

        d_x d_u lambda_min(Sigma_X - Sigma_W) lambda_min(P)^2
        / (16 T |Psi| |[-K I]|^2 L_tilde).

    Flags the horizon burn-in; when it holds, verifies the value does not
    exceed the exact basis bound with Gamma = Sigma_X / 2.
    """
    setup.validate_for(sys)
    sol = lqr_synthesize(sys)
    L_til = _L_tilde(sys, setup)
    KI = np.concatenate([-sol.K, np.eye(sys.d_u)], axis=1)
    G_dim = (
        sys.d_x
        * sys.d_u
        * _lambda_min_psd_gap(sol.Sigma_X, sys.Sigma_W)
        * float(np.min(np.linalg.eigvalsh(sol.P))) ** 2
        / (2.0 * float(np.linalg.norm(sol.Psi, 2)) * float(np.linalg.norm(KI, 2)) ** 2)
    )
    value = _ratio(G_dim, 8.0 * setup.T * L_til)
    thr = _t_burn_in_threshold(sol.Sigma_X)
    ok = setup.T >= thr
    burn_in = {"T_min": BurnInCondition(threshold=thr, actual=float(setup.T), passed=ok)}
    extras = {}
    if ok:
        exact = _check_relaxation(
            value,
            asymptotic_lower_bound(sys, setup, polderman_basis(sol), GammaChoice.STATIONARY_HALF),
            "dimensional bound",
        )
        extras["exact_bound_value"] = exact
    return BoundReport(
        form="dimensional",
        bound_value=value,
        G=G_dim,
        L=L_til,
        gamma_choice=GammaChoice.STATIONARY_HALF,
        N=None,
        T=setup.T,
        burn_in=burn_in,
        constants=_perturbation_constants(sys, sol),
        extras=extras,
    )


def exponential_instance(d_x: int, rho: float) -> SystemInstance:
    """Integrator-chain family: bidiagonal A with rho on the diagonal and 2
    on the superdiagonal, B the last canonical basis vector, Q = I, R = 1,
    Sigma_W = I."""
    if int(d_x) != d_x or d_x < 2:
        raise ValueError("d_x must be an integer >= 2")
    if not (0.0 < rho < 1.0):
        raise ValueError("rho must lie in (0, 1)")
    d_x = int(d_x)
    A = rho * np.eye(d_x) + 2.0 * np.diag(np.ones(d_x - 1), 1)
    B = np.zeros((d_x, 1))
    B[-1, 0] = 1.0
    return SystemInstance(A=A, B=B, Q=np.eye(d_x), R=np.eye(1), Sigma_W=np.eye(d_x))


def exponential_bound(d_x: int, rho: float, setup: ExplorationSetup) -> BoundReport:
    """Closed-form bound rho^2 4^(d_x - 2) / (256 T sigma_u^2) for the
    integrator-chain family, plus the exact input-direction bound it
    relaxes (Gamma = Sigma_W); requires d_x >= 3 and F = 0."""
    if d_x < 3:
        raise ValueError("the exponential bound requires d_x >= 3")
    sys = exponential_instance(d_x, rho)
    if setup.F.shape != (1, d_x) or np.any(setup.F != 0.0):
        raise ValueError("the exponential bound is stated for F = 0 (shape 1 x d_x)")
    if setup.sigma_u_sq <= 0:
        raise ValueError("sigma_u_sq must be positive for the exponential bound")
    closed = rho**2 * 4.0 ** (d_x - 2) / (256.0 * setup.T * setup.sigma_u_sq)
    basis = PerturbationBasis(directions=(input_direction(sys),))
    exact_report = asymptotic_lower_bound(sys, setup, basis, GammaChoice.NOISE_FLOOR)
    exact = _check_relaxation(closed, exact_report, "exponential bound")
    return BoundReport(
        form="exponential",
        bound_value=closed,
        G=rho**2 * 4.0 ** (d_x - 2) / 4.0,
        L=8.0 * setup.sigma_u_sq,
        gamma_choice=GammaChoice.NOISE_FLOOR,
        N=None,
        T=setup.T,
        burn_in={},
        constants=exact_report.constants,
        extras={
            "d_x": d_x,
            "rho": rho,
            "exact_bound_value": exact,
            "exact_G": exact_report.G,
            "exact_L": exact_report.L,
        },
    )


def _simultaneous_diagonal(BPB, R, tol=1e-8):
    """Joint eigenbasis of two commuting symmetric matrices; returns the
    eigenvalues of BPB (non-ascending) paired with the matching diagonal of
    R. Within repeated eigenspaces of BPB the basis is rotated to
    diagonalize R as well."""
    comm = R @ BPB - BPB @ R
    if np.linalg.norm(comm, 2) > tol:
        raise ValueError(
            "R and B'PB do not commute (norm of commutator "
            f"{np.linalg.norm(comm, 2):.3g} > {tol}); the system-theoretic "
            "bound requires simultaneous diagonalizability, e.g. R = r I"
        )
    lam, U = np.linalg.eigh(BPB)
    # Group near-equal eigenvalues and re-diagonalize R inside each group.
    scale = max(1.0, float(np.max(np.abs(lam))))
    groups = []
    start = 0
    for i in range(1, len(lam) + 1):
        if i == len(lam) or lam[i] - lam[start] > 1e-10 * scale:
            groups.append((start, i))
            start = i
    r_diag = np.empty_like(lam)
    for a, b in groups:
        block = U[:, a:b].T @ R @ U[:, a:b]
        mu, W = np.linalg.eigh(0.5 * (block + block.T))
        U[:, a:b] = U[:, a:b] @ W
        r_diag[a:b] = mu
    order = np.argsort(-lam)
    return lam[order], r_diag[order]


def system_theoretic_bound(sys: SystemInstance, setup: ExplorationSetup) -> BoundReport:
    """Closed-form bound along the self direction in terms of interpretable
    quantities:

        lambda_min(Sigma_X - Sigma_W) / (2 T |[A B]|_F^2 L_tilde)
        * inf_i lambda_i(B'PB) / (lambda_i(B'PB) + Lambda_R_ii)
        * sum of the d_u smallest eigenvalues of dlyap(A_cl, P).

    Requires R and B'PB simultaneously diagonalizable (satisfied by
    R = r I). Flags the horizon burn-in; when it holds, verifies the value
    against the exact self-direction bound with Gamma = Sigma_X / 2.
    """
    setup.validate_for(sys)
    sol = lqr_synthesize(sys)
    BPB = sys.B.T @ sol.P @ sys.B
    lam_bpb, lam_r = _simultaneous_diagonal(0.5 * (BPB + BPB.T), sys.R)
    inf_i = float(np.min(lam_bpb / (lam_bpb + lam_r)))
    dl = solve_dlyap(sol.A_cl, sol.P)
    ev = np.linalg.eigvalsh(dl)  # ascending
    smallest_sum = float(np.sum(ev[: sys.d_u]))
    nAB2 = float(
        np.linalg.norm(sys.A, "fro") ** 2 + np.linalg.norm(sys.B, "fro") ** 2
    )
    L_til = _L_tilde(sys, setup)
    gap = _lambda_min_psd_gap(sol.Sigma_X, sys.Sigma_W)
    G_st = _ratio(4.0 * gap * inf_i * smallest_sum, nAB2)
    value = _ratio(G_st, 8.0 * setup.T * L_til)
    thr = _t_burn_in_threshold(sol.Sigma_X)
    ok = setup.T >= thr
    burn_in = {"T_min": BurnInCondition(threshold=thr, actual=float(setup.T), passed=ok)}
    extras = {}
    if ok:
        basis = PerturbationBasis(directions=(self_direction(sys),))
        exact = _check_relaxation(
            value,
            asymptotic_lower_bound(sys, setup, basis, GammaChoice.STATIONARY_HALF),
            "system-theoretic bound",
        )
        extras["exact_bound_value"] = exact
    return BoundReport(
        form="system_theoretic",
        bound_value=value,
        G=G_st,
        L=L_til,
        gamma_choice=GammaChoice.STATIONARY_HALF,
        N=None,
        T=setup.T,
        burn_in=burn_in,
        constants=_perturbation_constants(sys, sol),
        extras=extras,
    )


def scalar_instance(gamma: float) -> SystemInstance:
    """Hard-to-control scalar family a = 1 - gamma, b = gamma with
    Q = R = Sigma_W = 1."""
    if not (0.0 < gamma < 1.0):
        raise ValueError("gamma must lie in (0, 1)")
    return SystemInstance(
        A=np.array([[1.0 - gamma]]),
        B=np.array([[gamma]]),
        Q=np.eye(1),
        R=np.eye(1),
        Sigma_W=np.eye(1),
    )


@dataclass(frozen=True)
class ScalarCurvePoint:
    """One point of the scalar hardness curve, with both normalizations of
    the per-direction bound (they differ by the unreconciled factor of two
    between the generic 1/(8 L) = 1/64 form and the 1/32 form)."""

    gamma: float
    bound_value: float
    P: float
    K: float
    dK_db: float
    alt_bound_value: float


def scalar_bound_curve(gamma_list, setup: ExplorationSetup):
    """Evaluate the input-direction asymptotic bound for the scalar family
    a = 1 - gamma, b = gamma (F = 0, sigma_u^2 = Sigma_W = Q = R = 1).

    Returns one ScalarCurvePoint per gamma; values increase as gamma
    decreases toward marginal stability.
    """
    from .perturb import controller_jacobian

    points = []
    for gamma in gamma_list:
        sys = scalar_instance(float(gamma))
        setup_g = ExplorationSetup(
            F=np.zeros((1, 1)), sigma_u_sq=1.0, N=setup.N, T=setup.T
        )
        basis = PerturbationBasis(directions=(input_direction(sys),))
        rep = asymptotic_lower_bound(sys, setup_g, basis, GammaChoice.NOISE_FLOOR)
        sol = lqr_synthesize(sys)
        dK_db = float(controller_jacobian(sys)[0, 1])
        P = float(sol.P[0, 0])
        b = float(gamma)
        alt = (b * b * P + 1.0) / (32.0 * setup.T) * dK_db**2
        points.append(
            ScalarCurvePoint(
                gamma=float(gamma),
                bound_value=rep.bound_value,
                P=P,
                K=float(sol.K[0, 0]),
                dK_db=dK_db,
                alt_bound_value=alt,
            )
        )
    return points
