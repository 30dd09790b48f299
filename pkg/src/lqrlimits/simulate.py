"""Offline data collection and the identify-then-control pipeline.

The experiment model: N independent trajectories of length T from
X_{t+1} = A X_t + B U_t + W_t with X_0 = 0, inputs U_t = F X_t + U~_t, noise
W_t ~ N(0, Sigma_W) and exploratory input U~_t ~ N(0, s I) i.i.d.

Budget conventions for the per-coordinate variance s:

* ``"total"`` (default): s = sigma_u_sq / d_u, so the average exploratory
  energy E|U~|^2 equals sigma_u_sq exactly (the convention the bounds are
  stated in).
* ``"per_coordinate"``: s = sigma_u_sq, giving average energy
  d_u * sigma_u_sq.

The classic pipeline is least-squares identification of [A B] followed by
certainty-equivalent LQR design on the estimate; its excess cost is
evaluated exactly (covariance recursion, no evaluation Monte Carlo).

Randomness comes from counter-based Philox streams; per-trial streams are
derived by mixing the trial index into the seed's spawn key, so runs are
reproducible bit for bit and independent of any parallel schedule.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AllTrialsFailedError,
    DivergenceError,
    ExcitationDeficientError,
    InstabilityError,
    LqrLimitsError,
)
from .bounds import ExplorationSetup
from .lti import (
    STABILITY_MARGIN,
    LqrSolution,
    SystemInstance,
    lqr_synthesize,
    solve_dare,
    spectral_radius,
)

_BUDGET_CONVENTIONS = ("total", "per_coordinate")


@dataclass(frozen=True)
class TrajectoryBatch:
    """Offline data from N experiments of horizon T.

    ``states[n, t]`` is X_{t,n} for t = 0..T-1 (X_{0,n} = 0), ``inputs`` and
    ``exploratory`` the corresponding U and U~. ``next_states[n, t]`` is
    X_{t+1,n}, so every recorded (X_t, U_t) pair has its successor and the
    noise is recoverable as X_{t+1} - A X_t - B U_t.
    """

    states: np.ndarray
    inputs: np.ndarray
    exploratory: np.ndarray
    next_states: np.ndarray
    seed: int

    @property
    def N(self):
        return self.states.shape[0]

    @property
    def T(self):
        return self.states.shape[1]


@dataclass(frozen=True)
class LearnerResult:
    """Outcome of one identify-then-control run. ``stabilized`` refers to
    the true plant under the returned gain; ``estimate_stabilizable`` is
    the certainty-equivalence design flag (False means the gain defaulted
    to zero and the trial counts as failed)."""

    A_hat: np.ndarray
    B_hat: np.ndarray
    K_hat: np.ndarray
    excess_cost: float
    stabilized: bool
    estimate_stabilizable: bool


@dataclass(frozen=True)
class SimulationStats:
    """Aggregate excess-cost statistics over Monte Carlo trials. Failed
    trials (no stabilizing design) are excluded from the mean but counted."""

    mean: float
    stderr: float
    n_trials: int
    n_failed: int
    N: int
    T: int
    seed: int

    @property
    def N_times_mean(self):
        return self.N * self.mean

    def to_json_dict(self):
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "n_trials": self.n_trials,
            "n_failed": self.n_failed,
            "N": self.N,
            "T": self.T,
            "seed": self.seed,
            "N_times_mean": self.N_times_mean,
        }


def _rng_from_seed(seed):
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    else:
        ss = np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.Philox(ss))


def _trial_seed(seed, trial_index):
    return np.random.SeedSequence(entropy=int(seed), spawn_key=(int(trial_index),))


def rollout_offline(
    sys: SystemInstance, setup: ExplorationSetup, seed, budget_convention="total"
) -> TrajectoryBatch:
    """Simulate the N offline experiments of horizon T.

    Per step the stream draws the exploratory input first, then the process
    noise (both vectorized over the N experiments), which pins down the
    realization for a given seed.
    """
    if budget_convention not in _BUDGET_CONVENTIONS:
        raise ValueError(f"budget_convention must be one of {_BUDGET_CONVENTIONS}")
    setup.validate_for(sys)
    d_x, d_u = sys.d_x, sys.d_u
    N, T = setup.N, setup.T
    scale = math.sqrt(
        setup.sigma_u_sq / d_u if budget_convention == "total" else setup.sigma_u_sq
    )
    rng = _rng_from_seed(seed)
    chol_w = np.linalg.cholesky(sys.Sigma_W)

    states = np.empty((N, T, d_x))
    inputs = np.empty((N, T, d_u))
    exploratory = np.empty((N, T, d_u))
    next_states = np.empty((N, T, d_x))

    X = np.zeros((N, d_x))
    for t in range(T):
        states[:, t] = X
        U_tilde = scale * rng.normal(size=(N, d_u))
        U = X @ setup.F.T + U_tilde
        W = rng.normal(size=(N, d_x)) @ chol_w.T
        X = X @ sys.A.T + U @ sys.B.T + W
        inputs[:, t] = U
        exploratory[:, t] = U_tilde
        next_states[:, t] = X
    if not np.all(np.isfinite(next_states)):
        raise DivergenceError("trajectory overflowed to non-finite values")
    seed_int = seed if isinstance(seed, int) else -1
    return TrajectoryBatch(
        states=states,
        inputs=inputs,
        exploratory=exploratory,
        next_states=next_states,
        seed=seed_int,
    )


def check_budget(batch: TrajectoryBatch, setup: ExplorationSetup = None):
    """Realized average exploratory energy (1/NT) sum |U~_{t,n}|^2."""
    total = float(np.sum(batch.exploratory**2))
    return total / (batch.N * batch.T)


def least_squares_sysid(batch: TrajectoryBatch):
    """Ordinary least squares for [A B] from all recorded transitions:
    [A_hat B_hat] = (sum X_+ Z')(sum Z Z')^-1 with Z = [X; U].

    Raises ExcitationDeficientError (reporting the smallest singular value
    of the regressor matrix) when the Gram matrix is numerically singular.
    """
    N, T = batch.N, batch.T
    d_x = batch.states.shape[2]
    d_u = batch.inputs.shape[2]
    Z = np.concatenate([batch.states, batch.inputs], axis=2).reshape(N * T, d_x + d_u)
    Y = batch.next_states.reshape(N * T, d_x)
    gram = Z.T @ Z
    ev = np.linalg.eigvalsh(0.5 * (gram + gram.T))
    smallest_sv = math.sqrt(max(float(ev[0]), 0.0))
    if float(ev[0]) <= 1e-12 * max(1.0, float(ev[-1])):
        raise ExcitationDeficientError(
            f"regressor Gram matrix is singular (smallest singular value "
            f"{smallest_sv:.3g}); the experiment is not exciting enough",
            smallest_singular_value=smallest_sv,
        )
    theta_hat = np.linalg.solve(gram, Z.T @ Y).T
    return theta_hat[:, :d_x], theta_hat[:, d_x:]


def certainty_equivalent_gain(A_hat, B_hat, Q, R):
    """LQR gain designed as if the estimate were exact.

    Returns (K_hat, True) on success; if the estimate does not admit a
    stabilizing Riccati solution the trial is flagged, not fatal:
    (zero gain, False).
    """
    A_hat = np.atleast_2d(np.asarray(A_hat, dtype=float))
    B_hat = np.atleast_2d(np.asarray(B_hat, dtype=float))
    d_x, d_u = B_hat.shape
    try:
        P = solve_dare(A_hat, B_hat, np.asarray(Q, dtype=float), np.asarray(R, dtype=float))
        K_hat = -np.linalg.solve(B_hat.T @ P @ B_hat + np.asarray(R, dtype=float),
                                 B_hat.T @ P @ A_hat)
    except LqrLimitsError:
        return np.zeros((d_u, d_x)), False
    except np.linalg.LinAlgError:
        return np.zeros((d_u, d_x)), False
    if spectral_radius(A_hat + B_hat @ K_hat) >= 1.0 - STABILITY_MARGIN:
        return np.zeros((d_u, d_x)), False
    return K_hat, True


def excess_cost_exact(sys: SystemInstance, K_hat, T: int, sol: LqrSolution = None):
    """Exact T-horizon excess cost of playing U = K_hat X on the true plant:

        (1/T) sum_{t<T} trace((K_hat - K)' Psi (K_hat - K) Sigma_t),
        Sigma_0 = 0,  Sigma_{t+1} = A_hat_cl Sigma_t A_hat_cl' + Sigma_W.

    No Monte Carlo. Zero iff K_hat equals the optimal gain (Sigma_W > 0).
    An unstable K_hat gives a large but finite value for moderate T; on
    floating-point overflow the +inf sentinel is returned.
    """
    if sol is None:
        sol = lqr_synthesize(sys)
    K_hat = np.atleast_2d(np.asarray(K_hat, dtype=float))
    D = K_hat - sol.K
    W = D.T @ sol.Psi @ D
    A_cl_hat = sys.A + sys.B @ K_hat
    Sigma = np.zeros((sys.d_x, sys.d_x))
    total = 0.0
    for _ in range(T):
        total += float(np.sum(W * Sigma))  # trace(W Sigma), both symmetric
        Sigma = A_cl_hat @ Sigma @ A_cl_hat.T + sys.Sigma_W
        if not np.all(np.isfinite(Sigma)):
            return math.inf
    if not math.isfinite(total):
        return math.inf
    return max(total / T, 0.0)


def run_pipeline_once(
    sys: SystemInstance,
    setup: ExplorationSetup,
    seed,
    budget_convention="total",
    sol: LqrSolution = None,
    exact_model=False,
) -> LearnerResult:
    """One pass of the pipeline: roll out, identify, design, evaluate.

    ``exact_model=True`` is a diagnostic mode that skips identification and
    hands the true (A, B) to the control-design stage.
    """
    if sol is None:
        sol = lqr_synthesize(sys)
    batch = rollout_offline(sys, setup, seed, budget_convention)
    if exact_model:
        A_hat, B_hat = sys.A, sys.B
    else:
        A_hat, B_hat = least_squares_sysid(batch)
    K_hat, ok = certainty_equivalent_gain(A_hat, B_hat, sys.Q, sys.R)
    ec = excess_cost_exact(sys, K_hat, setup.T, sol=sol)
    stabilized = spectral_radius(sys.A + sys.B @ K_hat) < 1.0 - STABILITY_MARGIN
    return LearnerResult(
        A_hat=A_hat,
        B_hat=B_hat,
        K_hat=K_hat,
        excess_cost=ec,
        stabilized=stabilized,
        estimate_stabilizable=ok,
    )


def monte_carlo_excess_cost(
    sys: SystemInstance,
    setup: ExplorationSetup,
    trials: int,
    seed: int,
    budget_convention="total",
    exact_model=False,
) -> SimulationStats:
    """Mean and standard error of the pipeline's excess cost over
    independent trials.

    Trials whose estimate admits no stabilizing design (or whose exact cost
    overflows) are excluded from the mean and counted in ``n_failed``.
    Results are reproducible bit for bit for a fixed seed and trial count.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    sol = lqr_synthesize(sys)
    costs = []
    n_failed = 0
    for trial in range(trials):
        try:
            result = run_pipeline_once(
                sys,
                setup,
                _trial_seed(seed, trial),
                budget_convention,
                sol=sol,
                exact_model=exact_model,
            )
        except ExcitationDeficientError:
            n_failed += 1
            continue
        if not result.estimate_stabilizable or not math.isfinite(result.excess_cost):
            n_failed += 1
            continue
        costs.append(result.excess_cost)
    if not costs:
        raise AllTrialsFailedError(
            f"all {trials} trials failed to produce a stabilizing design"
        )
    arr = np.array(costs)
    mean = float(np.mean(arr))
    stderr = float(np.std(arr, ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return SimulationStats(
        mean=mean,
        stderr=stderr,
        n_trials=trials,
        n_failed=n_failed,
        N=setup.N,
        T=setup.T,
        seed=seed,
    )


def empirical_fisher_check(
    sys: SystemInstance,
    setup: ExplorationSetup,
    basis,
    trials: int,
    seed: int,
    budget_convention="total",
):
    """Monte Carlo check of the Fisher information bound in the basis
    directions: returns |V' I_hat V| / (T N L).

    With all plant entries unknown the per-dataset information is
    sum_{n,t} Z Z' kron Sigma_W^-1; I_hat averages it over independent
    datasets. Mathematically the ratio never exceeds one; Monte Carlo noise
    can push it slightly above. A direction with zero information and zero
    bound reports exactly 0.0.
    """
    from .bounds import fisher_direction_bound

    if trials < 1:
        raise ValueError("trials must be >= 1")
    L = fisher_direction_bound(sys, setup, basis)
    d_z = sys.d_x + sys.d_u
    S = np.zeros((d_z, d_z))
    for trial in range(trials):
        batch = rollout_offline(sys, setup, _trial_seed(seed, trial), budget_convention)
        Z = np.concatenate([batch.states, batch.inputs], axis=2).reshape(-1, d_z)
        S += Z.T @ Z
    S /= trials
    I_hat = np.kron(S, np.linalg.inv(sys.Sigma_W))
    V = basis.V
    emp = float(np.linalg.norm(V.T @ I_hat @ V, 2))
    denom = setup.T * setup.N * L
    if denom == 0.0:
        return 0.0 if emp <= 1e-12 else math.inf
    return emp / denom
