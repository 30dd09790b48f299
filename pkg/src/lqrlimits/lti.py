"""LTI system containers and the Riccati / Lyapunov numerical substrate.

Conventions (used throughout the package):

* ``dlyap(A, Q)`` solves ``A'PA - P + Q = 0``, i.e. ``P = sum_t (A^t)' Q A^t``.
* ``dare(A, B, Q, R)`` returns the stabilizing ``P`` of
  ``Q + A'PA - A'PB (B'PB + R)^-1 B'PA - P = 0``.
* The optimal gain is ``K = -(B'PB + R)^-1 B'PA`` and the closed loop is
  ``A_cl = A + BK``; the stationary state covariance under the optimal gain
  is ``Sigma_X = dlyap(A_cl', Sigma_W)``.
* ``vec`` stacks columns (Fortran order), matching the Kronecker identity
  ``vec(XYZ) = (Z' kron X) vec(Y)``.

All functions are pure: no caching, no global state, safe to call from
parallel maps.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InstabilityError, NumericalFailureError

# Reject rho(A) > 1 - STABILITY_MARGIN wherever a rho < 1 precondition
# appears: the tail sums used downstream diverge numerically at the boundary.
STABILITY_MARGIN = 1e-8
SYMMETRY_TOL = 1e-10

_DARE_TOL = 1e-12
_DARE_MAX_ITER = 100_000


def vec(M):
    """Column-stacking vectorization of a matrix."""
    return np.asarray(M).flatten(order="F")


def unvec(v, rows, cols):
    """Inverse of :func:`vec` for a ``rows x cols`` matrix."""
    return np.asarray(v).reshape((rows, cols), order="F")


def _as_matrix(M, name):
    M = np.asarray(M, dtype=float)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim != 2:
        raise ValueError(f"{name} must be a matrix, got ndim={M.ndim}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def _check_symmetric(M, name):
    if M.shape[0] != M.shape[1] or np.linalg.norm(M - M.T, 2) > SYMMETRY_TOL * (
        1.0 + np.linalg.norm(M, 2)
    ):
        raise ValueError(f"{name} must be symmetric within {SYMMETRY_TOL}")
    return 0.5 * (M + M.T)


def spectral_radius(M):
    """Largest eigenvalue modulus of a square matrix."""
    M = _as_matrix(M, "M")
    if M.shape[0] != M.shape[1]:
        raise ValueError("spectral_radius needs a square matrix")
    try:
        ev = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(
            f"eigenvalue iteration failed for a {M.shape[0]}x{M.shape[1]} matrix"
        ) from exc
    return float(np.max(np.abs(ev))) if ev.size else 0.0


def _require_stable(A, what):
    rho = spectral_radius(A)
    if rho >= 1.0 - STABILITY_MARGIN:
        raise InstabilityError(f"{what} has spectral radius {rho:.6g} >= 1 - {STABILITY_MARGIN}")
    return rho


@dataclass(frozen=True)
class SystemInstance:
    """One LQR problem instance: plant (A, B), weights (Q, R) and process
    noise covariance Sigma_W.

    The parameter vector of the instance is ``theta = vec([A B])``; all
    entries of A and B are treated as unknown.
    """

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    Sigma_W: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        if A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        if B.shape[0] != A.shape[0]:
            raise ValueError("B must have the same number of rows as A")
        d_x, d_u = B.shape
        Q = _check_symmetric(_as_matrix(self.Q, "Q"), "Q")
        R = _check_symmetric(_as_matrix(self.R, "R"), "R")
        SW = _check_symmetric(_as_matrix(self.Sigma_W, "Sigma_W"), "Sigma_W")
        if Q.shape[0] != d_x or SW.shape[0] != d_x or R.shape[0] != d_u:
            raise ValueError("Q/Sigma_W must be d_x x d_x and R must be d_u x d_u")
        if np.min(np.linalg.eigvalsh(Q)) < -SYMMETRY_TOL:
            raise ValueError("Q must be positive semidefinite")
        if np.min(np.linalg.eigvalsh(R)) <= 0.0:
            raise ValueError("R must be positive definite")
        if np.min(np.linalg.eigvalsh(SW)) <= 0.0:
            raise ValueError("Sigma_W must be positive definite")
        for name, M in (("A", A), ("B", B), ("Q", Q), ("R", R), ("Sigma_W", SW)):
            M = M.copy()
            M.setflags(write=False)
            object.__setattr__(self, name, M)

    @property
    def d_x(self):
        return self.A.shape[0]

    @property
    def d_u(self):
        return self.B.shape[1]

    @property
    def d_theta(self):
        return self.d_x * self.d_x + self.d_x * self.d_u

    @property
    def theta(self):
        """Parameter vector vec([A B])."""
        return np.concatenate([vec(self.A), vec(self.B)])

    def with_theta(self, theta):
        """New instance with (A, B) replaced by the given parameter vector;
        Q, R, Sigma_W are kept."""
        theta = np.asarray(theta, dtype=float)
        d_x, d_u = self.d_x, self.d_u
        if theta.shape != (self.d_theta,):
            raise ValueError(f"theta must have length {self.d_theta}")
        A = unvec(theta[: d_x * d_x], d_x, d_x)
        B = unvec(theta[d_x * d_x :], d_x, d_u)
        return SystemInstance(A=A, B=B, Q=self.Q, R=self.R, Sigma_W=self.Sigma_W)

    def to_json_dict(self):
        return {
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "Q": self.Q.tolist(),
            "R": self.R.tolist(),
            "Sigma_W": self.Sigma_W.tolist(),
        }

    @classmethod
    def from_json_dict(cls, obj):
        missing = [k for k in ("A", "B", "Q", "R", "Sigma_W") if k not in obj]
        if missing:
            raise ValueError(f"missing keys in system JSON: {missing}")
        return cls(
            A=np.array(obj["A"], dtype=float),
            B=np.array(obj["B"], dtype=float),
            Q=np.array(obj["Q"], dtype=float),
            R=np.array(obj["R"], dtype=float),
            Sigma_W=np.array(obj["Sigma_W"], dtype=float),
        )


@dataclass(frozen=True)
class LqrSolution:
    """Derived optimal-control objects for one instance.

    P solves the DARE, K is the optimal gain, Psi = B'PB + R,
    A_cl = A + BK, Sigma_X = dlyap(A_cl', Sigma_W) and
    optimal_cost = trace(P Sigma_W).
    """

    P: np.ndarray
    K: np.ndarray
    Psi: np.ndarray
    A_cl: np.ndarray
    Sigma_X: np.ndarray
    optimal_cost: float

    def __post_init__(self):
        for name in ("P", "K", "Psi", "A_cl", "Sigma_X"):
            M = np.asarray(getattr(self, name), dtype=float).copy()
            M.setflags(write=False)
            object.__setattr__(self, name, M)


def solve_dlyap(A, Q, tol=1e-10):
    """Solve the discrete Lyapunov equation A'PA - P + Q = 0.

    Requires rho(A) < 1. For d_x <= 12 the Kronecker-vectorized linear
    system (I - A' kron A') vec(P) = vec(Q) is solved exactly; above that a
    Smith doubling iteration is used. The result satisfies
    ``norm(A'PA - P + Q) <= tol * (1 + norm(P))``.
    """
    A = _as_matrix(A, "A")
    Q = _check_symmetric(_as_matrix(Q, "Q"), "Q")
    if A.shape != Q.shape:
        raise ValueError("A and Q must have the same square shape")
    _require_stable(A, "dlyap A")
    n = A.shape[0]
    if n <= 12:
        At = A.T
        lhs = np.eye(n * n) - np.kron(At, At)
        try:
            p = np.linalg.solve(lhs, vec(Q))
        except np.linalg.LinAlgError as exc:
            raise NumericalFailureError("singular Kronecker system in dlyap") from exc
        P = unvec(p, n, n)
    else:
        # Smith doubling: P_{k+1} = P_k + M_k' P_k M_k, M_{k+1} = M_k^2
        # sums the series to length 2^k.
        P = Q.copy()
        M = A.copy()
        for _ in range(200):
            P = P + M.T @ P @ M
            P = 0.5 * (P + P.T)
            M = M @ M
            if np.linalg.norm(M, 2) ** 2 * (1.0 + np.linalg.norm(P, 2)) < 0.25 * tol:
                break
        else:
            raise NumericalFailureError("Smith iteration for dlyap did not converge")
    P = 0.5 * (P + P.T)
    resid = np.linalg.norm(A.T @ P @ A - P + Q, 2)
    if not np.isfinite(resid) or resid > tol * (1.0 + np.linalg.norm(P, 2)):
        raise NumericalFailureError(f"dlyap residual {resid:.3g} exceeds tolerance")
    return P


def solve_dare(A, B, Q, R, tol=_DARE_TOL, max_iter=_DARE_MAX_ITER):
    """Stabilizing solution of the discrete algebraic Riccati equation.

    Structured doubling iteration with residual-based stopping; falls back
    to nothing fancier because the target dimensions are small. Raises
    NumericalFailureError (reporting the last residual) if the residual
    tolerance is not met, and InstabilityError if the implied closed loop
    is not stable.
    """
    A = _as_matrix(A, "A")
    B = _as_matrix(B, "B")
    Q = _check_symmetric(_as_matrix(Q, "Q"), "Q")
    R = _check_symmetric(_as_matrix(R, "R"), "R")
    n = A.shape[0]
    ident = np.eye(n)
    try:
        G = B @ np.linalg.solve(R, B.T)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError("R is singular") from exc
    Ak = A.copy()
    Gk = 0.5 * (G + G.T)
    Hk = Q.copy()
    # Each doubling step squares the implied horizon, so convergence takes
    # O(log) steps; the generous cap only guards pathological inputs.
    for _ in range(min(max_iter, 200)):
        W = ident + Gk @ Hk
        try:
            WinvA = np.linalg.solve(W, Ak)
            WinvG = np.linalg.solve(W, Gk)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailureError("singular pencil in Riccati doubling step") from exc
        Hnext = Hk + WinvA.T @ Hk @ Ak
        Gnext = Gk + Ak @ WinvG @ Ak.T
        Anext = Ak @ WinvA
        Hnext = 0.5 * (Hnext + Hnext.T)
        Gnext = 0.5 * (Gnext + Gnext.T)
        if not np.all(np.isfinite(Hnext)):
            raise NumericalFailureError(
                "Riccati doubling iteration diverged; is (A, B) stabilizable?"
            )
        done = np.linalg.norm(Hnext - Hk, 2) <= tol * (1.0 + np.linalg.norm(Hnext, 2))
        Ak, Gk, Hk = Anext, Gnext, Hnext
        if done:
            break
    P = 0.5 * (Hk + Hk.T)
    resid = _dare_residual(A, B, Q, R, P)
    if not np.isfinite(resid) or resid > 1e-9 * (1.0 + np.linalg.norm(P, 2)):
        raise NumericalFailureError(
            f"DARE iteration stalled with residual {resid:.3g}; "
            "check stabilizability/detectability"
        )
    return P


def _dare_residual(A, B, Q, R, P):
    Psi = B.T @ P @ B + R
    try:
        gain_term = A.T @ P @ B @ np.linalg.solve(Psi, B.T @ P @ A)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError("B'PB + R singular in DARE residual") from exc
    return float(np.linalg.norm(Q + A.T @ P @ A - gain_term - P, 2))


def lqr_synthesize(sys: SystemInstance) -> LqrSolution:
    """Solve the infinite-horizon LQR problem for one instance.

    Returns P, K = -(B'PB+R)^-1 B'PA, Psi = B'PB + R, A_cl = A + BK,
    Sigma_X = dlyap(A_cl', Sigma_W) and the optimal stationary cost
    trace(P Sigma_W). The closed loop is verified to be stable.
    """
    P = solve_dare(sys.A, sys.B, sys.Q, sys.R)
    Psi = sys.B.T @ P @ sys.B + sys.R
    Psi = 0.5 * (Psi + Psi.T)
    try:
        K = -np.linalg.solve(Psi, sys.B.T @ P @ sys.A)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError("Psi = B'PB + R is singular") from exc
    A_cl = sys.A + sys.B @ K
    rho = spectral_radius(A_cl)
    if rho >= 1.0 - STABILITY_MARGIN:
        raise InstabilityError(
            f"optimal closed loop has spectral radius {rho:.6g}; "
            "instance is not stabilizable/detectable enough"
        )
    Sigma_X = solve_dlyap(A_cl.T, sys.Sigma_W)
    return LqrSolution(
        P=P,
        K=K,
        Psi=Psi,
        A_cl=A_cl,
        Sigma_X=Sigma_X,
        optimal_cost=float(np.trace(P @ sys.Sigma_W)),
    )


def tail_sum_J(A_cl, tol=1e-12, max_terms=1_000_000):
    """sum_{t>=0} ||A_cl^t||^2, truncated once a geometric tail bound is
    below ``tol``.

    The tail certificate uses a power m with ||A_cl^m|| <= 1/2, which exists
    for any rho(A_cl) < 1: beyond t, the remaining sum is at most
    ``block * eta^(2 floor(t/m)) / (1 - eta^2)`` with eta = ||A_cl^m|| and
    block = sum of the first m squared norms.
    """
    A_cl = _as_matrix(A_cl, "A_cl")
    _require_stable(A_cl, "A_cl")
    n = A_cl.shape[0]

    # Find m with ||A^m|| <= 1/2 by doubling.
    m = 1
    M = A_cl.copy()
    while np.linalg.norm(M, 2) > 0.5:
        M = M @ M
        m *= 2
        if m > 2**30:
            raise InstabilityError("could not certify decay of A_cl powers")
    eta = float(np.linalg.norm(M, 2))

    total = 0.0
    block = 0.0
    power = np.eye(n)
    t = 0
    while t < max_terms:
        term = float(np.linalg.norm(power, 2)) ** 2
        total += term
        if t < m:
            block += term
        t += 1
        if t % m == 0 and t >= m:
            tail = block * eta ** (2 * (t // m)) / (1.0 - eta**2)
            if tail < tol:
                return total
        power = power @ A_cl
    raise NumericalFailureError("tail_sum_J did not converge within the term cap")


def tau(A_cl, k_cap=10_000):
    """Transient-growth constant
    ``(sup_k ||A_cl^k|| rho^-k)^2 / (1 - rho^2)``.

    The scan runs to ``k_cap``: since ``||A^k|| >= rho(A)^k`` the scanned
    quantity never drops below one, so no geometric certificate can cut the
    scan short. For semisimple dominant eigenvalues the sup is attained
    early and the cap is immaterial; for defective ones the true sup is
    infinite and the capped value is what we report.
    """
    A_cl = _as_matrix(A_cl, "A_cl")
    rho = spectral_radius(A_cl)
    if rho < STABILITY_MARGIN:
        raise DegenerateInputError("tau is undefined for a nilpotent/zero closed loop (rho = 0)")
    if rho >= 1.0 - STABILITY_MARGIN:
        raise InstabilityError(f"tau requires rho(A_cl) < 1, got {rho:.6g}")
    N = A_cl / rho  # spectral radius one; powers stay in floating range
    sup = 1.0
    M = np.eye(A_cl.shape[0])
    for _ in range(k_cap):
        M = M @ N
        sup = max(sup, float(np.linalg.norm(M, 2)))
    return sup**2 / (1.0 - rho**2)
