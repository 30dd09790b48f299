"""Parameter-perturbation directions and derivatives of the LQR gain.

A perturbation of the instance parameters theta = vec([A B]) is written as a
pair (Delta_A, Delta_B) with unit Frobenius norm of the stacked block
[Delta_A Delta_B]. The induced closed-loop perturbation is
Delta_Acl = Delta_A + Delta_B K.

The exact directional derivative of the optimal gain is

    d_v K = -Psi^-1 (Delta_B' P A_cl + B' P Delta_Acl + B' P' A_cl),
    P'    = dlyap(A_cl, A_cl' P Delta_Acl + Delta_Acl' P A_cl),

which collapses to ``-Psi^-1 Delta' P A_cl`` on closed-loop-invariant
directions (Delta_Acl = 0) since P' vanishes there.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, PerturbationTooLargeError, LqrLimitsError
from .lti import LqrSolution, SystemInstance, lqr_synthesize, solve_dlyap, unvec, vec

_UNIT_NORM_TOL = 1e-12
_ORTHONORMAL_TOL = 1e-10


@dataclass(frozen=True)
class PerturbationDirection:
    """A unit-Frobenius-norm direction (Delta_A, Delta_B) in parameter space."""

    Delta_A: np.ndarray
    Delta_B: np.ndarray

    def __post_init__(self):
        dA = np.atleast_2d(np.asarray(self.Delta_A, dtype=float))
        dB = np.atleast_2d(np.asarray(self.Delta_B, dtype=float))
        if dA.shape[0] != dA.shape[1] or dB.shape[0] != dA.shape[0]:
            raise ValueError("Delta_A must be d_x x d_x and Delta_B d_x x d_u")
        nrm = np.sqrt(np.linalg.norm(dA, "fro") ** 2 + np.linalg.norm(dB, "fro") ** 2)
        if abs(nrm - 1.0) > _UNIT_NORM_TOL:
            raise ValueError(f"[Delta_A Delta_B] must have unit Frobenius norm, got {nrm!r}")
        for name, M in (("Delta_A", dA), ("Delta_B", dB)):
            M = M.copy()
            M.setflags(write=False)
            object.__setattr__(self, name, M)

    @classmethod
    def normalized(cls, Delta_A, Delta_B):
        """Scale an arbitrary nonzero (Delta_A, Delta_B) pair to unit norm."""
        dA = np.atleast_2d(np.asarray(Delta_A, dtype=float))
        dB = np.atleast_2d(np.asarray(Delta_B, dtype=float))
        nrm = np.sqrt(np.linalg.norm(dA, "fro") ** 2 + np.linalg.norm(dB, "fro") ** 2)
        if nrm == 0.0:
            raise DegenerateInputError("cannot normalize the zero perturbation")
        return cls(Delta_A=dA / nrm, Delta_B=dB / nrm)

    @property
    def as_vector(self):
        """vec([Delta_A Delta_B]) as a single parameter-space vector."""
        return np.concatenate([vec(self.Delta_A), vec(self.Delta_B)])

    def to_json_dict(self):
        return {"Delta_A": self.Delta_A.tolist(), "Delta_B": self.Delta_B.tolist()}


@dataclass(frozen=True)
class PerturbationBasis:
    """An ordered set of perturbation directions with orthonormal stacked
    vectors (V'V = I)."""

    directions: tuple

    def __post_init__(self):
        dirs = tuple(self.directions)
        if not dirs:
            raise DegenerateInputError("a perturbation basis needs at least one direction")
        V = np.column_stack([d.as_vector for d in dirs])
        gram = V.T @ V
        if np.linalg.norm(gram - np.eye(len(dirs)), 2) > _ORTHONORMAL_TOL:
            raise ValueError("basis columns are not orthonormal within 1e-10")
        object.__setattr__(self, "directions", dirs)

    @property
    def k(self):
        return len(self.directions)

    @property
    def V(self):
        """d_Theta x k matrix whose columns are the stacked directions."""
        return np.column_stack([d.as_vector for d in self.directions])

    def to_json_list(self):
        return [d.to_json_dict() for d in self.directions]

    @classmethod
    def from_json_list(cls, items):
        dirs = [
            PerturbationDirection(
                Delta_A=np.array(it["Delta_A"], dtype=float),
                Delta_B=np.array(it["Delta_B"], dtype=float),
            )
            for it in items
        ]
        return cls(directions=tuple(dirs))

    @classmethod
    def from_matrix(cls, V, d_x, d_u):
        """Build a basis from the columns of a d_Theta x k matrix."""
        V = np.asarray(V, dtype=float)
        dirs = []
        for j in range(V.shape[1]):
            v = V[:, j]
            dirs.append(
                PerturbationDirection(
                    Delta_A=unvec(v[: d_x * d_x], d_x, d_x),
                    Delta_B=unvec(v[d_x * d_x :], d_x, d_u),
                )
            )
        return cls(directions=tuple(dirs))


def gain_derivative_raw(sol: LqrSolution, sys: SystemInstance, Delta_A, Delta_B):
    """Directional derivative of K for an arbitrary (not necessarily unit)
    perturbation; linear in (Delta_A, Delta_B)."""
    Delta_A = np.atleast_2d(np.asarray(Delta_A, dtype=float))
    Delta_B = np.atleast_2d(np.asarray(Delta_B, dtype=float))
    P, K, Psi, A_cl = sol.P, sol.K, sol.Psi, sol.A_cl
    Delta_cl = Delta_A + Delta_B @ K
    cross = A_cl.T @ P @ Delta_cl
    P_prime = solve_dlyap(A_cl, cross + cross.T)
    rhs = Delta_B.T @ P @ A_cl + sys.B.T @ P @ Delta_cl + sys.B.T @ P_prime @ A_cl
    return -np.linalg.solve(Psi, rhs)


def directional_gain_derivative(
    sol: LqrSolution, sys: SystemInstance, direction: PerturbationDirection
):
    """Exact directional derivative d_v K along a unit direction."""
    return gain_derivative_raw(sol, sys, direction.Delta_A, direction.Delta_B)


def finite_difference_gain_derivative(
    sys: SystemInstance, direction: PerturbationDirection, h=None
):
    """Central-difference approximation (K(theta + h v) - K(theta - h v)) / 2h.

    Default step h = 1e-5 * (1 + ||theta||), balancing truncation against
    rounding. Both perturbed instances must remain stabilizable.
    """
    theta = sys.theta
    if h is None:
        h = 1e-5 * (1.0 + float(np.linalg.norm(theta)))
    v = direction.as_vector
    try:
        sol_plus = lqr_synthesize(sys.with_theta(theta + h * v))
        sol_minus = lqr_synthesize(sys.with_theta(theta - h * v))
    except LqrLimitsError as exc:
        raise PerturbationTooLargeError(
            f"perturbed instance not stabilizable at step h={h:.3g}; try a smaller h"
        ) from exc
    return (sol_plus.K - sol_minus.K) / (2.0 * h)


def controller_jacobian(sys: SystemInstance):
    """Jacobian D_theta vec K of the gain with respect to theta = vec([A B]).

    Column j is vec(d_v K) along the j-th canonical parameter direction.
    Multiplying by any orthonormal V reproduces the stacked directional
    derivatives along the columns of V.
    """
    sol = lqr_synthesize(sys)
    d_x, d_u = sys.d_x, sys.d_u
    jac = np.empty((d_x * d_u, sys.d_theta))
    for j in range(sys.d_theta):
        e = np.zeros(sys.d_theta)
        e[j] = 1.0
        dK = gain_derivative_raw(
            sol, sys, unvec(e[: d_x * d_x], d_x, d_x), unvec(e[d_x * d_x :], d_x, d_u)
        )
        jac[:, j] = vec(dK)
    return jac


def gain_derivative_matrix(sol: LqrSolution, sys: SystemInstance, basis: PerturbationBasis):
    """D_theta vec K(theta) V: one vec'd directional derivative per basis column."""
    cols = [vec(directional_gain_derivative(sol, sys, d)) for d in basis.directions]
    return np.column_stack(cols)


def polderman_basis(sol: LqrSolution) -> PerturbationBasis:
    """Orthonormal basis of closed-loop-invariant directions
    vec([-Delta K, Delta]), one per entry of a d_x x d_u parameter Delta.

    Directions with distinct state rows are orthogonal by construction;
    within one row the Gram matrix of r candidates is r2'(I + KK')r1, so the
    eigenvectors u_j of KK' scaled by 1/sqrt(1 + lambda_j) give exact
    orthonormality without Gram-Schmidt drift.
    """
    K = sol.K
    d_u, d_x = K.shape
    lam, U = np.linalg.eigh(K @ K.T)
    dirs = []
    for i in range(d_x):
        e_i = np.zeros((d_x, 1))
        e_i[i, 0] = 1.0
        for j in range(d_u):
            r = (U[:, j] / np.sqrt(1.0 + lam[j])).reshape(1, d_u)
            Delta = e_i @ r
            dirs.append(PerturbationDirection(Delta_A=-Delta @ K, Delta_B=Delta))
    return PerturbationBasis(directions=tuple(dirs))


def self_direction(sys: SystemInstance) -> PerturbationDirection:
    """The direction pointing along the system itself, vec([A B]) normalized."""
    nrm = np.sqrt(np.linalg.norm(sys.A, "fro") ** 2 + np.linalg.norm(sys.B, "fro") ** 2)
    if nrm == 0.0:
        raise DegenerateInputError("self direction undefined for the zero system")
    return PerturbationDirection(Delta_A=sys.A / nrm, Delta_B=sys.B / nrm)


def input_direction(sys: SystemInstance) -> PerturbationDirection:
    """The pure input-matrix direction vec([0, B]) normalized."""
    nrm = np.linalg.norm(sys.B, "fro")
    if nrm == 0.0:
        raise DegenerateInputError("input direction undefined for B = 0")
    return PerturbationDirection(
        Delta_A=np.zeros((sys.d_x, sys.d_x)), Delta_B=sys.B / nrm
    )


def canonical_basis(d_x, d_u) -> PerturbationBasis:
    """All d_Theta canonical parameter directions (identity V)."""
    d_theta = d_x * d_x + d_x * d_u
    dirs = []
    for j in range(d_theta):
        e = np.zeros(d_theta)
        e[j] = 1.0
        dirs.append(
            PerturbationDirection(
                Delta_A=unvec(e[: d_x * d_x], d_x, d_x),
                Delta_B=unvec(e[d_x * d_x :], d_x, d_u),
            )
        )
    return PerturbationBasis(directions=tuple(dirs))
