"""Continuous-time algebraic Riccati and Lyapunov machinery.

The CARE ``A'K + KA - K B Qu^{-1} B' K + Qx = 0`` is solved by
Newton--Kleinman iteration, so everything reduces to the dense Lyapunov
solver below.  The module also provides the sensitivities of ``K`` with
respect to the drift matrices and the cost of running an arbitrary
stabilizing feedback.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._linalg import as_square, require_stable, solve_lyapunov_kron, spectral_abscissa
from .errors import ConditionError, ShapeError, SolverError, StabilityError
from .sde_sim import CostSpec, DriftParams

__all__ = [
    "CostSpec", "RiccatiSolution", "solve_care", "solve_lyapunov",
    "stability_margin", "eig_perturbation_bound", "largest_real_part_shift",
    "riccati_directional_derivative", "feedback_directional_derivative",
    "cost_of_feedback", "optimal_gain", "initial_stabilizer",
]

MAX_ITER = 100
RESIDUAL_TOL = 1e-8
STEP_TOL = 1e-10


@dataclass(frozen=True)
class RiccatiSolution:
    K: np.ndarray
    gain: np.ndarray
    closed_loop: np.ndarray
    residual: float
    margin: float
    iterations: int


def solve_lyapunov(D, Q):
    """Solve ``D' P + P D + Q = 0`` for a Hurwitz ``D``.

    Raises
    ------
    StabilityError
        If some eigenvalue of ``D`` has a non-negative real part.
    """
    return solve_lyapunov_kron(D, Q)


def stability_margin(D):
    """Distance of the spectrum of ``D`` from the imaginary axis (negative if unstable)."""
    return -spectral_abscissa(D)


def care_residual(drift, cost, K):
    A, B = drift.A, drift.B
    BK = B.T @ K
    R = A.T @ K + K @ A - BK.T @ np.linalg.solve(cost.Qu, BK) + cost.Qx
    return float(np.linalg.norm(R, "fro"))


def optimal_gain(drift, cost, K):
    """Feedback ``-Qu^{-1} B' K``."""
    return -np.linalg.solve(cost.Qu, drift.B.T @ K)


def _check_dims(drift, cost):
    if cost.Qx.shape[0] != drift.p or cost.Qu.shape[0] != drift.q:
        raise ShapeError("cost weights do not match drift dimensions")


def initial_stabilizer(drift, cost):
    """A stabilizing gain for ``(A, B)`` by eigenvalue shifting.

    Zero if ``A`` is already Hurwitz.  Otherwise shift by ``beta`` so that
    ``-(A + beta I)`` is Hurwitz, solve
    ``(A + beta I) P + P (A + beta I)' = 2 B Qu^{-1} B'`` and return
    ``-Qu^{-1} B' P^{-1}``; the closed loop then satisfies
    ``D P + P D' = -2 beta P``.  Requires ``(A, B)`` controllable.
    """
    A, B = drift.A, drift.B
    eig = np.linalg.eigvals(A)
    if eig.real.max() < 0:
        return np.zeros((drift.q, drift.p))
    beta = max(0.0, -eig.real.min()) + 1.0
    W = B @ np.linalg.solve(cost.Qu, B.T)
    P = solve_lyapunov_kron(-(A + beta * np.eye(drift.p)).T, 2.0 * W)
    try:
        c, low = scipy.linalg.cho_factor(P)
    except np.linalg.LinAlgError as exc:
        raise SolverError("no stabilizing initialization: pair looks uncontrollable") from exc
    return -np.linalg.solve(cost.Qu, scipy.linalg.cho_solve((c, low), B).T)


def solve_care(drift, cost, initial_gain=None, max_iter=MAX_ITER, tol=RESIDUAL_TOL):
    """Stabilizing solution of the continuous-time algebraic Riccati equation.

    Newton--Kleinman: given a stabilizing gain ``G_k``, ``K_k`` solves the
    Lyapunov equation of the closed loop ``A + B G_k`` with weight
    ``Qx + G_k' Qu G_k`` and ``G_{k+1} = -Qu^{-1} B' K_k``.

    Parameters
    ----------
    drift : DriftParams
    cost : CostSpec
    initial_gain : array_like, optional
        Stabilizing starting gain.  Defaults to :func:`initial_stabilizer`.

    Raises
    ------
    SolverError
        When no stabilizing start exists or the iteration does not reach the
        residual tolerance; ``exc.residual`` holds the last residual.
    """
    _check_dims(drift, cost)
    A, B = drift.A, drift.B
    if initial_gain is None:
        G = initial_stabilizer(drift, cost)
    else:
        G = np.atleast_2d(np.asarray(initial_gain, dtype=float))
        if G.shape != (drift.q, drift.p):
            raise ShapeError(f"initial gain must be {drift.q} x {drift.p}")
    K_prev = None
    residual = np.inf
    for it in range(1, max_iter + 1):
        D = A + B @ G
        try:
            K = solve_lyapunov_kron(D, cost.Qx + G.T @ cost.Qu @ G)
        except (StabilityError, np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
            raise SolverError(f"Newton iterate {it} lost stability: {exc}", residual) from exc
        if not np.all(np.isfinite(K)):
            raise SolverError("non-finite Riccati iterate", residual)
        K = 0.5 * (K + K.T)
        residual = care_residual(drift, cost, K)
        G = optimal_gain(drift, cost, K)
        if K_prev is not None:
            step = np.linalg.norm(K - K_prev, "fro")
            if residual <= tol and step <= STEP_TOL * max(1.0, np.linalg.norm(K, "fro")):
                break
        K_prev = K
    else:
        if not residual <= tol:
            raise SolverError(
                f"Newton-Kleinman did not converge in {max_iter} iterations "
                f"(residual {residual:.3g})", residual)
    D = A + B @ G
    margin = stability_margin(D)
    if not margin > 0:
        raise SolverError("Riccati solution does not stabilize the pair", residual)
    return RiccatiSolution(K, G, D, residual, margin, it)


def largest_real_part_shift(M, E):
    """Change of the spectral abscissa when ``M`` is perturbed to ``M + E``."""
    return spectral_abscissa(np.asarray(M) + np.asarray(E)) - spectral_abscissa(M)


def eig_perturbation_bound(M, E, max_condition=1e8):
    """Upper bound on the rise of the largest eigenvalue real part of ``M + E``.

    For diagonalizable ``M = V diag(lambda) V^{-1}`` this is
    ``max(1, ||E||_2 * cond(V))``.  Defective matrices (Jordan blocks of size
    greater than one) are not supported.

    Raises
    ------
    ConditionError
        If the eigenvector matrix has condition number ``>= max_condition``.
    """
    M = as_square(M, "M")
    E = as_square(E, "E")
    if E.shape != M.shape:
        raise ShapeError("M and E must have the same shape")
    _, V = np.linalg.eig(M)
    kappa = np.linalg.cond(V, 2)
    if not kappa < max_condition:
        raise ConditionError(
            f"eigenvector matrix condition {kappa:.3g} >= {max_condition:.1g}; "
            "M is numerically defective")
    return max(1.0, np.linalg.norm(E, 2) * kappa)


def _direction(drift, dA, dB):
    dA = np.asarray(dA, dtype=float)
    dB = np.asarray(dB, dtype=float).reshape(drift.p, drift.q)
    if dA.shape != (drift.p, drift.p):
        raise ShapeError("direction_A must be p x p")
    return dA, dB


def riccati_directional_derivative(drift, cost, direction_A, direction_B, solution=None):
    """Derivative of ``K`` along ``(A, B) + eps (X, Y)``.

    Solves ``D' dK + dK D + K M + M' K = 0`` with ``M = X + Y G`` at the
    optimal gain ``G`` and closed loop ``D``.
    """
    X, Y = _direction(drift, direction_A, direction_B)
    sol = solution if solution is not None else solve_care(drift, cost)
    M = X + Y @ sol.gain
    return solve_lyapunov_kron(sol.closed_loop, sol.K @ M + M.T @ sol.K)


def feedback_directional_derivative(drift, cost, direction_A, direction_B, solution=None):
    """Derivative of ``B' K`` along ``(X, Y)``: ``Y' K + B' dK`` (q x p)."""
    X, Y = _direction(drift, direction_A, direction_B)
    sol = solution if solution is not None else solve_care(drift, cost)
    dK = riccati_directional_derivative(drift, cost, X, Y, solution=sol)
    return Y.T @ sol.K + drift.B.T @ dK


def cost_of_feedback(drift, cost, gain):
    """Value matrix ``P`` of the feedback ``u = gain x``.

    ``(A + B G)' P + P (A + B G) + Qx + G' Qu G = 0``; the long-run average
    cost of the feedback under noise covariance ``C`` is ``tr(P C)``.
    """
    _check_dims(drift, cost)
    G = np.atleast_2d(np.asarray(gain, dtype=float))
    if G.shape != (drift.q, drift.p):
        raise ShapeError(f"gain must be {drift.q} x {drift.p}")
    D = drift.A + drift.B @ G
    require_stable(D)
    return solve_lyapunov_kron(D, cost.Qx + G.T @ cost.Qu @ G)
