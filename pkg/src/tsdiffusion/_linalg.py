"""Small dense linear-algebra primitives: Lyapunov solves and expm."""
import numpy as np

from .errors import ShapeError, StabilityError

# Higham (2005) Pade degrees and the 1-norm bounds under which each is
# accurate to double precision.
_PADE_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}
_PADE_COEF = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0,
        1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0, 960960.0,
         16380.0, 182.0, 1.0),
}


def as_square(M, name="matrix"):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {M.shape}")
    return M


def spectral_abscissa(D):
    """Largest real part among the eigenvalues of ``D``."""
    return float(np.max(np.linalg.eigvals(as_square(D)).real))


def require_stable(D, name="closed-loop matrix"):
    a = spectral_abscissa(D)
    if not a < 0.0:
        raise StabilityError(
            f"{name} is not Hurwitz (max real part of eigenvalues {a:.6g})")
    return a


def _pade_odd_even(A, m):
    b = _PADE_COEF[m]
    n = A.shape[0]
    ident = np.eye(n)
    A2 = A @ A
    if m == 13:
        A4 = A2 @ A2
        A6 = A4 @ A2
        U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
                 + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
        V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
             + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
        return U, V
    powers = [ident, A2]
    while len(powers) < (m + 1) // 2:
        powers.append(powers[-1] @ A2)
    U = A @ sum(b[2 * k + 1] * powers[k] for k in range(len(powers)))
    V = sum(b[2 * k] * powers[k] for k in range(len(powers)))
    return U, V


def matrix_exponential(M):
    """Matrix exponential by scaling and squaring of a diagonal Pade approximant.

    Follows Higham's 2005 selection of the Pade degree from the 1-norm of
    ``M``; for degree 13 the matrix is scaled by ``2**-s`` first and the
    result squared ``s`` times.
    """
    M = as_square(M)
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix_exponential requires finite entries")
    if M.shape[0] == 0:
        return M.copy()
    norm1 = np.linalg.norm(M, 1)
    for m in (3, 5, 7, 9):
        if norm1 <= _PADE_THETA[m]:
            U, V = _pade_odd_even(M, m)
            return np.linalg.solve(V - U, V + U)
    s = max(0, int(np.ceil(np.log2(norm1 / _PADE_THETA[13]))))
    U, V = _pade_odd_even(M / 2.0**s, 13)
    R = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        R = R @ R
    return R


def lyapunov_operator(D):
    """Matrix of ``P -> D' P + P D`` acting on row-major ``vec(P)``."""
    D = as_square(D)
    ident = np.eye(D.shape[0])
    return np.kron(D.T, ident) + np.kron(ident, D.T)


def solve_lyapunov_kron(D, Q):
    """Solve ``D' P + P D + Q = 0`` by dense LU on the Kronecker system."""
    D = as_square(D, "D")
    Q = as_square(Q, "Q")
    if Q.shape != D.shape:
        raise ShapeError(f"D {D.shape} and Q {Q.shape} differ in shape")
    require_stable(D, "D")
    n = D.shape[0]
    vecP = np.linalg.solve(lyapunov_operator(D), -Q.ravel())
    P = vecP.reshape(n, n)
    if np.array_equal(Q, Q.T):
        P = 0.5 * (P + P.T)
    return P
