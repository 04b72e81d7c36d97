"""Matrix-normal belief over the stacked drift parameter ``theta = [A, B]'``.

With prior mean ``mu0`` and precision ``Sigma0`` and observations
``z = [x; u]`` the posterior has precision ``Sigma0 + int z z' dt`` and mean
``Sigma^{-1} (Sigma0 mu0 + int z dx')``.  Each of the ``p`` columns of theta
is Gaussian with covariance ``Sigma^{-1}``; columns are independent.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _kernels
from .errors import ConditionError, CovarianceError, ShapeError

__all__ = [
    "PosteriorState", "init_prior", "accumulate", "accumulate_path",
    "posterior_mean_cov", "sample_posterior", "estimation_error",
]

MAX_CONDITION = 1e14


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PosteriorState:
    precision: np.ndarray
    cross_moment: np.ndarray
    prior_precision: np.ndarray
    prior_mean: np.ndarray
    elapsed: float = 0.0

    @property
    def p(self):
        return self.cross_moment.shape[1]

    @property
    def q(self):
        return self.cross_moment.shape[0] - self.p


def init_prior(p, q, prior_mean=None, prior_precision=None):
    """Prior belief; defaults to zero mean and identity precision."""
    d = p + q
    mu0 = np.zeros((d, p)) if prior_mean is None else np.asarray(prior_mean, dtype=float)
    S0 = np.eye(d) if prior_precision is None else np.asarray(prior_precision, dtype=float)
    if mu0.shape != (d, p):
        raise ShapeError(f"prior mean must be {d} x {p}")
    if S0.shape != (d, d):
        raise ShapeError(f"prior precision must be {d} x {d}")
    if not np.allclose(S0, S0.T, rtol=0.0, atol=1e-12) or np.linalg.eigvalsh(S0).min() <= 0:
        raise CovarianceError("prior precision must be symmetric positive definite")
    return PosteriorState(_frozen(S0), _frozen(S0 @ mu0), _frozen(S0), _frozen(mu0), 0.0)


def _accumulate_rows(state, Z, dX, dt):
    if dt <= 0:
        raise ValueError("time step must be positive")
    d, p = state.cross_moment.shape
    if Z.ndim != 2 or Z.shape[1] != d or dX.shape != (Z.shape[0], p):
        raise ShapeError(f"observations must be (n, {d}) and increments (n, {p})")
    precision = np.array(state.precision)
    cross = np.array(state.cross_moment)
    _kernels.accumulate_moments(precision, cross, np.ascontiguousarray(Z),
                                np.ascontiguousarray(dX), float(dt))
    return PosteriorState(_frozen(precision), _frozen(cross), state.prior_precision,
                          state.prior_mean, state.elapsed + Z.shape[0] * dt)


def accumulate(state, z, dx, dt):
    """Add one left-endpoint observation: ``Sigma += z z' dt``, ``S += z dx'``."""
    z = np.asarray(z, dtype=float).reshape(1, -1)
    dx = np.asarray(dx, dtype=float).reshape(1, -1)
    return _accumulate_rows(state, z, dx, dt)


def accumulate_path(state, states, actions, dt):
    """Fold a stretch of trajectory into the belief.

    ``states`` holds n+1 rows and ``actions`` n rows.  Integrals are Ito
    (left-endpoint) sums, so ``z_k`` pairs with ``x_{k+1} - x_k``.
    """
    states = np.asarray(states, dtype=float)
    actions = np.asarray(actions, dtype=float)
    if states.shape[0] != actions.shape[0] + 1:
        raise ShapeError("states must have exactly one more row than actions")
    if actions.shape[0] == 0:
        return state
    Z = np.hstack([states[:-1], actions])
    return _accumulate_rows(state, Z, np.diff(states, axis=0), dt)


def _factor(state):
    P = state.precision
    w = np.linalg.eigvalsh(P)
    if w[0] <= 0 or w[-1] / w[0] > MAX_CONDITION:
        raise ConditionError(
            f"posterior precision is numerically singular (eigenvalues {w[0]:.3g}..{w[-1]:.3g})")
    return scipy.linalg.cholesky(P, lower=True)


def posterior_mean_cov(state):
    """Return ``(mu, Sigma)``; ``mu`` is obtained by a Cholesky solve."""
    L = _factor(state)
    mu = scipy.linalg.cho_solve((L, True), state.cross_moment)
    return mu, np.array(state.precision)


def sample_posterior(state, rng):
    """Draw ``mu + L^{-T} Z`` with ``L L' = Sigma`` and ``Z`` standard normal."""
    L = _factor(state)
    mu = scipy.linalg.cho_solve((L, True), state.cross_moment)
    Z = rng.standard_normal(mu.shape)
    return mu + scipy.linalg.solve_triangular(L.T, Z, lower=False)


def estimation_error(theta_hat, theta0):
    """Spectral norm of ``theta_hat - theta0``."""
    a = np.asarray(theta_hat, dtype=float)
    b = np.asarray(theta0, dtype=float)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b, 2))
