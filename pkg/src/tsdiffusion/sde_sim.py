"""Euler--Maruyama simulation of linear diffusions under linear feedback.

The controlled process is ``dx = (A x + B u) dt + dW`` where ``W`` is a
Wiener process with covariance ``C`` per unit time.  All randomness enters
through explicit increment arrays, so several policies can be driven by the
same noise realization.
"""
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._linalg import as_square, matrix_exponential, require_stable, solve_lyapunov_kron
from .errors import ConfigurationError, CovarianceError, ShapeError

__all__ = [
    "DriftParams", "NoiseSpec", "CostSpec", "TrajectoryLog",
    "sample_wiener_increments", "euler_step", "simulate_feedback",
    "ou_stationary_covariance", "matrix_exponential", "n_steps",
]


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DriftParams:
    """Drift matrices ``A`` (p x p) and ``B`` (p x q) of the diffusion."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise ShapeError(f"A must be square with p >= 1, got {A.shape}")
        if B.ndim != 2 or B.shape[0] != A.shape[0] or B.shape[1] < 1:
            raise ShapeError(f"B must be p x q with p={A.shape[0]}, got {B.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise ValueError("drift matrices must be finite")
        object.__setattr__(self, "A", _readonly(A))
        object.__setattr__(self, "B", _readonly(B))

    @property
    def p(self):
        return self.A.shape[0]

    @property
    def q(self):
        return self.B.shape[1]

    @property
    def theta(self):
        """Stacked parameter ``[A, B]'`` of shape (p+q, p)."""
        return np.vstack([self.A.T, self.B.T])

    @classmethod
    def from_theta(cls, theta, p):
        theta = np.asarray(theta, dtype=float)
        if theta.ndim != 2 or theta.shape[1] != p or theta.shape[0] <= p:
            raise ShapeError(f"theta must be (p+q) x p with p={p}, got {theta.shape}")
        return cls(theta[:p].T, theta[p:].T)


@dataclass(frozen=True)
class NoiseSpec:
    """Wiener covariance ``C`` per unit time."""

    C: np.ndarray
    chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        C = as_square(self.C, "C")
        if not np.allclose(C, C.T, rtol=0.0, atol=1e-12):
            raise CovarianceError("noise covariance must be symmetric")
        if np.linalg.eigvalsh(C).min() <= 1e-12:
            raise CovarianceError("noise covariance must be positive definite")
        object.__setattr__(self, "C", _readonly(C))
        object.__setattr__(self, "chol", _readonly(np.linalg.cholesky(C)))

    @property
    def p(self):
        return self.C.shape[0]


@dataclass(frozen=True)
class CostSpec:
    """Quadratic cost weights in canonical form (no state/action cross term)."""

    Qx: np.ndarray
    Qu: np.ndarray

    def __post_init__(self):
        Qx = as_square(self.Qx, "Qx")
        Qu = as_square(self.Qu, "Qu")
        for name, Q in (("Qx", Qx), ("Qu", Qu)):
            if not np.allclose(Q, Q.T, rtol=0.0, atol=1e-12):
                raise CovarianceError(f"{name} must be symmetric")
            if np.linalg.eigvalsh(Q).min() <= 1e-12:
                raise CovarianceError(f"{name} must be positive definite")
        object.__setattr__(self, "Qx", _readonly(Qx))
        object.__setattr__(self, "Qu", _readonly(Qu))

    @property
    def Q(self):
        """Joint block-diagonal weight on ``z = [x; u]``."""
        p, q = self.Qx.shape[0], self.Qu.shape[0]
        Q = np.zeros((p + q, p + q))
        Q[:p, :p] = self.Qx
        Q[p:, p:] = self.Qu
        return Q

    def scaled(self, c):
        return CostSpec(c * self.Qx, c * self.Qu)


@dataclass(frozen=True)
class TrajectoryLog:
    """Time-discretized record of one simulated run.

    ``states`` has one more row than ``actions``, ``noise_increments`` and
    ``stage_cost``.  ``stage_cost[k]`` is ``z_k' Q z_k * step`` and
    ``running_cost`` its cumulative sum.
    """

    step: float
    states: np.ndarray
    actions: np.ndarray
    noise_increments: np.ndarray
    stage_cost: np.ndarray
    running_cost: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        for name in ("states", "actions", "noise_increments", "stage_cost"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        n = self.actions.shape[0]
        if not (self.states.shape[0] == n + 1 == self.noise_increments.shape[0] + 1
                and self.stage_cost.shape[0] == n):
            raise ShapeError("inconsistent trajectory lengths")
        object.__setattr__(self, "running_cost", _readonly(np.cumsum(self.stage_cost)))

    @property
    def n_steps(self):
        return self.actions.shape[0]

    @property
    def horizon(self):
        return self.n_steps * self.step

    @property
    def times(self):
        return np.arange(self.n_steps + 1) * self.step

    def observations(self):
        """Rows ``z_k = [x_k; u_k]`` for k = 0..n-1."""
        return np.hstack([self.states[:-1], self.actions])


def n_steps(T, dt):
    """Number of grid steps covering ``[0, T]``; T must be a multiple of dt."""
    if not dt > 0:
        raise ConfigurationError("time step must be positive")
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * max(1.0, abs(T)):
        raise ConfigurationError(f"horizon {T} is not a positive multiple of step {dt}")
    return n


def _as_generator(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample_wiener_increments(noise, dt, n, rng):
    """Draw ``n`` independent increments distributed ``N(0, dt * C)``.

    Parameters
    ----------
    noise : NoiseSpec or array_like
        Covariance per unit time.
    dt : float
        Step length.
    n : int
        Number of increments.
    rng : numpy.random.Generator or int
        Source of randomness; an int is used as a seed.

    Returns
    -------
    ndarray of shape (n, p)
    """
    if not isinstance(noise, NoiseSpec):
        noise = NoiseSpec(noise)
    if not dt > 0:
        raise ConfigurationError("time step must be positive")
    if int(n) < 1:
        raise ConfigurationError("need at least one increment")
    Z = _as_generator(rng).standard_normal((int(n), noise.p))
    return np.sqrt(dt) * (Z @ noise.chol.T)


def euler_step(x, u, drift, dW, dt):
    """One Euler--Maruyama step: ``x + (A x + B u) dt + dW``."""
    x = np.asarray(x, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    dW = np.asarray(dW, dtype=float)
    if x.shape != (drift.p,) or u.shape != (drift.q,) or dW.shape != (drift.p,):
        raise ShapeError(
            f"expected x, dW of shape ({drift.p},) and u of shape ({drift.q},)")
    if not dt > 0:
        raise ConfigurationError("time step must be positive")
    return x + (drift.A @ x + drift.B @ u) * dt + dW


def expand_segments(values, n):
    """Spread ``kappa`` segment values over ``n`` grid steps.

    Step ``k`` falls in segment ``floor(k * kappa / n)``, i.e. segment
    boundaries are snapped to the simulation grid.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    kappa = values.shape[0]
    if kappa < 1 or kappa > n:
        raise ConfigurationError(
            f"{kappa} segments do not fit on a grid of {n} steps")
    idx = (np.arange(n, dtype=np.int64) * kappa) // n
    return values[idx]


def _simulate(drift, gain, v, x0, dW, dt, cost, threshold=np.inf):
    """Run the compiled kernel; returns (states, actions, stage_cost, done)."""
    n = dW.shape[0]
    states = np.empty((n + 1, drift.p))
    actions = np.empty((n, drift.q))
    stage = np.empty(n)
    if v is None:
        v = np.zeros((n, drift.q))
    done = _kernels.euler_feedback(
        np.ascontiguousarray(x0, dtype=float), np.ascontiguousarray(drift.A),
        np.ascontiguousarray(drift.B), np.ascontiguousarray(gain, dtype=float),
        np.ascontiguousarray(v, dtype=float), np.ascontiguousarray(dW, dtype=float),
        float(dt), np.ascontiguousarray(cost.Qx), np.ascontiguousarray(cost.Qu),
        states, actions, stage, float(threshold))
    return states[:done + 1], actions[:done], stage[:done], done


def simulate_feedback(drift, noise, gain, dither, x0, T, dt, increments=None,
                      cost=None, rng=None):
    """Simulate ``u = gain x + v(t)`` on ``[0, T]`` with Euler--Maruyama.

    ``dither`` is ``None`` or a (kappa, q) array of piecewise-constant values
    spread evenly over the horizon (``kappa = n`` gives one value per step).
    ``increments`` are used as given, which lets several policies share one
    noise path; when omitted they are drawn from ``rng``.  ``cost`` defaults to
    identity weights and only affects the logged running cost.
    """
    if not isinstance(noise, NoiseSpec):
        noise = NoiseSpec(noise)
    if noise.p != drift.p:
        raise ShapeError("noise and drift dimensions differ")
    n = n_steps(T, dt)
    gain = np.atleast_2d(np.asarray(gain, dtype=float))
    if gain.shape != (drift.q, drift.p):
        raise ShapeError(f"gain must be {drift.q} x {drift.p}, got {gain.shape}")
    if x0 is None:
        x0 = np.zeros(drift.p)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (drift.p,):
        raise ShapeError(f"x0 must have shape ({drift.p},)")
    if increments is None:
        increments = sample_wiener_increments(noise, dt, n, rng)
    increments = np.asarray(increments, dtype=float)
    if increments.ndim != 2 or increments.shape[0] < n or increments.shape[1] != drift.p:
        raise ConfigurationError(
            f"need at least {n} increments of dimension {drift.p}, got {increments.shape}")
    increments = increments[:n]
    v = None
    if dither is not None:
        dither = np.asarray(dither, dtype=float)
        if dither.ndim == 1:
            dither = dither.reshape(-1, drift.q)
        if dither.shape[1] != drift.q:
            raise ShapeError("dither values must have q columns")
        v = expand_segments(dither, n)
    if cost is None:
        cost = CostSpec(np.eye(drift.p), np.eye(drift.q))
    states, actions, stage, _ = _simulate(drift, gain, v, x0, increments, dt, cost)
    return TrajectoryLog(dt, states, actions, increments, stage)


def ou_stationary_covariance(D, C):
    """Stationary covariance ``P`` of ``dx = D x dt + dW``: ``D P + P D' + C = 0``."""
    D = as_square(D, "D")
    C = np.asarray(C.C if isinstance(C, NoiseSpec) else C, dtype=float)
    require_stable(D, "D")
    return solve_lyapunov_kron(D.T, C)
