"""Regret, estimation error and diagnostic statistics.

Everything here may look at the true drift; none of it is visible to the
policies themselves.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError, PairingError, ShapeError
from .posterior import posterior_mean_cov
from .riccati import solve_care

__all__ = [
    "Checkpoint", "EpisodeRecord", "ExperimentResult", "default_checkpoints",
    "regret", "normalize_regret", "normalize_estimation_error", "evaluate",
    "self_normalized_stat", "noise_cross_moment", "action_deviation_integral",
    "aggregate",
]


@dataclass(frozen=True)
class Checkpoint:
    T: float
    regret: float
    norm_regret: float
    est_err_sq: float
    norm_est_err: float


@dataclass(frozen=True)
class EpisodeRecord:
    index: int
    tau: float
    theta_hat: np.ndarray
    gain: np.ndarray
    est_err_sq: float
    redraws: int = 0


@dataclass
class ExperimentResult:
    """Outcome of one replication of one policy."""

    policy: str
    p: int
    q: int
    scenario: str = ""
    seed: int | None = None
    episodes: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)
    failed: bool = False
    failure_reason: str = ""
    duration: float = 0.0
    log: object = None

    def without_log(self):
        return replace(self, log=None)


def default_checkpoints(T):
    """``25, 50, 100, 150, ...`` up to and including ``T``."""
    pts = [t for t in (25.0, 50.0) if t < T]
    t = 100.0
    while t < T:
        pts.append(t)
        t += 50.0
    pts.append(float(T))
    return pts


def _check_pairing(policy_log, optimal_log):
    if policy_log.step != optimal_log.step:
        raise PairingError("logs use different time steps")
    n = min(policy_log.n_steps, optimal_log.n_steps)
    if not np.array_equal(policy_log.noise_increments[:n], optimal_log.noise_increments[:n]):
        raise PairingError("logs were not driven by the same noise increments")
    return n


def _running_cost(log, cost):
    if cost is None:
        return log.running_cost
    Z = log.observations()
    return np.cumsum(np.einsum("ki,ij,kj->k", Z, cost.Q, Z) * log.step)


def regret(policy_log, optimal_log, cost=None, checkpoints=None):
    """Pathwise regret ``R(T)`` at each checkpoint.

    Both logs must share the time step and the noise increments.  Checkpoints
    beyond the shorter log are dropped.  When ``cost`` is given the stage costs
    are recomputed from the logged states and actions.

    Returns
    -------
    ndarray of shape (m, 2)
        Rows ``(T, R(T))``.
    """
    n = _check_pairing(policy_log, optimal_log)
    if checkpoints is None:
        checkpoints = default_checkpoints(n * policy_log.step)
    rc_pol = _running_cost(policy_log, cost)
    rc_opt = _running_cost(optimal_log, cost)
    rows = []
    for T in checkpoints:
        k = int(round(T / policy_log.step))
        if k < 1 or k > n:
            continue
        rows.append((float(T), float(rc_pol[k - 1] - rc_opt[k - 1])))
    return np.array(rows, dtype=float).reshape(-1, 2)


def normalize_regret(R, T, p, q):
    """``R / (p (p+q) sqrt(T) log T)`` with the natural logarithm."""
    if not T > 1:
        raise DomainError("regret normalization needs T > 1")
    return R / (p * (p + q) * np.sqrt(T) * np.log(T))


def normalize_estimation_error(err_sq, tau, p, q):
    """``err_sq / (p (p+q) tau^{-1/2} log tau)``."""
    if not tau > 1:
        raise DomainError("error normalization needs tau > 1")
    return err_sq / (p * (p + q) * tau ** -0.5 * np.log(tau))


def evaluate(result, optimal_log, checkpoints=None):
    """Fill ``result.checkpoints`` from its log paired with the optimal log.

    The estimation error at checkpoint ``T`` is that of the latest episode
    sample drawn at or before ``T``, normalized with that episode's time.
    """
    if result.log is None:
        raise ValueError("result carries no trajectory log")
    R = regret(result.log, optimal_log, checkpoints=checkpoints)
    taus = np.array([e.tau for e in result.episodes])
    rows = []
    for T, r in R:
        err_sq, norm_err = 0.0, 0.0
        if len(taus):
            i = np.searchsorted(taus, T + 1e-9, side="right") - 1
            if i >= 0:
                ep = result.episodes[i]
                err_sq = ep.est_err_sq
                norm_err = normalize_estimation_error(err_sq, ep.tau, result.p, result.q)
        rows.append(Checkpoint(T, r, normalize_regret(r, T, result.p, result.q),
                               err_sq, norm_err))
    return replace(result, checkpoints=rows)


def noise_cross_moment(log, n=None):
    """``M = sum_k z_k dW_k'`` over the first ``n`` steps."""
    n = log.n_steps if n is None else int(n)
    return log.observations()[:n].T @ log.noise_increments[:n]


def self_normalized_stat(posterior, M, C):
    """Self-normalized noise statistic and its log-determinant budget.

    Returns ``(lambda_max(M' Sigma^{-1} M), p lambda_max(C)
    (log det Sigma - log det Sigma0))``.
    """
    M = np.asarray(M, dtype=float)
    if M.shape != posterior.cross_moment.shape:
        raise ShapeError("M must match the shape of theta")
    _, Sigma = posterior_mean_cov(posterior)
    stat = float(np.linalg.eigvalsh(M.T @ np.linalg.solve(Sigma, M)).max())
    _, logdet = np.linalg.slogdet(Sigma)
    _, logdet0 = np.linalg.slogdet(posterior.prior_precision)
    C = np.asarray(C, dtype=float)
    budget = posterior.p * float(np.linalg.eigvalsh(C).max()) * (logdet - logdet0)
    return max(stat, 0.0), budget


def action_deviation_integral(policy_log, truth, cost, t0=0.0, solution=None):
    """``sum ||u_k + Qu^{-1} B' K x_k||^2 dt`` over steps with ``k dt >= t0``."""
    sol = solution if solution is not None else solve_care(truth, cost)
    k0 = int(np.ceil(t0 / policy_log.step - 1e-9))
    X = policy_log.states[k0:-1]
    U = policy_log.actions[k0:]
    dev = U - X @ sol.gain.T
    return float(np.sum(dev * dev) * policy_log.step)


def aggregate(results, attr="norm_regret"):
    """Per-checkpoint mean and worst case (maximum) across replications.

    Returns a dict mapping ``T`` to ``(mean, worst, count)``; replications that
    stopped early contribute only to the checkpoints they reached.
    """
    table = {}
    for res in results:
        for cp in res.checkpoints:
            table.setdefault(cp.T, []).append(getattr(cp, attr))
    return {T: (float(np.mean(v)), float(np.max(v)), len(v))
            for T, v in sorted(table.items())}
