"""Control policies: dithered stabilization, episodic Thompson sampling,
the oracle optimal feedback and a certainty-equivalent baseline with
decaying action noise.
"""
import time
import warnings
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
import scipy.linalg

from ._linalg import require_stable
from .errors import (ConditionError, ConfigurationError, ShapeError, SolverError,
                     StabilityError)
from .metrics import EpisodeRecord, ExperimentResult
from .posterior import (accumulate_path, init_prior, posterior_mean_cov,
                        sample_posterior)
from .riccati import solve_care
from .sde_sim import (DriftParams, TrajectoryLog, _simulate, expand_segments,
                      n_steps, sample_wiener_increments)

__all__ = [
    "ExcitationWarning", "EpisodeSchedule", "DitherSpec", "ExplorationSpec",
    "ResamplePolicy", "Algorithm1Result", "run_algorithm1", "check_failure_event",
    "run_algorithm2", "run_optimal", "run_randomized_estimate",
    "draw_stabilizing_gain", "validate_schedule",
]


class ExcitationWarning(UserWarning):
    """The dither has fewer segments than the stabilization guarantee asks for."""


@dataclass(frozen=True)
class EpisodeSchedule:
    """Episode ends ``tau_n = tau0 (1 + growth_hi)^n``.

    ``growth_lo`` only documents the admissible lower bound on
    ``(tau_{n+1} - tau_n) / tau_n``; the generator itself uses ``growth_hi``.
    """

    tau0: float = 20.0
    growth_hi: float = 0.1
    growth_lo: float | None = None

    def __post_init__(self):
        lo = self.growth_hi if self.growth_lo is None else self.growth_lo
        object.__setattr__(self, "growth_lo", float(lo))
        if not self.tau0 > 0:
            raise ConfigurationError("tau0 must be positive")
        if not (0 < self.growth_lo <= self.growth_hi < np.inf):
            raise ConfigurationError("need 0 < growth_lo <= growth_hi < inf")

    def ends(self, T):
        """All ``tau_n < T`` (``tau_0`` included)."""
        out = []
        n = 0
        while True:
            tau = self.tau0 * (1.0 + self.growth_hi) ** n
            if tau >= T - 1e-12:
                return out
            out.append(tau)
            n += 1


def validate_schedule(taus, growth_lo, growth_hi, rtol=1e-12):
    """True iff consecutive relative increments lie in ``[growth_lo, growth_hi]``."""
    taus = np.asarray(taus, dtype=float)
    rel = np.diff(taus) / taus[:-1]
    return bool(np.all(rel >= growth_lo * (1 - rtol)) and np.all(rel <= growth_hi * (1 + rtol)))


@dataclass(frozen=True)
class DitherSpec:
    """Gaussian piecewise-constant action dither.

    ``kappa`` fixes the segment count; otherwise it is
    ``floor(tau ** kappa_power)``.
    """

    sigma: float = 5.0
    kappa: int | None = None
    kappa_power: float = 1.5

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigurationError("dither sigma must be positive")
        if self.kappa is not None and int(self.kappa) < 1:
            raise ConfigurationError("kappa must be a positive integer")

    def segments(self, tau, dt):
        kappa = int(self.kappa) if self.kappa is not None else max(1, int(np.floor(tau ** self.kappa_power)))
        n = n_steps(tau, dt)
        if kappa > n:
            raise ConfigurationError(
                f"segment length {tau}/{kappa} is shorter than the step {dt}")
        if kappa < tau ** 2:
            warnings.warn(f"kappa={kappa} < tau^2={tau ** 2:.4g}", ExcitationWarning, stacklevel=3)
        return kappa


@dataclass(frozen=True)
class ExplorationSpec:
    """Additive action noise with standard deviation ``sigma * t^-exponent``."""

    sigma: float = 5.0
    exponent: float = 0.25

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigurationError("exploration sigma must be non-negative")


@dataclass(frozen=True)
class ResamplePolicy:
    """Abort an episode once ``||x|| > growth * (1 + ||x_{tau0}||)``; redraw at most
    ``max_redraws`` times per episode before the run is declared failed."""

    growth: float = 1e3
    max_redraws: int = 10


class Algorithm1Result(NamedTuple):
    theta_hat: np.ndarray
    posterior: object
    log: TrajectoryLog


def _prepare(truth, noise, cost, T, dt, increments, rng):
    if noise.p != truth.p or cost.Qx.shape[0] != truth.p or cost.Qu.shape[0] != truth.q:
        raise ShapeError("truth, noise and cost dimensions disagree")
    n = n_steps(T, dt)
    if increments is None:
        increments = sample_wiener_increments(noise, dt, n, rng)
    increments = np.asarray(increments, dtype=float)
    if increments.shape[0] < n or increments.shape[1] != truth.p:
        raise ConfigurationError(f"need {n} noise increments of dimension {truth.p}")
    return n, increments[:n]


def _checked_gain(truth, G):
    G = np.atleast_2d(np.asarray(G, dtype=float))
    if G.shape != (truth.q, truth.p):
        raise ShapeError(f"initial gain must be {truth.q} x {truth.p}")
    require_stable(truth.A + truth.B @ G, "A + B G_init")
    return G


def _stabilization_phase(truth, cost, G_init, tau, dither, dt, rng, increments, x0, prior):
    n = increments.shape[0]
    v = None
    if dither is not None:
        kappa = dither.segments(tau, dt)
        v = expand_segments(rng.normal(0.0, dither.sigma, (kappa, truth.q)), n)
    states, actions, stage, _ = _simulate(truth, G_init, v, x0, increments, dt, cost)
    post = prior if prior is not None else init_prior(truth.p, truth.q)
    post = accumulate_path(post, states, actions, dt)
    return states, actions, stage, post


def run_algorithm1(truth, noise, cost, G_init, tau, dither, dt, rng,
                   increments=None, x0=None, prior=None):
    """Dithered stabilization: run ``u = G_init x + nu_n`` on ``[0, tau]``.

    ``nu_n ~ N(0, sigma^2 I)`` is redrawn on each of ``kappa`` equal segments.
    The collected data update the Gaussian belief, from which one parameter
    sample is returned together with the belief and the trajectory.
    """
    G_init = _checked_gain(truth, G_init)
    n, increments = _prepare(truth, noise, cost, tau, dt, increments, rng)
    x0 = np.zeros(truth.p) if x0 is None else np.asarray(x0, dtype=float)
    states, actions, stage, post = _stabilization_phase(
        truth, cost, G_init, tau, dither, dt, rng, increments, x0, prior)
    theta_hat = sample_posterior(post, rng)
    return Algorithm1Result(theta_hat, post, TrajectoryLog(dt, states, actions, increments, stage))


def _care_gain(theta, p, cost):
    try:
        return solve_care(DriftParams.from_theta(theta, p), cost).gain
    except (SolverError, StabilityError, ValueError, np.linalg.LinAlgError,
            scipy.linalg.LinAlgError):
        return None


def check_failure_event(theta_hat, truth, cost):
    """True iff the feedback designed for ``theta_hat`` fails to stabilize the truth.

    That is, ``A0 - B0 Qu^{-1} B_hat' K(theta_hat)`` has an eigenvalue with
    non-negative real part, or the Riccati equation for ``theta_hat`` has no
    stabilizing solution.
    """
    G = _care_gain(theta_hat, truth.p, cost)
    if G is None:
        return True
    D = truth.A + truth.B @ G
    if not np.all(np.isfinite(D)):
        return True
    return bool(np.linalg.eigvals(D).real.max() >= 0)


def _episodic(policy, truth, noise, cost, G_init, schedule, dither, T, dt, rng,
              increments, exploration, resample, inject_theta, x0, prior):
    start = time.perf_counter()
    G_init = _checked_gain(truth, G_init)
    if T < schedule.tau0:
        raise ConfigurationError("horizon must be at least tau0")
    N, increments = _prepare(truth, noise, cost, T, dt, increments, rng)
    n0 = n_steps(schedule.tau0, dt)
    p, q = truth.p, truth.q
    theta0 = truth.theta
    x0 = np.zeros(p) if x0 is None else np.asarray(x0, dtype=float)

    states, actions, stage, live = _stabilization_phase(
        truth, cost, G_init, schedule.tau0, dither, dt, rng, increments[:n0], x0, prior)
    seg_states, seg_actions, seg_stage = [states], [actions], [stage]
    x = states[-1]
    threshold = resample.growth * (1.0 + np.linalg.norm(x))

    ends = [k for k in (int(round(t / dt)) for t in schedule.ends(T))]
    bounds = sorted(set(ends)) + [N]
    failed, reason = False, ""
    episodes = []

    def draw(snapshot):
        if inject_theta is not None:
            theta = np.array(inject_theta, dtype=float)
        elif policy == "ts":
            theta = sample_posterior(snapshot, rng)
        else:
            theta, _ = posterior_mean_cov(snapshot)
        return theta, _care_gain(theta, p, cost)

    for n, (k_start, k_end) in enumerate(zip(bounds[:-1], bounds[1:])):
        snapshot = live
        redraws = 0
        try:
            theta, G = draw(snapshot)
            while G is None and policy == "ts" and redraws < resample.max_redraws:
                redraws += 1
                theta, G = draw(snapshot)
        except ConditionError as exc:
            failed, reason = True, f"episode {n}: {exc}"
            break
        if G is None:
            if policy == "ts":
                failed, reason = True, f"episode {n}: no stabilizable posterior sample"
                break
            G = G_init
        cursor = k_start
        while cursor < k_end:
            m = k_end - cursor
            v = None
            if policy == "rand-est" and exploration.sigma > 0:
                t = (cursor + np.arange(m)) * dt
                v = (exploration.sigma * t ** -exploration.exponent)[:, None] \
                    * rng.standard_normal((m, q))
            s, a, c, done = _simulate(truth, G, v, x, increments[cursor:k_end], dt, cost,
                                      threshold)
            seg_states.append(s[1:])
            seg_actions.append(a)
            seg_stage.append(c)
            live = accumulate_path(live, s, a, dt)
            cursor += done
            x = s[-1]
            if done < m:
                redraws += 1
                if redraws > resample.max_redraws or not np.all(np.isfinite(x)):
                    failed, reason = True, f"episode {n}: state diverged"
                    break
                if policy == "ts":
                    try:
                        theta, G = draw(snapshot)
                    except ConditionError as exc:
                        failed, reason = True, f"episode {n}: {exc}"
                        break
                    if G is None:
                        G = G_init
                else:
                    G = G_init
        episodes.append(EpisodeRecord(n, k_start * dt, theta, G,
                                      float(np.linalg.norm(theta - theta0, 2) ** 2), redraws))
        if failed:
            break

    n_done = sum(len(a) for a in seg_actions)
    log = TrajectoryLog(dt, np.vstack(seg_states), np.vstack(seg_actions),
                        increments[:n_done], np.concatenate(seg_stage))
    return ExperimentResult(policy=policy, p=p, q=q, episodes=episodes, failed=failed,
                            failure_reason=reason, duration=time.perf_counter() - start,
                            log=log)


def run_algorithm2(truth, noise, cost, G_init, schedule, dither, T, dt, rng,
                   increments=None, resample=ResamplePolicy(), inject_theta=None,
                   x0=None, prior=None):
    """Episodic Thompson sampling.

    Runs the dithered stabilization phase on ``[0, tau0]``, then on each
    episode ``[tau_n, tau_{n+1})`` applies the optimal feedback of a fresh
    posterior sample.  Data accumulate continuously but the belief used for
    sampling is refreshed only at episode ends.  Episodes whose state
    escapes the resampling threshold are restarted from the current state
    with a new sample.

    ``dither=None`` skips the excitation in the first phase and
    ``inject_theta`` replaces every posterior draw; both exist for testing
    limits of the algorithm.

    Returns
    -------
    ExperimentResult
        With ``log`` and ``episodes`` filled; pair with an optimal run through
        :func:`tsdiffusion.metrics.evaluate` to obtain regret.
    """
    return _episodic("ts", truth, noise, cost, G_init, schedule, dither, T, dt, rng,
                     increments, None, resample, inject_theta, x0, prior)


def run_randomized_estimate(truth, noise, cost, G_init, schedule, T, dt, rng,
                            exploration=ExplorationSpec(), dither=DitherSpec(),
                            increments=None, resample=ResamplePolicy(),
                            inject_theta=None, x0=None, prior=None):
    """Certainty-equivalent baseline with decaying additive action noise.

    Same episode skeleton as :func:`run_algorithm2`, but each episode uses the
    posterior mean and adds ``N(0, (sigma t^-exponent)^2 I)`` to every action.
    When the mean has no stabilizing Riccati solution, or the state escapes,
    the episode falls back to ``G_init``.
    """
    return _episodic("rand-est", truth, noise, cost, G_init, schedule, dither, T, dt, rng,
                     increments, exploration, resample, inject_theta, x0, prior)


def run_optimal(truth, noise, cost, T, dt, increments=None, x0=None, rng=None,
                solution=None):
    """Simulate the optimal feedback ``-Qu^{-1} B0' K(theta0) x`` of the truth."""
    sol = solution if solution is not None else solve_care(truth, cost)
    _, increments = _prepare(truth, noise, cost, T, dt, increments, rng)
    x0 = np.zeros(truth.p) if x0 is None else np.asarray(x0, dtype=float)
    states, actions, stage, _ = _simulate(truth, sol.gain, None, x0, increments, dt, cost)
    return TrajectoryLog(dt, states, actions, increments, stage)


def draw_stabilizing_gain(truth, rng, scale=1.0, max_tries=100_000):
    """First ``N(0, scale^2)`` random gain that stabilizes ``truth``."""
    for _ in range(max_tries):
        G = rng.normal(0.0, scale, (truth.q, truth.p))
        if np.linalg.eigvals(truth.A + truth.B @ G).real.max() < 0:
            return G
    raise SolverError(f"no stabilizing random gain in {max_tries} draws")
