"""Replicated experiments with deterministic seeding and CSV output.

Replication ``r`` uses ``seed = base_seed + r``.  Its ``SeedSequence`` is
split into one stream for the Wiener increments and one for the policy's
own randomness, so every policy in a replication sees the same noise path
and each starts its own stream from the same state.
"""
import csv
import io
import warnings
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..metrics import ExperimentResult, evaluate
from ..policies import (ExcitationWarning, ExplorationSpec, check_failure_event,
                        run_algorithm1, run_algorithm2, run_optimal,
                        run_randomized_estimate)
from ..sde_sim import n_steps, sample_wiener_increments

__all__ = ["replication_streams", "run_stabilization_sweep", "run_regret_experiment",
           "regret_rows", "format_csv", "STABILIZATION_COLUMNS", "REGRET_COLUMNS"]

STABILIZATION_COLUMNS = ("tau", "reps", "successes", "success_rate", "seed")
REGRET_COLUMNS = ("policy", "T", "rep", "regret", "norm_regret", "est_err_sq", "norm_est_err")


def replication_streams(seed):
    """``(increment_rng, policy_rng)`` for one replication seed."""
    a, b = np.random.SeedSequence(int(seed)).spawn(2)
    return np.random.default_rng(a), np.random.default_rng(b)


def _map(fn, tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        # map yields in submission order, so output never depends on timing
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def _fmt(x):
    if isinstance(x, (int, np.integer, str)):
        return str(x)
    return "%.17g" % x


def format_csv(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _write(path, text):
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


# ---------------------------------------------------------------- stabilization

def _stabilize_once(task):
    scn, tau, dither, seed = task
    inc_rng, pol_rng = replication_streams(seed)
    inc = sample_wiener_increments(scn.noise, scn.dt, n_steps(tau, scn.dt), inc_rng)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ExcitationWarning)
        theta, _, _ = run_algorithm1(scn.truth, scn.noise, scn.cost, scn.G_init, tau,
                                     dither, scn.dt, pol_rng, increments=inc)
    return not check_failure_event(theta, scn.truth, scn.cost)


def run_stabilization_sweep(config):
    """Success rate of the stabilization phase for every ``tau`` in the grid.

    Returns the rows ``(tau, reps, successes, success_rate, seed)`` and writes
    them to ``config.out`` when set.
    """
    scn = config.scenario
    dither = config.dither()
    for tau in config.tau_grid:
        dither.segments(tau, scn.dt)  # validates the grid, warns once per tau
    tasks = [(scn, tau, dither, config.seed + r)
             for tau in config.tau_grid for r in range(config.reps)]
    ok = _map(_stabilize_once, tasks, config.jobs)
    rows = []
    for i, tau in enumerate(config.tau_grid):
        s = int(sum(ok[i * config.reps:(i + 1) * config.reps]))
        rows.append((float(tau), int(config.reps), s, s / config.reps, int(config.seed)))
    _write(config.out, format_csv(STABILIZATION_COLUMNS, rows))
    return rows


# ---------------------------------------------------------------------- regret

def _regret_once(task):
    scn, policies, T, schedule, dither, exploration, checkpoints, seed = task
    inc_rng, _ = replication_streams(seed)
    inc = sample_wiener_increments(scn.noise, scn.dt, n_steps(T, scn.dt), inc_rng)
    opt = run_optimal(scn.truth, scn.noise, scn.cost, T, scn.dt, increments=inc)
    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ExcitationWarning)
        for pol in policies:
            _, rng = replication_streams(seed)
            if pol == "ts":
                res = run_algorithm2(scn.truth, scn.noise, scn.cost, scn.G_init, schedule,
                                     dither, T, scn.dt, rng, increments=inc)
            elif pol == "rand-est":
                res = run_randomized_estimate(scn.truth, scn.noise, scn.cost, scn.G_init,
                                              schedule, T, scn.dt, rng, exploration,
                                              dither, increments=inc)
            else:
                res = ExperimentResult(policy="optimal", p=scn.p, q=scn.q, log=opt)
            res.scenario, res.seed = scn.name, int(seed)
            out.append(evaluate(res, opt, checkpoints).without_log())
    return out


def regret_rows(results_by_rep, policies):
    """Per-replication rows followed by per-checkpoint ``mean`` and ``worst`` rows."""
    fields = ("regret", "norm_regret", "est_err_sq", "norm_est_err")
    rows = []
    for pi, pol in enumerate(policies):
        table = {}
        for rep, results in enumerate(results_by_rep):
            for cp in results[pi].checkpoints:
                vals = tuple(getattr(cp, f) for f in fields)
                rows.append((pol, cp.T, rep) + vals)
                table.setdefault(cp.T, []).append(vals)
        for T, vals in sorted(table.items()):
            v = np.array(vals)
            rows.append((pol, T, "mean") + tuple(v.mean(axis=0)))
        for T, vals in sorted(table.items()):
            v = np.array(vals)
            rows.append((pol, T, "worst") + tuple(v.max(axis=0)))
    return rows


def run_regret_experiment(config):
    """Paired regret runs of every configured policy on shared noise.

    Returns a list indexed by replication of lists of
    :class:`~tsdiffusion.metrics.ExperimentResult` (one per policy, logs
    dropped).  The CSV goes to ``config.out`` when set.
    """
    scn = config.scenario
    schedule = config.schedule()
    dither = config.dither()
    dither.segments(schedule.tau0, scn.dt)
    sigma_e = config.explore_sigma if config.explore_sigma is not None else dither.sigma
    exploration = ExplorationSpec(sigma_e, config.explore_exponent)
    tasks = [(scn, config.policies, config.horizon, schedule, dither, exploration,
              config.checkpoints, config.seed + r) for r in range(config.reps)]
    results = _map(_regret_once, tasks, config.jobs)
    _write(config.out, format_csv(REGRET_COLUMNS, regret_rows(results, config.policies)))
    return results
