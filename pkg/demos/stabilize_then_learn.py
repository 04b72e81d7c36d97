"""Walk through one run on the X-29A model: dithered stabilization, then
episodic Thompson sampling, compared with the optimal controller on the
same noise path.

    python3 demos/stabilize_then_learn.py [seed]
"""
import sys
import warnings

import numpy as np

from tsdiffusion import (EpisodeSchedule, estimation_error, evaluate, run_algorithm1,
                         run_algorithm2, run_optimal, sample_wiener_increments, solve_care)
from tsdiffusion.bench.experiments import replication_streams
from tsdiffusion.bench.scenarios import load_scenario
from tsdiffusion.policies import ExcitationWarning, check_failure_event
from tsdiffusion.sde_sim import n_steps

warnings.simplefilter("ignore", ExcitationWarning)
seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
scn = load_scenario("x29a")
sol = solve_care(scn.truth, scn.cost)
print(f"optimal closed loop margin {sol.margin:.3f}, K trace {np.trace(sol.K):.3f}")

# Stabilization alone: how good is the estimate after tau seconds of dither?
for tau in (4.0, 12.0, 20.0):
    inc_rng, pol_rng = replication_streams(seed)
    inc = sample_wiener_increments(scn.noise, scn.dt, n_steps(tau, scn.dt), inc_rng)
    theta, _, _ = run_algorithm1(scn.truth, scn.noise, scn.cost, scn.G_init, tau,
                                 scn.dither(), scn.dt, pol_rng, increments=inc)
    bad = check_failure_event(theta, scn.truth, scn.cost)
    print(f"tau={tau:4.0f}  error {estimation_error(theta, scn.truth.theta):7.3f}  "
          f"{'fails to stabilize' if bad else 'stabilizes'}")

# Full run against the optimal policy on shared increments.
T = 300.0
inc_rng, pol_rng = replication_streams(seed)
inc = sample_wiener_increments(scn.noise, scn.dt, n_steps(T, scn.dt), inc_rng)
opt = run_optimal(scn.truth, scn.noise, scn.cost, T, scn.dt, increments=inc)
ts = evaluate(run_algorithm2(scn.truth, scn.noise, scn.cost, scn.G_init, EpisodeSchedule(),
                             scn.dither(), T, scn.dt, pol_rng, increments=inc), opt)
print(f"\n{len(ts.episodes)} episodes, failed={ts.failed}")
print("    T    regret  normalized  est. err^2")
for c in ts.checkpoints:
    print(f"{c.T:5.0f} {c.regret:9.2f} {c.norm_regret:11.3f} {c.est_err_sq:11.4f}")
