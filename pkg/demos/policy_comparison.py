"""Paired comparison of Thompson sampling, the randomized-estimate baseline
and the optimal controller, written to CSV and plotted.

    python3 demos/policy_comparison.py [reps] [outdir]
"""
import sys
import warnings
from pathlib import Path

import numpy as np

from tsdiffusion.bench.config import RunConfig
from tsdiffusion.bench.experiments import run_regret_experiment
from tsdiffusion.bench.plotting import emit_plot
from tsdiffusion.bench.scenarios import load_scenario
from tsdiffusion.policies import ExcitationWarning

warnings.simplefilter("ignore", ExcitationWarning)

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 10
out = Path(sys.argv[2] if len(sys.argv) > 2 else "demo_out")
out.mkdir(exist_ok=True)

cfg = RunConfig(scenario=load_scenario("x29a"), policies=("ts", "rand-est", "optimal"),
                horizon=600.0, reps=reps, seed=0, out=str(out / "regret.csv"))
results = run_regret_experiment(cfg)

for pi, name in enumerate(cfg.policies):
    final = np.array([r[pi].checkpoints[-1].norm_regret for r in results])
    print(f"{name:9s} normalized regret at T=600: median {np.median(final):.3f}, "
          f"worst {final.max():.3f}")

for kind in ("regret", "estimation"):
    emit_plot(out / "regret.csv", kind, out / f"{kind}.svg")
print(f"wrote {out}/regret.csv and two SVG plots")
