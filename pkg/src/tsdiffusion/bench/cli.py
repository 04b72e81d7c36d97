"""Command-line entry point ``tsdiffusion``."""
import argparse
import json
import sys
import time

import numpy as np

from ..errors import TSDiffusionError
from ..riccati import solve_care
from .config import POLICIES, RunConfig, parse_tau_grid, read_run_config
from .scenarios import export_scenario, list_scenarios, load_scenario


def _base_config(args, **defaults):
    if getattr(args, "config", None):
        cfg = read_run_config(args.config)
        if args.scenario:
            cfg = cfg.with_overrides(scenario=load_scenario(args.scenario))
        return cfg
    if not args.scenario:
        raise TSDiffusionError("give --scenario or --config")
    return RunConfig(scenario=load_scenario(args.scenario), **defaults)


def _kappa_rule(text):
    """``powX`` -> exponent, ``fixed:N`` -> segment count."""
    text = text.strip().lower()
    if text.startswith("pow"):
        return float(text[3:]), None
    if text.startswith("fixed:"):
        return None, int(text[6:])
    raise argparse.ArgumentTypeError(f"bad kappa rule {text!r}; use powX or fixed:N")


def cmd_scenario(args):
    if args.action == "list":
        for name, p, q, desc in list_scenarios():
            print(f"{name:8s} p={p} q={q}  {desc}")
        return 0
    if not args.name:
        raise TSDiffusionError("scenario export needs a name")
    text = export_scenario(load_scenario(args.name), args.out)
    if args.out is None:
        sys.stdout.write(text)
    return 0


def cmd_care(args):
    scn = load_scenario(args.scenario)
    sol = solve_care(scn.truth, scn.cost)
    eig = np.linalg.eigvals(sol.closed_loop)
    with np.printoptions(precision=6, suppress=True, linewidth=120):
        print(f"scenario {scn.name}: p={scn.p} q={scn.q}")
        print("K =")
        print(sol.K)
        print("G =")
        print(sol.gain)
        print("closed-loop eigenvalues:", eig)
    print(f"stability margin zeta = {sol.margin:.10g}")
    print(f"residual = {sol.residual:.3e}  iterations = {sol.iterations}")
    if args.out:
        payload = {"scenario": scn.name, "K": sol.K.tolist(), "G": sol.gain.tolist(),
                   "eigenvalues_real": eig.real.tolist(), "eigenvalues_imag": eig.imag.tolist(),
                   "margin": sol.margin, "residual": sol.residual}
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
    return 0


def cmd_stabilize(args):
    from .experiments import run_stabilization_sweep
    power, kappa = args.kappa_rule
    cfg = _base_config(args)
    over = dict(reps=args.reps, seed=args.seed, out=args.out, jobs=args.jobs,
                sigma=args.sigma, kappa=kappa)
    if args.tau_grid:
        over["tau_grid"] = parse_tau_grid(args.tau_grid)
    cfg = cfg.with_overrides(**over)
    if power is not None:
        from dataclasses import replace
        cfg = cfg.with_overrides(scenario=replace(cfg.scenario, kappa_power=power))
    t = time.perf_counter()
    rows = run_stabilization_sweep(cfg)
    for tau, reps, succ, rate, _ in rows:
        print(f"tau={tau:g}  {succ}/{reps} stabilized ({100 * rate:.1f}%)")
    print(f"done in {time.perf_counter() - t:.1f}s" + (f", wrote {cfg.out}" if cfg.out else ""))
    return 0


def cmd_control(args):
    from .experiments import run_regret_experiment
    cfg = _base_config(args)
    pols = tuple(s.strip() for s in args.policy.split(",")) if args.policy else None
    cfg = cfg.with_overrides(policies=pols, horizon=args.horizon, reps=args.reps,
                             seed=args.seed, tau0=args.tau0, growth=args.growth,
                             out=args.out, jobs=args.jobs, sigma=args.sigma,
                             explore_sigma=args.explore_sigma,
                             explore_exponent=args.explore_exponent)
    t = time.perf_counter()
    results = run_regret_experiment(cfg)
    T = cfg.horizon
    for i, pol in enumerate(cfg.policies):
        finals = [r[i].checkpoints[-1].norm_regret for r in results
                  if r[i].checkpoints and r[i].checkpoints[-1].T == T]
        failed = sum(r[i].failed for r in results)
        if finals:
            print(f"{pol:9s} normalized regret at T={T:g}: mean {np.mean(finals):.4f} "
                  f"worst {np.max(finals):.4f}  failed runs {failed}")
        else:
            print(f"{pol:9s} no run reached T={T:g} (failed runs {failed})")
    print(f"done in {time.perf_counter() - t:.1f}s" + (f", wrote {cfg.out}" if cfg.out else ""))
    return 0


def cmd_plot(args):
    from .plotting import emit_plot
    emit_plot(args.inp, args.kind, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_check(args):
    from .checks import SUITES, run_suite
    suites = list(SUITES) if args.suite == "all" else [args.suite]
    failed = 0
    for s in suites:
        for label, ok, detail in run_suite(s):
            print(f"[{'PASS' if ok else 'FAIL'}] {s}: {label} ({detail})")
            failed += not ok
    return 1 if failed else 0


def build_parser():
    ap = argparse.ArgumentParser(
        prog="tsdiffusion",
        description="Thompson sampling control of linear diffusions: experiments and checks.")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("scenario", help="list or export built-in scenarios")
    sp.add_argument("action", choices=("list", "export"))
    sp.add_argument("name", nargs="?")
    sp.add_argument("--out", help="config file to write (default: stdout)")
    sp.set_defaults(func=cmd_scenario)

    sp = sub.add_parser("care", help="solve the Riccati equation of a scenario")
    sp.add_argument("--scenario", required=True, help="built-in name or config path")
    sp.add_argument("--out", help="also write the solution as JSON")
    sp.set_defaults(func=cmd_care)

    def common(sp):
        sp.add_argument("--scenario", help="built-in name or config path")
        sp.add_argument("--config", help="run configuration file")
        sp.add_argument("--reps", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--sigma", type=float, help="dither standard deviation")
        sp.add_argument("--jobs", type=int, help="worker processes (default 1)")
        sp.add_argument("--out", help="CSV output path")

    sp = sub.add_parser("stabilize", help="success rate of the dithered stabilization phase")
    common(sp)
    sp.add_argument("--tau-grid", help="a:b:step (inclusive) or comma list")
    sp.add_argument("--kappa-rule", type=_kappa_rule, default=(None, None),
                    help="powX for floor(tau^X) segments, fixed:N for N segments")
    sp.set_defaults(func=cmd_stabilize)

    sp = sub.add_parser("control", help="paired regret experiment")
    common(sp)
    sp.add_argument("--policy", help=f"comma list from {', '.join(POLICIES)}")
    sp.add_argument("--horizon", type=float)
    sp.add_argument("--tau0", type=float)
    sp.add_argument("--growth", type=float)
    sp.add_argument("--explore-sigma", type=float, help="rand-est action noise scale")
    sp.add_argument("--explore-exponent", type=float, help="rand-est decay exponent")
    sp.set_defaults(func=cmd_control)

    sp = sub.add_parser("plot", help="render an experiment CSV as SVG")
    sp.add_argument("--kind", required=True, choices=("stabilization", "regret", "estimation"))
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_plot)

    sp = sub.add_parser("check", help="run a property suite")
    sp.add_argument("--suite", default="all",
                    choices=("riccati", "posterior", "perturbation", "sde", "all"))
    sp.set_defaults(func=cmd_check)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (TSDiffusionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
