"""INI-style configuration files.

Layout::

    [scenario]
    name = x29a            ; built-in base, optional when [drift] is given
    [drift]
    A = [[...], ...]       ; row-major nested lists
    B = [[...], ...]
    [cost]
    Qx = ...
    Qu = ...
    [noise]
    C = ...
    [sim]
    dt = 0.001
    horizon = 600
    reps = 20
    seed = 0
    jobs = 1
    tau_grid = 4:20:4
    [policy]
    policies = ts,rand-est
    G_init = ...
    sigma = 5
    kappa_power = 1.5
    tau0 = 20
    growth = 0.1
    explore_sigma = 5
    explore_exponent = 0.25

Every key is optional except that a scenario must be fully determined by
``[scenario] name`` or the matrix sections.
"""
import configparser
import json
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ConfigurationError, SchemaError
from ..sde_sim import CostSpec, DriftParams, NoiseSpec
from .scenarios import BUILTIN, Scenario, load_scenario

__all__ = ["RunConfig", "read_scenario", "read_run_config", "scenario_to_text",
           "parse_tau_grid", "POLICIES"]

POLICIES = ("ts", "rand-est", "optimal")
_MAX_SEED = 2 ** 64 - 1


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario
    policies: tuple = ("ts",)
    horizon: float = 600.0
    reps: int = 100
    seed: int = 0
    checkpoints: tuple | None = None
    out: str | None = None
    tau_grid: tuple = (4.0, 8.0, 12.0, 16.0, 20.0)
    jobs: int = 1
    sigma: float | None = None
    kappa: int | None = None
    tau0: float | None = None
    growth: float | None = None
    explore_sigma: float | None = None
    explore_exponent: float = 0.25
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if int(self.reps) < 1:
            raise ConfigurationError("reps must be at least 1")
        if not (0 <= int(self.seed) <= _MAX_SEED):
            raise ConfigurationError("seed must fit in 64 unsigned bits")
        if int(self.jobs) < 1:
            raise ConfigurationError("jobs must be at least 1")
        pols = tuple(self.policies)
        bad = [p for p in pols if p not in POLICIES]
        if bad or not pols:
            raise ConfigurationError(f"unknown policy {bad}; choose from {POLICIES}")
        object.__setattr__(self, "policies", pols)
        if self.horizon < self.schedule().tau0:
            raise ConfigurationError("horizon must be at least tau0")
        if not self.tau_grid:
            raise ConfigurationError("tau grid is empty")
        if min(self.tau_grid) < 10 * self.scenario.dt:
            raise ConfigurationError("every tau must be at least 10 time steps")
        if self.checkpoints is not None:
            cps = tuple(float(c) for c in self.checkpoints)
            if any(b <= a for a, b in zip(cps, cps[1:])):
                raise ConfigurationError("checkpoints must be strictly increasing")
            object.__setattr__(self, "checkpoints", cps)

    def schedule(self):
        return self.scenario.schedule(self.tau0, self.growth)

    def dither(self):
        return self.scenario.dither(self.sigma, self.kappa)

    def with_overrides(self, **kw):
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def parse_tau_grid(text):
    """``"a:b:step"`` (inclusive) or a comma list."""
    text = str(text).strip()
    try:
        if ":" in text:
            a, b, s = (float(x) for x in text.split(":"))
            if s <= 0 or b < a:
                raise ConfigurationError(f"bad tau grid {text!r}")
            n = int(np.floor((b - a) / s + 1e-9))
            return tuple(float(a + i * s) for i in range(n + 1))
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigurationError(f"bad tau grid {text!r}") from exc


def _matrix(cp, section, key, fallback=None):
    if not cp.has_option(section, key):
        if fallback is None:
            raise SchemaError(f"missing [{section}] {key}")
        return fallback
    try:
        M = np.array(json.loads(cp.get(section, key)), dtype=float)
    except (ValueError, TypeError) as exc:
        raise SchemaError(f"[{section}] {key} is not a numeric nested list") from exc
    if M.ndim == 1:
        M = M[:, None] if section == "drift" and key == "B" else np.diag(M)
    if M.ndim != 2:
        raise SchemaError(f"[{section}] {key} must be a matrix")
    return M


def _read(path):
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    known = {"scenario", "drift", "cost", "noise", "sim", "policy"}
    unknown = set(cp.sections()) - known
    if unknown:
        raise SchemaError(f"{path}: unknown sections {sorted(unknown)}")
    return cp


def _scenario_from(cp, path):
    base = None
    name = cp.get("scenario", "name", fallback=None)
    if name is not None and name.lower() in BUILTIN:
        base = load_scenario(name)
    if base is None and not cp.has_section("drift"):
        raise SchemaError(f"{path}: needs [drift] or a built-in [scenario] name")
    A = _matrix(cp, "drift", "A", None if base is None else base.truth.A)
    B = _matrix(cp, "drift", "B", None if base is None else base.truth.B)
    p, q = B.shape
    truth = DriftParams(A, B)
    Qx = _matrix(cp, "cost", "Qx", np.eye(p) if base is None else base.cost.Qx)
    Qu = _matrix(cp, "cost", "Qu", 0.1 * np.eye(q) if base is None else base.cost.Qu)
    C = _matrix(cp, "noise", "C", 0.25 * np.eye(p) if base is None else base.noise.C)
    G = _matrix(cp, "policy", "G_init", None if base is None else base.G_init) \
        if (base is not None or cp.has_option("policy", "G_init")) else None
    if G is None:
        from ..policies import draw_stabilizing_gain
        G = np.round(draw_stabilizing_gain(truth, np.random.default_rng(1)), 8)
    get = lambda s, k, d: cp.getfloat(s, k, fallback=d)
    return Scenario(
        name=name or str(path), truth=truth, cost=CostSpec(Qx, Qu), noise=NoiseSpec(C),
        dt=get("sim", "dt", 1e-3 if base is None else base.dt), G_init=G,
        sigma=get("policy", "sigma", 5.0), kappa_power=get("policy", "kappa_power", 1.5),
        tau0=get("policy", "tau0", 20.0), growth=get("policy", "growth", 0.1),
        description=cp.get("scenario", "description", fallback=""))


def read_scenario(path):
    return _scenario_from(_read(path), path)


def read_run_config(path):
    """Parse a full run configuration."""
    cp = _read(path)
    scn = _scenario_from(cp, path)
    kw = {"scenario": scn}
    if cp.has_option("policy", "policies"):
        kw["policies"] = tuple(s.strip() for s in cp.get("policy", "policies").split(",") if s.strip())
    for key, conv in (("horizon", float), ("reps", int), ("seed", int), ("jobs", int)):
        if cp.has_option("sim", key):
            kw[key] = conv(cp.get("sim", key))
    if cp.has_option("sim", "tau_grid"):
        kw["tau_grid"] = parse_tau_grid(cp.get("sim", "tau_grid"))
    if cp.has_option("sim", "checkpoints"):
        kw["checkpoints"] = tuple(json.loads(cp.get("sim", "checkpoints")))
    if cp.has_option("sim", "out"):
        kw["out"] = cp.get("sim", "out")
    for key in ("explore_sigma", "explore_exponent"):
        if cp.has_option("policy", key):
            kw[key] = cp.getfloat("policy", key)
    if cp.has_option("policy", "kappa"):
        kw["kappa"] = cp.getint("policy", "kappa")
    return RunConfig(**kw)


def _dump(M):
    return json.dumps(np.asarray(M, dtype=float).tolist())


def scenario_to_text(scn):
    """Config text that :func:`read_scenario` maps back to an equal scenario."""
    lines = [
        "[scenario]", f"name = {scn.name}",
        *([f"description = {scn.description}"] if scn.description else []), "",
        "[drift]", f"A = {_dump(scn.truth.A)}", f"B = {_dump(scn.truth.B)}", "",
        "[cost]", f"Qx = {_dump(scn.cost.Qx)}", f"Qu = {_dump(scn.cost.Qu)}", "",
        "[noise]", f"C = {_dump(scn.noise.C)}", "",
        "[sim]", f"dt = {scn.dt!r}", "",
        "[policy]", f"G_init = {_dump(scn.G_init)}", f"sigma = {scn.sigma!r}",
        f"kappa_power = {scn.kappa_power!r}", f"tau0 = {scn.tau0!r}",
        f"growth = {scn.growth!r}", "",
    ]
    return "\n".join(lines)
