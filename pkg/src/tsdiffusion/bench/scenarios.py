"""Built-in benchmark systems and scenario loading.

Matrices are stored verbatim as decimal literals.  Each scenario also ships
an initial stabilizing feedback: the first ``N(0, 1)`` gain drawn with
``numpy.random.default_rng(1)`` that stabilizes the true drift, rounded to
eight decimals.
"""
import os
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, StabilityError
from ..policies import DitherSpec, EpisodeSchedule
from ..riccati import solve_care
from ..sde_sim import CostSpec, DriftParams, NoiseSpec

__all__ = ["Scenario", "BUILTIN", "list_scenarios", "load_scenario", "export_scenario"]


@dataclass(frozen=True)
class Scenario:
    name: str
    truth: DriftParams
    cost: CostSpec
    noise: NoiseSpec
    dt: float
    G_init: np.ndarray
    sigma: float = 5.0
    kappa_power: float = 1.5
    tau0: float = 20.0
    growth: float = 0.1
    description: str = ""

    def __post_init__(self):
        G = np.array(self.G_init, dtype=float, ndmin=2)
        G.setflags(write=False)
        object.__setattr__(self, "G_init", G)
        p, q = self.truth.p, self.truth.q
        if self.noise.p != p or self.cost.Qx.shape[0] != p or self.cost.Qu.shape[0] != q:
            raise ConfigurationError(f"scenario {self.name!r}: inconsistent dimensions")
        if G.shape != (q, p):
            raise ConfigurationError(f"scenario {self.name!r}: G_init must be {q} x {p}")
        if not self.dt > 0:
            raise ConfigurationError("dt must be positive")
        if np.linalg.eigvals(self.truth.A + self.truth.B @ G).real.max() >= 0:
            raise StabilityError(f"scenario {self.name!r}: G_init does not stabilize the truth")
        # raises when the truth is not stabilizable
        solve_care(self.truth, self.cost)

    @property
    def p(self):
        return self.truth.p

    @property
    def q(self):
        return self.truth.q

    def dither(self, sigma=None, kappa=None):
        return DitherSpec(sigma=self.sigma if sigma is None else sigma, kappa=kappa,
                          kappa_power=self.kappa_power)

    def schedule(self, tau0=None, growth=None):
        return EpisodeSchedule(tau0=self.tau0 if tau0 is None else tau0,
                               growth_hi=self.growth if growth is None else growth)


_COMMON = dict(Qx="eye", Qu=0.1, C=0.25, dt=1e-3)

BUILTIN = {
    "x29a": dict(
        description="X-29A lateral dynamics at 2000 ft",
        A=[[-0.16, 0.07, -1.0, 0.04],
           [-15.2, -2.6, 1.11, 0.0],
           [6.84, -0.1, -0.06, 0.0],
           [0.0, 1.0, 0.07, 0.0]],
        B=[[-0.0006, 0.0007],
           [1.343, 0.2345],
           [0.0897, -0.071],
           [0.0, 0.0]],
        G_init=[[0.34558419, 0.82161814, 0.33043708, -1.30315723],
                [0.90535587, 0.44637457, -0.53695324, 0.5811181]],
    ),
    "b747": dict(
        description="Boeing 747 lateral dynamics",
        A=[[-0.199, 0.003, -0.980, 0.038],
           [-3.868, -0.929, 0.471, -0.008],
           [1.591, -0.015, -0.309, 0.003],
           [-0.198, 0.958, 0.021, 0.0]],
        B=[[-0.001, 0.058],
           [0.296, 0.153],
           [0.012, -0.908],
           [0.015, 0.008]],
        G_init=[[0.89956642, -0.23666332, -0.62935492, 0.23151106],
                [0.70015175, 0.66365757, 1.97247385, 0.20916747]],
    ),
    "glucose": dict(
        description="blood glucose regulation",
        A=[[1.91, -2.82, 0.91],
           [1.0, -1.0, 0.0],
           [0.0, 1.0, -1.0]],
        B=[[-0.0992], [0.0], [0.0]],
        G_init=[[2.11783876, -1.11202076, -0.37760501]],
    ),
}


def list_scenarios():
    """``[(name, p, q, description)]`` for the built-in systems."""
    out = []
    for name, d in BUILTIN.items():
        B = np.asarray(d["B"])
        out.append((name, B.shape[0], B.shape[1], d["description"]))
    return out


def _builtin(name):
    d = BUILTIN[name]
    A = np.array(d["A"], dtype=float)
    B = np.array(d["B"], dtype=float)
    p, q = B.shape
    return Scenario(
        name=name, truth=DriftParams(A, B),
        cost=CostSpec(np.eye(p), _COMMON["Qu"] * np.eye(q)),
        noise=NoiseSpec(_COMMON["C"] * np.eye(p)), dt=_COMMON["dt"],
        G_init=np.array(d["G_init"], dtype=float), description=d["description"])


def load_scenario(name_or_path):
    """Return a validated :class:`Scenario` by built-in name or config-file path."""
    key = str(name_or_path)
    if key.lower() in BUILTIN:
        return _builtin(key.lower())
    if os.path.isfile(key):
        from .config import read_scenario
        return read_scenario(key)
    raise ConfigurationError(
        f"unknown scenario {key!r}; built-in names are {', '.join(BUILTIN)}")


def export_scenario(scenario, path=None):
    """Serialize ``scenario`` to config text; also writes it when ``path`` is given."""
    from .config import scenario_to_text
    text = scenario_to_text(scenario)
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text
