import warnings

import numpy as np
import pytest

from tsdiffusion.bench.scenarios import load_scenario
from tsdiffusion.policies import ExcitationWarning


@pytest.fixture(scope="session")
def x29a():
    return load_scenario("x29a")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(autouse=True)
def _quiet_excitation():
    # kappa = floor(tau^1.5) always trips this warning
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ExcitationWarning)
        yield


def random_stable(rng, p, margin=0.1):
    """Random Hurwitz matrix: shift a Gaussian matrix left of its abscissa."""
    M = rng.standard_normal((p, p))
    return M - (np.linalg.eigvals(M).real.max() + margin + rng.uniform(0, 1)) * np.eye(p)


_VERDICTS = {}


@pytest.fixture
def verdict():
    """Record and print a one-line PASS/FAIL verdict for an acceptance criterion."""
    def record(n, ok, detail):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _VERDICTS[n] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[n])
