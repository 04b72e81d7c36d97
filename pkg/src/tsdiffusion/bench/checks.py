"""Self-contained property suites behind ``tsdiffusion check``.

Each check returns ``(ok, detail)``; a suite is an ordered list of checks.
"""
import time

import numpy as np

from .. import posterior as post
from ..errors import ConditionError
from ..riccati import (cost_of_feedback, eig_perturbation_bound,
                       feedback_directional_derivative, largest_real_part_shift,
                       riccati_directional_derivative, solve_care, solve_lyapunov)
from ..sde_sim import (CostSpec, DriftParams, NoiseSpec, matrix_exponential,
                       ou_stationary_covariance, sample_wiener_increments,
                       simulate_feedback)
from .scenarios import BUILTIN, load_scenario

__all__ = ["SUITES", "run_suite", "random_system", "random_stabilizing_gain", "hautus_margin"]


def hautus_margin(A, B):
    """``min over eigenvalues l of A`` of ``sigma_min([A - l I, B])``."""
    p = A.shape[0]
    return min(np.linalg.svd(np.hstack([A - lam * np.eye(p), B]), compute_uv=False)[-1]
               for lam in np.linalg.eigvals(A))


def random_system(rng, p, q, min_margin=0.2):
    """Gaussian ``A ~ N(0, 1/p)``, ``B ~ N(0, 1)`` kept away from uncontrollability.

    Draws whose Hautus margin is below ``min_margin`` are rejected: near such
    pairs ``||K||`` explodes and no double-precision solver can meet an
    absolute residual tolerance.
    """
    while True:
        A = rng.standard_normal((p, p)) / np.sqrt(p)
        B = rng.standard_normal((p, q))
        if hautus_margin(A, B) >= min_margin:
            return DriftParams(A, B)


def random_stabilizing_gain(drift, rng, scale=0.5):
    """Optimal gain of a random cost plus a small perturbation that keeps it stable."""
    sol = solve_care(drift, CostSpec(np.eye(drift.p), np.eye(drift.q)))
    while True:
        G = sol.gain + scale * rng.standard_normal(sol.gain.shape)
        if np.linalg.eigvals(drift.A + drift.B @ G).real.max() < 0:
            return G
        scale /= 2


def _care_random():
    rng = np.random.default_rng(11)
    t = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        p, q = rng.integers(1, 7), rng.integers(1, 4)
        d = random_system(rng, p, q)
        sol = solve_care(d, CostSpec(np.eye(p), np.eye(q)))
        if np.linalg.eigvalsh(sol.K).min() < -1e-10 or sol.margin <= 0:
            return False, "unstable closed loop or indefinite K"
        worst = max(worst, sol.residual)
    return worst <= 1e-8, f"max residual {worst:.2e} in {time.perf_counter() - t:.2f}s"


def _care_closed_form():
    one = solve_care(DriftParams([[0.0]], [[1.0]]), CostSpec([[1.0]], [[1.0]]))
    two = solve_care(DriftParams(-np.eye(2), np.eye(2)), CostSpec(np.eye(2), np.eye(2)))
    err = max(abs(one.K[0, 0] - 1.0), np.abs(two.K - (np.sqrt(2) - 1) * np.eye(2)).max())
    return err <= 1e-12, f"max error {err:.1e}"


def _care_scenarios():
    out = []
    for name in BUILTIN:
        s = load_scenario(name)
        sol = solve_care(s.truth, s.cost)
        out.append((name, sol.residual, sol.margin))
    ok = all(r <= 1e-8 and m > 0 for _, r, m in out)
    return ok, "; ".join(f"{n}: residual {r:.1e}, margin {m:.3f}" for n, r, m in out)


def _derivative_fd():
    s = load_scenario("x29a")
    rng = np.random.default_rng(3)
    sol = solve_care(s.truth, s.cost)
    eps, worst = 1e-6, 0.0
    for _ in range(5):
        X = rng.standard_normal((s.p, s.p))
        Y = rng.standard_normal((s.p, s.q))
        nrm = np.sqrt(np.sum(X ** 2) + np.sum(Y ** 2))
        X, Y = X / nrm, Y / nrm
        Kp = solve_care(DriftParams(s.truth.A + eps * X, s.truth.B + eps * Y), s.cost)
        Km = solve_care(DriftParams(s.truth.A - eps * X, s.truth.B - eps * Y), s.cost)
        fd = (Kp.K - Km.K) / (2 * eps)
        dK = riccati_directional_derivative(s.truth, s.cost, X, Y, solution=sol)
        fdg = ((s.truth.B + eps * Y).T @ Kp.K - (s.truth.B - eps * Y).T @ Km.K) / (2 * eps)
        dG = feedback_directional_derivative(s.truth, s.cost, X, Y, solution=sol)
        worst = max(worst, np.linalg.norm(fd - dK) / np.linalg.norm(dK),
                    np.linalg.norm(fdg - dG) / np.linalg.norm(dG))
    return worst <= 1e-4, f"max relative gap {worst:.1e}"


def _dominance():
    rng = np.random.default_rng(5)
    worst = np.inf
    for name in BUILTIN:
        s = load_scenario(name)
        K = solve_care(s.truth, s.cost).K
        for _ in range(20):
            P = cost_of_feedback(s.truth, s.cost, random_stabilizing_gain(s.truth, rng))
            worst = min(worst, np.linalg.eigvalsh(P - K).min())
    return worst >= -1e-8, f"min eigenvalue of P - K {worst:.2e}"


def _gain_invariance():
    s = load_scenario("x29a")
    a = solve_care(s.truth, s.cost)
    b = solve_care(s.truth, s.cost.scaled(7.0))
    err = max(np.abs(b.K - 7.0 * a.K).max() / np.abs(a.K).max(), np.abs(b.gain - a.gain).max())
    return err <= 1e-9, f"max deviation {err:.1e}"


def _lyapunov_closed_form():
    rng = np.random.default_rng(2)
    Q = rng.standard_normal((3, 3))
    Q = Q + Q.T
    e1 = np.abs(solve_lyapunov(-0.5 * np.eye(3), Q) - Q).max()
    e2 = np.abs(solve_lyapunov(np.diag([-1.0, -3.0]), np.eye(2)) - np.diag([0.5, 1 / 6])).max()
    return max(e1, e2) <= 1e-12, f"max error {max(e1, e2):.1e}"


def _batch_equivalence():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((501, 3))
    U = rng.standard_normal((500, 2))
    one = post.accumulate_path(post.init_prior(3, 2), X, U, 1e-3)
    chunked = post.init_prior(3, 2)
    for a, b in ((0, 17), (17, 250), (250, 251), (251, 500)):
        chunked = post.accumulate_path(chunked, X[a:b + 1], U[a:b], 1e-3)
    ok = (np.array_equal(one.precision, chunked.precision)
          and np.array_equal(one.cross_moment, chunked.cross_moment))
    return ok, "bit-equal" if ok else "chunked sums differ"


def _monotone_information():
    rng = np.random.default_rng(9)
    st = post.init_prior(2, 1)
    lmin, ldet = [], []
    for _ in range(200):
        st = post.accumulate(st, rng.standard_normal(3), rng.standard_normal(2), 0.01)
        w = np.linalg.eigvalsh(st.precision)
        lmin.append(w[0])
        ldet.append(np.sum(np.log(w)))
    ok = np.all(np.diff(lmin) >= -1e-12) and np.all(np.diff(ldet) >= -1e-12)
    return bool(ok), f"final lambda_min {lmin[-1]:.3f}"


def _rank_one():
    st = post.init_prior(2, 1)
    e1 = np.eye(3)[0]
    for _ in range(1000):
        st = post.accumulate(st, e1, np.array([0.01, -0.02]), 0.01)
    mu, Sig = post.posterior_mean_cov(st)
    exact = np.linalg.inv(np.eye(3) + 10.0 * np.outer(e1, e1)) @ st.cross_moment
    err = np.abs(mu - exact).max()
    return err <= 1e-12, f"max deviation from closed form {err:.1e}"


def _sample_covariance():
    rng = np.random.default_rng(4)
    st = post.init_prior(3, 1)
    draws = np.array([post.sample_posterior(st, rng) for _ in range(20000)])
    cols = draws.transpose(0, 2, 1).reshape(-1, 4)
    err = np.abs(np.cov(cols.T) - np.eye(4)).max()
    return err <= 0.03, f"max covariance deviation {err:.3f}"


def _perturbation_bound():
    rng = np.random.default_rng(6)
    hits, n = 0, 0
    while n < 1000:
        V = rng.standard_normal((4, 4))
        if np.linalg.cond(V) >= 1e4:
            continue
        M = V @ np.diag(rng.standard_normal(4)) @ np.linalg.inv(V)
        E = rng.uniform(0.01, 2.0) * rng.standard_normal((4, 4))
        try:
            bound = eig_perturbation_bound(M, E)
        except ConditionError:
            continue
        n += 1
        hits += bound >= abs(largest_real_part_shift(M, E))
    return hits == n, f"{hits}/{n} dominated"


def _normal_bound():
    rng = np.random.default_rng(7)
    Q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    M = Q @ np.diag([-1.0, -2.0, 0.5, 3.0]) @ Q.T
    E = 3.0 * rng.standard_normal((4, 4))
    b = eig_perturbation_bound(M, E)
    want = max(1.0, np.linalg.norm(E, 2))
    return abs(b - want) <= 1e-9 * want, f"bound {b:.6f} vs {want:.6f}"


def _euler_order():
    A = np.array([[-1.0, 0.5], [-0.3, -2.0]])
    x0 = np.array([1.0, -1.0])
    exact = matrix_exponential(A) @ x0
    errs = []
    for dt in (1e-2, 5e-3):
        x = x0.copy()
        for _ in range(int(round(1 / dt))):
            x = x + A @ x * dt
        errs.append(np.linalg.norm(x - exact))
    r = errs[1] / errs[0]
    return 0.4 <= r <= 0.6, f"error ratio {r:.3f}"


def _ou_covariance():
    drift = DriftParams(np.array([[0.0, 1.0], [0.0, 0.0]]), np.eye(2))
    G = np.array([[-1.0, -1.0], [0.0, -2.0]])
    noise = NoiseSpec(np.eye(2))
    P = ou_stationary_covariance(drift.A + drift.B @ G, noise.C)
    rng = np.random.default_rng(12)
    covs = []
    for _ in range(20):
        log = simulate_feedback(drift, noise, G, None, None, 200.0, 1e-3, rng=rng)
        X = log.states[10000:]
        covs.append(X.T @ X / len(X))
    err = np.linalg.norm(np.mean(covs, axis=0) - P) / np.linalg.norm(P)
    return err <= 0.1, f"relative Frobenius gap {err:.3f}"


def _wiener_moments():
    rng = np.random.default_rng(13)
    C = np.array([[1.0, 0.3], [0.3, 0.5]])
    dW = sample_wiener_increments(NoiseSpec(C), 1e-2, 200000, rng)
    err = np.abs(np.cov(dW.T) / 1e-2 - C).max()
    lag = np.corrcoef(dW[:-1, 0], dW[1:, 0])[0, 1]
    ok = err <= 0.02 and abs(lag) <= 3 / np.sqrt(len(dW))
    return ok, f"covariance gap {err:.4f}, lag-1 correlation {lag:.4f}"


SUITES = {
    "riccati": [("CARE on 100 random systems", _care_random),
                ("CARE closed forms", _care_closed_form),
                ("CARE on built-in scenarios", _care_scenarios),
                ("Lyapunov closed forms", _lyapunov_closed_form),
                ("directional derivatives vs finite differences", _derivative_fd),
                ("suboptimal feedback dominates K", _dominance),
                ("gain invariant to cost scaling", _gain_invariance)],
    "posterior": [("chunked accumulation is bit-equal", _batch_equivalence),
                  ("information is monotone", _monotone_information),
                  ("rank-one closed form", _rank_one),
                  ("sample column covariance", _sample_covariance)],
    "perturbation": [("bound dominates the eigenvalue shift", _perturbation_bound),
                     ("normal matrices", _normal_bound)],
    "sde": [("Euler first-order convergence", _euler_order),
            ("OU stationary covariance", _ou_covariance),
            ("Wiener increment moments", _wiener_moments)],
}


def run_suite(name):
    """Run one suite; returns ``[(check_name, ok, detail)]``."""
    out = []
    for label, fn in SUITES[name]:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((label, bool(ok), detail))
    return out
