"""Thompson sampling control of linear diffusion processes.

Submodules
----------
sde_sim
    Euler--Maruyama simulation, Wiener increments, stationary covariance.
riccati
    Riccati and Lyapunov solvers, sensitivities, stability margins.
posterior
    Matrix-normal belief over the drift parameter.
policies
    Dithered stabilization, episodic Thompson sampling and baselines.
metrics
    Regret, estimation error and diagnostics.
bench
    Scenario registry, experiment harness and command-line interface.
"""
from .errors import (ConditionError, ConfigurationError, CovarianceError, DomainError,
                     PairingError, ShapeError, SolverError, StabilityError,
                     TSDiffusionError)
from .metrics import (EpisodeRecord, ExperimentResult, evaluate, normalize_estimation_error,
                      normalize_regret, regret)
from .policies import (DitherSpec, EpisodeSchedule, ExplorationSpec, ResamplePolicy,
                       check_failure_event, run_algorithm1, run_algorithm2, run_optimal,
                       run_randomized_estimate)
from .posterior import (PosteriorState, accumulate, estimation_error, init_prior,
                        posterior_mean_cov, sample_posterior)
from .riccati import (RiccatiSolution, cost_of_feedback, eig_perturbation_bound,
                      feedback_directional_derivative, riccati_directional_derivative,
                      solve_care, solve_lyapunov, stability_margin)
from .sde_sim import (CostSpec, DriftParams, NoiseSpec, TrajectoryLog, euler_step,
                      matrix_exponential, ou_stationary_covariance,
                      sample_wiener_increments, simulate_feedback)

__version__ = "0.1.0"
