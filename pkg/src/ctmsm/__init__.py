"""Continuous-time marginal structural models with a latent binary confounder.

Simulation of state-dependent treatment and termination processes,
stabilized inverse-probability-of-treatment weighting, maximum-likelihood
and posterior inference for the process models with the confounder
marginalized out, and a replication-study harness with a command line.
"""

from .errors import (
    ConfigError,
    ConvergenceError,
    CtmsmError,
    DegenerateFitError,
    DomainError,
    EstimatorError,
    EvaluationError,
    InputError,
    ParseError,
    SamplerError,
    SimulationConfigError,
    ValidationError,
)
from .intensity import (
    EXP,
    OBS,
    ExpWorldParams,
    ObsWorldParams,
    cumulative_intensity,
    log_lik_A,
    log_lik_L,
    log_lik_Tmax,
    log_lik_Y,
    log_mark_density,
    log_prior_U,
    rate_A_exp,
    rate_A_obs,
    rate_Tmax,
)
from .msm import (
    FitResult,
    MsmParams,
    exposure_integral,
    fit_msm,
    msm_log_density,
    profile_objective_grad_check,
    weighted_pseudo_loglik,
)
from .paths import (
    CovariatePath,
    ScenarioConfig,
    Trajectory,
    TreatmentPath,
    dose_at,
    dose_left_limit,
    segments,
    validate,
)
from .simulate import RngStream, empirical_moments, simulate_dataset, simulate_subject

__all__ = [name for name in dir() if not name.startswith("_")]

__version__ = "0.1.0"
