"""Parametric intensity models and per-subject likelihood components.

Two generating regimes share the non-interventional models. In the
observational regime the treatment-change intensity and jump-mark mean are
log-linear / linear in the current covariate, baseline covariates, the dose
just before the change, and the latent binary confounder. In the
experimental regime they depend on the prior dose only. The termination
intensity is log-linear in time, the covariate left limit, baseline
covariates, and prior dose (observational), or in time and prior dose
(experimental); the confounder never enters it.

All cumulative intensities are integrated exactly: between treatment jumps
and covariate grid times every state variable is constant, so each refined
piece contributes ``exp(c) * len`` (no explicit time term) or
``exp(c) * (e^{b t2} - e^{b t1}) / b`` (with one).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, InputError
from .paths import CovariatePath, Trajectory, TreatmentPath, dose_left_limit

__all__ = [
    "ObsWorldParams",
    "ExpWorldParams",
    "rate_A_obs",
    "rate_A_exp",
    "rate_Tmax",
    "cumulative_intensity",
    "log_mark_density",
    "log_lik_A",
    "log_lik_Tmax",
    "log_lik_L",
    "log_lik_Y",
    "log_prior_U",
    "refined_breakpoints",
    "exp_rate_integral",
]

_LOG_2PI = math.log(2.0 * math.pi)

OBS = "obs"
EXP = "exp"


@dataclass(frozen=True)
class ObsWorldParams:
    """Observational-regime parameters.

    theta_A1 = (a1_0, a1_L, a1_Z, a1_a, delta_rate): log-linear
    treatment-change intensity; ``delta_rate`` multiplies the latent u.
    theta_A2 = (a2_0, a2_L, a2_Z, a2_a, delta_mark, sigma_A): Gaussian
    jump-mark model. theta_Tmax = (tm_0, tm_t, tm_L, tm_Z, tm_a): log-linear
    termination intensity with an explicit time slope. theta_L =
    (l_0, l_lag, l_a, l_Z, sigma_L): Gaussian autoregression on the covariate
    grid; the first grid point uses mean l_0 + l_Z.z. theta_U: Bernoulli
    probability of u = 1. theta_Y = (c_0, c_dose, c_kernel, c_L, c_Z, c_U,
    sigma_Y): conditional Gaussian outcome; ``c_kernel`` is the decay of the
    exposure kernel, ``c_dose`` its coefficient.
    """

    a1_0: float
    a1_L: float
    a1_Z: tuple[float, ...]
    a1_a: float
    delta_rate: float

    a2_0: float
    a2_L: float
    a2_Z: tuple[float, ...]
    a2_a: float
    delta_mark: float
    sigma_A: float

    tm_0: float
    tm_t: float
    tm_L: float
    tm_Z: tuple[float, ...]
    tm_a: float

    l_0: float
    l_lag: float
    l_a: float
    l_Z: tuple[float, ...]
    sigma_L: float

    theta_U: float

    c_0: float
    c_dose: float
    c_kernel: float
    c_L: float
    c_Z: tuple[float, ...]
    c_U: float
    sigma_Y: float

    def __post_init__(self):
        for name in ("a1_Z", "a2_Z", "tm_Z", "l_Z", "c_Z"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if not (self.sigma_A > 0 and self.sigma_L > 0 and self.sigma_Y > 0):
            raise InputError("sigma_A, sigma_L, sigma_Y must be positive")
        if not (0.0 < self.theta_U < 1.0):
            raise InputError("theta_U must lie in (0, 1)")
        if self.c_kernel < 0:
            raise InputError("c_kernel must be nonnegative")

    @property
    def p_z(self) -> int:
        return len(self.a1_Z)


@dataclass(frozen=True)
class ExpWorldParams:
    """Experimental-regime (marginal) parameters for the interventional part:
    alpha_A1 = (e1_0, e1_a), alpha_A2 = (e2_0, e2_a, sigma_AE),
    alpha_Tmax = (et_0, et_t, et_a).
    """

    e1_0: float
    e1_a: float

    e2_0: float
    e2_a: float
    sigma_AE: float

    et_0: float
    et_t: float
    et_a: float

    def __post_init__(self):
        if not self.sigma_AE > 0:
            raise InputError("sigma_AE must be positive")


def rate_A_obs(params: ObsWorldParams, t, a_left, l_t, z, u) -> float:
    """Treatment-change intensity under the observational regime."""
    lin = (
        params.a1_0
        + params.a1_L * l_t
        + float(np.dot(params.a1_Z, z))
        + params.a1_a * a_left
        + params.delta_rate * u
    )
    return math.exp(lin)


def rate_A_exp(params: ExpWorldParams, t, a_left) -> float:
    """Treatment-change intensity under the experimental regime."""
    return math.exp(params.e1_0 + params.e1_a * a_left)


def rate_Tmax(params, world: str, t, a_left, l_left, z) -> float:
    """Termination intensity; the latent confounder never enters."""
    if world == OBS:
        lin = (
            params.tm_0
            + params.tm_t * t
            + params.tm_L * l_left
            + float(np.dot(params.tm_Z, z))
            + params.tm_a * a_left
        )
    elif world == EXP:
        lin = params.et_0 + params.et_t * t + params.et_a * a_left
    else:
        raise DomainError(f"unknown world {world!r}")
    return math.exp(lin)


def exp_rate_integral(c: float, b: float, t1: float, t2: float) -> float:
    """Integral of exp(c + b t) over [t1, t2], stable for small b."""
    if t2 < t1:
        raise DomainError("segment end precedes its start")
    if b == 0.0:
        return (t2 - t1) * math.exp(c)
    # exp(c + b t1) * (exp(b (t2 - t1)) - 1) / b avoids cancellation
    return math.exp(c + b * t1) * math.expm1(b * (t2 - t1)) / b


def refined_breakpoints(
    a_path: TreatmentPath, l_path: CovariatePath, t_end: float
) -> list[float]:
    """Sorted cut points of [0, t_end]: treatment jumps and covariate grid
    times, plus the endpoints. State variables are constant between cuts.
    """
    cuts = {0.0, t_end}
    for t, _ in a_path.jumps:
        if 0.0 < t < t_end:
            cuts.add(t)
    for t in l_path.grid:
        if 0.0 < t < t_end:
            cuts.add(t)
    return sorted(cuts)


def _segment_states(a_path, l_path, t_end):
    """Yield (t1, t2, dose, l) with dose and l constant on the open piece."""
    cuts = refined_breakpoints(a_path, l_path, t_end)
    from .paths import dose_at  # local import avoids cycle at module load

    for t1, t2 in zip(cuts, cuts[1:]):
        yield t1, t2, dose_at(a_path, t1), l_path.value_at(t1)


def cumulative_intensity(
    rate_spec: str,
    params,
    a_path: TreatmentPath,
    l_path: CovariatePath,
    z,
    u,
    t_end: float,
) -> float:
    """Exact integral of the requested intensity over [0, t_end].

    ``rate_spec`` is one of "A_obs", "A_exp", "Tmax_obs", "Tmax_exp".
    """
    if t_end < 0:
        raise DomainError("t_end must be nonnegative")
    if t_end == 0.0:
        return 0.0
    total = 0.0
    for t1, t2, dose, l in _segment_states(a_path, l_path, t_end):
        if rate_spec == "A_obs":
            c = (
                params.a1_0
                + params.a1_L * l
                + float(np.dot(params.a1_Z, z))
                + params.a1_a * dose
                + params.delta_rate * u
            )
            b = 0.0
        elif rate_spec == "A_exp":
            c = params.e1_0 + params.e1_a * dose
            b = 0.0
        elif rate_spec == "Tmax_obs":
            c = (
                params.tm_0
                + params.tm_L * l
                + float(np.dot(params.tm_Z, z))
                + params.tm_a * dose
            )
            b = params.tm_t
        elif rate_spec == "Tmax_exp":
            c = params.et_0 + params.et_a * dose
            b = params.et_t
        else:
            raise DomainError(f"unknown rate_spec {rate_spec!r}")
        total += exp_rate_integral(c, b, t1, t2)
    return total


def log_mark_density(params, world: str, new_dose, t, a_left, l_t, z, u) -> float:
    """Log Gaussian density of the new dose drawn at a treatment change."""
    if world == OBS:
        mean = (
            params.a2_0
            + params.a2_L * l_t
            + float(np.dot(params.a2_Z, z))
            + params.a2_a * a_left
            + params.delta_mark * u
        )
        sigma = params.sigma_A
    elif world == EXP:
        mean = params.e2_0 + params.e2_a * a_left
        sigma = params.sigma_AE
    else:
        raise DomainError(f"unknown world {world!r}")
    if sigma <= 0:
        raise InputError("mark scale must be positive")
    resid = (new_dose - mean) / sigma
    return -0.5 * _LOG_2PI - math.log(sigma) - 0.5 * resid * resid


def log_lik_A(trajectory: Trajectory, params, world: str, u) -> float:
    """Treatment-process log likelihood: jump rates and marks minus the
    cumulative intensity over [0, t_max].
    """
    a_path, l_path, z = trajectory.a_path, trajectory.l_path, trajectory.z
    total = 0.0
    for t_j, dose_j in a_path.jumps:
        a_left = dose_left_limit(a_path, t_j)
        l_t = l_path.value_at(t_j)
        if world == OBS:
            total += math.log(rate_A_obs(params, t_j, a_left, l_t, z, u))
        else:
            total += math.log(rate_A_exp(params, t_j, a_left))
        total += log_mark_density(params, world, dose_j, t_j, a_left, l_t, z, u)
    spec = "A_obs" if world == OBS else "A_exp"
    total -= cumulative_intensity(spec, params, a_path, l_path, z, u, trajectory.t_max)
    return total


def log_lik_Tmax(trajectory: Trajectory, params, world: str) -> float:
    """Termination log likelihood: rate at t_max when terminated, always the
    survival term over [0, t_max].
    """
    a_path, l_path, z = trajectory.a_path, trajectory.l_path, trajectory.z
    total = 0.0
    if trajectory.terminated_flag == 1:
        t = trajectory.t_max
        a_left = dose_left_limit(a_path, t)
        l_left = l_path.value_left_limit(t)
        total += math.log(rate_Tmax(params, world, t, a_left, l_left, z))
    spec = "Tmax_obs" if world == OBS else "Tmax_exp"
    total -= cumulative_intensity(
        spec, params, a_path, l_path, z, 0, trajectory.t_max
    )
    return total


def log_lik_L(trajectory: Trajectory, params: ObsWorldParams) -> float:
    """Covariate-transition log likelihood over the recorded grid points.

    The first recorded point (t = 0) has mean l_0 + l_Z.z; later points are
    autoregressive with the prior dose entering the mean.
    """
    l_path, a_path, z = trajectory.l_path, trajectory.a_path, trajectory.z
    z_term = float(np.dot(params.l_Z, z))
    total = 0.0
    prev = None
    for t_k, l_k in zip(l_path.grid, l_path.values):
        if prev is None:
            mean = params.l_0 + z_term
        else:
            a_left = dose_left_limit(a_path, t_k)
            mean = params.l_0 + params.l_lag * prev + params.l_a * a_left + z_term
        resid = (l_k - mean) / params.sigma_L
        total += -0.5 * _LOG_2PI - math.log(params.sigma_L) - 0.5 * resid * resid
        prev = l_k
    return total


def log_lik_Y(trajectory: Trajectory, params: ObsWorldParams, u, exposure: float) -> float:
    """Conditional Gaussian outcome log density given the exposure summary."""
    mean = (
        params.c_0
        + params.c_dose * exposure
        + params.c_L * trajectory.l_path.value_at(trajectory.t_max)
        + float(np.dot(params.c_Z, trajectory.z))
        + params.c_U * u
    )
    resid = (trajectory.y - mean) / params.sigma_Y
    return -0.5 * _LOG_2PI - math.log(params.sigma_Y) - 0.5 * resid * resid


def log_prior_U(u: int, theta_U: float) -> float:
    """Bernoulli log mass of the latent confounder."""
    if u not in (0, 1):
        raise DomainError(f"u must be 0 or 1, got {u!r}")
    if not (0.0 < theta_U < 1.0):
        raise DomainError(f"theta_U must lie in (0, 1), got {theta_U!r}")
    return math.log(theta_U) if u == 1 else math.log1p(-theta_U)
