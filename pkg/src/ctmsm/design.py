"""Stacked design arrays for fast dataset-level likelihood evaluation.

Every per-subject likelihood component is log-linear or Gaussian in a fixed
feature row, so a dataset flattens into a handful of row-stacked arrays:
one row per treatment change, per refined constant-state segment, per
covariate grid point, and per subject. All evaluation functions below are
then matrix-vector products plus ``bincount`` reductions by subject, and
subject resampling reduces to a multiplicity weight vector.

Column layouts (the z block has ``p_z`` columns):

* treatment rate/mark rows:   [1, l(t), z..., a(t-)]
* termination rows:           [1, l(t-), z..., a(t-)]  (time slope separate)
* covariate transition rows:  [1, l_prev, a(t-), z...] (l_prev = 0 at t = 0)
* outcome rows:               [1, l(t_max), z...]      (exposure, u separate)

The experimental-regime models read columns [0, -1] of the same rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import InputError
from .intensity import ExpWorldParams, ObsWorldParams, refined_breakpoints
from .msm import MsmData
from .paths import Trajectory, dose_at, dose_left_limit

__all__ = ["DatasetDesign", "build_design", "as_design"]

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class DatasetDesign:
    n: int
    p_z: int
    # treatment-change rows
    jump_subject: np.ndarray
    jump_x: np.ndarray
    jump_dose: np.ndarray
    n_jumps: np.ndarray  # per subject
    # refined constant-state segments
    seg_subject: np.ndarray
    seg_x: np.ndarray
    seg_t1: np.ndarray
    seg_t2: np.ndarray
    seg_len: np.ndarray
    # termination
    term_flag: np.ndarray
    term_x: np.ndarray
    t_max: np.ndarray
    # covariate transitions
    l_subject: np.ndarray
    l_x: np.ndarray
    l_value: np.ndarray
    # outcome
    y: np.ndarray
    y_x: np.ndarray
    u_obs: Optional[np.ndarray]
    # exposure machinery shared with the outcome-model fit
    msm: MsmData

    # -- treatment process -------------------------------------------------

    def a_obs_parts(self, theta: ObsWorldParams):
        """Per-subject pieces of the observational treatment log likelihood
        that do not depend on u: (jump_lin, surv0, mark_r1, mark_r2)."""
        a1 = np.array([theta.a1_0, theta.a1_L, *theta.a1_Z, theta.a1_a])
        a2 = np.array([theta.a2_0, theta.a2_L, *theta.a2_Z, theta.a2_a])
        jump_lin = _bincount(self.jump_subject, self.jump_x @ a1, self.n)
        with np.errstate(over="ignore"):
            seg_rate = np.exp(self.seg_x @ a1) * self.seg_len
        surv0 = _bincount(self.seg_subject, seg_rate, self.n)
        resid = self.jump_dose - self.jump_x @ a2
        r1 = _bincount(self.jump_subject, resid, self.n)
        r2 = _bincount(self.jump_subject, resid * resid, self.n)
        return jump_lin, surv0, r1, r2

    def loglik_a_obs_given_u(self, theta: ObsWorldParams, u, parts=None) -> np.ndarray:
        """Per-subject treatment log likelihood at a fixed confounder value;
        ``u`` is a scalar or per-subject array."""
        if parts is None:
            parts = self.a_obs_parts(theta)
        jump_lin, surv0, r1, r2 = parts
        u = np.asarray(u, dtype=float)
        du_rate = theta.delta_rate * u
        du_mark = theta.delta_mark * u
        sig = theta.sigma_A
        quad = r2 - 2.0 * du_mark * r1 + self.n_jumps * du_mark * du_mark
        return (
            jump_lin
            + du_rate * self.n_jumps
            - np.exp(du_rate) * surv0
            - self.n_jumps * (math.log(sig) + 0.5 * _LOG_2PI)
            - quad / (2.0 * sig * sig)
        )

    def loglik_a_exp(self, alpha: ExpWorldParams) -> np.ndarray:
        """Per-subject treatment log likelihood under the experimental
        regime (prior dose only)."""
        jump_lin = _bincount(
            self.jump_subject,
            alpha.e1_0 + alpha.e1_a * self.jump_x[:, -1],
            self.n,
        )
        with np.errstate(over="ignore"):
            seg_rate = np.exp(alpha.e1_0 + alpha.e1_a * self.seg_x[:, -1]) * self.seg_len
        surv = _bincount(self.seg_subject, seg_rate, self.n)
        resid = self.jump_dose - (alpha.e2_0 + alpha.e2_a * self.jump_x[:, -1])
        sig = alpha.sigma_AE
        marks = _bincount(self.jump_subject, resid * resid, self.n)
        return (
            jump_lin
            - surv
            - self.n_jumps * (math.log(sig) + 0.5 * _LOG_2PI)
            - marks / (2.0 * sig * sig)
        )

    # -- termination -------------------------------------------------------

    def loglik_tmax_obs(self, theta: ObsWorldParams) -> np.ndarray:
        coefs = np.array([theta.tm_0, theta.tm_L, *theta.tm_Z, theta.tm_a])
        return self._loglik_tmax(self.term_x @ coefs, self.seg_x @ coefs, theta.tm_t)

    def loglik_tmax_exp(self, alpha: ExpWorldParams) -> np.ndarray:
        lin_term = alpha.et_0 + alpha.et_a * self.term_x[:, -1]
        lin_seg = alpha.et_0 + alpha.et_a * self.seg_x[:, -1]
        return self._loglik_tmax(lin_term, lin_seg, alpha.et_t)

    def _loglik_tmax(self, lin_term, lin_seg, slope) -> np.ndarray:
        with np.errstate(over="ignore"):
            seg_int = np.exp(lin_seg) * _int_exp0(slope, self.seg_t1, self.seg_t2)
        cumulative = _bincount(self.seg_subject, seg_int, self.n)
        return self.term_flag * (lin_term + slope * self.t_max) - cumulative

    # -- covariate process ---------------------------------------------------

    def loglik_l(self, theta: ObsWorldParams) -> np.ndarray:
        coefs = np.array([theta.l_0, theta.l_lag, theta.l_a, *theta.l_Z])
        resid = (self.l_value - self.l_x @ coefs) / theta.sigma_L
        dens = -0.5 * _LOG_2PI - math.log(theta.sigma_L) - 0.5 * resid * resid
        return _bincount(self.l_subject, dens, self.n)

    # -- outcome -------------------------------------------------------------

    def outcome_resid0(self, theta: ObsWorldParams) -> np.ndarray:
        """Outcome residual at u = 0: y minus the exposure, covariate and
        baseline terms."""
        coefs = np.array([theta.c_0, theta.c_L, *theta.c_Z])
        mean0 = self.y_x @ coefs + theta.c_dose * self.msm.exposures(theta.c_kernel)
        return self.y - mean0

    @staticmethod
    def loglik_y_given_u(resid0, c_u, sigma_y, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        r = (resid0 - c_u * u) / sigma_y
        return -0.5 * _LOG_2PI - math.log(sigma_y) - 0.5 * r * r

    def loglik_y(self, theta: ObsWorldParams, u) -> np.ndarray:
        return self.loglik_y_given_u(
            self.outcome_resid0(theta), theta.c_U, theta.sigma_Y, u
        )

    def require_u(self) -> np.ndarray:
        if self.u_obs is None:
            raise InputError("dataset has no recorded u values")
        return self.u_obs


def _bincount(idx, weights, n) -> np.ndarray:
    return np.bincount(idx, weights=weights, minlength=n)


def _int_exp0(b: float, t1: np.ndarray, t2: np.ndarray) -> np.ndarray:
    """Vectorized integral of exp(b t) over [t1, t2] for scalar b."""
    if b == 0.0:
        return t2 - t1
    with np.errstate(over="ignore"):
        return np.exp(b * t1) * np.expm1(b * (t2 - t1)) / b


def _int_exp1(b: float, t1: np.ndarray, t2: np.ndarray) -> np.ndarray:
    """Vectorized integral of t exp(b t) over [t1, t2] for scalar b."""
    if abs(b) < 1e-5:
        return (
            (t2**2 - t1**2) / 2.0
            + b * (t2**3 - t1**3) / 3.0
            + b * b * (t2**4 - t1**4) / 8.0
        )
    with np.errstate(over="ignore"):
        i0 = _int_exp0(b, t1, t2)
        return (t2 * np.exp(b * t2) - t1 * np.exp(b * t1)) / b - i0 / b


def _int_exp2(b: float, t1: np.ndarray, t2: np.ndarray) -> np.ndarray:
    """Vectorized integral of t^2 exp(b t) over [t1, t2] for scalar b."""
    if abs(b) < 1e-5:
        return (
            (t2**3 - t1**3) / 3.0
            + b * (t2**4 - t1**4) / 4.0
            + b * b * (t2**5 - t1**5) / 10.0
        )
    with np.errstate(over="ignore"):
        i1 = _int_exp1(b, t1, t2)
        return (t2**2 * np.exp(b * t2) - t1**2 * np.exp(b * t1)) / b - 2.0 * i1 / b


def build_design(dataset: Sequence[Trajectory]) -> DatasetDesign:
    """Flatten a dataset into stacked arrays (validated lightly)."""
    n = len(dataset)
    if n == 0:
        raise InputError("dataset is empty")
    p_z = len(dataset[0].z)

    jump_subject, jump_rows, jump_doses = [], [], []
    seg_subject, seg_rows, seg_t1, seg_t2 = [], [], [], []
    l_subject, l_rows, l_values = [], [], []
    n_jumps = np.zeros(n)
    term_flag = np.zeros(n)
    term_x = np.empty((n, 3 + p_z))
    t_max = np.empty(n)
    y = np.empty(n)
    y_x = np.empty((n, 2 + p_z))
    u_vals = np.full(n, np.nan)

    for i, traj in enumerate(dataset):
        if len(traj.z) != p_z:
            raise InputError("inconsistent baseline covariate dimension")
        z = traj.z
        a_path, l_path = traj.a_path, traj.l_path

        for t_j, d_j in a_path.jumps:
            a_left = dose_left_limit(a_path, t_j)
            jump_subject.append(i)
            jump_rows.append((1.0, l_path.value_at(t_j), *z, a_left))
            jump_doses.append(d_j)
        n_jumps[i] = len(a_path.jumps)

        cuts = refined_breakpoints(a_path, l_path, traj.t_max)
        for s1, s2 in zip(cuts, cuts[1:]):
            seg_subject.append(i)
            seg_rows.append((1.0, l_path.value_at(s1), *z, dose_at(a_path, s1)))
            seg_t1.append(s1)
            seg_t2.append(s2)

        term_flag[i] = traj.terminated_flag
        term_x[i] = (
            1.0,
            l_path.value_left_limit(traj.t_max),
            *z,
            dose_left_limit(a_path, traj.t_max),
        )
        t_max[i] = traj.t_max

        prev = None
        for t_k, l_k in zip(l_path.grid, l_path.values):
            a_left = dose_left_limit(a_path, t_k) if t_k > 0 else 0.0
            l_subject.append(i)
            l_rows.append((1.0, prev if prev is not None else 0.0, a_left, *z))
            l_values.append(l_k)
            prev = l_k

        y[i] = traj.y
        y_x[i] = (1.0, l_path.value_at(traj.t_max), *z)
        if traj.u is not None:
            u_vals[i] = float(traj.u)

    has_u = not np.any(np.isnan(u_vals))
    seg_t1 = np.asarray(seg_t1)
    seg_t2 = np.asarray(seg_t2)
    return DatasetDesign(
        n=n,
        p_z=p_z,
        jump_subject=np.asarray(jump_subject, dtype=np.intp),
        jump_x=_stack(jump_rows, 3 + p_z),
        jump_dose=np.asarray(jump_doses, dtype=float),
        n_jumps=n_jumps,
        seg_subject=np.asarray(seg_subject, dtype=np.intp),
        seg_x=_stack(seg_rows, 3 + p_z),
        seg_t1=seg_t1,
        seg_t2=seg_t2,
        seg_len=seg_t2 - seg_t1,
        term_flag=term_flag,
        term_x=term_x,
        t_max=t_max,
        l_subject=np.asarray(l_subject, dtype=np.intp),
        l_x=_stack(l_rows, 3 + p_z),
        l_value=np.asarray(l_values, dtype=float),
        y=y,
        y_x=y_x,
        u_obs=u_vals if has_u else None,
        msm=MsmData.from_trajectories(dataset),
    )


def _stack(rows, width) -> np.ndarray:
    if not rows:
        return np.empty((0, width))
    return np.asarray(rows, dtype=float)


DesignLike = Union[Sequence[Trajectory], DatasetDesign]


def as_design(dataset: DesignLike) -> DatasetDesign:
    if isinstance(dataset, DatasetDesign):
        return dataset
    return build_design(dataset)
