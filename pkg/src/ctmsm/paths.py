"""Piecewise-constant path types and the per-subject trajectory record.

A treatment path starts at dose 0, changes value at a finite set of jump
times, is right-continuous with left limits, and is defined as 0 after its
end time. A covariate path is a step function observed on a discrete time
grid that always contains 0. Both are immutable after construction.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import DomainError, InputError

__all__ = [
    "TreatmentPath",
    "CovariatePath",
    "Trajectory",
    "ScenarioConfig",
    "dose_at",
    "dose_left_limit",
    "segments",
    "validate",
]


@dataclass(frozen=True)
class TreatmentPath:
    """Dose process: jumps are (time, new dose) pairs, dose 0 before the
    first jump and after ``end_time``.

    Invariants (checked by :func:`validate`): jump times strictly increasing
    and inside (0, end_time]; consecutive doses differ; doses nonnegative.
    """

    jumps: tuple[tuple[float, float], ...]
    end_time: float

    def __post_init__(self):
        object.__setattr__(
            self, "jumps", tuple((float(t), float(d)) for t, d in self.jumps)
        )
        object.__setattr__(self, "end_time", float(self.end_time))

    @property
    def jump_times(self) -> tuple[float, ...]:
        return tuple(t for t, _ in self.jumps)

    def invariant_violations(self) -> list[str]:
        out = []
        if not (self.end_time > 0):
            out.append("end_time must be positive")
        prev_t = 0.0
        prev_d = 0.0
        for t, d in self.jumps:
            if t <= prev_t:
                out.append("jump times must be strictly increasing and in (0, end]")
                break
            prev_t = t
        if self.jumps and self.jumps[-1][0] > self.end_time:
            out.append("jump times must be strictly increasing and in (0, end]")
        for t, d in self.jumps:
            if d == prev_d:
                out.append(f"jump at t={t:g} does not change the dose")
            if d < 0:
                out.append(f"negative dose {d:g} at t={t:g}")
            prev_d = d
        return out


@dataclass(frozen=True)
class CovariatePath:
    """Step-function covariate observed on an ordered grid starting at 0.

    The value on (t_k, t_{k+1}) equals the value recorded at t_k.
    """

    grid: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(float(t) for t in self.grid))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def value_at(self, t: float) -> float:
        """Right-continuous evaluation: value of the last grid point <= t."""
        if t < 0:
            raise DomainError(f"time must be nonnegative, got {t!r}")
        idx = bisect_right(self.grid, t) - 1
        if idx < 0:
            raise DomainError(f"time {t!r} precedes the first grid point")
        return self.values[idx]

    def value_left_limit(self, t: float) -> float:
        """Value of the last grid point strictly before t."""
        if t <= 0:
            raise DomainError(f"left limit requires t > 0, got {t!r}")
        idx = bisect_left(self.grid, t) - 1
        if idx < 0:
            raise DomainError(f"no grid point before t={t!r}")
        return self.values[idx]

    def invariant_violations(self) -> list[str]:
        out = []
        if len(self.grid) != len(self.values):
            out.append("grid and values lengths differ")
        if not self.grid or self.grid[0] != 0.0:
            out.append("first grid time must be 0")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            out.append("grid times must be strictly increasing")
        if any(not math.isfinite(v) for v in self.values):
            out.append("covariate values must be finite")
        return out


@dataclass(frozen=True)
class Trajectory:
    """One subject's record: baseline covariates, optional binary latent
    confounder, covariate path, treatment path, end-of-treatment time with
    its indicator, and the end-of-study outcome.

    ``u`` is present only on complete-data records; estimators other than
    the observed-confounder benchmark must not read it.
    """

    id: int
    z: tuple[float, ...]
    u: Optional[int]
    l_path: CovariatePath
    a_path: TreatmentPath
    t_max: float
    terminated_flag: int
    y: float

    def __post_init__(self):
        object.__setattr__(self, "z", tuple(float(v) for v in self.z))
        if self.u is not None:
            object.__setattr__(self, "u", int(self.u))


@dataclass(frozen=True)
class ScenarioConfig:
    """Generator configuration: sample size, horizon, grids, and the
    observational/experimental parameter sets.

    ``dt`` is the simulation step; ``delta_L`` the covariate grid spacing.
    Both must tile the horizon exactly (to 1e-9).
    """

    n: int
    t_R: float
    dt: float
    delta_L: float
    p_Z: int
    obs_params: "ObsWorldParams"  # noqa: F821 - defined in intensity module
    exp_params: "ExpWorldParams"  # noqa: F821
    seed: int

    def __post_init__(self):
        if self.n < 1:
            raise InputError("n must be >= 1")
        if not (self.t_R > 0 and self.dt > 0 and self.delta_L > 0):
            raise InputError("t_R, dt and delta_L must be positive")
        if self.dt > self.delta_L:
            raise InputError("dt must not exceed delta_L")
        for total, name in ((self.t_R, "t_R"), (self.delta_L, "delta_L")):
            ratio = total / self.dt
            if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
                raise InputError(f"dt must divide {name} (got {self.dt}/{total})")
        if self.p_Z < 1:
            raise InputError("p_Z must be >= 1")

    @property
    def n_steps(self) -> int:
        return round(self.t_R / self.dt)

    @property
    def l_grid_stride(self) -> int:
        return round(self.delta_L / self.dt)


def dose_at(path: TreatmentPath, t: float) -> float:
    """Right-continuous dose at time t; 0 after the path's end time."""
    if t < 0:
        raise DomainError(f"time must be nonnegative, got {t!r}")
    if t > path.end_time:
        return 0.0
    idx = bisect_right(path.jump_times, t) - 1
    return 0.0 if idx < 0 else path.jumps[idx][1]


def dose_left_limit(path: TreatmentPath, t: float) -> float:
    """Dose just before time t (excludes a jump at t itself)."""
    if t <= 0:
        raise DomainError(f"left limit requires t > 0, got {t!r}")
    if t > path.end_time:
        # approaching from the left still lands beyond the path unless t is
        # exactly past the boundary; doses are 0 strictly after end_time
        return 0.0
    idx = bisect_left(path.jump_times, t) - 1
    return 0.0 if idx < 0 else path.jumps[idx][1]


def segments(path: TreatmentPath, upto: float) -> list[tuple[float, float, float]]:
    """Partition [0, upto] into maximal constant-dose pieces.

    Pieces follow the half-open convention [start, end) with the final piece
    closed, matching right-continuous evaluation. The piece lengths sum to
    ``upto`` exactly.
    """
    if not (0 < upto <= path.end_time):
        raise DomainError(
            f"upto must lie in (0, end_time={path.end_time!r}], got {upto!r}"
        )
    cuts = [0.0]
    boundary_jump_dose = None
    for t, d in path.jumps:
        if t < upto:
            cuts.append(t)
        elif t == upto:
            # jump exactly at the boundary: represented as a degenerate
            # closed piece so dose_at(upto) still matches its segment
            boundary_jump_dose = d
            break
        else:
            break
    cuts.append(upto)
    out = []
    for s, e in zip(cuts, cuts[1:]):
        if e > s:
            out.append((s, e, dose_at(path, s)))
    if boundary_jump_dose is not None:
        out.append((upto, upto, boundary_jump_dose))
    return out


def validate(trajectory: Trajectory, t_r: Optional[float] = None) -> list[str]:
    """Return every violated invariant of the trajectory (empty if none).

    Checks involving the study horizon are skipped when ``t_r`` is None.
    """
    out = []
    out.extend(trajectory.a_path.invariant_violations())
    out.extend(trajectory.l_path.invariant_violations())
    if trajectory.t_max <= 0:
        out.append("t_max must be positive")
    if trajectory.a_path.end_time != trajectory.t_max:
        out.append("treatment path end_time must equal t_max")
    if trajectory.terminated_flag not in (0, 1):
        out.append("terminated_flag must be 0 or 1")
    if trajectory.u is not None and trajectory.u not in (0, 1):
        out.append("u must be 0 or 1 when present")
    if not math.isfinite(trajectory.y):
        out.append("outcome y must be finite")
    if any(not math.isfinite(v) for v in trajectory.z):
        out.append("baseline covariates must be finite")
    if trajectory.l_path.grid and trajectory.l_path.grid[-1] > trajectory.t_max:
        out.append("covariate grid extends past t_max")
    if t_r is not None:
        if trajectory.t_max > t_r + 1e-12:
            out.append("t_max exceeds the study horizon t_R")
        if trajectory.terminated_flag == 0 and trajectory.t_max < t_r - 1e-12:
            out.append("censored subject must have t_max == t_R")
    return out
