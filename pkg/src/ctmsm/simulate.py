"""Trajectory generation on a fixed time grid.

Subjects evolve on the grid t = 0, dt, 2dt, ...: within a step the
covariate updates first (when the step lies on the covariate grid), then a
treatment change is drawn from the thinned intensity, then time advances
and termination is drawn from the state just before the new time. A
treatment change is never placed at t = 0 (processes have no event at the
start), so recorded jump times live in (0, t_max]. Termination
probabilities are capped at 1, so an extreme termination intensity ends
every trajectory at the first opportunity; a treatment-change probability
reaching 1 is a configuration error because it silently censors multiple
changes per step.

Each subject owns an independent random stream keyed by (seed, stream id)
and consumes draws in a fixed order, so results are reproducible
bit-for-bit and independent of batching.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, SimulationConfigError
from .intensity import EXP, OBS
from .msm import exposure_integral
from .paths import CovariatePath, ScenarioConfig, Trajectory, TreatmentPath

__all__ = [
    "RngStream",
    "simulate_subject",
    "simulate_dataset",
    "empirical_moments",
    "MomentsSummary",
]

_SEED_MASK = (1 << 64) - 1
_CHUNK = 2048


@dataclass(frozen=True)
class RngStream:
    """Deterministic per-subject random stream."""

    seed: int
    stream_id: int

    def generator(self) -> np.random.Generator:
        return np.random.default_rng([self.seed & _SEED_MASK, self.stream_id])


def simulate_subject(config: ScenarioConfig, world: str, rng: RngStream) -> Trajectory:
    """Generate a single subject; equivalent to the batched path."""
    return _simulate_chunk(config, world, [rng])[0]


def simulate_dataset(
    config: ScenarioConfig, world: str, n: int, seed: int
) -> list[Trajectory]:
    """Generate ``n`` independent subjects from streams keyed (seed, i)."""
    if n < 1:
        raise DomainError("n must be >= 1")
    out: list[Trajectory] = []
    for start in range(0, n, _CHUNK):
        streams = [RngStream(seed, i) for i in range(start, min(start + _CHUNK, n))]
        out.extend(_simulate_chunk(config, world, streams))
    return out


def _simulate_chunk(
    config: ScenarioConfig, world: str, streams: Sequence[RngStream]
) -> list[Trajectory]:
    if world not in (OBS, EXP):
        raise DomainError(f"world must be {OBS!r} or {EXP!r}, got {world!r}")
    th = config.obs_params
    al = config.exp_params
    c = len(streams)
    p_z = config.p_Z
    dt = config.dt
    n_steps = config.n_steps
    stride = config.l_grid_stride
    n_lgrid = (n_steps + stride - 1) // stride

    # fixed per-subject draw order; unused buffer entries keep streams aligned
    z = np.empty((c, p_z))
    u = np.empty(c)
    l_norm = np.empty((c, n_lgrid))
    jump_unif = np.empty((c, n_steps))
    term_unif = np.empty((c, n_steps))
    mark_norm = np.empty((c, n_steps))
    y_norm = np.empty(c)
    gens = []
    for k, stream in enumerate(streams):
        g = stream.generator()
        z[k] = g.standard_normal(p_z)
        u[k] = 1.0 if g.random() < th.theta_U else 0.0
        l_norm[k] = g.standard_normal(n_lgrid)
        jump_unif[k] = g.random(n_steps)
        term_unif[k] = g.random(n_steps)
        mark_norm[k] = g.standard_normal(n_steps)
        y_norm[k] = g.standard_normal()
        gens.append(g)

    z_a1 = z @ np.asarray(th.a1_Z)
    z_a2 = z @ np.asarray(th.a2_Z)
    z_tm = z @ np.asarray(th.tm_Z)
    z_l = z @ np.asarray(th.l_Z)
    du_rate = th.delta_rate * u
    du_mark = th.delta_mark * u

    active = np.ones(c, dtype=bool)
    l_cur = np.zeros(c)
    a_cur = np.zeros(c)
    t_max = np.full(c, config.t_R)
    flag = np.zeros(c, dtype=np.int64)
    l_vals = np.zeros((c, n_lgrid))
    l_count = np.zeros(c, dtype=np.int64)
    jumps: list[list[tuple[float, float]]] = [[] for _ in range(c)]

    for s in range(n_steps):
        if not active.any():
            break
        t = s * dt
        if s % stride == 0:
            k = s // stride
            if s == 0:
                mean = th.l_0 + z_l
            else:
                mean = th.l_0 + th.l_lag * l_cur + th.l_a * a_cur + z_l
            l_new = mean + th.sigma_L * l_norm[:, k]
            l_cur = np.where(active, l_new, l_cur)
            l_vals[:, k] = l_cur
            l_count += active

        if s > 0:  # no treatment event at the start time
            if world == OBS:
                lam = np.exp(th.a1_0 + th.a1_L * l_cur + z_a1 + th.a1_a * a_cur + du_rate)
            else:
                lam = np.exp(al.e1_0 + al.e1_a * a_cur)
            p_jump = lam * dt
            if np.any(p_jump[active] >= 1.0):
                worst = float(np.max(lam[active]))
                raise SimulationConfigError(
                    f"treatment-change intensity {worst:g} at t={t:g} gives "
                    f"lambda*dt >= 1; shrink dt"
                )
            jump = active & (jump_unif[:, s] < p_jump)
            if jump.any():
                if world == OBS:
                    mean = (
                        th.a2_0 + th.a2_L * l_cur + z_a2 + th.a2_a * a_cur + du_mark
                    )
                    sig = th.sigma_A
                else:
                    mean = al.e2_0 + al.e2_a * a_cur
                    sig = al.sigma_AE
                dose = mean + sig * mark_norm[:, s]
                for idx in np.flatnonzero(jump):
                    d = float(dose[idx])
                    while d == a_cur[idx]:  # change required; p = 0 safeguard
                        d = float(mean[idx] + sig * gens[idx].standard_normal())
                    jumps[idx].append((t, d))
                    a_cur[idx] = d

        t_next = (s + 1) * dt
        if world == OBS:
            lam_t = np.exp(
                th.tm_0 + th.tm_t * t_next + th.tm_L * l_cur + z_tm + th.tm_a * a_cur
            )
        else:
            lam_t = np.exp(al.et_0 + al.et_t * t_next + al.et_a * a_cur)
        p_term = np.minimum(lam_t * dt, 1.0)
        term = active & (term_unif[:, s] < p_term)
        if term.any():
            t_max[term] = t_next
            flag[term] = 1
            active &= ~term

    out = []
    for k, stream in enumerate(streams):
        a_path = TreatmentPath(jumps=tuple(jumps[k]), end_time=float(t_max[k]))
        # grid times use the same arithmetic as step times so that a jump
        # landing on a covariate-update step compares equal in evaluation
        grid = tuple((j * stride) * dt for j in range(int(l_count[k])))
        l_path = CovariatePath(grid=grid, values=tuple(l_vals[k, : int(l_count[k])]))
        exposure = exposure_integral(a_path, float(t_max[k]), th.c_kernel)
        mean_y = (
            th.c_0
            + th.c_dose * exposure
            + th.c_L * l_vals[k, int(l_count[k]) - 1]
            + float(np.dot(th.c_Z, z[k]))
            + th.c_U * u[k]
        )
        out.append(
            Trajectory(
                id=stream.stream_id,
                z=tuple(z[k]),
                u=int(u[k]),
                l_path=l_path,
                a_path=a_path,
                t_max=float(t_max[k]),
                terminated_flag=int(flag[k]),
                y=float(mean_y + th.sigma_Y * y_norm[k]),
            )
        )
    return out


@dataclass(frozen=True)
class MomentsSummary:
    """Deterministic sanity statistics of a simulated dataset."""

    n: int
    mean_jump_count: float
    jump_rate_per_time: float
    mean_t_max: float
    terminated_frac: float
    mean_y: float
    sd_y: float
    mean_mark: float
    mean_final_l: float
    mean_u: Optional[float]

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def empirical_moments(dataset: Sequence[Trajectory]) -> MomentsSummary:
    if len(dataset) == 0:
        raise DomainError("dataset is empty")
    n = len(dataset)
    counts = np.array([len(t.a_path.jumps) for t in dataset], dtype=float)
    t_max = np.array([t.t_max for t in dataset])
    y = np.array([t.y for t in dataset])
    marks = [d for t in dataset for _, d in t.a_path.jumps]
    final_l = np.array([t.l_path.value_at(t.t_max) for t in dataset])
    us = [t.u for t in dataset if t.u is not None]
    return MomentsSummary(
        n=n,
        mean_jump_count=float(counts.mean()),
        jump_rate_per_time=float(counts.sum() / t_max.sum()),
        mean_t_max=float(t_max.mean()),
        terminated_frac=float(np.mean([t.terminated_flag for t in dataset])),
        mean_y=float(y.mean()),
        sd_y=float(y.std(ddof=1)) if n > 1 else 0.0,
        mean_mark=float(np.mean(marks)) if marks else math.nan,
        mean_final_l=float(final_l.mean()),
        mean_u=float(np.mean(us)) if len(us) == n else None,
    )
