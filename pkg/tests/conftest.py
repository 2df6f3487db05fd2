import numpy as np
import pytest

from ctmsm.intensity import ExpWorldParams, ObsWorldParams
from ctmsm.paths import CovariatePath, ScenarioConfig, Trajectory, TreatmentPath


def make_obs_params(p_z=2, **overrides):
    base = dict(
        a1_0=np.log(0.4),
        a1_L=0.15,
        a1_Z=(0.15, -0.1)[:p_z] if p_z <= 2 else (0.1,) * p_z,
        a1_a=-0.05,
        delta_rate=0.0,
        a2_0=2.0,
        a2_L=0.1,
        a2_Z=(0.1, -0.05)[:p_z] if p_z <= 2 else (0.05,) * p_z,
        a2_a=0.3,
        delta_mark=0.0,
        sigma_A=0.5,
        tm_0=-2.2,
        tm_t=0.15,
        tm_L=0.05,
        tm_Z=(0.1, 0.0)[:p_z] if p_z <= 2 else (0.05,) * p_z,
        tm_a=0.02,
        l_0=0.3,
        l_lag=0.7,
        l_a=0.08,
        l_Z=(0.2, 0.0)[:p_z] if p_z <= 2 else (0.1,) * p_z,
        sigma_L=0.3,
        theta_U=0.5,
        c_0=1.0,
        c_dose=2.0,
        c_kernel=2.0,
        c_L=0.0,
        c_Z=(0.0, 0.0)[:p_z] if p_z <= 2 else (0.0,) * p_z,
        c_U=1.0,
        sigma_Y=2.0,
    )
    base.update(overrides)
    return ObsWorldParams(**base)


def make_exp_params(**overrides):
    base = dict(
        e1_0=np.log(0.45),
        e1_a=-0.05,
        e2_0=2.3,
        e2_a=0.3,
        sigma_AE=0.55,
        et_0=-2.1,
        et_t=0.15,
        et_a=0.02,
    )
    base.update(overrides)
    return ExpWorldParams(**base)


def make_scenario(n=100, seed=7, **overrides):
    kw = dict(
        n=n,
        t_R=10.0,
        dt=0.01,
        delta_L=0.5,
        p_Z=2,
        obs_params=make_obs_params(),
        exp_params=make_exp_params(),
        seed=seed,
    )
    kw.update(overrides)
    return ScenarioConfig(**kw)


def make_trajectory(
    jumps=((2.0, 3.0),),
    t_max=8.0,
    flag=1,
    z=(0.5, -0.3),
    u=1,
    l_grid=(0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0),
    l_values=(0.4, 0.6, 0.5, 0.8, 0.7, 0.9, 1.0),
    y=5.0,
    traj_id=0,
):
    return Trajectory(
        id=traj_id,
        z=z,
        u=u,
        l_path=CovariatePath(grid=l_grid, values=l_values),
        a_path=TreatmentPath(jumps=jumps, end_time=t_max),
        t_max=t_max,
        terminated_flag=flag,
        y=y,
    )


def random_trajectory(rng, p_z=2, t_r=10.0, max_jumps=5):
    """A hand-rolled random but valid trajectory (no simulator involved)."""
    t_max = float(rng.uniform(1.0, t_r))
    n_jumps = int(rng.integers(0, max_jumps + 1))
    times = np.sort(rng.uniform(0.05, t_max, size=n_jumps))
    # enforce strictly increasing and jitter away collisions
    times = np.unique(times)
    jumps = []
    prev = 0.0
    for t in times:
        dose = float(rng.uniform(0.2, 4.0))
        while dose == prev:
            dose = float(rng.uniform(0.2, 4.0))
        jumps.append((float(t), dose))
        prev = dose
    n_grid = int(t_max // 0.5) + 1
    grid = tuple(0.5 * k for k in range(n_grid))
    values = tuple(float(v) for v in rng.normal(0.5, 0.6, size=n_grid))
    return Trajectory(
        id=int(rng.integers(0, 10_000)),
        z=tuple(float(v) for v in rng.normal(size=p_z)),
        u=int(rng.integers(0, 2)),
        l_path=CovariatePath(grid=grid, values=values),
        a_path=TreatmentPath(jumps=tuple(jumps), end_time=t_max),
        t_max=t_max,
        terminated_flag=int(rng.integers(0, 2)) if t_max < t_r else 0,
        y=float(rng.normal(3.0, 1.5)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
