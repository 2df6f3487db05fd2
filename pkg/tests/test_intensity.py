import math

import numpy as np
import pytest
from scipy.integrate import quad

from ctmsm.errors import DomainError
from ctmsm.intensity import (
    EXP,
    OBS,
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
    refined_breakpoints,
)
from ctmsm.msm import exposure_integral
from ctmsm.paths import CovariatePath, Trajectory, TreatmentPath, dose_at
from conftest import make_exp_params, make_obs_params, make_trajectory, random_trajectory

STD_NORMAL_AT_MODE = -0.5 * math.log(2 * math.pi)


def zero_obs_params(**overrides):
    base = dict(
        a1_0=0.0, a1_L=0.0, a1_Z=(0.0, 0.0), a1_a=0.0, delta_rate=0.0,
        a2_0=0.0, a2_L=0.0, a2_Z=(0.0, 0.0), a2_a=0.0, delta_mark=0.0, sigma_A=1.0,
        tm_0=0.0, tm_t=0.0, tm_L=0.0, tm_Z=(0.0, 0.0), tm_a=0.0,
        l_0=0.0, l_lag=0.0, l_a=0.0, l_Z=(0.0, 0.0), sigma_L=1.0,
        theta_U=0.5,
        c_0=0.0, c_dose=0.0, c_kernel=0.0, c_L=0.0, c_Z=(0.0, 0.0), c_U=0.0,
        sigma_Y=1.0,
    )
    base.update(overrides)
    return make_obs_params(**base)


def zero_exp_params(**overrides):
    base = dict(
        e1_0=0.0, e1_a=0.0, e2_0=0.0, e2_a=0.0, sigma_AE=1.0,
        et_0=0.0, et_t=0.0, et_a=0.0,
    )
    base.update(overrides)
    return make_exp_params(**base)


class TestRates:
    def test_obs_rate_all_zero(self):
        p = zero_obs_params()
        assert rate_A_obs(p, 1.0, 2.0, 0.5, (0.1, 0.2), 1) == 1.0

    def test_obs_rate_intercept(self):
        p = zero_obs_params(a1_0=math.log(2.0))
        assert rate_A_obs(p, 1.0, 0.0, 0.0, (0.0, 0.0), 0) == pytest.approx(2.0)

    def test_obs_rate_confounder_shift(self):
        p = zero_obs_params(delta_rate=0.3)
        got = rate_A_obs(p, 1.0, 0.0, 0.0, (0.0, 0.0), 1)
        # scalar oracle: plain evaluation of the linear predictor
        assert got == pytest.approx(math.exp(0.3), rel=1e-12)
        assert got == pytest.approx(1.3498588075760032, rel=1e-10)

    def test_exp_rate(self):
        p = zero_exp_params()
        assert rate_A_exp(p, 0.0, 0.0) == 1.0
        assert rate_A_exp(zero_exp_params(e1_0=math.log(0.5)), 0.0, 0.0) == pytest.approx(0.5)
        assert rate_A_exp(zero_exp_params(e1_a=0.1), 0.0, 3.0) == pytest.approx(
            math.exp(0.3)
        )

    def test_term_rate(self):
        assert rate_Tmax(zero_obs_params(), OBS, 1.0, 0.0, 0.0, (0.0, 0.0)) == 1.0
        p = zero_obs_params(tm_t=0.2)
        assert rate_Tmax(p, OBS, 5.0, 0.0, 0.0, (0.0, 0.0)) == pytest.approx(math.e)
        p = zero_obs_params(tm_0=-1.0, tm_L=0.5)
        assert rate_Tmax(p, OBS, 0.0, 0.0, 2.0, (0.0, 0.0)) == pytest.approx(1.0)


def quadrature_cumulative(rate_spec, params, traj, t_end, u):
    """Adaptive-quadrature oracle built on pointwise rate evaluation."""
    z = traj.z

    def rate(t):
        dose = dose_at(traj.a_path, t)
        l = traj.l_path.value_at(t)
        if rate_spec == "A_obs":
            return rate_A_obs(params, t, dose, l, z, u)
        if rate_spec == "A_exp":
            return rate_A_exp(params, t, dose)
        if rate_spec == "Tmax_obs":
            return rate_Tmax(params, OBS, t, dose, l, z)
        return rate_Tmax(params, EXP, t, dose, l, z)

    pts = refined_breakpoints(traj.a_path, traj.l_path, t_end)
    total = 0.0
    for a, b in zip(pts, pts[1:]):
        val, _ = quad(rate, a, b, epsabs=1e-12, epsrel=1e-11, limit=200)
        total += val
    return total


class TestCumulativeIntensity:
    def test_constant_rate(self):
        traj = make_trajectory(jumps=(), t_max=3.0, l_grid=(0.0,), l_values=(0.0,),
                               z=(0.0, 0.0))
        p = zero_obs_params(a1_0=math.log(2.0))
        got = cumulative_intensity("A_obs", p, traj.a_path, traj.l_path, traj.z, 0, 3.0)
        assert got == pytest.approx(6.0, rel=1e-12)

    def test_zero_length(self):
        traj = make_trajectory()
        p = zero_obs_params()
        assert cumulative_intensity("A_obs", p, traj.a_path, traj.l_path, traj.z, 0, 0.0) == 0.0

    def test_matches_quadrature_on_random_draws(self, rng):
        obs = make_obs_params(delta_rate=0.2, delta_mark=0.1)
        expp = make_exp_params()
        for i in range(100):
            traj = random_trajectory(rng)
            spec = ("A_obs", "A_exp", "Tmax_obs", "Tmax_exp")[i % 4]
            params = obs if spec.endswith("obs") else expp
            u = int(rng.integers(0, 2))
            t_end = traj.t_max if i % 3 else traj.t_max * 0.7
            got = cumulative_intensity(
                spec, params, traj.a_path, traj.l_path, traj.z, u, t_end
            )
            want = quadrature_cumulative(spec, params, traj, t_end, u)
            assert got == pytest.approx(want, rel=1e-8)

    def test_additive_over_adjacent_intervals(self, rng):
        obs = make_obs_params()
        for _ in range(20):
            traj = random_trajectory(rng)
            t1 = traj.t_max * 0.4
            full = cumulative_intensity(
                "Tmax_obs", obs, traj.a_path, traj.l_path, traj.z, 0, traj.t_max
            )
            part1 = cumulative_intensity(
                "Tmax_obs", obs, traj.a_path, traj.l_path, traj.z, 0, t1
            )
            # complement via the quadrature identity: integral over [t1, T]
            part2 = quadrature_cumulative("Tmax_obs", obs, traj, traj.t_max, 0) - \
                quadrature_cumulative("Tmax_obs", obs, traj, t1, 0)
            assert part1 + part2 == pytest.approx(full, rel=1e-8, abs=1e-12)


class TestMarkDensity:
    def test_standard_normal_mode(self):
        p = zero_obs_params()
        got = log_mark_density(p, OBS, 0.0, 1.0, 0.0, 0.0, (0.0, 0.0), 0)
        assert got == pytest.approx(STD_NORMAL_AT_MODE, abs=1e-12)

    def test_shifted_mode(self):
        p = zero_obs_params(a2_0=1.0)
        got = log_mark_density(p, OBS, 1.0, 1.0, 0.0, 0.0, (0.0, 0.0), 0)
        assert got == pytest.approx(STD_NORMAL_AT_MODE, abs=1e-12)

    def test_scaled_tail(self):
        p = zero_obs_params(sigma_A=2.0)
        got = log_mark_density(p, OBS, 3.0, 1.0, 0.0, 0.0, (0.0, 0.0), 0)
        want = -math.log(2.0) + STD_NORMAL_AT_MODE - 9.0 / 8.0
        assert got == pytest.approx(want, abs=1e-12)


class TestLogLikA:
    def test_pure_survival(self):
        traj = make_trajectory(jumps=(), t_max=2.0, l_grid=(0.0,), l_values=(0.0,),
                               z=(0.0, 0.0))
        p = zero_obs_params()
        assert log_lik_A(traj, p, OBS, 0) == pytest.approx(-2.0, rel=1e-12)

    def test_one_jump_composition(self):
        traj = make_trajectory(
            jumps=((1.0, 0.0001),), t_max=2.0, l_grid=(0.0,), l_values=(0.0,),
            z=(0.0, 0.0),
        )
        # dose drawn essentially at the standard-normal mode, rate 1 throughout
        p = zero_obs_params()
        want = 0.0 + log_mark_density(p, OBS, 0.0001, 1.0, 0.0, 0.0, traj.z, 0) - 2.0
        assert log_lik_A(traj, p, OBS, 0) == pytest.approx(want, rel=1e-12)

    def test_equal_worlds_equality(self, rng):
        # matched intercept/dose coefficients and no covariate or confounder
        # terms: the two regimes assign identical likelihoods to any path
        obs = zero_obs_params(a1_0=math.log(0.7), a1_a=-0.1, a2_0=1.5, a2_a=0.2,
                              sigma_A=0.8)
        expp = zero_exp_params(e1_0=math.log(0.7), e1_a=-0.1, e2_0=1.5, e2_a=0.2,
                               sigma_AE=0.8)
        for _ in range(20):
            traj = random_trajectory(rng)
            assert log_lik_A(traj, obs, OBS, 0) == pytest.approx(
                log_lik_A(traj, expp, EXP, 0), rel=1e-12
            )

    def test_refinement_invariance(self, rng):
        # inserting a covariate grid point (with unchanged value) refines the
        # integration partition but cannot change the likelihood
        obs = make_obs_params(delta_rate=0.25)
        traj = random_trajectory(rng)
        base = log_lik_A(traj, obs, OBS, 1)
        grid = traj.l_path.grid
        mid = (grid[-1] + traj.t_max) / 2.0
        refined = CovariatePath(
            grid=grid + (mid,), values=traj.l_path.values + (traj.l_path.values[-1],)
        )
        traj2 = Trajectory(
            id=traj.id, z=traj.z, u=traj.u, l_path=refined, a_path=traj.a_path,
            t_max=traj.t_max, terminated_flag=traj.terminated_flag, y=traj.y,
        )
        assert log_lik_A(traj2, obs, OBS, 1) == pytest.approx(base, rel=1e-12)


class TestLogLikTmax:
    def test_terminated_constant_rate(self):
        traj = make_trajectory(jumps=(), t_max=2.0, flag=1, l_grid=(0.0,),
                               l_values=(0.0,), z=(0.0, 0.0))
        p = zero_obs_params()
        assert log_lik_Tmax(traj, p, OBS) == pytest.approx(-2.0, rel=1e-12)

    def test_censored_survival_only(self):
        traj = make_trajectory(jumps=(), t_max=4.0, flag=0, l_grid=(0.0,),
                               l_values=(0.0,), z=(0.0, 0.0))
        p = zero_obs_params(tm_0=math.log(0.5))
        assert log_lik_Tmax(traj, p, OBS) == pytest.approx(-2.0, rel=1e-12)

    def test_time_varying_vs_quadrature(self, rng):
        p = make_obs_params()
        for _ in range(20):
            traj = random_trajectory(rng)
            lam = quadrature_cumulative("Tmax_obs", p, traj, traj.t_max, 0)
            want = -lam
            if traj.terminated_flag:
                a_left = dose_at(traj.a_path, traj.t_max * (1 - 1e-12))
                want += math.log(
                    rate_Tmax(
                        p, OBS, traj.t_max,
                        a_left,
                        traj.l_path.value_left_limit(traj.t_max),
                        traj.z,
                    )
                )
            assert log_lik_Tmax(traj, p, OBS) == pytest.approx(want, rel=1e-8)


class TestLogLikL:
    def test_single_point_at_mean(self):
        traj = make_trajectory(l_grid=(0.0,), l_values=(0.3,), z=(0.0, 0.0),
                               jumps=(), t_max=0.4)
        p = zero_obs_params(l_0=0.3)
        assert log_lik_L(traj, p) == pytest.approx(STD_NORMAL_AT_MODE, abs=1e-12)

    def test_two_points_at_means(self):
        p = zero_obs_params(l_0=0.3, l_lag=0.5)
        traj = make_trajectory(
            l_grid=(0.0, 0.5), l_values=(0.3, 0.3 + 0.5 * 0.3), z=(0.0, 0.0),
            jumps=(), t_max=0.9,
        )
        assert log_lik_L(traj, p) == pytest.approx(2 * STD_NORMAL_AT_MODE, abs=1e-12)

    def test_random_matches_pointwise_oracle(self, rng):
        p = make_obs_params()
        traj = random_trajectory(rng)
        total = 0.0
        prev = None
        for t_k, l_k in zip(traj.l_path.grid, traj.l_path.values):
            if prev is None:
                mean = p.l_0 + float(np.dot(p.l_Z, traj.z))
            else:
                from ctmsm.paths import dose_left_limit

                a_left = dose_left_limit(traj.a_path, t_k) if t_k > 0 else 0.0
                mean = p.l_0 + p.l_lag * prev + p.l_a * a_left + float(
                    np.dot(p.l_Z, traj.z)
                )
            total += (
                STD_NORMAL_AT_MODE
                - math.log(p.sigma_L)
                - 0.5 * ((l_k - mean) / p.sigma_L) ** 2
            )
            prev = l_k
        assert log_lik_L(traj, p) == pytest.approx(total, rel=1e-12)


class TestLogLikY:
    def test_at_conditional_mean(self):
        p = zero_obs_params(c_0=2.0, sigma_Y=1.0)
        traj = make_trajectory(y=2.0, jumps=(), z=(0.0, 0.0),
                               l_grid=(0.0,), l_values=(0.0,))
        assert log_lik_Y(traj, p, 0, exposure=0.0) == pytest.approx(
            STD_NORMAL_AT_MODE, abs=1e-12
        )

    def test_confounder_shifts_mean_by_coefficient(self):
        p = zero_obs_params(c_U=1.0)
        traj = make_trajectory(y=1.0, jumps=(), z=(0.0, 0.0),
                               l_grid=(0.0,), l_values=(0.0,))
        at0 = log_lik_Y(traj, p, 0, exposure=0.0)
        at1 = log_lik_Y(traj, p, 1, exposure=0.0)
        # y=1 sits one unit above the u=0 mean and exactly at the u=1 mean
        assert at1 - at0 == pytest.approx(0.5, abs=1e-12)

    def test_random_scalar_oracle(self, rng):
        p = make_obs_params()
        traj = random_trajectory(rng)
        exposure = exposure_integral(traj.a_path, traj.t_max, p.c_kernel)
        mean = (
            p.c_0
            + p.c_dose * exposure
            + p.c_L * traj.l_path.value_at(traj.t_max)
            + float(np.dot(p.c_Z, traj.z))
            + p.c_U * 1
        )
        want = (
            STD_NORMAL_AT_MODE
            - math.log(p.sigma_Y)
            - 0.5 * ((traj.y - mean) / p.sigma_Y) ** 2
        )
        assert log_lik_Y(traj, p, 1, exposure) == pytest.approx(want, rel=1e-12)


class TestLogPriorU:
    def test_values(self):
        assert log_prior_U(1, 0.5) == pytest.approx(math.log(0.5))
        assert log_prior_U(0, 0.5) == pytest.approx(math.log(0.5))
        assert log_prior_U(1, 0.3) == pytest.approx(math.log(0.3))

    def test_domain(self):
        with pytest.raises(DomainError):
            log_prior_U(2, 0.5)
        with pytest.raises(DomainError):
            log_prior_U(1, 1.0)
