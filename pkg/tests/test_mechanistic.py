import numpy as np
import pytest

from epifuse.errors import CalibrationError, EpifuseError
from epifuse.mechanistic import (
    AbcConfig,
    EpiParams,
    Metapopulation,
    abc_calibrate,
    hub_mobility,
    simulate_ensemble,
    step,
)

from _oracles import rk4_slir_daily_incidence


def single_pop(n=100_000, latent=200):
    return Metapopulation.seeded(
        ["city"], [n], np.zeros((1, 1)), seed_subpop=0, seed_latent=latent
    )


def three_pop(seed_latent=100):
    mobility = np.array(
        [[0.0, 0.02, 0.01], [0.03, 0.0, 0.01], [0.02, 0.02, 0.0]]
    )
    return Metapopulation.seeded(
        ["a", "b", "c"], [50_000, 80_000, 30_000], mobility, 0, seed_latent
    )


PARAMS = EpiParams.from_r0(2.0, 4.0, 3.0)


class TestEpiParams:
    def test_r0_by_construction(self):
        p = EpiParams(beta=0.5, latent_period=4.0, infectious_period=3.0)
        assert p.r0 == 0.5 * 3.0
        assert p.generation_time == 7.0
        q = EpiParams.from_r0(2.0, 4.0, 3.0)
        assert q.r0 == pytest.approx(2.0)

    def test_validation(self):
        with pytest.raises(EpifuseError):
            EpiParams(beta=-0.1, latent_period=4, infectious_period=3)
        with pytest.raises(EpifuseError):
            EpiParams(beta=0.5, latent_period=0, infectious_period=3)
        with pytest.raises(EpifuseError):
            EpiParams(beta=0.5, latent_period=4, infectious_period=3, steps_per_day=0)


class TestMetapopulation:
    def test_invariants_validated(self):
        with pytest.raises(EpifuseError, match="negative count"):
            Metapopulation(("a",), np.array([-1]), np.array([0]), np.array([0]),
                           np.array([0]), np.zeros((1, 1)))
        bad_mobility = np.array([[0.0, 0.9], [0.8, 0.3]])
        with pytest.raises(EpifuseError, match="diagonal"):
            Metapopulation(("a", "b"), np.array([1, 1]), np.array([0, 0]),
                           np.array([0, 0]), np.array([0, 0]), bad_mobility)
        with pytest.raises(EpifuseError, match="row sums"):
            Metapopulation(("a", "b", "c"), np.array([1, 1, 1]), np.array([0, 0, 0]),
                           np.array([0, 0, 0]), np.array([0, 0, 0]),
                           np.array([[0.0, 0.6, 0.6], [0.2, 0.0, 0.1], [0.0, 0.1, 0.0]]))

    def test_seed_exceeding_population_rejected(self):
        with pytest.raises(EpifuseError, match="seed exceeds"):
            Metapopulation.seeded(["a"], [10], np.zeros((1, 1)), 0, 11)


class TestStep:
    def test_disease_free_state_is_absorbing(self):
        state = Metapopulation.seeded(["a", "b"], [1000, 2000],
                                      np.array([[0.0, 0.0], [0.0, 0.0]]), 0, 0)
        rng = np.random.default_rng(0)
        new_state, new_inf = step(state, PARAMS, rng)
        np.testing.assert_array_equal(new_state.S, state.S)
        np.testing.assert_array_equal(new_state.I, [0, 0])
        np.testing.assert_array_equal(new_inf, [0, 0])

    def test_beta_zero_drains_monotonically(self):
        params = EpiParams(beta=0.0, latent_period=4.0, infectious_period=3.0)
        state = single_pop(10_000, latent=500)
        rng = np.random.default_rng(1)
        prev_R = 0
        total_new = 0
        for _ in range(60):
            state, new_inf = step(state, params, rng)
            total_new += int(new_inf.sum())
            assert int(state.R[0]) >= prev_R
            prev_R = int(state.R[0])
        assert total_new == 0
        assert int(state.L[0]) + int(state.I[0]) < 500
        assert int(state.R[0]) > 0

    def test_global_population_conserved_with_travel(self):
        state = three_pop()
        total = state.global_population
        rng = np.random.default_rng(2)
        for _ in range(50):
            state, _ = step(state, PARAMS, rng)
            assert state.global_population == total  # exact integer identity

    def test_removed_never_decreases(self):
        state = three_pop()
        rng = np.random.default_rng(3)
        prev = 0
        for _ in range(80):
            state, _ = step(state, PARAMS, rng)
            now = int(state.R.sum())
            assert now >= prev
            prev = now

    def test_infectious_travel_toggle(self):
        params = EpiParams.from_r0(2.0, 4.0, 3.0, infectious_travel=False)
        mobility = np.array([[0.0, 0.5], [0.0, 0.0]])
        state = Metapopulation(("a", "b"), np.array([0, 0]), np.array([0, 0]),
                               np.array([1000, 0]), np.array([0, 0]), mobility)
        rng = np.random.default_rng(4)
        new_state, _ = step(state, params, rng)
        assert new_state.I[1] == 0  # infectious stayed put

    def test_invalid_state_raises(self):
        state = single_pop(100, 10)
        state.S[0] = -5
        with pytest.raises(EpifuseError, match="invalid state"):
            step(state, PARAMS, np.random.default_rng(0))

    def test_large_population_matches_rk4_oracle_at_peak(self):
        n = 200_000
        params = EpiParams.from_r0(2.0, 4.0, 3.0, steps_per_day=10)
        metapop = single_pop(n, latent=400)
        sim = simulate_ensemble(metapop, params, horizon=150, runs=40, seed=9)
        mean_daily = sim.mean_daily()[0]
        oracle = rk4_slir_daily_incidence(n, 2.0, 4.0, 3.0, 400, 150)
        peak_day = int(np.argmax(oracle))
        rel = abs(mean_daily[peak_day] - oracle[peak_day]) / oracle[peak_day]
        assert rel < 0.05


class TestSimulateEnsemble:
    def test_single_run_median_is_that_run(self):
        sim = simulate_ensemble(single_pop(), PARAMS, horizon=30, runs=1, seed=5)
        med = sim.bin_median()
        np.testing.assert_array_equal(med, sim.binned()[0])

    def test_zero_seeding_gives_all_zero_output(self):
        metapop = single_pop(latent=0)
        sim = simulate_ensemble(metapop, PARAMS, horizon=40, runs=3, seed=6)
        assert np.all(sim.daily_incidence == 0)
        assert np.all(sim.bin_median() == 0)

    def test_deterministic_given_seed(self):
        a = simulate_ensemble(three_pop(), PARAMS, horizon=25, runs=4, seed=7)
        b = simulate_ensemble(three_pop(), PARAMS, horizon=25, runs=4, seed=7)
        np.testing.assert_array_equal(a.daily_incidence, b.daily_incidence)
        c = simulate_ensemble(three_pop(), PARAMS, horizon=25, runs=4, seed=8)
        assert not np.array_equal(a.daily_incidence, c.daily_incidence)

    def test_bins_anchor_at_last_day(self):
        sim = simulate_ensemble(single_pop(), PARAMS, horizon=7, runs=1, seed=1)
        assert sim.binned().shape[2] == 3  # oldest day dropped
        dates = sim.bin_dates()
        assert (dates[-1] - sim.start_date).days == 6


class TestAbcCalibrate:
    def _observed(self, r0=2.0, seed=123):
        params = EpiParams.from_r0(r0, 4.0, 3.0, steps_per_day=2)
        sim = simulate_ensemble(single_pop(), params, horizon=60, runs=1, seed=seed)
        return sim.binned()[0].sum(axis=0), params

    def test_self_consistency_recovers_generator(self):
        observed, params = self._observed(2.0)
        config = AbcConfig(
            prior_low=1.0, prior_high=3.0, n_samples=200,
            epsilon_quantile=0.05, seed=11,
        )
        result = abc_calibrate(single_pop(), params, observed, config)
        assert abs(result.posterior_mean - 2.0) <= 0.3
        assert result.acceptance_rate == pytest.approx(0.05, abs=0.01)

    def test_infinite_epsilon_returns_prior(self):
        observed, params = self._observed(2.0)
        config = AbcConfig(
            prior_low=1.0, prior_high=3.0, n_samples=400,
            epsilon=1e18, seed=12,
        )
        result = abc_calibrate(single_pop(), params, observed, config)
        assert result.acceptance_rate == 1.0
        prior_mean = 2.0
        mc_se = (3.0 - 1.0) / np.sqrt(12) / np.sqrt(400)
        assert abs(result.posterior_mean - prior_mean) <= 3 * mc_se

    def test_point_mass_prior(self):
        observed, params = self._observed(2.0)
        config = AbcConfig(
            prior_low=1.7, prior_high=1.7, n_samples=20, epsilon=1e18, seed=13
        )
        result = abc_calibrate(single_pop(), params, observed, config)
        assert np.all(result.samples == 1.7)

    def test_zero_acceptance_reports_min_distance(self):
        observed, params = self._observed(2.0)
        config = AbcConfig(
            prior_low=1.0, prior_high=3.0, n_samples=10, epsilon=1e-9, seed=14
        )
        with pytest.raises(CalibrationError) as err:
            abc_calibrate(single_pop(), params, observed, config)
        assert err.value.min_distance is not None
        assert err.value.min_distance > 0

    def test_config_validation(self):
        with pytest.raises(EpifuseError):
            AbcConfig(prior_low=1.0, prior_high=3.0)  # neither epsilon given
        with pytest.raises(EpifuseError):
            AbcConfig(prior_low=1.0, prior_high=3.0, epsilon=1.0, epsilon_quantile=0.1)
        with pytest.raises(EpifuseError):
            AbcConfig(prior_low=-1.0, prior_high=3.0, epsilon=1.0)


class TestHubMobility:
    def test_valid_travel_matrix(self):
        mob = hub_mobility(12, seed=3)
        assert mob.shape == (12, 12)
        assert np.all(np.diagonal(mob) == 0.0)
        assert np.all(mob >= 0)
        assert np.all(mob.sum(axis=1) <= 1 + 1e-12)
