"""Noisy oracle wrapper: bound enforcement, counter-based determinism,
intermittent schedules, and evaluation accounting."""

import math

import numpy as np
import pytest

from noisyqn.noise import NoiseSpec, NoisyOracle
from noisyqn.problems import make_quadratic, registry_lookup


def make_oracle(problem=None, **kwargs):
    if problem is None:
        problem = make_quadratic(4, 1.0, 10.0, seed=0)
    return NoisyOracle(problem, NoiseSpec(**kwargs))


class TestNoiseSpecValidation:
    def test_defaults_are_noiseless(self):
        spec = NoiseSpec()
        assert spec.xi_f == 0.0 and spec.xi_g == 0.0
        assert spec.schedule == "constant"
        assert spec.omega == 1.0

    def test_negative_levels_rejected(self):
        with pytest.raises(ValueError):
            NoiseSpec(xi_f=-1e-3)
        with pytest.raises(ValueError):
            NoiseSpec(xi_g=-1e-3)

    def test_unknown_schedule_rejected(self):
        with pytest.raises(ValueError):
            NoiseSpec(schedule="sinusoidal")

    def test_intermittent_requires_block_length(self):
        with pytest.raises(ValueError):
            NoiseSpec(schedule="intermittent")
        with pytest.raises(ValueError):
            NoiseSpec(schedule="intermittent", n_noise=0)

    def test_nonpositive_omega_rejected(self):
        with pytest.raises(ValueError):
            NoiseSpec(omega=0.0)


class TestFunctionNoise:
    def test_zero_level_is_exact(self):
        oracle = make_oracle(xi_f=0.0, xi_g=0.0, seed=5)
        x = np.array([1.0, -2.0, 0.5, 3.0])
        assert oracle.noisy_f(x) == oracle.problem.eval_f(x)

    def test_uniform_bound_and_mean(self):
        """1e4 draws stay inside [-xi_f, xi_f]; their mean is near zero
        (standard error xi_f/sqrt(3e4) -> 3-sigma ~ 1.732e-5 at xi_f = 1e-3)."""
        xi_f = 1e-3
        oracle = make_oracle(xi_f=xi_f, seed=7)
        x = np.array([0.3, 1.0, -0.7, 2.0])
        f_true = oracle.problem.eval_f(x)
        draws = np.array([oracle.noisy_f(x) - f_true for _ in range(10_000)])
        assert np.all(np.abs(draws) <= xi_f)
        assert abs(draws.mean()) <= 3.0 * xi_f / math.sqrt(3 * 10_000)

    def test_draws_vary_across_evaluations(self):
        oracle = make_oracle(xi_f=1e-2, seed=1)
        x = np.zeros(4)
        values = {oracle.noisy_f(x) for _ in range(8)}
        assert len(values) > 1


class TestGradientNoise:
    def test_norm_bound_all_draws(self):
        """d = 100, xi_g = 1e-3: every noise vector has norm <= 0.01."""
        prob = registry_lookup("ARWHEAD")
        oracle = NoisyOracle(prob, NoiseSpec(xi_g=1e-3, seed=3))
        x = prob.x0
        g_true = prob.eval_g(x)
        for _ in range(200):
            e = oracle.noisy_g(x) - g_true
            assert np.linalg.norm(e) <= math.sqrt(100) * 1e-3 + 1e-15

    def test_zero_level_is_exact(self):
        oracle = make_oracle(xi_g=0.0, seed=2)
        x = np.array([1.0, 2.0, 3.0, 4.0])
        np.testing.assert_array_equal(oracle.noisy_g(x), oracle.problem.eval_g(x))


class TestDeterminism:
    def test_same_seed_same_sequence(self):
        x = np.array([0.5, -1.0, 2.0, 0.0])
        a = make_oracle(xi_f=1e-3, xi_g=1e-3, seed=11)
        b = make_oracle(xi_f=1e-3, xi_g=1e-3, seed=11)
        seq_a = [(a.noisy_f(x), tuple(a.noisy_g(x))) for _ in range(6)]
        seq_b = [(b.noisy_f(x), tuple(b.noisy_g(x))) for _ in range(6)]
        assert seq_a == seq_b

    def test_different_seed_differs(self):
        x = np.zeros(4)
        a = make_oracle(xi_f=1e-3, seed=1)
        b = make_oracle(xi_f=1e-3, seed=2)
        assert a.noisy_f(x) != b.noisy_f(x)

    def test_noise_keyed_by_eval_index_not_order(self):
        """The i-th f draw is a pure function of (seed, i): interleaving
        gradient calls does not shift the f stream."""
        x = np.zeros(4)
        plain = make_oracle(xi_f=1e-3, xi_g=1e-3, seed=9)
        mixed = make_oracle(xi_f=1e-3, xi_g=1e-3, seed=9)
        f_plain = [plain.noisy_f(x) for _ in range(4)]
        f_mixed = []
        for _ in range(4):
            f_mixed.append(mixed.noisy_f(x))
            mixed.noisy_g(x)  # interleave; must not perturb the f stream
        assert f_plain == f_mixed

    def test_f_and_g_streams_are_independent(self):
        x = np.zeros(4)
        oracle = make_oracle(xi_f=1e-3, xi_g=1e-3, seed=13)
        f1 = oracle.noisy_f(x)
        fresh = make_oracle(xi_f=1e-3, xi_g=1e-3, seed=13)
        fresh.noisy_g(x)
        f2 = fresh.noisy_f(x)
        assert f1 == f2


class TestSchedules:
    def test_constant_schedule_always_noisy(self):
        oracle = make_oracle(xi_f=1e-3, seed=4)
        x = np.zeros(4)
        for k in (0, 3, 50):
            oracle.set_iteration(k)
            assert oracle.noise_active()
            assert oracle.noisy_f(x) != oracle.problem.eval_f(x)

    def test_intermittent_blocks(self):
        """n_noise = 10 starting noisy: iterations 0-9 noisy, 10-19 clean,
        20-29 noisy, so k = 25 is noisy again."""
        oracle = make_oracle(
            xi_f=1e-3, xi_g=1e-3, schedule="intermittent", n_noise=10, seed=6
        )
        expected = {0: True, 9: True, 10: False, 19: False, 20: True, 25: True}
        for k, active in expected.items():
            oracle.set_iteration(k)
            assert oracle.noise_active() is active

    def test_intermittent_start_clean(self):
        oracle = make_oracle(
            xi_f=1e-3,
            schedule="intermittent",
            n_noise=5,
            start_noisy=False,
            seed=6,
        )
        oracle.set_iteration(2)
        assert not oracle.noise_active()
        oracle.set_iteration(7)
        assert oracle.noise_active()

    def test_clean_blocks_return_exact_values(self):
        oracle = make_oracle(
            xi_f=1e-2, xi_g=1e-2, schedule="intermittent", n_noise=10, seed=8
        )
        x = np.array([1.0, 0.0, -1.0, 2.0])
        oracle.set_iteration(12)
        assert oracle.noisy_f(x) == oracle.problem.eval_f(x)
        np.testing.assert_array_equal(oracle.noisy_g(x), oracle.problem.eval_g(x))


class TestBoundsReporting:
    def test_reported_bounds_scale_gradient_side_only(self):
        """omega models misestimation of the gradient bound alone; eps_f stays
        at the injected half-width."""
        prob = registry_lookup("ARWHEAD")
        plain = NoisyOracle(prob, NoiseSpec(xi_f=1e-3, xi_g=1e-3, omega=1.0))
        assert plain.reported_bounds() == (1e-3, pytest.approx(0.01))
        scaled = NoisyOracle(prob, NoiseSpec(xi_f=1e-3, xi_g=1e-3, omega=10.0))
        assert scaled.reported_bounds() == (1e-3, pytest.approx(0.1))

    def test_true_bounds_ignore_omega(self):
        prob = registry_lookup("ARWHEAD")
        scaled = NoisyOracle(prob, NoiseSpec(xi_f=1e-3, xi_g=1e-3, omega=10.0))
        assert scaled.true_bounds() == (1e-3, pytest.approx(0.01))

    def test_noiseless_bounds_are_zero(self):
        oracle = make_oracle()
        assert oracle.reported_bounds() == (0.0, 0.0)
        assert oracle.true_bounds() == (0.0, 0.0)

    def test_observed_extremes_tracked(self):
        oracle = make_oracle(xi_f=1e-3, xi_g=1e-3, seed=15)
        x = np.zeros(4)
        for _ in range(50):
            oracle.noisy_f(x)
            oracle.noisy_g(x)
        assert 0.0 < oracle.max_f_noise <= 1e-3
        assert 0.0 < oracle.max_g_noise_norm <= 2e-3 + 1e-15


class TestEvalAccounting:
    def test_counters(self):
        oracle = make_oracle(xi_f=1e-3, seed=0)
        x = np.zeros(4)
        for _ in range(3):
            oracle.noisy_f(x)
        oracle.noisy_g(x)
        assert oracle.f_evals == 3
        assert oracle.g_evals == 1
