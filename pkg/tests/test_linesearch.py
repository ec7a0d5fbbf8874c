"""Two-phase line search: the relaxed sufficient-decrease test, noise-control
gates, bisection initial phase, split-phase lengthening, and the curvature
tracker feeding the lengthening floor."""

import math

import numpy as np
import pytest

from noisyqn.linesearch import (
    CurvatureTracker,
    LineSearchParams,
    Phase,
    armijo_wolfe_search,
    initial_phase,
    noise_control_holds,
    relaxed_armijo,
    split_phase,
    tracker_update,
    two_phase_search,
)
from noisyqn.noise import NoiseSpec, NoisyOracle
from noisyqn.problems import Problem, make_quadratic, registry_lookup


def scalar_problem(f, g, name="SCALAR"):
    return Problem(
        name=name,
        dim=1,
        x0=np.zeros(1),
        eval_f=lambda x: float(f(x[0])),
        eval_g=lambda x: np.array([g(x[0])]),
        phi_star=0.0,
    )


def half_square_oracle(**noise_kwargs):
    """phi(x) = x^2/2 wrapped in an oracle (noiseless unless told otherwise)."""
    prob = scalar_problem(lambda v: 0.5 * v * v, lambda v: v)
    return NoisyOracle(prob, NoiseSpec(**noise_kwargs))


class TestNoiseControl:
    def test_threshold_arithmetic(self):
        """Difference 5 against threshold 2(1+c3) eps_g ||p|| = 3."""
        g_old = np.array([0.0])
        g_new = np.array([5.0])
        p = np.array([1.0])
        assert noise_control_holds(g_new, g_old, p, eps_g=1.0, c3=0.5, symmetric=True)
        assert noise_control_holds(g_new, g_old, p, eps_g=1.0, c3=0.5, symmetric=False)

    def test_just_below_threshold_fails(self):
        g_old = np.array([0.0])
        g_new = np.array([2.999999])
        p = np.array([1.0])
        assert not noise_control_holds(g_new, g_old, p, eps_g=1.0, c3=0.5, symmetric=True)

    def test_zero_eps_g_always_holds(self):
        g_old = np.array([1.0, 2.0])
        g_new = np.array([1.0, 2.0 + 1e-300])
        p = np.array([0.0, 1.0])
        assert noise_control_holds(g_new, g_old, p, eps_g=0.0, c3=0.5, symmetric=True)

    def test_sign_sensitivity(self):
        """A difference of -5: the absolute-value form passes, the signed
        form does not."""
        g_old = np.array([0.0])
        g_new = np.array([-5.0])
        p = np.array([1.0])
        assert noise_control_holds(g_new, g_old, p, eps_g=1.0, c3=0.5, symmetric=True)
        assert not noise_control_holds(g_new, g_old, p, eps_g=1.0, c3=0.5, symmetric=False)


class TestRelaxedArmijo:
    def test_reliable_direction_first_trial(self):
        assert relaxed_armijo(
            0, f_new=0.4, f_old=0.5, g_dot_p=-1.0, alpha=1.0,
            eps_f=0.0, eps_g=0.5, p_norm=1.0, c1=1e-4,
        )

    def test_later_trials_gain_noise_margin(self):
        """i >= 1 adds 2 eps_f of slack to the right-hand side."""
        kwargs = dict(
            f_new=0.5 + 1e-3, f_old=0.5, g_dot_p=-1.0, alpha=1.0,
            eps_f=1e-3, eps_g=0.5, p_norm=1.0, c1=1e-4,
        )
        assert relaxed_armijo(1, **kwargs)
        assert not relaxed_armijo(0, **kwargs)

    def test_unreliable_direction_uses_simple_decrease(self):
        """|g.p| below eps_g ||p||: any decrease counts."""
        assert relaxed_armijo(
            0, f_new=0.49, f_old=0.5, g_dot_p=-0.3, alpha=1.0,
            eps_f=0.0, eps_g=0.5, p_norm=1.0, c1=1e-4,
        )

    def test_unreliable_direction_rejects_increase_on_first_trial(self):
        assert not relaxed_armijo(
            0, f_new=0.51, f_old=0.5, g_dot_p=-0.3, alpha=1.0,
            eps_f=0.0, eps_g=0.5, p_norm=1.0, c1=1e-4,
        )


class TestTrackerUpdate:
    def test_push_arithmetic(self):
        """mu-bar = (dg.p) / (beta ||p||^2) = 2 / (1*4) = 0.5."""
        tracker = CurvatureTracker(10)
        p = np.array([2.0, 0.0])
        tracker_update(
            tracker, beta=1.0, p=p,
            g_new=np.array([1.0, 0.0]), g_old=np.array([0.0, 0.0]),
            wolfe_held=True, noise_held=True,
        )
        assert tracker.estimate == pytest.approx(0.5, rel=1e-15)

    def test_gating(self):
        tracker = CurvatureTracker(10)
        p = np.array([1.0])
        for wolfe, noise in ((False, True), (True, False), (False, False)):
            tracker_update(
                tracker, beta=1.0, p=p,
                g_new=np.array([1.0]), g_old=np.array([0.0]),
                wolfe_held=wolfe, noise_held=noise,
            )
        assert tracker.estimate is None

    def test_min_over_ring(self):
        tracker = CurvatureTracker(10)
        p = np.array([1.0])
        for mu in (0.5, 0.2, 0.9):
            tracker_update(
                tracker, beta=1.0, p=p,
                g_new=np.array([mu]), g_old=np.array([0.0]),
                wolfe_held=True, noise_held=True,
            )
        assert tracker.estimate == pytest.approx(0.2, rel=1e-15)

    def test_ring_evicts_beyond_history(self):
        tracker = CurvatureTracker(2)
        p = np.array([1.0])
        for mu in (0.1, 0.5, 0.9):
            tracker_update(
                tracker, beta=1.0, p=p,
                g_new=np.array([mu]), g_old=np.array([0.0]),
                wolfe_held=True, noise_held=True,
            )
        # 0.1 has been evicted; min of {0.5, 0.9}
        assert tracker.estimate == pytest.approx(0.5, rel=1e-15)

    def test_nonpositive_curvature_never_stored(self):
        tracker = CurvatureTracker(4)
        p = np.array([1.0])
        tracker_update(
            tracker, beta=1.0, p=p,
            g_new=np.array([-1.0]), g_old=np.array([0.0]),
            wolfe_held=True, noise_held=True,
        )
        assert tracker.estimate is None


class TestInitialPhase:
    def test_unit_step_accepted_immediately(self):
        """phi = x^2/2 from x = 1 along p = -1: alpha = 1 lands on the
        minimizer and passes all three gates on the first trial."""
        oracle = half_square_oracle()
        res = initial_phase(
            oracle, np.array([1.0]), np.array([-1.0]),
            LineSearchParams(), f_x=0.5, g_x=np.array([1.0]),
            eps_f=0.0, eps_g=0.0,
        )
        assert res.accepted
        assert res.alpha == 1.0
        assert res.f_trials == 1
        assert res.g_trials == 1

    def test_bisection_from_large_start(self):
        """Forcing the first trial to alpha = 4 walks 4 -> 2 -> 1 with the
        upper bracket shrinking, three function trials in all."""
        oracle = half_square_oracle()
        res = initial_phase(
            oracle, np.array([1.0]), np.array([-1.0]),
            LineSearchParams(), f_x=0.5, g_x=np.array([1.0]),
            eps_f=0.0, eps_g=0.0, start_alpha=4.0,
        )
        assert res.accepted
        assert res.alpha == 1.0
        assert res.f_trials == 3

    def test_alpha_doubles_without_upper_bracket(self):
        """phi = x^2/2 from x = 4 along p = -1 with c2 = 0.1: Wolfe needs
        alpha >= 3.6, so the search doubles 1 -> 2 -> 4 and accepts 4."""
        oracle = half_square_oracle()
        res = initial_phase(
            oracle, np.array([4.0]), np.array([-1.0]),
            LineSearchParams(c2=0.1), f_x=8.0, g_x=np.array([4.0]),
            eps_f=0.0, eps_g=0.0,
        )
        assert res.accepted
        assert res.alpha == 4.0
        assert res.f_trials == 3

    def test_noise_control_failure_triggers_split(self):
        """With a flat-enough gradient change, |dg.p| < 2(1+c3) eps_g ||p||
        at the first trial: returns a split trigger after one gradient
        evaluation."""
        oracle = half_square_oracle()
        res = initial_phase(
            oracle, np.array([1.0]), np.array([-1.0]),
            LineSearchParams(), f_x=0.5, g_x=np.array([1.0]),
            eps_f=0.0, eps_g=10.0,
        )
        assert not res.accepted
        assert res.g_trials == 1

    def test_best_trial_tracked_for_split(self):
        oracle = half_square_oracle()
        res = initial_phase(
            oracle, np.array([1.0]), np.array([-1.0]),
            LineSearchParams(), f_x=0.5, g_x=np.array([1.0]),
            eps_f=0.0, eps_g=10.0,
        )
        assert res.alpha_best == 1.0
        assert res.f_best == pytest.approx(0.0)


class TestSplitPhase:
    def kwargs(self, oracle, x=0.0):
        xv = np.array([x])
        return dict(
            eps_f=0.0,
            f_x=oracle.problem.eval_f(xv),
            g_x=oracle.problem.eval_g(xv),
        )

    def test_doubling_without_tracker(self):
        """Signed control needs beta >= 0.3 on phi = x^2/2 with eps_g = 0.1,
        c3 = 0.5; doubling from 0.25 lands on 0.5 after two trials."""
        oracle = half_square_oracle()
        out = split_phase(
            oracle, np.array([0.0]), np.array([1.0]), LineSearchParams(),
            tracker=None, start_alpha=0.25, start_beta=0.25,
            alpha_best=0.25, eps_g=0.1, **self.kwargs(oracle),
        )
        assert out.beta == pytest.approx(0.5)
        assert out.g_trials == 2

    def test_tracker_floor_jumps_past_doubling(self):
        """mu = 1 gives floor beta-bar = 2(1.5)(0.1)/1 = 0.3; the successor
        max{2*0.25, 0.3} = 0.5 holds in one trial."""
        oracle = half_square_oracle()
        tracker = CurvatureTracker(10)
        tracker.push(1.0)
        out = split_phase(
            oracle, np.array([0.0]), np.array([1.0]), LineSearchParams(),
            tracker=tracker, start_alpha=0.25, start_beta=0.25,
            alpha_best=0.25, eps_g=0.1, **self.kwargs(oracle),
        )
        assert out.beta == pytest.approx(0.5)
        assert out.g_trials == 1

    def test_alpha_best_reused_without_function_trials(self):
        oracle = half_square_oracle()
        before = oracle.f_evals
        out = split_phase(
            oracle, np.array([0.0]), np.array([1.0]), LineSearchParams(),
            tracker=None, start_alpha=0.5, start_beta=0.5,
            alpha_best=0.5, eps_g=0.1, **self.kwargs(oracle),
        )
        assert out.alpha == 0.5
        assert out.alpha_was_best_reuse
        assert oracle.f_evals == before
        assert out.f_trials == 0

    def test_alpha_backtracks_by_tens(self):
        """No alpha_best: the alpha loop divides by 10 until the relaxed
        Armijo test passes."""
        prob = scalar_problem(lambda v: 0.5 * v * v, lambda v: v)
        oracle = NoisyOracle(prob, NoiseSpec())
        out = split_phase(
            oracle, np.array([1.0]), np.array([-1.0]), LineSearchParams(),
            tracker=None, start_alpha=40.0, start_beta=40.0,
            alpha_best=None, eps_g=1e-6,
            eps_f=0.0, f_x=0.5, g_x=np.array([1.0]),
        )
        assert out.phase in (Phase.SPLIT_COMPLETED, Phase.BETA_FAILED)
        assert out.alpha in (4.0, 0.4)

    def test_alpha_failure_reported_not_raised(self):
        """An objective that only increases along p exhausts the alpha
        budget; the outcome says so and takes no step."""
        prob = scalar_problem(lambda v: v, lambda v: 1.0, name="RAMP")
        oracle = NoisyOracle(prob, NoiseSpec())
        out = split_phase(
            oracle, np.array([0.0]), np.array([1.0]),
            LineSearchParams(max_ls_iters=8),
            tracker=None, start_alpha=1.0, start_beta=1.0,
            alpha_best=None, eps_g=0.5,
            eps_f=0.0, f_x=0.0, g_x=np.array([1.0]),
        )
        assert out.phase == Phase.ALPHA_FAILED
        assert out.alpha == 0.0

    def test_beta_failure_returns_no_beta(self):
        """A gradient that never moves cannot satisfy the signed control:
        BetaFailed and beta is absent."""
        prob = scalar_problem(lambda v: -v, lambda v: -1.0, name="LINE")
        oracle = NoisyOracle(prob, NoiseSpec())
        out = split_phase(
            oracle, np.array([0.0]), np.array([1.0]),
            LineSearchParams(max_lengthening=6),
            tracker=None, start_alpha=1.0, start_beta=1.0,
            alpha_best=1.0, eps_g=0.5,
            eps_f=0.0, f_x=0.0, g_x=np.array([-1.0]),
        )
        assert out.phase == Phase.BETA_FAILED
        assert out.beta is None
        assert out.g_beta is None


class TestTwoPhaseSearch:
    @pytest.mark.parametrize("name", ["ARWHEAD", "TRIDIA", "ENGVAL1"])
    def test_noiseless_reduction_to_plain_bisection(self, name):
        """With both noise bounds at zero the two-phase search returns the
        plain Armijo-Wolfe steplength, trial for trial."""
        prob = registry_lookup(name)
        params = LineSearchParams()
        x = prob.x0.copy()
        for _ in range(12):
            oracle_a = NoisyOracle(prob, NoiseSpec())
            oracle_b = NoisyOracle(prob, NoiseSpec())
            f_x = prob.eval_f(x)
            g_x = prob.eval_g(x)
            p = -g_x
            if np.linalg.norm(p) < 1e-12:
                break
            two = two_phase_search(
                oracle_a, x, p, params, CurvatureTracker(10),
                f_x=f_x, g_x=g_x, eps_f=0.0, eps_g=0.0,
            )
            plain = armijo_wolfe_search(oracle_b, x, p, params, f_x=f_x, g_x=g_x)
            assert two.alpha == plain.alpha
            assert two.f_trials == plain.f_trials
            assert two.phase == Phase.INITIAL_ACCEPTED
            assert two.beta == two.alpha
            x = x + two.alpha * p

    def test_returned_beta_satisfies_signed_control(self):
        """On a noisy quadratic every returned beta passes the signed
        noise-control test against the true gradient change it observed."""
        prob = make_quadratic(20, 1.0, 50.0, seed=3)
        oracle = NoisyOracle(prob, NoiseSpec(xi_g=1e-3, seed=5))
        eps_f, eps_g = oracle.reported_bounds()
        params = LineSearchParams()
        tracker = CurvatureTracker(10)
        x = prob.x0.copy()
        checked = 0
        for _ in range(60):
            f_x = oracle.noisy_f(x)
            g_x = oracle.noisy_g(x)
            p = -g_x
            out = two_phase_search(
                oracle, x, p, params, tracker,
                f_x=f_x, g_x=g_x, eps_f=eps_f, eps_g=eps_g,
            )
            if out.beta is not None:
                threshold = 2.0 * (1.0 + params.c3) * eps_g * np.linalg.norm(p)
                assert float((out.g_beta - g_x) @ p) >= threshold * (1 - 1e-12)
                checked += 1
            if out.alpha > 0.0:
                x = x + out.alpha * p
        assert checked > 10

    def test_lengthened_step_lower_bound(self):
        """Accepted lengthened steps obey ||s|| >= 2 c3 eps_g / M on an
        M-smooth quadratic."""
        big_m = 50.0
        prob = make_quadratic(20, 1.0, big_m, seed=3)
        oracle = NoisyOracle(prob, NoiseSpec(xi_g=1e-3, seed=5))
        _, eps_g = oracle.reported_bounds()
        params = LineSearchParams()
        tracker = CurvatureTracker(10)
        floor = 2.0 * params.c3 * eps_g / big_m
        x = prob.x0.copy()
        for _ in range(60):
            f_x = oracle.noisy_f(x)
            g_x = oracle.noisy_g(x)
            p = -g_x
            out = two_phase_search(
                oracle, x, p, params, tracker,
                f_x=f_x, g_x=g_x, eps_f=0.0, eps_g=eps_g,
            )
            if out.beta is not None:
                step = out.beta * float(np.linalg.norm(p))
                assert step >= floor * (1 - 1e-9)
            if out.alpha > 0.0:
                x = x + out.alpha * p

    def test_trial_counters_match_oracle_deltas(self):
        prob = make_quadratic(10, 1.0, 20.0, seed=1)
        oracle = NoisyOracle(prob, NoiseSpec(xi_f=1e-3, xi_g=1e-3, seed=2))
        eps_f, eps_g = oracle.reported_bounds()
        params = LineSearchParams()
        tracker = CurvatureTracker(10)
        x = prob.x0.copy()
        for _ in range(25):
            f_x = oracle.noisy_f(x)
            g_x = oracle.noisy_g(x)
            p = -g_x
            f0, g0 = oracle.f_evals, oracle.g_evals
            out = two_phase_search(
                oracle, x, p, params, tracker,
                f_x=f_x, g_x=g_x, eps_f=eps_f, eps_g=eps_g,
            )
            assert out.f_trials == oracle.f_evals - f0
            assert out.g_trials == oracle.g_evals - g0
            if out.alpha > 0.0:
                x = x + out.alpha * p


class TestParamsValidation:
    def test_defaults(self):
        params = LineSearchParams()
        assert (params.c1, params.c2, params.c3) == (1e-4, 0.9, 0.5)
        assert params.n_split == 30

    def test_ordering_enforced(self):
        with pytest.raises(ValueError):
            LineSearchParams(c1=0.95, c2=0.9)
        with pytest.raises(ValueError):
            LineSearchParams(c1=0.0)
        with pytest.raises(ValueError):
            LineSearchParams(c3=0.0)

    def test_budgets_positive(self):
        with pytest.raises(ValueError):
            LineSearchParams(n_split=0)
        with pytest.raises(ValueError):
            LineSearchParams(max_ls_iters=0)
        with pytest.raises(ValueError):
            LineSearchParams(history=0)


class TestCurvatureTracker:
    def test_empty_estimate_absent(self):
        assert CurvatureTracker(5).estimate is None

    def test_push_rejects_nonpositive(self):
        tracker = CurvatureTracker(5)
        with pytest.raises(ValueError):
            tracker.push(0.0)
        with pytest.raises(ValueError):
            tracker.push(-1.0)
