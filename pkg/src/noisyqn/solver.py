"""Quasi-Newton driver: six method variants over a noisy oracle.

Variants: dense BFGS and limited-memory L-BFGS, each in three flavors —
standard (always update), update-skipping (drop pairs whose observed
curvature is below the noise floor), and noise-tolerant (two-phase line
search with curvature-pair lengthening).

The per-iteration trace records true objective values for benchmarking;
those are computed directly on the problem and are never visible to the
method itself.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .linalg import (
    CurvaturePair,
    EigenConvergenceError,
    LimitedMemory,
    SymmetricMatrix,
    bfgs_inverse_update,
    eigen_extremes,
    two_loop_direction,
)
from .linesearch import (
    CurvatureTracker,
    LineSearchParams,
    Phase,
    armijo_wolfe_search,
    two_phase_search,
)
from .noise import NoiseSpec, NoisyOracle
from .problems import Problem

__all__ = [
    "Variant",
    "SolverConfig",
    "SolverState",
    "IterationRecord",
    "IterationContext",
    "RunTrace",
    "NumericalFailureError",
    "skip_condition",
    "search_direction",
    "iterate",
    "run",
]

# Pairs with s.y at or below this relative level are dropped by the standard
# and skip variants to protect the update.
_CURVATURE_GUARD = 1e-12


class NumericalFailureError(RuntimeError):
    """A non-finite direction or iterate was produced."""


class Variant(str, enum.Enum):
    BFGS = "bfgs"
    LBFGS = "lbfgs"
    BFGS_SKIP = "bfgs-skip"
    LBFGS_SKIP = "lbfgs-skip"
    BFGS_E = "bfgs-e"
    LBFGS_E = "lbfgs-e"

    @property
    def limited_memory(self) -> bool:
        return self in (Variant.LBFGS, Variant.LBFGS_SKIP, Variant.LBFGS_E)

    @property
    def noise_tolerant(self) -> bool:
        return self in (Variant.BFGS_E, Variant.LBFGS_E)

    @property
    def update_skipping(self) -> bool:
        return self in (Variant.BFGS_SKIP, Variant.LBFGS_SKIP)


@dataclass
class SolverConfig:
    variant: Variant
    memory: int = 10
    ls: LineSearchParams = field(default_factory=LineSearchParams)
    max_iters: int = 1000
    g_eval_budget: int | None = None
    threshold_termination: bool = False
    track_condition: bool = False
    track_eigenvalues: bool = False

    def __post_init__(self):
        self.variant = Variant(self.variant)
        if self.memory < 1:
            raise ValueError("memory must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.g_eval_budget is not None and self.g_eval_budget < 1:
            raise ValueError("g_eval_budget must be >= 1")


@dataclass
class SolverState:
    """Mutable per-run state owned by a single run() invocation."""

    x: np.ndarray
    f_x: float
    g_x: np.ndarray
    hessian: SymmetricMatrix | None
    memory: LimitedMemory | None
    tracker: CurvatureTracker
    k: int = 0
    consecutive_failures: int = 0
    first_split_iteration: int | None = None


@dataclass
class IterationRecord:
    """One trace row; values describe the iterate at the iteration's start,
    the action taken, and the cumulative oracle counters after it."""

    k: int
    phi_true: float
    gap: float
    grad_norm_true: float
    f_noisy: float
    alpha: float
    beta: float | None
    split_active: bool
    cum_f_evals: int
    cum_g_evals: int
    kappa_H: float | None
    lambda_min_B: float | None
    lambda_max_B: float | None
    pair_action: str


@dataclass
class IterationContext:
    """Extra per-iteration detail handed to an observer callback (analysis
    hooks in tests; not part of the CSV trace)."""

    k: int
    x: np.ndarray
    p: np.ndarray
    alpha: float
    beta: float | None
    g_x: np.ndarray
    g_beta: np.ndarray | None
    pair: CurvaturePair | None
    pair_action: str
    phase: Phase
    split_active: bool
    skip_rule_held: bool | None
    x_new: np.ndarray


@dataclass
class RunTrace:
    problem: str
    variant: str
    records: list[IterationRecord]
    termination_reason: str
    first_split_iteration: int | None
    final_x: np.ndarray
    final_phi_true: float
    final_gap: float
    final_grad_norm_true: float
    f_evals: int
    g_evals: int
    max_f_noise: float
    max_g_noise_norm: float


def skip_condition(
    g_new: np.ndarray, g_old: np.ndarray, p: np.ndarray, eps_g: float
) -> bool:
    """True when the observed curvature is too small to trust the pair.

    Strict inequality: a change exactly at 2 eps_g ||p|| is kept.
    """
    change = float((g_new - g_old) @ p)
    return change < 2.0 * eps_g * float(np.linalg.norm(p))


def search_direction(state: SolverState, g: np.ndarray) -> np.ndarray:
    """p = -H g from either the dense matrix or the two-loop recursion."""
    if state.hessian is not None:
        return -state.hessian.matvec(g)
    return -two_loop_direction(state.memory, g)


def _apply_update(state: SolverState, pair: CurvaturePair) -> None:
    if state.hessian is not None:
        state.hessian = bfgs_inverse_update(state.hessian, pair)
    else:
        state.memory.push(pair)


def iterate(
    state: SolverState,
    oracle: NoisyOracle,
    config: SolverConfig,
    observer: Callable[[IterationContext], None] | None = None,
) -> IterationRecord:
    """Advance the state by one iteration and return its trace record."""
    problem = oracle.problem
    oracle.set_iteration(state.k)
    x = state.x
    phi_true = float(problem.eval_f(x))
    gap = phi_true - problem.phi_star
    grad_norm_true = float(np.linalg.norm(problem.eval_g(x)))

    kappa = lambda_min_b = lambda_max_b = None
    if state.hessian is not None and (config.track_condition or config.track_eigenvalues):
        try:
            lo, hi = eigen_extremes(state.hessian)
        except EigenConvergenceError:
            pass  # leave the diagnostic fields empty, keep running
        else:
            if config.track_eigenvalues and lo != 0.0 and hi != 0.0:
                lambda_min_b, lambda_max_b = 1.0 / hi, 1.0 / lo
            if config.track_condition and lo > 0.0:
                kappa = hi / lo

    g_at_x = state.g_x
    p = search_direction(state, g_at_x)
    if not np.all(np.isfinite(p)):
        raise NumericalFailureError(f"non-finite search direction at iteration {state.k}")

    variant = config.variant
    eps_f, eps_g = oracle.reported_bounds()
    if variant.noise_tolerant:
        outcome = two_phase_search(
            oracle, x, p, config.ls, state.tracker, state.f_x, g_at_x, eps_f, eps_g
        )
    else:
        outcome = armijo_wolfe_search(oracle, x, p, config.ls, state.f_x, g_at_x)

    split_active = variant.noise_tolerant and outcome.phase != Phase.INITIAL_ACCEPTED
    if split_active and state.first_split_iteration is None:
        state.first_split_iteration = state.k

    stepped = outcome.phase != Phase.ALPHA_FAILED and outcome.alpha > 0.0
    x_new = x + outcome.alpha * p if stepped else x
    if stepped and not np.all(np.isfinite(x_new)):
        raise NumericalFailureError(f"non-finite iterate at iteration {state.k}")

    pair: CurvaturePair | None = None
    pair_action = "skipped"
    skip_held: bool | None = None
    if variant.noise_tolerant:
        if outcome.beta is not None:
            candidate = CurvaturePair.from_step(
                outcome.beta * p, outcome.g_beta - g_at_x
            )
            if candidate.sy > 0.0:
                _apply_update(state, candidate)
                pair = candidate
                pair_action = (
                    "updated" if outcome.phase == Phase.INITIAL_ACCEPTED else "lengthened"
                )
    elif stepped:
        candidate = CurvaturePair.from_step(
            outcome.alpha * p, outcome.g_alpha - g_at_x
        )
        if variant.update_skipping:
            skip_held = skip_condition(outcome.g_alpha, g_at_x, p, eps_g)
        guard = candidate.sy <= _CURVATURE_GUARD * float(
            np.linalg.norm(candidate.s) * np.linalg.norm(candidate.y)
        )
        if not skip_held and not guard:
            _apply_update(state, candidate)
            pair = candidate
            pair_action = "updated"

    record = IterationRecord(
        k=state.k,
        phi_true=phi_true,
        gap=gap,
        grad_norm_true=grad_norm_true,
        f_noisy=state.f_x,
        alpha=outcome.alpha,
        beta=outcome.beta,
        split_active=split_active,
        cum_f_evals=0,  # filled in below, after any reuse fallback evals
        cum_g_evals=0,
        kappa_H=kappa,
        lambda_min_B=lambda_min_b,
        lambda_max_B=lambda_max_b,
        pair_action=pair_action,
    )

    if stepped:
        state.consecutive_failures = 0
        state.f_x = outcome.f_alpha if outcome.f_alpha is not None else oracle.noisy_f(x_new)
        state.g_x = (
            outcome.g_alpha if outcome.g_alpha is not None else oracle.noisy_g(x_new)
        )
        state.x = x_new
    else:
        # No movement: re-observe the oracle at x so the next direction is
        # built from a fresh draw rather than replaying a failed one.
        state.consecutive_failures += 1
        state.f_x = oracle.noisy_f(x)
        state.g_x = oracle.noisy_g(x)

    record.cum_f_evals = oracle.f_evals
    record.cum_g_evals = oracle.g_evals

    if observer is not None:
        observer(
            IterationContext(
                k=state.k,
                x=x,
                p=p,
                alpha=outcome.alpha,
                beta=outcome.beta,
                g_x=g_at_x,
                g_beta=outcome.g_beta,
                pair=pair,
                pair_action=pair_action,
                phase=outcome.phase,
                split_active=split_active,
                skip_rule_held=skip_held,
                x_new=x_new,
            )
        )
    state.k += 1
    return record


def run(
    problem: Problem,
    noise_spec: NoiseSpec,
    config: SolverConfig,
    observer: Callable[[IterationContext], None] | None = None,
) -> RunTrace:
    """Minimize the problem under the given noise model and return the trace."""
    oracle = NoisyOracle(problem, noise_spec)
    oracle.set_iteration(0)
    x0 = np.array(problem.x0, dtype=float, copy=True)
    f0 = oracle.noisy_f(x0)
    g0 = oracle.noisy_g(x0)
    variant = config.variant
    state = SolverState(
        x=x0,
        f_x=f0,
        g_x=g0,
        hessian=None if variant.limited_memory else SymmetricMatrix.identity(problem.dim),
        memory=LimitedMemory(config.memory) if variant.limited_memory else None,
        tracker=CurvatureTracker(config.ls.history),
    )
    records: list[IterationRecord] = []
    reason = "max_iterations"
    # The stop rule measures true solution quality against the actual noise
    # levels; the omega-scaled estimate is only for the method's own tests.
    eps_f, eps_g = oracle.true_bounds()
    while state.k < config.max_iters:
        if config.g_eval_budget is not None and oracle.g_evals >= config.g_eval_budget:
            reason = "gradient_budget"
            break
        if float(np.linalg.norm(state.g_x)) == 0.0:
            reason = "stationary_point"
            break
        if config.threshold_termination:
            if (
                problem.eval_f(state.x) - problem.phi_star <= eps_f
                or float(np.linalg.norm(problem.eval_g(state.x))) <= eps_g
            ):
                reason = "threshold"
                break
        try:
            records.append(iterate(state, oracle, config, observer))
        except NumericalFailureError:
            reason = "numerical_failure"
            break
        # With a deterministic oracle a failed iteration replays itself
        # exactly, so two failures in a row prove permanent stagnation.  Under
        # injected noise each retry sees fresh draws (and intermittent noise
        # eventually toggles), so failures are transient and the run goes on.
        if (
            variant.noise_tolerant
            and state.consecutive_failures >= 2
            and noise_spec.xi_f == 0.0
            and noise_spec.xi_g == 0.0
        ):
            reason = "line_search_stagnation"
            break
    final_phi = float(problem.eval_f(state.x))
    return RunTrace(
        problem=problem.name,
        variant=variant.value,
        records=records,
        termination_reason=reason,
        first_split_iteration=state.first_split_iteration,
        final_x=state.x,
        final_phi_true=final_phi,
        final_gap=final_phi - problem.phi_star,
        final_grad_norm_true=float(np.linalg.norm(problem.eval_g(state.x))),
        f_evals=oracle.f_evals,
        g_evals=oracle.g_evals,
        max_f_noise=oracle.max_f_noise,
        max_g_noise_norm=oracle.max_g_noise_norm,
    )
