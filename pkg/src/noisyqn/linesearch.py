"""Two-phase Armijo-Wolfe line search with curvature-pair lengthening.

The noise-tolerant search runs an initial bisection phase testing three
conditions at each trial steplength, in order:

1. relaxed Armijo (sufficient decrease, with slack for noisy objectives),
2. a noise-control test requiring the observed directional-derivative
   change to clear the worst-case contribution of gradient noise,
3. the Wolfe curvature condition.

If the noise-control test cannot be met — the signature of iterates entering
the noise-dominated regime — the search splits: the steplength alpha is
chosen by relaxed-Armijo backtracking (reusing the best earlier trial when
one exists) while a separate lengthening parameter beta >= alpha is grown
until the noise-control condition holds, so the curvature pair fed to the
quasi-Newton update stays informative despite the noise.

A plain bisection Armijo-Wolfe search for the standard method variants
lives here as well, sharing the bracketing logic.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .noise import NoisyOracle

__all__ = [
    "LineSearchParams",
    "CurvatureTracker",
    "Phase",
    "LineSearchOutcome",
    "InitialResult",
    "relaxed_armijo",
    "noise_control_holds",
    "tracker_update",
    "initial_phase",
    "split_phase",
    "two_phase_search",
    "armijo_wolfe_search",
]


@dataclass(frozen=True)
class LineSearchParams:
    """Parameters shared by both line searches.

    ``n_split`` caps the initial-phase trials before the search gives up and
    splits; ``max_ls_iters`` is the total function-trial budget across both
    phases (and the whole budget of the plain search); ``max_lengthening``
    caps gradient trials in the beta loop; ``history`` is the window of
    curvature estimates kept for seeding beta.
    """

    c1: float = 1e-4
    c2: float = 0.9
    c3: float = 0.5
    n_split: int = 30
    max_ls_iters: int = 60
    max_lengthening: int = 30
    history: int = 10

    def __post_init__(self):
        if not (0.0 < self.c1 < self.c2 < 1.0):
            raise ValueError("need 0 < c1 < c2 < 1")
        if self.c3 <= 0.0:
            raise ValueError("c3 must be positive")
        for name in ("n_split", "max_ls_iters", "max_lengthening", "history"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


class CurvatureTracker:
    """Sliding window of observed curvature estimates along the run.

    Each accepted lengthening step with gradient change dg over step beta*p
    contributes mu = dg.p / (beta * ||p||^2); the tracker's estimate is the
    most pessimistic (smallest) of the last ``history`` values and seeds the
    initial beta of later split phases.
    """

    def __init__(self, history: int = 10):
        if history < 1:
            raise ValueError("history must be >= 1")
        self._values: deque[float] = deque(maxlen=history)

    @property
    def estimate(self) -> float | None:
        return min(self._values) if self._values else None

    def push(self, mu: float) -> None:
        if mu <= 0.0:
            raise ValueError("curvature estimates must be positive")
        self._values.append(mu)

    def __len__(self) -> int:
        return len(self._values)


class Phase(enum.Enum):
    INITIAL_ACCEPTED = "initial_accepted"
    SPLIT_COMPLETED = "split_completed"
    ALPHA_FAILED = "alpha_failed"
    BETA_FAILED = "beta_failed"


@dataclass
class LineSearchOutcome:
    """Result of one line search.

    ``alpha`` is the steplength actually taken (0.0 when no trial satisfied
    the acceptance test); ``beta`` is the lengthening parameter for the
    curvature pair, present only when the noise-control condition was met.
    ``f_alpha``/``g_alpha`` carry evaluations made at ``x + alpha p`` during
    the search so the caller can reuse them for the next iterate; ``g_beta``
    is the gradient at ``x + beta p`` backing the pair.  Trial counts equal
    the oracle-counter deltas across the call.
    """

    alpha: float
    beta: float | None
    phase: Phase
    f_trials: int
    g_trials: int
    alpha_was_best_reuse: bool = False
    f_alpha: float | None = None
    g_alpha: np.ndarray | None = None
    g_beta: np.ndarray | None = None


@dataclass
class InitialResult:
    """What the initial phase hands to the caller.

    On acceptance alpha doubles as the lengthening parameter (beta = alpha).
    Otherwise the fields describe the split trigger: the last trial's
    steplength (the split phase starts both loops there), its gradient when
    one was evaluated, and the best relaxed-Armijo-satisfying trial seen.
    """

    accepted: bool
    alpha: float | None = None
    f_alpha: float | None = None
    g_alpha: np.ndarray | None = None
    last_alpha: float | None = None
    g_last: np.ndarray | None = None
    alpha_best: float | None = None
    f_best: float | None = None
    g_best: np.ndarray | None = None
    trial_count: int = 0
    f_trials: int = 0
    g_trials: int = 0


def relaxed_armijo(
    i: int,
    f_new: float,
    f_old: float,
    g_dot_p: float,
    alpha: float,
    eps_f: float,
    eps_g: float,
    p_norm: float,
    c1: float,
) -> bool:
    """Sufficient-decrease test tolerant of bounded noise.

    The direction is treated as reliable only when the observed slope clears
    the worst-case noise contribution (g.p < -eps_g ||p||); otherwise plain
    decrease is required.  From the second trial on (i >= 1), 2*eps_f of
    slack absorbs the worst-case error in comparing two noisy f values.
    """
    reliable = g_dot_p < -eps_g * p_norm
    slack = 2.0 * eps_f if i >= 1 else 0.0
    if reliable:
        return f_new <= f_old + c1 * alpha * g_dot_p + slack
    return f_new < f_old + slack


def noise_control_holds(
    g_new: np.ndarray,
    g_old: np.ndarray,
    p: np.ndarray,
    eps_g: float,
    c3: float,
    symmetric: bool,
) -> bool:
    """Does the observed curvature clear the gradient-noise floor?

    Tests (g_new - g_old).p >= 2 (1 + c3) eps_g ||p||; the symmetric form
    compares |.| instead and is what the initial phase checks (a sign flip
    there just means the trial step is too short, which the bisection can
    still fix).
    """
    change = float((g_new - g_old) @ p)
    threshold = 2.0 * (1.0 + c3) * eps_g * float(np.linalg.norm(p))
    if symmetric:
        return abs(change) >= threshold
    return change >= threshold


def tracker_update(
    tracker: CurvatureTracker,
    beta: float,
    p: np.ndarray,
    g_new: np.ndarray,
    g_old: np.ndarray,
    wolfe_held: bool,
    noise_held: bool,
) -> None:
    """Push the step's curvature estimate when both gates held."""
    if not (wolfe_held and noise_held):
        return
    mu = float((g_new - g_old) @ p) / (beta * float(p @ p))
    if mu > 0.0:
        tracker.push(mu)


def initial_phase(
    oracle: NoisyOracle,
    x: np.ndarray,
    p: np.ndarray,
    params: LineSearchParams,
    f_x: float,
    g_x: np.ndarray,
    eps_f: float,
    eps_g: float,
    start_alpha: float = 1.0,
) -> InitialResult:
    """Bisection phase testing relaxed Armijo, noise control, then Wolfe.

    Accepts the first trial passing all three (beta = alpha).  A failed
    noise-control test, or exhausting ``n_split`` trials, hands off to the
    split phase.  Gradients are only evaluated at trials that already passed
    the Armijo test, so a trial costs one function value and at most one
    gradient.
    """
    g_dot_p = float(g_x @ p)
    p_norm = float(np.linalg.norm(p))
    low, high = 0.0, math.inf
    alpha = start_alpha
    result = InitialResult(accepted=False, last_alpha=start_alpha)
    for i in range(params.n_split):
        f_trial = oracle.noisy_f(x + alpha * p)
        result.f_trials += 1
        result.trial_count = i + 1
        result.last_alpha = alpha
        result.g_last = None
        armijo_ok = math.isfinite(f_trial) and relaxed_armijo(
            i, f_trial, f_x, g_dot_p, alpha, eps_f, eps_g, p_norm, params.c1
        )
        if not armijo_ok:
            high = alpha
            alpha = 0.5 * (low + high)
            continue
        g_trial = oracle.noisy_g(x + alpha * p)
        result.g_trials += 1
        result.g_last = g_trial
        if result.f_best is None or f_trial < result.f_best:
            result.alpha_best, result.f_best, result.g_best = alpha, f_trial, g_trial
        if not noise_control_holds(g_trial, g_x, p, eps_g, params.c3, symmetric=True):
            return result
        if float(g_trial @ p) < params.c2 * g_dot_p:
            low = alpha
            alpha = 2.0 * alpha if math.isinf(high) else 0.5 * (low + high)
            continue
        result.accepted = True
        result.alpha, result.f_alpha, result.g_alpha = alpha, f_trial, g_trial
        return result
    return result


def split_phase(
    oracle: NoisyOracle,
    x: np.ndarray,
    p: np.ndarray,
    params: LineSearchParams,
    tracker: CurvatureTracker | None,
    start_alpha: float,
    start_beta: float,
    alpha_best: float | None = None,
    *,
    eps_f: float,
    eps_g: float,
    f_x: float,
    g_x: np.ndarray,
    f_best: float | None = None,
    g_best: np.ndarray | None = None,
    g_start: np.ndarray | None = None,
    trial_index: int = 0,
    f_budget_used: int = 0,
) -> LineSearchOutcome:
    """Decoupled steplength / lengthening search for the noisy regime.

    The alpha loop reuses ``alpha_best`` outright when the initial phase
    found a relaxed-Armijo-satisfying trial; otherwise it backtracks from
    ``start_alpha`` by factors of ten until one passes or the shared
    function-trial budget runs out (alpha = 0 then; the beta loop still
    runs so the update can proceed without a step).

    The beta loop grows beta from ``start_beta`` until the signed
    noise-control condition holds.  With a curvature estimate mu from the
    tracker the first candidate jumps to max(2 beta, beta_bar) where
    beta_bar = 2 (1 + c3) eps_g / (mu ||p||); without one, ``start_beta``
    itself is tested first (``g_start`` serves as its cached gradient when
    the caller already evaluated there) and beta doubles on failure.

    Trial counts on the outcome are this call's own oracle deltas.
    """
    g_dot_p = float(g_x @ p)
    p_norm = float(np.linalg.norm(p))
    f_trials = 0
    g_trials = 0

    # --- alpha loop: pick the steplength by relaxed-Armijo backtracking ---
    reuse = False
    alpha_ok = False
    alpha = start_alpha
    f_alpha: float | None = None
    g_alpha: np.ndarray | None = None
    if alpha_best is not None:
        alpha, f_alpha, g_alpha = alpha_best, f_best, g_best
        alpha_ok = True
        reuse = True
    else:
        i = trial_index
        used = f_budget_used
        while used < params.max_ls_iters:
            f_trial = oracle.noisy_f(x + alpha * p)
            f_trials += 1
            used += 1
            ok = math.isfinite(f_trial) and relaxed_armijo(
                i, f_trial, f_x, g_dot_p, alpha, eps_f, eps_g, p_norm, params.c1
            )
            i += 1
            if ok:
                alpha_ok = True
                f_alpha = f_trial
                break
            alpha = 0.1 * alpha
        if not alpha_ok:
            alpha = 0.0

    # --- beta loop: lengthen until the signed noise-control test holds ---
    beta = start_beta
    estimate = tracker.estimate if tracker is not None else None
    beta_bar = None
    g_beta = g_start
    if estimate is not None and p_norm > 0.0:
        beta_bar = 2.0 * (1.0 + params.c3) * eps_g / (estimate * p_norm)
        beta = max(2.0 * beta, beta_bar)
        g_beta = None
    beta_ok = False
    lengthenings = 0
    while True:
        if g_beta is None:
            if lengthenings >= params.max_lengthening:
                break
            g_beta = oracle.noisy_g(x + beta * p)
            g_trials += 1
            lengthenings += 1
        if noise_control_holds(g_beta, g_x, p, eps_g, params.c3, symmetric=False):
            beta_ok = True
            break
        beta = max(2.0 * beta, beta_bar) if beta_bar is not None else 2.0 * beta
        g_beta = None

    if not alpha_ok:
        phase = Phase.ALPHA_FAILED
    elif not beta_ok:
        phase = Phase.BETA_FAILED
    else:
        phase = Phase.SPLIT_COMPLETED
    return LineSearchOutcome(
        alpha=alpha,
        beta=beta if beta_ok else None,
        phase=phase,
        f_trials=f_trials,
        g_trials=g_trials,
        alpha_was_best_reuse=reuse,
        f_alpha=f_alpha,
        g_alpha=g_alpha,
        g_beta=g_beta if beta_ok else None,
    )


def two_phase_search(
    oracle: NoisyOracle,
    x: np.ndarray,
    p: np.ndarray,
    params: LineSearchParams,
    tracker: CurvatureTracker,
    f_x: float,
    g_x: np.ndarray,
    eps_f: float,
    eps_g: float,
) -> LineSearchOutcome:
    """Run the initial phase and, if it hands off, the split phase.

    Whatever lengthening step gets accepted feeds the curvature tracker,
    gated on the Wolfe and noise-control conditions holding there.
    """
    init = initial_phase(oracle, x, p, params, f_x, g_x, eps_f, eps_g)
    if init.accepted:
        tracker_update(tracker, init.alpha, p, init.g_alpha, g_x, True, True)
        return LineSearchOutcome(
            alpha=init.alpha,
            beta=init.alpha,
            phase=Phase.INITIAL_ACCEPTED,
            f_trials=init.f_trials,
            g_trials=init.g_trials,
            f_alpha=init.f_alpha,
            g_alpha=init.g_alpha,
            g_beta=init.g_alpha,
        )
    out = split_phase(
        oracle,
        x,
        p,
        params,
        tracker,
        start_alpha=init.last_alpha,
        start_beta=init.last_alpha,
        alpha_best=init.alpha_best,
        eps_f=eps_f,
        eps_g=eps_g,
        f_x=f_x,
        g_x=g_x,
        f_best=init.f_best,
        g_best=init.g_best,
        g_start=init.g_last,
        trial_index=init.trial_count,
        f_budget_used=init.f_trials,
    )
    if out.beta is not None:
        wolfe = float(out.g_beta @ p) >= params.c2 * float(g_x @ p)
        tracker_update(tracker, out.beta, p, out.g_beta, g_x, wolfe, True)
    return replace(
        out,
        f_trials=out.f_trials + init.f_trials,
        g_trials=out.g_trials + init.g_trials,
    )


def armijo_wolfe_search(
    oracle: NoisyOracle,
    x: np.ndarray,
    p: np.ndarray,
    params: LineSearchParams,
    f_x: float,
    g_x: np.ndarray,
    start_alpha: float = 1.0,
) -> LineSearchOutcome:
    """Plain bisection Armijo-Wolfe search on the (possibly noisy) oracle.

    This is the classical search used by the standard method variants: no
    noise awareness, pairs built at beta = alpha.  Fails (alpha = 0) when
    ``max_ls_iters`` trials pass without a point satisfying both conditions.
    """
    g_dot_p = float(g_x @ p)
    low, high = 0.0, math.inf
    alpha = start_alpha
    f_trials = 0
    g_trials = 0
    for _ in range(params.max_ls_iters):
        f_trial = oracle.noisy_f(x + alpha * p)
        f_trials += 1
        armijo_ok = math.isfinite(f_trial) and f_trial <= f_x + params.c1 * alpha * g_dot_p
        if not armijo_ok:
            high = alpha
            alpha = 0.5 * (low + high)
            continue
        g_trial = oracle.noisy_g(x + alpha * p)
        g_trials += 1
        if float(g_trial @ p) < params.c2 * g_dot_p:
            low = alpha
            alpha = 2.0 * alpha if math.isinf(high) else 0.5 * (low + high)
            continue
        return LineSearchOutcome(
            alpha=alpha,
            beta=alpha,
            phase=Phase.INITIAL_ACCEPTED,
            f_trials=f_trials,
            g_trials=g_trials,
            f_alpha=f_trial,
            g_alpha=g_trial,
            g_beta=g_trial,
        )
    return LineSearchOutcome(
        alpha=0.0,
        beta=None,
        phase=Phase.ALPHA_FAILED,
        f_trials=f_trials,
        g_trials=g_trials,
    )
