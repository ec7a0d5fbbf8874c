"""Smooth unconstrained test problems with analytic gradients.

Each problem records its conventional starting point and the best function
value ``phi_star`` used for optimality-gap reporting.  Where the minimum is
known in closed form the exact value is stored; for ENGVAL1 and CRAGGLVY the
constants were produced by a long noiseless BFGS run to stagnation (see
``scripts/compute_reference_minima.py``) and frozen here.

Gradient correctness for every registered problem is anchored by central
finite differences in the test suite rather than by trusting transcription.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "Problem",
    "UnknownProblemError",
    "registry_lookup",
    "registered_names",
    "register",
    "make_quadratic",
    "check_gradient",
]


@dataclass(frozen=True, eq=False)
class Problem:
    """An unconstrained minimization problem.

    ``m_M`` carries (strong convexity, smoothness) constants when they are
    known exactly, as for generated quadratics; otherwise None.
    """

    name: str
    dim: int
    eval_f: Callable[[np.ndarray], float]
    eval_g: Callable[[np.ndarray], np.ndarray]
    x0: np.ndarray
    phi_star: float
    m_M: tuple[float, float] | None = None


class UnknownProblemError(KeyError):
    def __init__(self, name: str, known: list[str]):
        super().__init__(
            f"unknown problem {name!r}; registered problems: {', '.join(known)}"
        )

    def __str__(self) -> str:  # KeyError would repr-quote the message
        return self.args[0]
        self.name = name


# ---------------------------------------------------------------------------
# objective / gradient kernels
# ---------------------------------------------------------------------------


def _arwhead_f(x):
    t = x[:-1] ** 2 + x[-1] ** 2
    return float(np.sum(t**2 - 4.0 * x[:-1] + 3.0))


def _arwhead_g(x):
    t = x[:-1] ** 2 + x[-1] ** 2
    g = np.zeros_like(x)
    g[:-1] = 4.0 * x[:-1] * t - 4.0
    g[-1] = 4.0 * x[-1] * np.sum(t)
    return g


def _engval1_f(x):
    t = x[:-1] ** 2 + x[1:] ** 2
    return float(np.sum(t**2) - 4.0 * np.sum(x[:-1]) + 3.0 * (x.size - 1))


def _engval1_g(x):
    t = x[:-1] ** 2 + x[1:] ** 2
    g = np.zeros_like(x)
    g[:-1] += 4.0 * x[:-1] * t - 4.0
    g[1:] += 4.0 * x[1:] * t
    return g


def _cragglvy_terms(x):
    m = (x.size - 2) // 2
    ia = 2 * np.arange(m)
    a, b, c, e = x[ia], x[ia + 1], x[ia + 2], x[ia + 3]
    return ia, a, b, c, e


def _cragglvy_f(x):
    _, a, b, c, e = _cragglvy_terms(x)
    w = c - e
    # wild line-search trial points overflow the quartic to inf, which the
    # caller treats as an ordinary rejected value
    with np.errstate(over="ignore"):
        return float(
            np.sum(
                (np.exp(a) - b) ** 4
                + 100.0 * (b - c) ** 6
                + np.tan(w) ** 4
                + a**8
                + (e - 1.0) ** 2
            )
        )


def _cragglvy_g(x):
    ia, a, b, c, e = _cragglvy_terms(x)
    g = np.zeros_like(x)
    d1 = np.exp(a) - b
    d2 = b - c
    w = c - e
    u = np.tan(w)
    du = 1.0 / np.cos(w) ** 2
    np.add.at(g, ia, 4.0 * d1**3 * np.exp(a) + 8.0 * a**7)
    np.add.at(g, ia + 1, -4.0 * d1**3 + 600.0 * d2**5)
    np.add.at(g, ia + 2, -600.0 * d2**5 + 4.0 * u**3 * du)
    np.add.at(g, ia + 3, -4.0 * u**3 * du + 2.0 * (e - 1.0))
    return g


def _tridia_f(x):
    w = np.arange(2, x.size + 1, dtype=float)
    t = 2.0 * x[1:] - x[:-1]
    return float((x[0] - 1.0) ** 2 + np.sum(w * t**2))


def _tridia_g(x):
    w = np.arange(2, x.size + 1, dtype=float)
    t = 2.0 * x[1:] - x[:-1]
    g = np.zeros_like(x)
    g[0] = 2.0 * (x[0] - 1.0)
    g[1:] += 4.0 * w * t
    g[:-1] -= 2.0 * w * t
    return g


def _dqdrtic_f(x):
    return float(np.sum(x[:-2] ** 2 + 100.0 * x[1:-1] ** 2 + 100.0 * x[2:] ** 2))


def _dqdrtic_g(x):
    g = np.zeros_like(x)
    g[:-2] += 2.0 * x[:-2]
    g[1:-1] += 200.0 * x[1:-1]
    g[2:] += 200.0 * x[2:]
    return g


def _woods_views(x):
    a, b, c, e = x[0::4], x[1::4], x[2::4], x[3::4]
    return a, b, c, e


def _woods_f(x):
    a, b, c, e = _woods_views(x)
    return float(
        np.sum(
            100.0 * (b - a**2) ** 2
            + (1.0 - a) ** 2
            + 90.0 * (e - c**2) ** 2
            + (1.0 - c) ** 2
            + 10.0 * (b + e - 2.0) ** 2
            + 0.1 * (b - e) ** 2
        )
    )


def _woods_g(x):
    a, b, c, e = _woods_views(x)
    g = np.zeros_like(x)
    g[0::4] = -400.0 * a * (b - a**2) - 2.0 * (1.0 - a)
    g[1::4] = 200.0 * (b - a**2) + 20.0 * (b + e - 2.0) + 0.2 * (b - e)
    g[2::4] = -360.0 * c * (e - c**2) - 2.0 * (1.0 - c)
    g[3::4] = 180.0 * (e - c**2) + 20.0 * (b + e - 2.0) - 0.2 * (b - e)
    return g


def _nondia_f(x):
    t = x[0] - x[:-1] ** 2
    return float((x[0] - 1.0) ** 2 + 100.0 * np.sum(t**2))


def _nondia_g(x):
    t = x[0] - x[:-1] ** 2
    g = np.zeros_like(x)
    g[0] = 2.0 * (x[0] - 1.0) + 200.0 * np.sum(t)
    g[:-1] -= 400.0 * x[:-1] * t
    return g


def _genrose_f(x):
    t = x[1:] - x[:-1] ** 2
    return float(1.0 + 100.0 * np.sum(t**2) + np.sum((x[1:] - 1.0) ** 2))


def _genrose_g(x):
    t = x[1:] - x[:-1] ** 2
    g = np.zeros_like(x)
    g[1:] += 200.0 * t + 2.0 * (x[1:] - 1.0)
    g[:-1] -= 400.0 * x[:-1] * t
    return g


# Reference best values.  Zeros and GENROSE's 1.0 are exact minima; the two
# non-trivial constants come from scripts/compute_reference_minima.py.
_PHI_STAR = {
    "ARWHEAD": 0.0,
    "ENGVAL1": 109.08813614309216,
    "CRAGGLVY": 25.206129463129866,
    "TRIDIA": 0.0,
    "DQDRTIC": 0.0,
    "WOODS": 0.0,
    "NONDIA": 0.0,
    "GENROSE": 1.0,
}


def _start_point(name: str, dim: int) -> np.ndarray:
    if name == "ARWHEAD" or name == "TRIDIA":
        return np.ones(dim)
    if name == "ENGVAL1":
        return np.full(dim, 2.0)
    if name == "CRAGGLVY":
        x0 = np.full(dim, 2.0)
        x0[0] = 1.0
        return x0
    if name == "DQDRTIC":
        return np.full(dim, 3.0)
    if name == "WOODS":
        return np.tile([-3.0, -1.0], dim // 2)
    if name == "NONDIA":
        return np.full(dim, -1.0)
    if name == "GENROSE":
        return np.arange(1, dim + 1, dtype=float) / (dim + 1)
    raise AssertionError(name)


_KERNELS = {
    "ARWHEAD": (_arwhead_f, _arwhead_g),
    "ENGVAL1": (_engval1_f, _engval1_g),
    "CRAGGLVY": (_cragglvy_f, _cragglvy_g),
    "TRIDIA": (_tridia_f, _tridia_g),
    "DQDRTIC": (_dqdrtic_f, _dqdrtic_g),
    "WOODS": (_woods_f, _woods_g),
    "NONDIA": (_nondia_f, _nondia_g),
    "GENROSE": (_genrose_f, _genrose_g),
}

_STANDARD_DIM = 100


def _make_standard(name: str, dim: int = _STANDARD_DIM) -> Problem:
    f, g = _KERNELS[name]
    return Problem(
        name=name,
        dim=dim,
        eval_f=f,
        eval_g=g,
        x0=_start_point(name, dim),
        phi_star=_PHI_STAR[name],
    )


_REGISTRY: dict[str, Callable[[], Problem]] = {
    name: (lambda n=name: _make_standard(n)) for name in _KERNELS
}


def register(name: str, factory: Callable[[], Problem]) -> None:
    """Add a problem factory under a new name."""
    key = name.upper()
    if key in _REGISTRY:
        raise ValueError(f"problem {key!r} is already registered")
    _REGISTRY[key] = factory


def registered_names() -> list[str]:
    return sorted(_REGISTRY) + ["QUAD(d,m,M[,seed])"]


def registry_lookup(name: str) -> Problem:
    """Fetch a problem by name.

    Quadratics are parameterized inline, e.g. ``QUAD(50,1,100)`` for
    dimension 50 with eigenvalues log-spaced in [1, 100].  An optional fourth
    part picks the generator seed (``QUAD(50,1,100,7)`` or
    ``QUAD(50,1,100,seed=7)``); it defaults to 0.
    """
    key = name.strip().upper()
    if key.startswith("QUAD(") and key.endswith(")"):
        parts = [part.strip() for part in key[5:-1].split(",")]
        if len(parts) not in (3, 4):
            raise UnknownProblemError(name, registered_names())
        try:
            d, m, big_m = int(parts[0]), float(parts[1]), float(parts[2])
            seed = 0
            if len(parts) == 4:
                seed = int(parts[3].removeprefix("SEED="))
        except ValueError:
            raise UnknownProblemError(name, registered_names()) from None
        return make_quadratic(d, m, big_m, seed)
    factory = _REGISTRY.get(key)
    if factory is None:
        raise UnknownProblemError(name, registered_names())
    return factory()


def make_quadratic(dim: int, m: float, big_m: float, seed: int) -> Problem:
    """Generate phi(x) = 0.5 x^T A x with eigenvalues log-spaced in [m, M].

    A = Q^T diag(lambda) Q for a seeded random orthogonal Q; the start point
    is a seeded unit vector scaled to norm 10.  The exact minimizer is the
    origin with phi_star = 0, and (m, M) are recorded on the problem.
    """
    if dim < 1:
        raise ValueError("dim must be positive")
    if not (0.0 < m <= big_m):
        raise ValueError("need 0 < m <= M")
    rng = np.random.default_rng(seed)
    lam = np.logspace(np.log10(m), np.log10(big_m), dim)
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    q = q * np.sign(np.diag(r))
    a = q.T @ (lam[:, None] * q)
    a = 0.5 * (a + a.T)
    v = rng.standard_normal(dim)
    x0 = 10.0 * v / np.linalg.norm(v)

    def eval_f(x, _a=a):
        return float(0.5 * (x @ (_a @ x)))

    def eval_g(x, _a=a):
        return _a @ x

    return Problem(
        name=f"QUAD({dim},{m:g},{big_m:g},{seed})",
        dim=dim,
        eval_f=eval_f,
        eval_g=eval_g,
        x0=x0,
        phi_star=0.0,
        m_M=(m, big_m),
    )


def check_gradient(problem: Problem, x: np.ndarray, h: float = 1e-5) -> float:
    """Max over coordinates of the relative error between the analytic
    gradient and a central finite difference with stencil width h.

    Relative error uses the convention |a - b| / max(1, |a|, |b|).  The
    default step balances truncation against cancellation for objectives of
    magnitude up to ~1e4 (the registry's worst case near the starts).
    """
    x = np.asarray(x, dtype=float)
    g = problem.eval_g(x)
    worst = 0.0
    step = np.zeros_like(x)
    for i in range(x.size):
        step[i] = h
        fd = (problem.eval_f(x + step) - problem.eval_f(x - step)) / (2.0 * h)
        step[i] = 0.0
        err = abs(g[i] - fd) / max(1.0, abs(g[i]), abs(fd))
        if err > worst:
            worst = err
    return worst
