#!/usr/bin/env python3
"""Compute high-precision reference minima for the registered test problems.

Pipeline per problem: L-BFGS-B from the standard start, then full Newton
polish with a finite-difference Hessian on the analytic gradient.  Prints
each minimum with 17 significant digits, ready to freeze into the registry.

Dev tool only; requires scipy (not a package dependency).
"""

import numpy as np
from scipy.optimize import minimize

from noisyqn.problems import registry_lookup


def fd_hessian(eval_g, x, h=1e-6):
    d = x.size
    hess = np.empty((d, d))
    for j in range(d):
        step = np.zeros(d)
        step[j] = h
        hess[:, j] = (eval_g(x + step) - eval_g(x - step)) / (2.0 * h)
    return 0.5 * (hess + hess.T)


def newton_polish(problem, x, rounds=8):
    best_x, best_f = x, problem.eval_f(x)
    for _ in range(rounds):
        g = problem.eval_g(best_x)
        hess = fd_hessian(problem.eval_g, best_x)
        try:
            delta = np.linalg.solve(hess, g)
        except np.linalg.LinAlgError:
            break
        candidate = best_x - delta
        f_candidate = problem.eval_f(candidate)
        if not np.isfinite(f_candidate) or f_candidate > best_f + 1e-12:
            break
        best_x, best_f = candidate, f_candidate
        if np.linalg.norm(g) < 1e-13:
            break
    return best_x, best_f


def main():
    names = [
        "ARWHEAD",
        "CRAGGLVY",
        "DQDRTIC",
        "ENGVAL1",
        "GENROSE",
        "NONDIA",
        "TRIDIA",
        "WOODS",
    ]
    for name in names:
        problem = registry_lookup(name)
        res = minimize(
            problem.eval_f,
            problem.x0,
            jac=problem.eval_g,
            method="L-BFGS-B",
            options={"maxiter": 50000, "ftol": 1e-16, "gtol": 1e-12},
        )
        x_star, f_star = newton_polish(problem, res.x)
        g_norm = np.linalg.norm(problem.eval_g(x_star))
        stored = problem.phi_star
        print(
            f"{name:10s} f*={format(f_star, '.17g'):24s} |g*|={g_norm:.2e} "
            f"stored={format(stored, '.17g'):24s} diff={f_star - stored:+.3e}"
        )


if __name__ == "__main__":
    main()
