"""Small unconstrained BFGS minimizer with backtracking line search.

Kept in-house so the logistic fit and its generic-optimizer test oracle
stay on independent code paths. Minimizes; callers maximize by negating.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

_ARMIJO_C1 = 1e-4
_MIN_STEP = 1e-14
_CURVATURE_FLOOR = 1e-10


@dataclass
class OptimResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    iterations: int
    converged: bool
    message: str


def minimize_bfgs(
    fun: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    max_iterations: int = 200,
    gradient_rtol: float = 1e-8,
) -> OptimResult:
    """BFGS with an Armijo backtracking line search.

    Stops when ``max|grad| <= gradient_rtol * (1 + |f|)`` or the iteration
    cap is hit. Non-finite objective values at the start or an exhausted
    line search end the run with ``converged=False``.
    """
    x = np.asarray(x0, dtype=float).copy()
    n = x.size
    f = fun(x)
    if not np.isfinite(f):
        return OptimResult(x, f, np.full(n, np.nan), 0, False, "non-finite start")
    g = grad(x)
    H = np.eye(n)  # inverse-Hessian approximation
    iterations = 0

    for iterations in range(1, max_iterations + 1):
        if np.abs(g).max() <= gradient_rtol * (1.0 + abs(f)):
            return OptimResult(x, f, g, iterations - 1, True, "gradient tolerance reached")

        p = -H @ g
        slope = p @ g
        if not np.isfinite(slope) or slope >= 0:
            H = np.eye(n)
            p = -g
            slope = p @ g

        step = 1.0
        f_new = None
        while step >= _MIN_STEP:
            x_new = x + step * p
            f_try = fun(x_new)
            if np.isfinite(f_try) and f_try <= f + _ARMIJO_C1 * step * slope:
                f_new = f_try
                break
            step *= 0.5
        if f_new is None:
            return OptimResult(x, f, g, iterations, False, "line search failed")

        g_new = grad(x_new)
        s = x_new - x
        yv = g_new - g
        sy = s @ yv
        if np.isfinite(sy) and sy > _CURVATURE_FLOOR * np.linalg.norm(s) * np.linalg.norm(yv):
            rho = 1.0 / sy
            V = np.eye(n) - rho * np.outer(s, yv)
            H = V @ H @ V.T + rho * np.outer(s, s)
        else:
            H = np.eye(n)

        x, f, g = x_new, f_new, g_new

    if np.abs(g).max() <= gradient_rtol * (1.0 + abs(f)):
        return OptimResult(x, f, g, iterations, True, "gradient tolerance reached")
    return OptimResult(x, f, g, iterations, False, "iteration cap reached")


def central_hessian(fun: Callable[[np.ndarray], float], x: np.ndarray,
                    relative_step: float = 1e-5) -> np.ndarray:
    """Central finite-difference Hessian with step ``relative_step * max(1, |x_i|)``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    h = relative_step * np.maximum(1.0, np.abs(x))
    H = np.empty((n, n))
    f0 = fun(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h[i]
        H[i, i] = (fun(x + ei) - 2.0 * f0 + fun(x - ei)) / h[i] ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h[j]
            H[i, j] = H[j, i] = (
                fun(x + ei + ej) - fun(x + ei - ej) - fun(x - ei + ej) + fun(x - ei - ej)
            ) / (4.0 * h[i] * h[j])
    return H
