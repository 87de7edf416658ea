"""
BFGS minimizer driven by central-difference gradients.

The objective may return ``inf`` (or NaN) to signal an infeasible point; the
line search treats this as a failed trial and backtracks.  Accepted steps
never increase the objective, so the result is never worse than the start.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["OptimResult", "bfgs", "numerical_gradient", "numerical_hessian"]


@dataclass
class OptimResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    nit: int
    nfev: int
    converged: bool
    message: str


def numerical_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, step: float = 1e-6,
                       fx: float | None = None) -> tuple[np.ndarray, int]:
    """Central differences, falling back to one-sided where a neighbour is infeasible."""
    g = np.empty_like(x)
    nfev = 0
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        fp = f(xp)
        fm = f(xm)
        nfev += 2
        if np.isfinite(fp) and np.isfinite(fm):
            g[i] = (fp - fm) / (2.0 * step)
            continue
        if fx is None:
            fx = f(x)
            nfev += 1
        if np.isfinite(fp):
            g[i] = (fp - fx) / step
        elif np.isfinite(fm):
            g[i] = (fx - fm) / step
        else:
            g[i] = 0.0
    return g, nfev


def numerical_hessian(f: Callable[[np.ndarray], float], x: np.ndarray, step: float = 1e-4) -> np.ndarray:
    n = x.size
    hess = np.empty((n, n))
    f0 = f(x)
    for i in range(n):
        for j in range(i, n):
            if i == j:
                xp = x.copy()
                xm = x.copy()
                xp[i] += step
                xm[i] -= step
                hess[i, i] = (f(xp) - 2.0 * f0 + f(xm)) / step**2
                continue
            vals = []
            for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                xx = x.copy()
                xx[i] += si * step
                xx[j] += sj * step
                vals.append(f(xx))
            hess[i, j] = hess[j, i] = (vals[0] - vals[1] - vals[2] + vals[3]) / (4.0 * step**2)
    return hess


def _line_search(f, x, fx, g, d, max_halvings=50, c1=1e-4):
    slope = float(g @ d)
    t = 1.0
    nfev = 0
    for _ in range(max_halvings):
        x_new = x + t * d
        f_new = f(x_new)
        nfev += 1
        if np.isfinite(f_new) and f_new <= fx + c1 * t * slope:
            return x_new, f_new, nfev
        t *= 0.5
    return None, None, nfev


def bfgs(f: Callable[[np.ndarray], float], x0, *, gtol: float = 1e-5, ftol: float = 1e-9,
         maxiter: int = 1000, step: float = 1e-6, max_step: float = 2.0,
         stall_iters: int = 5) -> OptimResult:
    """Minimize ``f`` from ``x0``.

    Stops when the gradient infinity-norm drops below ``gtol``, when the
    relative objective improvement stays below ``ftol`` for ``stall_iters``
    consecutive iterations, or after ``maxiter`` iterations.  ``converged``
    reports the gradient test.
    """
    x = np.asarray(x0, dtype=float).copy()
    fx = f(x)
    nfev = 1
    if not np.isfinite(fx):
        return OptimResult(x, float(fx), np.full_like(x, np.nan), 0, nfev, False, "infeasible start")
    g, k = numerical_gradient(f, x, step, fx)
    nfev += k
    hinv = np.eye(x.size)
    message = "iteration limit reached"
    nit = 0
    fresh = True
    stalled = 0
    while nit < maxiter:
        if np.max(np.abs(g)) < gtol:
            message = "gradient below tolerance"
            break
        d = -hinv @ g
        if not g @ d < 0.0:
            hinv = np.eye(x.size)
            d = -g
            fresh = True
        longest = np.max(np.abs(d))
        if longest > max_step:
            d *= max_step / longest
        x_new, f_new, k = _line_search(f, x, fx, g, d)
        nfev += k
        if x_new is None:
            if fresh:
                message = "line search failed"
                break
            hinv = np.eye(x.size)
            fresh = True
            continue
        nit += 1
        g_new, k = numerical_gradient(f, x_new, step, f_new)
        nfev += k
        sk = x_new - x
        yk = g_new - g
        improvement = fx - f_new
        x, fx, g = x_new, f_new, g_new
        sy = float(sk @ yk)
        if sy > 1e-12:
            if fresh:
                hinv = np.eye(x.size) * (sy / float(yk @ yk))
            rho = 1.0 / sy
            hy = hinv @ yk
            hinv = hinv + ((sy + yk @ hy) * rho * rho) * np.outer(sk, sk) - rho * (np.outer(hy, sk) + np.outer(sk, hy))
            fresh = False
        stalled = stalled + 1 if improvement <= ftol * max(abs(fx), 1.0) else 0
        if stalled >= stall_iters:
            message = "relative improvement below tolerance"
            break
    converged = bool(np.max(np.abs(g)) < gtol)
    return OptimResult(x, float(fx), g, nit, nfev, converged, message)
