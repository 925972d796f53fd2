"""One-dimensional search helpers shared by the dual solvers."""

from __future__ import annotations

import math

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class Probe:
    """Memoizing wrapper that remembers the best point seen."""

    def __init__(self, fun):
        self.fun = fun
        self.cache: dict[float, float] = {}
        self.best_x = math.nan
        self.best_f = math.inf

    def __call__(self, x: float) -> float:
        x = float(x)
        if x not in self.cache:
            fx = float(self.fun(x))
            if not math.isfinite(fx):
                from .errors import SolverError
                raise SolverError(f"non-finite objective {fx} at {x}")
            self.cache[x] = fx
            if fx < self.best_f or (fx == self.best_f and x < self.best_x):
                self.best_x, self.best_f = x, fx
        return self.cache[x]

    @property
    def evaluations(self) -> int:
        return len(self.cache)


def golden_min(fun, a: float, b: float, tol: float, max_iter: int = 500):
    """Golden-section search for a minimizer of a unimodal ``fun`` on ``[a, b]``.

    Stops once ``b - a <= tol``; returns the final bracket.  ``fun`` should be a
    :class:`Probe` so that the caller can read back the best value.
    """
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = fun(x1), fun(x2)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = fun(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = fun(x2)
    return a, b
