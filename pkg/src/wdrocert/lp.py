"""Small dense linear programs ``max g.x  s.t.  A x <= b, x >= 0`` with ``b >= 0``.

Two exact routes: vertex enumeration over bases (tiny problems) and a
tableau simplex with Bland's rule.  The origin is always feasible because
``b >= 0``, so no phase one is needed.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import SolverError

PIVOT_TOL = 1e-12
VERTEX_MAX_VARIABLES = 12
VERTEX_MAX_BASES = 20000


def _validate(g, a, b):
    g = np.asarray(g, dtype=float)
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.asarray(b, dtype=float)
    if a.shape != (b.size, g.size):
        raise SolverError(f"LP shapes disagree: A {a.shape}, b {b.shape}, g {g.shape}")
    if np.any(b < 0):
        raise SolverError("right-hand side must be nonnegative")
    return g, a, b


def solve_vertex_enumeration(g, a, b):
    """Enumerate every basis of ``[A | I]`` and keep the best feasible vertex."""
    g, a, b = _validate(g, a, b)
    m, n = a.shape
    full = np.hstack([a, np.eye(m)])
    cost = np.concatenate([g, np.zeros(m)])
    best_val, best_x = 0.0, np.zeros(n)
    for basis in itertools.combinations(range(n + m), m):
        sub = full[:, basis]
        if abs(np.linalg.det(sub)) < PIVOT_TOL:
            continue
        xb = np.linalg.solve(sub, b)
        if np.any(xb < -1e-10):
            continue
        val = float(cost[list(basis)] @ xb)
        if val > best_val + 1e-15:
            x = np.zeros(n + m)
            x[list(basis)] = np.maximum(xb, 0.0)
            best_val, best_x = val, x[:n]
    # unboundedness cannot be detected by enumeration; callers only pass bounded programs
    return best_val, best_x


def solve_simplex(g, a, b, max_iter: int = 100000):
    """Tableau simplex with Bland's anti-cycling rule."""
    g, a, b = _validate(g, a, b)
    m, n = a.shape
    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = a
    tab[:m, n:n + m] = np.eye(m)
    tab[:m, -1] = b
    tab[m, :n] = -g
    basis = list(range(n, n + m))
    for _ in range(max_iter):
        reduced = tab[m, :-1]
        entering = next((j for j in range(n + m) if reduced[j] < -PIVOT_TOL), None)
        if entering is None:
            break
        col = tab[:m, entering]
        rows = [i for i in range(m) if col[i] > PIVOT_TOL]
        if not rows:
            raise SolverError("linear program is unbounded")
        ratios = [tab[i, -1] / col[i] for i in rows]
        best = min(ratios)
        leaving = min((i for i, r in zip(rows, ratios) if r <= best + PIVOT_TOL), key=lambda i: basis[i])
        tab[leaving] /= tab[leaving, entering]
        for i in range(m + 1):
            if i != leaving and tab[i, entering] != 0:
                tab[i] -= tab[i, entering] * tab[leaving]
        basis[leaving] = entering
    else:
        raise SolverError("simplex iteration limit reached")
    x = np.zeros(n + m)
    for i, j in enumerate(basis):
        x[j] = tab[i, -1]
    return float(tab[m, -1]), x[:n]


def solve_lp(g, a, b):
    """Dispatch to vertex enumeration when cheap, simplex otherwise."""
    g, a, b = _validate(g, a, b)
    m, n = a.shape
    if n <= VERTEX_MAX_VARIABLES and math.comb(n + m, m) <= VERTEX_MAX_BASES:
        return solve_vertex_enumeration(g, a, b)
    return solve_simplex(g, a, b)
