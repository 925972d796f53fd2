"""Dual generator ``phi(lam, f, xi) = sup_zeta f(zeta) - lam * c(xi, zeta)`` on a grid.

Every atom ``xi`` sees the candidate set ``grid(space) + {xi}``: the
self-candidate costs nothing, so ``phi >= f(xi)`` holds exactly even for
atoms that are not grid nodes.  :class:`InnerProblem` precomputes the cost
matrix once and evaluates ``phi``, its right derivative and ``psi`` for a
whole batch of atoms at any ``lam``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .space import PointSet, SamplePoint, SampleSpace, TransportCost, as_pointset, grid_points

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
REFINE_ITERATIONS = 40


def default_tie_tol(scale: float) -> float:
    return 1e-9 * (1.0 + abs(scale))


def _scaled(lam: float, costs: np.ndarray, costs_at_zero: np.ndarray) -> np.ndarray:
    # 0 * inf is treated as inf: forbidden moves stay forbidden at lam = 0
    return costs_at_zero if lam == 0 else lam * costs


def rowwise_cost(cost: TransportCost, a: PointSet, b: PointSet) -> np.ndarray:
    """``c(a_i, b_i)`` for paired rows."""
    diff = np.abs(a.x - b.x)
    if diff.shape[1] == 0:
        out = np.zeros(len(a))
    elif math.isinf(cost.p_norm):
        out = diff.max(axis=1)
    else:
        out = (diff**cost.p_norm).sum(axis=1) ** (1.0 / cost.p_norm)
    out = out**cost.power_q
    if a.labels.shape[1]:
        mism = (a.labels != b.labels).sum(axis=1)
        if cost.labels_fixed:
            out = np.where(mism > 0, np.inf, out)
        elif cost.label_weight_kappa > 0:
            out = out + cost.label_weight_kappa * mism.astype(float) ** cost.label_power
    return out


@dataclass(frozen=True)
class InnerMaxResult:
    value: float
    maximizers: list[SamplePoint]
    min_cost_to_argmax: float


class TransportGeometry:
    """Atoms, their candidate destinations and the cost matrix between them."""

    def __init__(self, atoms: PointSet, cost: TransportCost, space: SampleSpace,
                 candidates: PointSet | None = None, include_self: bool = True):
        space.check(atoms, "atom")
        self.atoms = atoms
        self.cost = cost
        self.space = space
        self.candidates = grid_points(space) if candidates is None else candidates
        self.include_self = include_self
        self.costs = cost.matrix(atoms, self.candidates)
        self.costs_at_zero = np.where(np.isinf(self.costs), np.inf, 0.0)

    def __len__(self) -> int:
        return len(self.atoms)

    def problem(self, f) -> "InnerProblem":
        fc = np.asarray(f(self.candidates), dtype=float)
        fs = np.asarray(f(self.atoms), dtype=float) if self.include_self else None
        return InnerProblem(self, fc, fs, f)


class InnerProblem:
    """Batch evaluation of ``phi`` for one member function over all atoms."""

    def __init__(self, geometry: TransportGeometry, f_candidates: np.ndarray,
                 f_self: np.ndarray | None, f=None):
        self.geometry = geometry
        self.f_candidates = f_candidates
        self.f_self = f_self
        self.f = f
        scale = float(np.max(np.abs(f_candidates))) if f_candidates.size else 0.0
        if f_self is not None and f_self.size:
            scale = max(scale, float(np.max(np.abs(f_self))))
        self.scale = scale

    # -- plain grid evaluation
    def _objective(self, lam: float) -> np.ndarray:
        g = self.geometry
        return self.f_candidates[None, :] - _scaled(lam, g.costs, g.costs_at_zero)

    def phi_grid(self, lam: float) -> np.ndarray:
        _check_lambda(lam)
        val = self._objective(lam).max(axis=1)
        if self.f_self is not None:
            val = np.maximum(val, self.f_self)
        return val

    def argmax_costs(self, lam: float, tie_tol: float | None = None):
        """Per atom: ``phi`` and the min/max cost over the tie-tolerant argmax set."""
        _check_lambda(lam)
        tie_tol = default_tie_tol(self.scale) if tie_tol is None else tie_tol
        obj = self._objective(lam)
        val = obj.max(axis=1)
        if self.f_self is not None:
            val = np.maximum(val, self.f_self)
        ties = obj >= (val - tie_tol)[:, None]
        costs = self.geometry.costs
        lo = np.where(ties, costs, np.inf).min(axis=1)
        hi = np.where(ties, costs, -np.inf).max(axis=1)
        if self.f_self is not None:
            self_tie = self.f_self >= val - tie_tol
            lo = np.where(self_tie, 0.0, lo)
            hi = np.where(self_tie, np.maximum(hi, 0.0), hi)
        return val, lo, hi, ties

    def min_cost_to_argmax(self, lam: float, tie_tol: float | None = None) -> np.ndarray:
        return self.argmax_costs(lam, tie_tol)[1]

    # -- refined evaluation
    def refine(self, lam: float, tie_tol: float | None = None):
        """Grid scan followed by coordinate-wise golden section in the best node's cells.

        Returns ``(value, maximizer PointSet, min cost to argmax)``.
        """
        tie_tol = default_tie_tol(self.scale) if tie_tol is None else tie_tol
        g = self.geometry
        val, lo, _, ties = self.argmax_costs(lam, tie_tol)
        obj = self._objective(lam)
        best = obj.argmax(axis=1)
        best_val = obj[np.arange(len(g)), best]
        start = g.candidates.take(best)
        if self.f_self is not None:
            use_self = self.f_self >= best_val
            start = PointSet(np.where(use_self[:, None], g.atoms.x, start.x),
                             np.where(use_self[:, None], g.atoms.labels, start.labels))
        if self.f is None or g.space.n_continuous == 0:
            return val, start, lo
        point, rval = _golden_refine(self.f, lam, g.atoms, start, g.cost, g.space)
        better = rval > val + tie_tol
        rcost = rowwise_cost(g.cost, g.atoms, point)
        value = np.where(better, rval, np.maximum(val, rval))
        within = rval >= val - tie_tol
        mincost = np.where(better, rcost, np.where(within, np.minimum(lo, rcost), lo))
        maximizer = PointSet(np.where(better[:, None], point.x, start.x), start.labels)
        return value, maximizer, mincost

    def phi(self, lam: float, refine: bool = False) -> np.ndarray:
        if refine:
            return self.refine(lam)[0]
        return self.phi_grid(lam)

    def right_derivative(self, lam: float, tie_tol: float | None = None, refine: bool = False) -> np.ndarray:
        if refine:
            return -self.refine(lam, tie_tol)[2]
        return -self.min_cost_to_argmax(lam, tie_tol)

    def psi(self, mu: float) -> np.ndarray:
        """``mu * phi(1 / mu)`` evaluated as ``max(mu * f - c)`` (no overflow at small mu)."""
        if not mu > 0:
            raise DomainError(f"mu must be > 0, got {mu}")
        obj = mu * self.f_candidates[None, :] - self.geometry.costs
        val = obj.max(axis=1)
        if self.f_self is not None:
            val = np.maximum(val, mu * self.f_self)
        return val


def _golden_refine(f, lam, atoms: PointSet, start: PointSet, cost, space: SampleSpace):
    """Coordinate-wise golden-section ascent of ``f - lam * c(xi, .)`` within one cell."""
    n, m = start.x.shape
    x = start.x.copy()
    labels = start.labels

    def objective(xx):
        pts = PointSet(xx, labels)
        return np.asarray(f(pts), dtype=float) - lam * rowwise_cost(cost, atoms, pts)

    best = objective(x)
    for c in range(m):
        lo_box, hi_box = space.boxes[c]
        h = space.cell_width(c)
        if h == 0:
            continue
        a = np.maximum(x[:, c] - h, lo_box)
        b = np.minimum(x[:, c] + h, hi_box)
        x1 = b - GOLDEN * (b - a)
        x2 = a + GOLDEN * (b - a)

        def at(col):
            xx = x.copy()
            xx[:, c] = col
            return objective(xx)

        f1, f2 = at(x1), at(x2)
        for _ in range(REFINE_ITERATIONS):
            left = f1 >= f2
            b = np.where(left, x2, b)
            a = np.where(left, a, x1)
            new_x1 = b - GOLDEN * (b - a)
            new_x2 = a + GOLDEN * (b - a)
            x2n = np.where(left, x1, new_x2)
            x1n = np.where(left, new_x1, x2)
            probe = np.where(left, x1n, x2n)
            fp = at(probe)
            f1, f2 = np.where(left, fp, f2), np.where(left, f1, fp)
            x1, x2 = x1n, x2n
        cand = 0.5 * (a + b)
        fc = at(cand)
        take = fc > best
        x[:, c] = np.where(take, cand, x[:, c])
        best = np.where(take, fc, best)
    return PointSet(x, labels), best


def _check_lambda(lam: float) -> None:
    if not lam >= 0 or math.isnan(lam):
        raise DomainError(f"lambda must be >= 0, got {lam}")


def _single(f, xi, cost, space, candidates=None) -> InnerProblem:
    return TransportGeometry(as_pointset(xi), cost, space, candidates).problem(f)


def inner_max(f, lam: float, xi: SamplePoint, cost: TransportCost, space: SampleSpace,
              tie_tol: float | None = None, refine: bool = False) -> InnerMaxResult:
    """Maximize ``f(zeta) - lam * c(xi, zeta)`` over ``grid(space) + {xi}``.

    With ``refine=True`` (smooth families only) the best node is polished by
    coordinate-wise golden section inside its neighbouring grid cells.
    """
    _check_lambda(lam)
    if tie_tol is not None and tie_tol < 0:
        raise DomainError("tie_tol must be >= 0")
    prob = _single(f, xi, cost, space)
    if refine and getattr(f, "smooth", False):
        value, point, mincost = prob.refine(lam, tie_tol)
        return InnerMaxResult(float(value[0]), [point.point(0)], float(mincost[0]))
    val, lo, _, ties = prob.argmax_costs(lam, tie_tol)
    cands = prob.geometry.candidates
    maximizers = [cands.point(j) for j in np.flatnonzero(ties[0])]
    tol = default_tie_tol(prob.scale) if tie_tol is None else tie_tol
    xi_point = prob.geometry.atoms.point(0)
    if prob.f_self[0] >= val[0] - tol and xi_point not in maximizers:
        maximizers.append(xi_point)
    return InnerMaxResult(float(val[0]), maximizers, float(lo[0]))


def phi(lam: float, f, xi: SamplePoint, cost: TransportCost, space: SampleSpace,
        refine: bool = False) -> float:
    return inner_max(f, lam, xi, cost, space, refine=refine).value


def phi_right_derivative(lam: float, f, xi: SamplePoint, cost: TransportCost, space: SampleSpace,
                         tie_tol: float | None = None, refine: bool = False) -> float:
    """Envelope formula: ``-min{c(xi, zeta) : zeta in argmax}``."""
    return -inner_max(f, lam, xi, cost, space, tie_tol, refine).min_cost_to_argmax


def psi(mu: float, f, xi: SamplePoint, cost: TransportCost, space: SampleSpace) -> float:
    return float(_single(f, xi, cost, space).psi(mu)[0])
