"""Robust risk via its one-dimensional convex dual, plus the primal LP oracle.

``R_rho(f) = inf_{lam >= 0} lam * rho + E_Q[phi(lam, f, xi)]``.  The dual is
minimized by doubling a bracket from ``lam = 1`` and then golden section;
``rho = 0`` bypasses the solver and returns ``E_Q[f]``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .dual import InnerProblem, TransportGeometry, rowwise_cost
from .errors import DomainError, InfeasibleRadiusError
from .lp import solve_lp
from .search import Probe, golden_min
from .space import PointSet, SamplePoint, SampleSpace, TransportCost, as_pointset

log = logging.getLogger(__name__)

LAMBDA_MAX = 1e8
DEFAULT_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    atoms: PointSet
    weights: np.ndarray

    def __post_init__(self):
        atoms = as_pointset(self.atoms)
        w = np.asarray(self.weights, dtype=float).ravel()
        if len(atoms) == 0:
            raise DomainError("distribution needs at least one atom")
        if w.shape != (len(atoms),):
            raise DomainError(f"{len(atoms)} atoms but {w.size} weights")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise DomainError("weights must be positive and finite")
        if abs(w.sum() - 1.0) > 1e-12:
            raise DomainError(f"weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, atoms) -> "EmpiricalDistribution":
        atoms = as_pointset(atoms)
        n = len(atoms)
        return cls(atoms, np.full(n, 1.0 / n))

    @classmethod
    def dirac(cls, point: SamplePoint) -> "EmpiricalDistribution":
        return cls(as_pointset(point), np.ones(1))

    def __len__(self) -> int:
        return len(self.atoms)

    def expectation(self, f) -> float:
        return float(self.weights @ np.asarray(f(self.atoms), dtype=float))


@dataclass(frozen=True)
class DualSolveResult:
    lambda_star: float
    value: float
    bracket: tuple[float, float]
    evaluations: int
    flat_at_infinity: bool = False


@dataclass(frozen=True, eq=False)
class WorstCaseDistribution:
    atoms: PointSet
    weights: np.ndarray
    transport_cost_used: float
    value: float = math.nan


def dual_objective(lam: float, Q: EmpiricalDistribution, f, rho: float, cost: TransportCost,
                   space: SampleSpace) -> float:
    """``lam * rho + sum_i w_i * phi(lam, f, xi_i)``."""
    if rho < 0:
        raise DomainError(f"rho must be >= 0, got {rho}")
    prob = TransportGeometry(Q.atoms, cost, space).problem(f)
    return float(lam * rho + Q.weights @ prob.phi_grid(lam))


def solve_dual_problem(prob: InnerProblem, weights: np.ndarray, rho: float,
                       tol: float = DEFAULT_TOL, refine: bool = False) -> DualSolveResult:
    """Minimize the dual objective of a prepared :class:`InnerProblem`."""
    if not rho > 0:
        raise InfeasibleRadiusError(
            f"rho must be > 0 for the dual solver (got {rho}); use the plain expectation for rho = 0"
        )
    if not tol > 0:
        raise DomainError("tol must be > 0")
    refine = refine and prob.f is not None and getattr(prob.f, "smooth", False)
    g = Probe(lambda lam: lam * rho + weights @ prob.phi(lam, refine))
    g(0.0)
    hi = 1.0
    flat = False
    while g(2.0 * hi) < g(hi):
        hi *= 2.0
        if 2.0 * hi > LAMBDA_MAX:
            flat = True
            break
    if flat:
        log.warning("dual objective still decreasing at lambda = %g; declared flat at infinity", LAMBDA_MAX)
        g(LAMBDA_MAX)
        return DualSolveResult(LAMBDA_MAX, g.best_f, (hi, LAMBDA_MAX), g.evaluations, True)
    lo = 0.0 if hi == 1.0 else hi / 2.0
    a, b = golden_min(g, lo, 2.0 * hi, tol)
    return DualSolveResult(g.best_x, g.best_f, (a, b), g.evaluations)


def solve_dual(Q: EmpiricalDistribution, f, rho: float, cost: TransportCost, space: SampleSpace,
               tol: float = DEFAULT_TOL, refine: bool = False) -> DualSolveResult:
    prob = TransportGeometry(Q.atoms, cost, space).problem(f)
    return solve_dual_problem(prob, Q.weights, rho, tol, refine)


def robust_risk(Q: EmpiricalDistribution, f, rho: float, cost: TransportCost, space: SampleSpace,
                tol: float = DEFAULT_TOL, refine: bool = False) -> float:
    if rho < 0:
        raise DomainError(f"rho must be >= 0, got {rho}")
    if rho == 0:
        return Q.expectation(f)
    return solve_dual(Q, f, rho, cost, space, tol, refine).value


def robust_risk_problem(prob: InnerProblem, weights: np.ndarray, rho: float,
                        tol: float = DEFAULT_TOL) -> float:
    if rho < 0:
        raise DomainError(f"rho must be >= 0, got {rho}")
    if rho == 0:
        return float(weights @ prob.f_self)
    return solve_dual_problem(prob, weights, rho, tol).value


# ------------------------------------------------------------ primal oracle


def primal_oracle(Q: EmpiricalDistribution, f, rho: float, cost: TransportCost,
                  space: SampleSpace) -> float:
    """Exact grid-restricted primal: best transport of Q's mass within budget ``rho``.

    Variables ``x_ij`` move mass from atom ``i`` to grid node ``j`` with gain
    ``f(zeta_j) - f(xi_i)`` and unit cost ``c(xi_i, zeta_j)``; mass that does
    not move stays at its atom.  Moves with no gain or infinite cost are
    dropped (they are never used by an optimal plan).
    """
    if rho < 0:
        raise InfeasibleRadiusError(f"budget rho must be >= 0, got {rho}")
    geo = TransportGeometry(Q.atoms, cost, space)
    f_grid = np.asarray(f(geo.candidates), dtype=float)
    f_atoms = np.asarray(f(Q.atoms), dtype=float)
    gains = f_grid[None, :] - f_atoms[:, None]
    keep = (gains > 0) & np.isfinite(geo.costs)
    rows, cols = np.nonzero(keep)
    base = float(Q.weights @ f_atoms)
    if rows.size == 0:
        return base
    n = len(Q)
    a = np.zeros((n + 1, rows.size))
    a[rows, np.arange(rows.size)] = 1.0
    a[n] = geo.costs[rows, cols]
    b = np.append(Q.weights, rho)
    opt, _ = solve_lp(gains[rows, cols], a, b)
    return base + opt


# ------------------------------------------------------ worst-case recovery


def _plan(prob: InnerProblem, lam: float, prefer_high_cost: bool, refine: bool):
    """Destination of every atom at ``lam`` and the associated cost."""
    geo = prob.geometry
    if refine:
        _, point, mincost = prob.refine(lam)
        return point, mincost
    val, lo, hi, ties = prob.argmax_costs(lam)
    target = hi if prefer_high_cost else lo
    costs = np.where(ties, geo.costs, np.nan)
    n = len(geo)
    dest_x = geo.atoms.x.copy()
    dest_l = geo.atoms.labels.copy()
    for i in range(n):
        if target[i] == 0 and prob.f_self is not None and prob.f_self[i] >= val[i] - 1e-9 * (1 + prob.scale):
            continue
        j = int(np.nanargmin(np.abs(costs[i] - target[i])))
        dest_x[i] = geo.candidates.x[j]
        dest_l[i] = geo.candidates.labels[j]
    return PointSet(dest_x, dest_l), target


def worst_case_distribution(Q: EmpiricalDistribution, f, rho: float, cost: TransportCost,
                            space: SampleSpace, tol: float = DEFAULT_TOL,
                            refine: bool = False) -> WorstCaseDistribution:
    """Approximate maximizer of the primal recovered from the dual solution.

    Two Lagrangian-optimal plans are built just left and right of the dual
    minimizer (high-cost and low-cost argmax choices) and mixed so that the
    budget binds; if even the cheap plan overspends, mass is split between
    staying and moving.
    """
    if rho < 0:
        raise DomainError(f"rho must be >= 0, got {rho}")
    if rho == 0:
        return WorstCaseDistribution(Q.atoms, Q.weights.copy(), 0.0, Q.expectation(f))
    geo = TransportGeometry(Q.atoms, cost, space)
    prob = geo.problem(f)
    refine = refine and getattr(f, "smooth", False)
    res = solve_dual_problem(prob, Q.weights, rho, tol, refine)
    delta = 1e-6 * (1.0 + res.lambda_star)
    lam_a = max(0.0, res.bracket[0] - delta)
    lam_b = res.bracket[1] + delta
    dest_a, cost_a = _plan(prob, lam_a, True, refine)
    dest_b, cost_b = _plan(prob, lam_b, False, refine)
    w = Q.weights
    total_a, total_b = float(w @ cost_a), float(w @ cost_b)
    if total_a <= rho:
        parts = [(dest_a, w)]
    elif total_b <= rho:
        mix = (rho - total_b) / (total_a - total_b)
        parts = [(dest_a, mix * w), (dest_b, (1.0 - mix) * w)]
    else:
        move = rho / total_b
        parts = [(dest_b, move * w), (Q.atoms, (1.0 - move) * w)]
    atoms = parts[0][0]
    weights = parts[0][1]
    for pts, ws in parts[1:]:
        atoms = atoms.concat(pts)
        weights = np.concatenate([weights, ws])
    keep = weights > 0
    atoms = atoms.take(np.flatnonzero(keep))
    weights = weights[keep]
    source = np.concatenate([np.arange(len(Q))] * len(parts))[keep]
    used = float(weights @ rowwise_cost(cost, Q.atoms.take(source), atoms))
    value = float(weights @ np.asarray(f(atoms), dtype=float))
    return WorstCaseDistribution(atoms, weights, used, value)


# ------------------------------------------------------------------ training


def train_robust(Q: EmpiricalDistribution, family, rho: float, cost: TransportCost,
                 space: SampleSpace, tol: float = DEFAULT_TOL):
    """Grid search over the theta-grid for the minimal robust risk.

    Ties keep the lexicographically smallest theta.
    """
    thetas = family.theta_grid()
    if len(thetas) == 0:
        raise DomainError("empty theta grid")
    geo = TransportGeometry(Q.atoms, cost, space)
    best_theta, best_val = None, math.inf
    for theta in thetas:
        prob = geo.problem(family.member(theta))
        val = robust_risk_problem(prob, Q.weights, rho, tol)
        if val < best_val - 1e-12 * (1 + abs(best_val if math.isfinite(best_val) else 0)):
            best_theta, best_val = theta, val
    return best_theta, best_val


# ------------------------------------------------------------- excess check


@dataclass(frozen=True)
class ExcessReport:
    robust_value: float
    bound: float
    slack: float
    holds: bool
    details: dict = field(default_factory=dict)


def excess_gap_check(Q: EmpiricalDistribution, f, rho: float, alpha_over_sqrt_n: float, lip_f: float,
                     power_p: float, true_mean: float, cost: TransportCost, space: SampleSpace,
                     tol: float = DEFAULT_TOL, slack_tol: float = 1e-7) -> ExcessReport:
    """Check ``R_rho(f) <= E_P[f] + lip_f * (rho + alpha / sqrt(n)) ** (1 / p)``.

    Requires ``c = d ** p``: ``cost.power_q == power_p`` and no transportable labels.
    """
    if lip_f < 0:
        raise DomainError("lip_f must be >= 0")
    if not cost.is_pure_power(space) or abs(cost.power_q - power_p) > 1e-12:
        raise DomainError("excess check needs a cost that is a pure power d**p (no label mixing)")
    value = robust_risk(Q, f, rho, cost, space, tol)
    bound = true_mean + lip_f * (rho + alpha_over_sqrt_n) ** (1.0 / power_p)
    slack = bound - value
    return ExcessReport(value, bound, slack, slack >= -slack_tol,
                        {"rho": rho, "alpha_over_sqrt_n": alpha_over_sqrt_n, "lip_f": lip_f, "p": power_p})
