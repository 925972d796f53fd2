"""Doubly regularized dual generator and the regularized robust risk.

With ``s = eps + lam * tau``::

    phi_reg(lam, f, xi) = s * log E_{zeta ~ pi0(.|xi)} exp((f(zeta) - lam * c(xi, zeta)) / s)

Conditional expectations under the reference kernel use a deterministic
grid quadrature (``quadrature_nodes`` points per continuous axis, weights
proportional to the kernel density), and every log-mean-exp is max-shifted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError, InfeasibleRadiusError
from .risk import DualSolveResult, EmpiricalDistribution
from .search import Probe, golden_min
from .space import PointSet, SamplePoint, SampleSpace, TransportCost, as_pointset, grid_points

KERNEL_KINDS = ("truncated_gaussian", "uniform", "truncated_laplace")


@dataclass(frozen=True)
class ReferenceKernel:
    """Conditional reference distribution ``pi0(.|xi)`` restricted to the space.

    ``scale`` is ``sigma`` for the Gaussian and the decay length for the
    Laplace kernel; it is ignored by the uniform kernel.  With
    ``keep_labels`` the kernel never changes the label coordinates.
    """

    kind: str = "truncated_gaussian"
    scale: float = 0.25
    quadrature_nodes: int = 41
    keep_labels: bool = True

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise DomainError(f"unknown kernel kind {self.kind!r}; expected one of {KERNEL_KINDS}")
        if int(self.quadrature_nodes) < 2:
            raise DomainError("quadrature_nodes must be >= 2")
        if self.kind != "uniform" and not self.scale > 0:
            raise DomainError(f"kernel scale must be > 0, got {self.scale}")

    @classmethod
    def default_for(cls, space: SampleSpace, quadrature_nodes: int = 41) -> "ReferenceKernel":
        edges = [hi - lo for lo, hi in space.boxes if hi > lo]
        sigma = float(np.mean(edges)) / 4.0 if edges else 1.0
        return cls("truncated_gaussian", sigma, quadrature_nodes)

    def nodes(self, space: SampleSpace) -> PointSet:
        return grid_points(space, self.quadrature_nodes)

    def log_weights(self, xi: PointSet, nodes: PointSet) -> np.ndarray:
        """Normalized log quadrature weights, shape (len(xi), len(nodes))."""
        d = np.sqrt(((xi.x[:, None, :] - nodes.x[None, :, :]) ** 2).sum(axis=-1))
        if xi.labels.shape[1]:
            mism = np.any(xi.labels[:, None, :] != nodes.labels[None, :, :], axis=-1)
        else:
            mism = np.zeros(d.shape, dtype=bool)
        if self.kind == "truncated_gaussian":
            logd = -((d + mism) ** 2) / (2.0 * self.scale**2)
        elif self.kind == "truncated_laplace":
            logd = -(d + mism) / self.scale
        else:
            logd = np.zeros(d.shape)
        if self.keep_labels:
            logd = np.where(mism, -np.inf, logd)
        norm = logsumexp(logd, axis=1, keepdims=True)
        if not np.all(np.isfinite(norm)):
            raise DomainError("reference kernel has zero total mass at some xi")
        return logd - norm


@dataclass(frozen=True)
class RegParams:
    tau: float = 0.0
    epsilon: float = 0.1

    def __post_init__(self):
        if not self.epsilon > 0:
            raise DomainError(f"epsilon must be > 0, got {self.epsilon}")
        if not self.tau >= 0:
            raise DomainError(f"tau must be >= 0, got {self.tau}")


@dataclass(frozen=True)
class KernelMoments:
    m_c: float
    m_2c: float


def kernel_quadrature(kernel: ReferenceKernel, xi: SamplePoint, space: SampleSpace):
    """Nodes and normalized weights realizing ``E_{zeta ~ pi0(.|xi)}``."""
    pts = as_pointset(xi)
    space.check(pts, "xi")
    nodes = kernel.nodes(space)
    w = np.exp(kernel.log_weights(pts, nodes)[0])
    keep = w > 0
    return [(nodes.point(j), float(w[j])) for j in np.flatnonzero(keep)]


def _expect(logw: np.ndarray, values: np.ndarray) -> np.ndarray:
    w = np.exp(logw)
    return np.where(w > 0, w * np.where(w > 0, values, 0.0), 0.0).sum(axis=1)


def kernel_moments(kernel: ReferenceKernel, cost: TransportCost, space: SampleSpace,
                   xi_grid: PointSet | None = None) -> KernelMoments:
    """``m_c = max_xi E_{pi0(.|xi)}[c(xi, .)]`` and the same for ``c**2``, over the space grid."""
    xi_grid = grid_points(space) if xi_grid is None else xi_grid
    nodes = kernel.nodes(space)
    logw = kernel.log_weights(xi_grid, nodes)
    c = cost.matrix(xi_grid, nodes)
    m_c = float(np.max(_expect(logw, c)))
    m_2c = float(np.max(_expect(logw, c * c)))
    return KernelMoments(m_c, m_2c)


class RegProblem:
    """Batch evaluation of ``phi_reg`` and its lambda-derivative for a set of atoms."""

    def __init__(self, atoms: PointSet, f, kernel: ReferenceKernel, cost: TransportCost,
                 space: SampleSpace, reg: RegParams, nodes: PointSet | None = None,
                 log_weights: np.ndarray | None = None, costs: np.ndarray | None = None):
        space.check(atoms, "atom")
        self.atoms = atoms
        self.reg = reg
        self.nodes = kernel.nodes(space) if nodes is None else nodes
        self.logw = kernel.log_weights(atoms, self.nodes) if log_weights is None else log_weights
        c = cost.matrix(atoms, self.nodes) if costs is None else costs
        live = np.isfinite(self.logw)
        # nodes outside the kernel support carry no mass; their cost never matters
        self.costs = np.where(live, c, 0.0)
        if not np.all(np.isfinite(self.costs)):
            raise DomainError("reference kernel charges moves with infinite cost")
        self.f_nodes = np.asarray(f(self.nodes), dtype=float)
        self.scale = float(np.max(np.abs(self.f_nodes)))

    def _exponent(self, lam: float):
        s = self.reg.epsilon + lam * self.reg.tau
        return s, self.logw + (self.f_nodes[None, :] - lam * self.costs) / s

    def phi(self, lam: float) -> np.ndarray:
        _check_lambda(lam)
        s, expo = self._exponent(lam)
        return s * logsumexp(expo, axis=1)

    def derivative(self, lam: float) -> np.ndarray:
        _check_lambda(lam)
        tau, eps = self.reg.tau, self.reg.epsilon
        s, expo = self._exponent(lam)
        lse = logsumexp(expo, axis=1, keepdims=True)
        gibbs = np.exp(expo - lse)
        term = (tau * self.f_nodes[None, :] + eps * self.costs) / s
        return -(gibbs * term).sum(axis=1) + tau * lse[:, 0]

    def mean_cost(self) -> np.ndarray:
        return _expect(self.logw, self.costs)

    def mean_f(self) -> np.ndarray:
        return _expect(self.logw, np.broadcast_to(self.f_nodes, self.logw.shape))


def _check_lambda(lam: float) -> None:
    if not lam >= 0:
        raise DomainError(f"lambda must be >= 0, got {lam}")


def phi_reg(lam: float, f, xi: SamplePoint, kernel: ReferenceKernel, cost: TransportCost,
            space: SampleSpace, reg: RegParams) -> float:
    return float(RegProblem(as_pointset(xi), f, kernel, cost, space, reg).phi(lam)[0])


def phi_reg_derivative(lam: float, f, xi: SamplePoint, kernel: ReferenceKernel, cost: TransportCost,
                       space: SampleSpace, reg: RegParams) -> float:
    """Exact lambda-derivative of :func:`phi_reg` over the quadrature (Gibbs-weighted)."""
    return float(RegProblem(as_pointset(xi), f, kernel, cost, space, reg).derivative(lam)[0])


def lambda_up(rho: float, sup_norm: float, m_c: float) -> float:
    """Upper bound ``2 ||F||_inf / (rho - m_c)`` on regularized dual minimizers."""
    if not rho > m_c:
        raise InfeasibleRadiusError(
            f"rho = {rho} must exceed the conditional moment m_c = {m_c}; raise rho "
            "(strong duality of the regularized problem needs rho > m_c)"
        )
    return 2.0 * sup_norm / (rho - m_c)


def solve_reg_problem(prob: RegProblem, weights: np.ndarray, rho: float, m_c: float,
                      tol: float = 1e-8, cap_factor: float = 1.0) -> DualSolveResult:
    """Golden-section minimization of ``lam * rho + E_Q[phi_reg]`` on ``[0, cap_factor * lambda_up]``."""
    # atoms off the xi-grid may have a larger conditional moment than m_c
    m_eff = max(m_c, float(np.max(prob.mean_cost())))
    cap = cap_factor * lambda_up(rho, prob.scale, m_eff)
    g = Probe(lambda lam: lam * rho + weights @ prob.phi(lam))
    g(0.0)
    g(cap)
    a, b = golden_min(g, 0.0, cap, tol)
    return DualSolveResult(g.best_x, g.best_f, (a, b), g.evaluations)


def robust_risk_reg(Q: EmpiricalDistribution, f, rho: float, kernel: ReferenceKernel,
                    cost: TransportCost, space: SampleSpace, reg: RegParams, tol: float = 1e-8,
                    moments: KernelMoments | None = None, cap_factor: float = 1.0) -> DualSolveResult:
    moments = kernel_moments(kernel, cost, space) if moments is None else moments
    lambda_up(rho, 1.0, moments.m_c)
    prob = RegProblem(Q.atoms, f, kernel, cost, space, reg)
    return solve_reg_problem(prob, Q.weights, rho, moments.m_c, tol, cap_factor)


def psi_reg(mu: float, prob: RegProblem) -> np.ndarray:
    """``mu * phi_reg(1 / mu)`` for ``tau = 0``, evaluated without forming ``1 / mu`` costs overflow."""
    eps = prob.reg.epsilon
    expo = prob.logw + (prob.f_nodes[None, :] - prob.costs / mu) / eps
    return mu * eps * logsumexp(expo, axis=1)


def psi_mu_derivative_probe(mu_list, f, xi: SamplePoint, kernel: ReferenceKernel, cost: TransportCost,
                            space: SampleSpace, reg: RegParams, rel_step: float = 1e-4) -> list[float]:
    """Central finite differences of ``mu -> psi^{0,eps}(mu, f, xi)``; returns magnitudes."""
    if reg.tau != 0:
        raise DomainError("the non-Lipschitz probe requires tau = 0")
    if kernel.kind != "truncated_laplace":
        raise DomainError("the non-Lipschitz probe requires a truncated Laplace kernel")
    prob = RegProblem(as_pointset(xi), f, kernel, cost, space, reg)
    out = []
    for mu in mu_list:
        if not mu > 0:
            raise DomainError(f"mu must be > 0, got {mu}")
        h = rel_step * mu
        d = (psi_reg(mu + h, prob)[0] - psi_reg(mu - h, prob)[0]) / (2.0 * h)
        out.append(abs(float(d)))
    return out


def psi_mu_derivative_exact(mu: float, prob: RegProblem) -> np.ndarray:
    """Closed form ``E_Gibbs[c] / mu + eps * log E_pi0[exp((mu f - c) / (mu eps))]`` (tau = 0)."""
    eps = prob.reg.epsilon
    expo = prob.logw + (prob.f_nodes[None, :] - prob.costs / mu) / eps
    lse = logsumexp(expo, axis=1, keepdims=True)
    gibbs = np.exp(expo - lse)
    return (gibbs * prob.costs).sum(axis=1) / mu + eps * lse[:, 0]
