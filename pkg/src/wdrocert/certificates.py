"""Generalization certificates: critical radius, maximal radius, dual bounds and constants.

Infima over the family are taken over the finite theta-grid, so the
critical radius reported here is a plug-in estimate (biased upward by grid
coarseness) computed on a reference sample ``P_ref``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .dual import TransportGeometry
from .errors import ConstantFamilyError, DomainError, InfeasibleRadiusError
from .losses import FamilyConstants, LossFamily, family_constants
from .regularized import KernelMoments, ReferenceKernel, RegParams, RegProblem, kernel_moments
from .risk import EmpiricalDistribution, solve_dual_problem
from .space import SampleSpace, TransportCost

LAMBDA_CAP = 1e8


def _members(family):
    """Accept a LossFamily or an explicit list of member callables."""
    if isinstance(family, LossFamily):
        return list(family.theta_grid()), family.members()
    members = list(family)
    return [np.array([i], dtype=float) for i in range(len(members))], members


class RadiusEvaluator:
    """Shares one cost matrix across all members to evaluate ``rho_max`` repeatedly."""

    def __init__(self, family, P_ref: EmpiricalDistribution, cost: TransportCost, space: SampleSpace,
                 tie_tol: float | None = None, refine: bool | None = None):
        self.thetas, members = _members(family)
        if not members:
            raise DomainError("empty family")
        self.weights = P_ref.weights
        self.geometry = TransportGeometry(P_ref.atoms, cost, space)
        self.problems = [self.geometry.problem(f) for f in members]
        self.tie_tol = tie_tol
        # argmax locations are refined off-grid only for families smooth in the sample
        self.refine = bool(getattr(family, "smooth", False)) if refine is None else refine
        self._cache: dict[float, np.ndarray] = {}

    def per_member(self, lam: float) -> np.ndarray:
        lam = float(lam)
        if lam not in self._cache:
            # lambda = 0 is the exact grid argmax, matching critical_radius
            refine = self.refine and lam > 0
            self._cache[lam] = np.array([
                -(self.weights @ p.right_derivative(lam, self.tie_tol, refine)) for p in self.problems
            ])
        return self._cache[lam]

    def rho_max(self, lam: float) -> float:
        return float(self.per_member(lam).min())


def critical_radius(family, P_ref: EmpiricalDistribution, cost: TransportCost, space: SampleSpace,
                    tie_tol: float | None = None) -> float:
    """Min over members of ``E_P[min{c(xi, zeta) : zeta in argmax f}]``."""
    return RadiusEvaluator(family, P_ref, cost, space, tie_tol).rho_max(0.0)


def rho_max_curve(family, P_ref: EmpiricalDistribution, cost: TransportCost, space: SampleSpace,
                  lambda_grid, tie_tol: float | None = None,
                  refine: bool | None = None) -> list[tuple[float, float]]:
    lambda_grid = [float(v) for v in lambda_grid]
    if any(v < 0 for v in lambda_grid) or any(b < a for a, b in zip(lambda_grid, lambda_grid[1:])):
        raise DomainError("lambda grid must be nonnegative and ascending")
    ev = RadiusEvaluator(family, P_ref, cost, space, tie_tol, refine)
    return [(lam, ev.rho_max(lam)) for lam in lambda_grid]


def _lambda_bar(rho_max, target: float, cap: float = LAMBDA_CAP, rel_tol: float = 1e-10) -> float:
    """Largest lambda with ``rho_max(lambda) >= target`` for a nonincreasing ``rho_max``."""
    lo, hi = 0.0, 1.0
    while rho_max(hi) >= target:
        lo, hi = hi, 2.0 * hi
        if hi > cap:
            return cap
    while hi - lo > rel_tol * (1.0 + hi):
        mid = 0.5 * (lo + hi)
        if rho_max(mid) >= target:
            lo = mid
        else:
            hi = mid
    return lo


def lambda_low_numeric(family, P_ref: EmpiricalDistribution, cost: TransportCost, space: SampleSpace,
                       tie_tol: float | None = None, evaluator: RadiusEvaluator | None = None,
                       refine: bool | None = None) -> float:
    """Half the largest ``lambda`` at which ``rho_max(lambda) >= rho_crit / 4``."""
    ev = evaluator or RadiusEvaluator(family, P_ref, cost, space, tie_tol, refine)
    rho_crit = ev.rho_max(0.0)
    if rho_crit <= 0:
        raise ConstantFamilyError(
            "critical radius is zero: the family contains a (near-)constant function on the "
            "support of P, so no positive dual lower bound exists"
        )
    return _lambda_bar(ev.rho_max, rho_crit / 4.0) / 2.0


def generalization_constants(lambda_low: float, sup_norm: float, dudley: float, delta: float):
    """``(alpha, beta)`` of the exact generalization bound for standard WDRO."""
    _check_delta(delta)
    if not lambda_low > 0:
        raise DomainError("lambda_low must be > 0")
    inv = 1.0 / lambda_low
    alpha = 48.0 * (sup_norm + inv) * (dudley + 2.0 * inv) + 2.0 * sup_norm * inv * math.sqrt(
        2.0 * math.log(2.0 / delta))
    beta = 96.0 * dudley * inv + 4.0 * sup_norm * inv * math.sqrt(2.0 * math.log(4.0 / delta))
    return alpha, beta


def n_min_standard(alpha: float, beta: float, rho_crit: float) -> float:
    if not rho_crit > 0:
        raise DomainError("rho_crit must be > 0")
    return 16.0 * (alpha + beta) ** 2 / rho_crit**2


def _check_delta(delta: float) -> None:
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")


# ----------------------------------------------------------- regularized


class RegRadiusEvaluator:
    def __init__(self, family, P_ref: EmpiricalDistribution, kernel: ReferenceKernel,
                 cost: TransportCost, space: SampleSpace, reg: RegParams):
        self.thetas, members = _members(family)
        if not members:
            raise DomainError("empty family")
        self.weights = P_ref.weights
        first = RegProblem(P_ref.atoms, members[0], kernel, cost, space, reg)
        self.problems = [first] + [
            RegProblem(P_ref.atoms, f, kernel, cost, space, reg, first.nodes, first.logw, first.costs)
            for f in members[1:]
        ]

    def per_member(self, lam: float) -> np.ndarray:
        return np.array([-(self.weights @ p.derivative(lam)) for p in self.problems])

    def rho_max(self, lam: float) -> float:
        return float(self.per_member(lam).min())


def reg_critical_radius(family, P_ref: EmpiricalDistribution, kernel: ReferenceKernel,
                        cost: TransportCost, space: SampleSpace, reg: RegParams) -> float:
    """Min over members of ``E_P[E_Gibbs[(tau/eps) f + c] - tau log E_pi0 exp(f/eps)]``."""
    return RegRadiusEvaluator(family, P_ref, kernel, cost, space, reg).rho_max(0.0)


def reg_rho_max_curve(family, P_ref, kernel, cost, space, reg, lambda_grid):
    ev = RegRadiusEvaluator(family, P_ref, kernel, cost, space, reg)
    return [(float(lam), ev.rho_max(float(lam))) for lam in lambda_grid]


def lambda_low_reg_closed_form(sup_norm: float, m_c: float, m_2c: float, rho: float,
                               rho_crit_reg: float, reg: RegParams) -> float:
    """Closed-form regularized dual lower bound derived from the Lipschitz modulus of ``rho_max``."""
    if not rho > m_c:
        raise InfeasibleRadiusError(f"rho = {rho} must exceed m_c = {m_c}")
    tau, eps = reg.tau, reg.epsilon
    second = 2.0 * sup_norm * m_c / ((rho - m_c) * eps)
    expo = sup_norm / eps + (min(m_c / tau, second) if tau > 0 else second)
    denom = 8.0 * ((tau / eps) ** 2 * sup_norm**2 + m_2c * math.exp(expo))
    if denom == 0:
        return math.inf
    return 3.0 * eps * rho_crit_reg / denom


def reg_generalization_constants(lambda_low_reg: float, sup_norm: float, dudley: float, m_c: float,
                                 rho: float, reg: RegParams, delta: float):
    """``(alpha, beta)`` of the regularized generalization bound."""
    _check_delta(delta)
    if not rho > m_c:
        raise InfeasibleRadiusError(f"rho = {rho} must exceed m_c = {m_c}")
    if not lambda_low_reg > 0:
        raise DomainError("lambda_low_reg must be > 0")
    tau, eps = reg.tau, reg.epsilon
    inv = 1.0 / lambda_low_reg
    extra = 2.0 * sup_norm * m_c * eps / (eps * (rho - m_c) + 2.0 * tau * sup_norm)
    alpha = 48.0 * (sup_norm + inv + extra) * (dudley + 2.0 * inv) + (2.0 * sup_norm * inv + m_c) * math.sqrt(
        2.0 * math.log(2.0 / delta))
    beta = 96.0 * dudley * inv + 4.0 * (sup_norm * inv + m_c) * math.sqrt(2.0 * math.log(4.0 / delta))
    return alpha, beta


def n_min_reg(alpha_reg: float, beta_reg: float, rho_crit_reg: float, m_c: float) -> float:
    gap = rho_crit_reg - 4.0 * m_c
    if gap <= 0:
        return math.inf
    return 16.0 * (alpha_reg + beta_reg) ** 2 / gap**2


# ------------------------------------------------------------ linear models

LINEAR_CONDITIONS = {
    "linear_regression": "c = ||.-.||^2, f = (<theta,x> - y)^2, inf ||(theta,-1)||^2 >= omega >= 1, "
                         "supp P in a ball of diameter D centered at 0, Xi = ball of diameter 3D",
    "logistic_regression": "c = ||.-.||^2, f = log(1 + exp(-y <theta,x>)), inf ||theta||^2 >= omega, "
                           "Omega = sup ||theta||^2, supp P in a ball of diameter D, Xi = ball of diameter 3D",
}


def linear_model_constants(kind: str, omega: float, Omega: float, D: float):
    """Lower bounds ``(rho_crit_lb, lambda_low_lb)`` for linear and logistic regression."""
    if kind not in LINEAR_CONDITIONS:
        raise DomainError(f"kind must be one of {tuple(LINEAR_CONDITIONS)}")
    if not omega > 0 or not D > 0:
        raise DomainError("omega and D must be > 0")
    if kind == "linear_regression":
        return D**2, omega / 2.0
    return D**2, omega / (8.0 * (1.0 + math.exp(D * Omega)))


# -------------------------------------------------------------- degeneracy


@dataclass(frozen=True)
class DegeneracyReport:
    rho: float
    min_gap: float
    theta: tuple
    degenerate: bool
    tol: float
    gaps: list = field(default_factory=list)


def degeneracy_check(family, P_ref: EmpiricalDistribution, rho: float, cost: TransportCost,
                     space: SampleSpace, tol: float = 1e-6, solver_tol: float = 1e-10) -> DegeneracyReport:
    """Smallest gap ``max f - R_rho(f)`` over the family.

    ``max f`` is the largest value reachable from the reference atoms, i.e.
    ``E_P[phi(0, f, xi)]``; it is the global maximum unless the cost forbids
    some moves (fixed labels).
    """
    if rho < 0:
        raise DomainError("rho must be >= 0")
    thetas, members = _members(family)
    geo = TransportGeometry(P_ref.atoms, cost, space)
    gaps = []
    for f in members:
        prob = geo.problem(f)
        top = float(P_ref.weights @ prob.phi_grid(0.0))
        if rho == 0:
            value = float(P_ref.weights @ prob.f_self)
        else:
            value = solve_dual_problem(prob, P_ref.weights, rho, solver_tol).value
        gaps.append(max(top - value, 0.0))
    k = int(np.argmin(gaps))
    return DegeneracyReport(rho, gaps[k], tuple(float(v) for v in thetas[k]), gaps[k] <= tol, tol, gaps)


# ----------------------------------------------------------------- bundles


@dataclass
class CertificateBundle:
    rho_crit: float
    lambda_low: float
    dudley: float
    sup_norm: float
    alpha: float
    beta: float
    n_min: float
    delta: float
    constants_method: str = "closed-form"
    theta_grid_size: int = 0
    grid_resolution: int = 0
    provenance: dict = field(default_factory=dict)

    def rho_admissible(self, n: int) -> tuple[float, float]:
        """Radii covered by the exact bound at sample size ``n``: ``(alpha / sqrt(n), inf)``."""
        return self.alpha / math.sqrt(n), math.inf

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RegCertificateBundle:
    rho_crit_reg: float
    m_c: float
    m_2c: float
    lambda_low_reg: float
    lambda_up: float
    alpha_reg: float
    beta_reg: float
    n_min_reg: float
    rho: float
    delta: float
    vacuous: bool
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def certify(family: LossFamily, P_ref: EmpiricalDistribution, cost: TransportCost, space: SampleSpace,
            delta: float = 0.05, constants: FamilyConstants | None = None,
            tie_tol: float | None = None) -> CertificateBundle:
    consts = constants or family_constants(family, space, cost.p_norm)
    ev = RadiusEvaluator(family, P_ref, cost, space, tie_tol)
    rho_crit = ev.rho_max(0.0)
    lam_low = lambda_low_numeric(family, P_ref, cost, space, evaluator=ev)
    alpha, beta = generalization_constants(lam_low, consts.sup_norm, consts.dudley, delta)
    return CertificateBundle(
        rho_crit=rho_crit, lambda_low=lam_low, dudley=consts.dudley, sup_norm=consts.sup_norm,
        alpha=alpha, beta=beta, n_min=n_min_standard(alpha, beta, rho_crit), delta=delta,
        constants_method=consts.method, theta_grid_size=len(ev.thetas),
        grid_resolution=space.grid_resolution,
        provenance={
            "rho_crit": "min over theta-grid of E_Pref[min cost to grid argmax] (estimate)",
            "lambda_low": "half the largest lambda with rho_max >= rho_crit / 4 (bisection)",
            "alpha": "48(|F|+1/l)(I+2/l) + (2|F|/l) sqrt(2 log(2/delta))",
            "beta": "96 I/l + (4|F|/l) sqrt(2 log(4/delta))",
            "n_min": "16 (alpha + beta)^2 / rho_crit^2",
            "lip_xi": consts.lip_xi,
            "lip_theta": consts.lip_theta,
            "reference_atoms": len(P_ref),
        },
    )


def certify_reg(family: LossFamily, P_ref: EmpiricalDistribution, kernel: ReferenceKernel,
                cost: TransportCost, space: SampleSpace, reg: RegParams, rho: float,
                delta: float = 0.05, constants: FamilyConstants | None = None,
                moments: KernelMoments | None = None) -> RegCertificateBundle:
    consts = constants or family_constants(family, space, cost.p_norm)
    mom = moments or kernel_moments(kernel, cost, space)
    rho_crit_reg = reg_critical_radius(family, P_ref, kernel, cost, space, reg)
    lam_low = lambda_low_reg_closed_form(consts.sup_norm, mom.m_c, mom.m_2c, rho, rho_crit_reg, reg)
    lam_up = 2.0 * consts.sup_norm / (rho - mom.m_c)
    vacuous = rho_crit_reg <= 4.0 * mom.m_c
    if lam_low > 0 and math.isfinite(lam_low):
        a, b = reg_generalization_constants(lam_low, consts.sup_norm, consts.dudley, mom.m_c, rho, reg, delta)
    else:
        a = b = math.inf
    return RegCertificateBundle(
        rho_crit_reg=rho_crit_reg, m_c=mom.m_c, m_2c=mom.m_2c, lambda_low_reg=lam_low, lambda_up=lam_up,
        alpha_reg=a, beta_reg=b, n_min_reg=n_min_reg(a, b, rho_crit_reg, mom.m_c), rho=rho, delta=delta,
        vacuous=vacuous,
        provenance={
            "rho_crit_reg": "min over theta-grid of E_Pref[-d/dlam phi_reg(0)] on kernel quadrature",
            "lambda_low_reg": "3 eps rho_crit_reg / (8 [(tau/eps)^2 |F|^2 + m_2c exp(|F|/eps + min(...))])",
            "lambda_up": "2 |F| / (rho - m_c)",
            "tau": reg.tau,
            "epsilon": reg.epsilon,
            "kernel": kernel.kind,
            "kernel_scale": kernel.scale,
            "quadrature_nodes": kernel.quadrature_nodes,
        },
    )
