"""Wasserstein distributionally robust risk, its regularized variant and generalization certificates."""

from .certificates import (
    CertificateBundle,
    RegCertificateBundle,
    certify,
    certify_reg,
    critical_radius,
    degeneracy_check,
    generalization_constants,
    lambda_low_numeric,
    lambda_low_reg_closed_form,
    linear_model_constants,
    n_min_standard,
    reg_critical_radius,
    reg_generalization_constants,
    rho_max_curve,
)
from .dual import inner_max, phi, phi_right_derivative, psi
from .errors import (
    ConfigError,
    ConstantFamilyError,
    DimensionError,
    DomainError,
    InfeasibleRadiusError,
    SolverError,
    WdroError,
)
from .losses import FamilyConstants, LossFamily, dudley_entropy, family_constants, is_constant_family, loss_eval
from .regularized import (
    KernelMoments,
    ReferenceKernel,
    RegParams,
    kernel_moments,
    kernel_quadrature,
    lambda_up,
    phi_reg,
    phi_reg_derivative,
    psi_mu_derivative_probe,
    robust_risk_reg,
)
from .risk import (
    DualSolveResult,
    EmpiricalDistribution,
    dual_objective,
    excess_gap_check,
    primal_oracle,
    robust_risk,
    solve_dual,
    train_robust,
    worst_case_distribution,
)
from .space import PointSet, SamplePoint, SampleSpace, TransportCost, cost_eval, distance_eval, grid

__version__ = "0.1.0"
