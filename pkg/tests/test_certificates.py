import math

import numpy as np
import pytest
from scipy.special import logsumexp

from wdrocert.certificates import (
    certify,
    certify_reg,
    critical_radius,
    degeneracy_check,
    generalization_constants,
    lambda_low_numeric,
    lambda_low_reg_closed_form,
    linear_model_constants,
    n_min_reg,
    n_min_standard,
    reg_critical_radius,
    reg_generalization_constants,
    rho_max_curve,
)
from wdrocert.errors import ConstantFamilyError, DomainError, InfeasibleRadiusError
from wdrocert.losses import LossFamily
from wdrocert.regularized import ReferenceKernel, RegParams
from wdrocert.risk import EmpiricalDistribution

from conftest import points

DELTA = 2 * math.exp(-2)


def test_identity_critical_radius_and_lambda_low(unit, sq, ident, delta0):
    assert critical_radius(ident, delta0, sq, unit) == pytest.approx(1.0, abs=1e-12)
    assert lambda_low_numeric(ident, delta0, sq, unit) == pytest.approx(0.5, abs=1e-6)


def test_constant_family_has_zero_radius(unit, sq):
    const = LossFamily.custom(lambda t, x, l: np.ones(len(x)))
    P = EmpiricalDistribution.uniform(points(np.linspace(0, 1, 41)))
    assert critical_radius(const, P, sq, unit) == 0.0
    with pytest.raises(ConstantFamilyError):
        lambda_low_numeric(const, P, sq, unit)


def test_rho_max_curve_identity(unit, sq, ident, delta0):
    grid = [0.0, 0.25, 0.5, 0.75, 1.0, 2.0]
    curve = rho_max_curve(ident, delta0, sq, unit, grid)
    vals = [v for _, v in curve]
    assert vals[:3] == pytest.approx([1.0, 1.0, 1.0], abs=1e-12)
    for lam, v in curve[3:]:
        assert v == pytest.approx(1 / (4 * lam**2), abs=1e-6)
    with pytest.raises(DomainError):
        rho_max_curve(ident, delta0, sq, unit, [1.0, 0.5])


def test_generalization_constants_worked_example():
    alpha, beta = generalization_constants(1.0, 1.0, 1.0, DELTA)
    assert alpha == pytest.approx(292.0, abs=1e-9)
    assert beta == pytest.approx(105.284, abs=1e-3)
    alphas = [generalization_constants(l, 1.0, 1.0, 0.05)[0] for l in (0.5, 1.0, 2.0)]
    assert alphas[0] > alphas[1] > alphas[2]
    with pytest.raises(DomainError):
        generalization_constants(1.0, 1.0, 1.0, 1.0)


def test_n_min_standard():
    assert n_min_standard(292, 105.284, 1.0) == pytest.approx(2.5253e6, abs=1e3)
    assert n_min_standard(292, 105.284, 2.0) == pytest.approx(n_min_standard(292, 105.284, 1.0) / 4)
    assert n_min_standard(0, 0, 1.0) == 0.0
    with pytest.raises(DomainError):
        n_min_standard(1, 1, 0.0)


def test_reg_constants_worked_example_and_collapse():
    a, _ = reg_generalization_constants(1.0, 1.0, 1.0, 1 / 3, 4 / 3, RegParams(0.0, 1.0), DELTA)
    assert a == pytest.approx(388.667, abs=1e-3)
    std = generalization_constants(0.7, 1.3, 0.4, 0.1)
    reg = reg_generalization_constants(0.7, 1.3, 0.4, 0.0, 1.0, RegParams(0.0, 0.5), 0.1)
    assert reg == pytest.approx(std, rel=1e-14)
    lo = reg_generalization_constants(0.5, 1, 1, 0.2, 1, RegParams(0, 1), 0.05)
    hi = reg_generalization_constants(2.0, 1, 1, 0.2, 1, RegParams(0, 1), 0.05)
    assert lo[0] > hi[0] and lo[1] > hi[1]
    with pytest.raises(InfeasibleRadiusError):
        reg_generalization_constants(1, 1, 1, 0.5, 0.5, RegParams(0, 1), 0.05)


def test_lambda_low_reg_worked_example():
    val = lambda_low_reg_closed_form(1.0, 1 / 3, 1 / 5, 0.5 + 1 / 3, 1 / 3, RegParams(0.0, 1.0))
    assert val == pytest.approx(1 / (8 * 0.2 * math.exp(7 / 3)), rel=1e-12)
    assert val == pytest.approx(0.0606, abs=5e-4)
    doubled = lambda_low_reg_closed_form(1.0, 1 / 3, 1 / 5, 0.5 + 1 / 3, 2 / 3, RegParams(0.0, 1.0))
    assert doubled == pytest.approx(2 * val)
    with pytest.raises(InfeasibleRadiusError):
        lambda_low_reg_closed_form(1.0, 1 / 3, 1 / 5, 1 / 3, 1 / 3, RegParams(0.0, 1.0))


def test_lambda_low_reg_decays_like_exp_minus_f_over_eps():
    eps = np.array([1.0, 0.5, 0.25])
    vals = [lambda_low_reg_closed_form(1.0, 0.1, 0.05, 1.0, 0.5, RegParams(0.0, e)) for e in eps]
    assert vals[0] > vals[1] > vals[2]
    # after removing the linear eps prefactor the exponent is (|F| + 2|F| m_c / (rho - m_c)) / eps
    slope = np.polyfit(1 / eps, np.log(np.array(vals) / eps), 1)[0]
    assert slope == pytest.approx(-(1 + 2 * 0.1 / 0.9), rel=1e-9)


def test_reg_critical_radius_constant_family(unit, sq, delta0):
    const = LossFamily.custom(lambda t, x, l: np.full(len(x), 0.3))
    k = ReferenceKernel("uniform", quadrature_nodes=2001)
    for eps in (0.1, 1e6):
        assert reg_critical_radius(const, delta0, k, sq, unit, RegParams(0.0, eps)) == pytest.approx(1 / 3, abs=1e-3)


def test_reg_critical_radius_matches_direct_sum(unit, sq):
    k = ReferenceKernel("truncated_gaussian", 0.3, 41)
    reg = RegParams(0.2, 0.5)
    fam = LossFamily.custom(lambda t, x, l: np.sin(t[0] * x[:, 0]), theta_box=((1.0, 3.0),),
                            theta_grid_resolution=3)
    P = EmpiricalDistribution(points([0.1, 0.7]), np.array([0.4, 0.6]))
    nodes = np.linspace(0, 1, 41)
    best = math.inf
    for th in (1.0, 2.0, 3.0):
        total = 0.0
        for xi, w in zip([0.1, 0.7], [0.4, 0.6]):
            logk = -((nodes - xi) ** 2) / (2 * 0.3**2)
            logk -= logsumexp(logk)
            f = np.sin(th * nodes)
            c = (nodes - xi) ** 2
            gibbs = np.exp(logk + f / 0.5 - logsumexp(logk + f / 0.5))
            total += w * (gibbs @ ((0.2 / 0.5) * f + c) - 0.2 * logsumexp(logk + f / 0.5))
        best = min(best, total)
    assert reg_critical_radius(fam, P, k, sq, unit, reg) == pytest.approx(best, abs=1e-10)


def test_linear_model_constants():
    assert linear_model_constants("linear_regression", 2, 1, 1) == (1, 1)
    rc, lo = linear_model_constants("logistic_regression", 1, 1, 1)
    assert rc == 1 and lo == pytest.approx(1 / (8 * (1 + math.e)), rel=1e-12)
    assert lo == pytest.approx(0.0336, abs=1e-4)
    assert linear_model_constants("logistic_regression", 2, 0, 1)[1] == pytest.approx(2 / 16)
    with pytest.raises(DomainError):
        linear_model_constants("linear_regression", 0, 1, 1)
    with pytest.raises(DomainError):
        linear_model_constants("ridge", 1, 1, 1)


def test_degeneracy_identity(unit, sq, ident, delta0):
    rep = degeneracy_check(ident, delta0, 1.0, sq, unit)
    assert rep.degenerate and rep.min_gap <= 1e-6
    rep = degeneracy_check(ident, delta0, 0.25, sq, unit)
    assert not rep.degenerate and rep.min_gap == pytest.approx(0.5, abs=1e-3)


def test_certify_bundle(unit, sq, ident, delta0):
    b = certify(ident, delta0, sq, unit, delta=0.05)
    assert b.rho_crit == pytest.approx(1.0)
    assert b.lambda_low == pytest.approx(0.5, abs=1e-6)
    assert b.n_min == pytest.approx(n_min_standard(b.alpha, b.beta, b.rho_crit))
    lo, hi = b.rho_admissible(100)
    assert lo == pytest.approx(b.alpha / 10) and hi == math.inf
    assert set(b.to_dict()) >= {"rho_crit", "lambda_low", "alpha", "beta", "n_min", "provenance"}


def test_certify_reg_bundle(unit, sq, ident):
    k = ReferenceKernel("truncated_gaussian", 0.05, 41)
    P = EmpiricalDistribution.uniform(points([0.2, 0.5]))
    b = certify_reg(ident, P, k, sq, unit, RegParams(0.0, 0.1), rho=0.01)
    assert b.m_c < 0.01
    assert b.lambda_up == pytest.approx(2 * 1.0 / (0.01 - b.m_c))
    assert b.vacuous == (b.rho_crit_reg <= 4 * b.m_c)
    assert n_min_reg(1.0, 1.0, 0.1, 0.05) == math.inf
    assert n_min_reg(1.0, 1.0, 0.3, 0.05) == pytest.approx(16 * 4 / 0.1**2)
