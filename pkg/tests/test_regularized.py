import math

import numpy as np
import pytest

from wdrocert.errors import DomainError, InfeasibleRadiusError
from wdrocert.regularized import (
    ReferenceKernel,
    RegParams,
    RegProblem,
    kernel_moments,
    kernel_quadrature,
    lambda_up,
    phi_reg,
    phi_reg_derivative,
    psi_mu_derivative_exact,
    psi_mu_derivative_probe,
    psi_reg,
    robust_risk_reg,
)
from wdrocert.risk import EmpiricalDistribution
from wdrocert.space import SamplePoint, SampleSpace, TransportCost

from conftest import points

f_sin = lambda pts: np.sin(3 * pts.x[:, 0])


def test_uniform_kernel_moments_converge():
    sp = SampleSpace(((0.0, 1.0),), (), 41)
    m = kernel_moments(ReferenceKernel("uniform", quadrature_nodes=2001), TransportCost(2, 2), sp)
    assert m.m_c == pytest.approx(1 / 3, abs=1e-3)
    assert m.m_2c == pytest.approx(1 / 5, abs=1e-3)


def test_quadrature_weights_sum_to_one(unit):
    for kind in ("truncated_gaussian", "uniform", "truncated_laplace"):
        quad = kernel_quadrature(ReferenceKernel(kind, 0.3, 21), SamplePoint((0.2,)), unit)
        assert sum(w for _, w in quad) == pytest.approx(1.0)


def test_keep_labels_kernel():
    sp = SampleSpace(((0.0, 1.0),), (2,), 5)
    quad = kernel_quadrature(ReferenceKernel("uniform", quadrature_nodes=5), SamplePoint((0.5,), (1,)), sp)
    assert all(p.labels == (1,) for p, _ in quad)
    assert len(quad) == 5


@pytest.mark.parametrize("tau", [0.0, 0.5])
def test_derivative_matches_finite_difference(tau, unit, sq):
    k = ReferenceKernel("truncated_gaussian", 0.2, 41)
    reg = RegParams(tau, 0.1)
    xi = SamplePoint((0.3,))
    for lam in (0.1, 1.0, 5.0):
        h = 1e-6
        fd = (phi_reg(lam + h, f_sin, xi, k, sq, unit, reg) - phi_reg(lam - h, f_sin, xi, k, sq, unit, reg)) / (2 * h)
        assert phi_reg_derivative(lam, f_sin, xi, k, sq, unit, reg) == pytest.approx(fd, abs=1e-6)


def test_phi_reg_jensen_and_small_epsilon_limit(unit, sq):
    k = ReferenceKernel("uniform", quadrature_nodes=41)
    xi = SamplePoint((0.25,))
    prob = RegProblem(points([0.25]), f_sin, k, sq, unit, RegParams(0.0, 1.0))
    assert phi_reg(0.0, f_sin, xi, k, sq, unit, RegParams(0.0, 1.0)) >= prob.mean_f()[0]
    nodes = k.nodes(unit).x[:, 0]
    target = np.max(np.sin(3 * nodes) - 2.0 * (nodes - 0.25) ** 2)
    gaps = [abs(phi_reg(2.0, f_sin, xi, k, sq, unit, RegParams(0.0, e)) - target) for e in (1e-1, 1e-2, 1e-3)]
    assert gaps[0] > gaps[1] > gaps[2]
    # log(K) * eps bounds the smoothing error
    assert gaps[2] <= 1e-3 * math.log(41) + 1e-12


def test_psi_reg_consistency(unit, sq):
    k = ReferenceKernel("truncated_laplace", 0.5, 41)
    reg = RegParams(0.0, 0.2)
    prob = RegProblem(points([0.4]), f_sin, k, sq, unit, reg)
    for mu in (0.3, 1.0, 2.0):
        assert psi_reg(mu, prob)[0] == pytest.approx(mu * prob.phi(1.0 / mu)[0])
        h = 1e-6
        fd = (psi_reg(mu + h, prob)[0] - psi_reg(mu - h, prob)[0]) / (2 * h)
        assert psi_mu_derivative_exact(mu, prob)[0] == pytest.approx(fd, abs=1e-6)


def test_lambda_up_requires_rho_above_moment():
    assert lambda_up(1.0, 2.0, 0.5) == pytest.approx(8.0)
    with pytest.raises(InfeasibleRadiusError, match="m_c"):
        lambda_up(0.5, 2.0, 0.5)


def test_robust_risk_reg_feasible_coupling(unit, sq):
    k = ReferenceKernel("truncated_gaussian", 0.1, 41)
    m = kernel_moments(k, sq, unit)
    Q = EmpiricalDistribution.uniform(points([0.1, 0.5, 0.8]))
    reg = RegParams(0.0, 0.1)
    res = robust_risk_reg(Q, f_sin, 2 * m.m_c, k, sq, unit, reg, moments=m)
    prob = RegProblem(Q.atoms, f_sin, k, sq, unit, reg)
    assert res.value >= float(Q.weights @ prob.mean_f()) - 1e-9
    assert 0 <= res.lambda_star <= lambda_up(2 * m.m_c, prob.scale, m.m_c)
    with pytest.raises(InfeasibleRadiusError):
        robust_risk_reg(Q, f_sin, 0.5 * m.m_c, k, sq, unit, reg, moments=m)


def test_robust_risk_reg_monotone_in_rho(unit, sq):
    k = ReferenceKernel("truncated_gaussian", 0.1, 41)
    m = kernel_moments(k, sq, unit)
    Q = EmpiricalDistribution.uniform(points([0.2, 0.6]))
    vals = [robust_risk_reg(Q, f_sin, r * m.m_c, k, sq, unit, RegParams(0.0, 0.1), moments=m).value
            for r in (1.5, 2, 4, 8)]
    assert np.all(np.diff(vals) >= -1e-7)


def test_probe_requires_laplace_and_tau_zero(unit):
    c1 = TransportCost(2, 1)
    f0 = lambda pts: np.zeros(len(pts))
    with pytest.raises(DomainError):
        psi_mu_derivative_probe([0.1], f0, SamplePoint((0.0,)), ReferenceKernel("uniform"), c1, unit, RegParams())
    with pytest.raises(DomainError):
        psi_mu_derivative_probe([0.1], f0, SamplePoint((0.0,)), ReferenceKernel("truncated_laplace", 1.0),
                                c1, unit, RegParams(0.1, 0.5))


def test_kernel_and_params_validation():
    with pytest.raises(DomainError):
        ReferenceKernel("cauchy")
    with pytest.raises(DomainError):
        ReferenceKernel("truncated_gaussian", 0.0)
    with pytest.raises(DomainError):
        RegParams(0.0, 0.0)
    with pytest.raises(DomainError):
        RegParams(-1.0, 0.1)
