import math

import numpy as np
import pytest
from scipy.optimize import linprog

from wdrocert.errors import DomainError, InfeasibleRadiusError, SolverError
from wdrocert.losses import LossFamily
from wdrocert.lp import solve_lp, solve_simplex, solve_vertex_enumeration
from wdrocert.risk import (
    EmpiricalDistribution,
    excess_gap_check,
    primal_oracle,
    robust_risk,
    solve_dual,
    train_robust,
    worst_case_distribution,
)
from wdrocert.space import SampleSpace, TransportCost

from conftest import points


def random_lp(rng, m, n):
    return rng.normal(size=n), rng.random((m, n)) + 0.05, rng.random(m) + 0.1


@pytest.mark.parametrize("seed", range(20))
def test_lp_solvers_match_scipy(seed):
    rng = np.random.default_rng(seed)
    g, a, b = random_lp(rng, rng.integers(1, 4), rng.integers(1, 6))
    ref = -linprog(-g, A_ub=a, b_ub=b, bounds=(0, None), method="highs").fun
    for solver in (solve_vertex_enumeration, solve_simplex, solve_lp):
        val, x = solver(g, a, b)
        assert val == pytest.approx(ref, abs=1e-9)
        assert np.all(x >= -1e-12) and np.all(a @ x <= b + 1e-9)


def test_simplex_detects_unbounded():
    with pytest.raises(SolverError):
        solve_simplex([1.0, 1.0], [[1.0, -1.0]], [1.0])


def test_lp_shape_check():
    with pytest.raises(SolverError):
        solve_lp([1.0], [[1.0, 2.0]], [1.0])


@pytest.mark.parametrize("rho", [0.04, 0.25, 0.64])
def test_delta0_closed_form(rho, unit, sq, f_id, delta0):
    assert robust_risk(delta0, f_id, rho, sq, unit, refine=True) == pytest.approx(math.sqrt(rho), abs=1e-6)


def test_rho_zero_is_mean(unit, sq, f_id):
    Q = EmpiricalDistribution.uniform(points([0.1, 0.5]))
    assert robust_risk(Q, f_id, 0.0, sq, unit) == pytest.approx(0.3)
    with pytest.raises(InfeasibleRadiusError):
        solve_dual(Q, f_id, 0.0, sq, unit)
    with pytest.raises(DomainError):
        robust_risk(Q, f_id, -1.0, sq, unit)


def test_robust_risk_monotone_in_rho(unit, sq, f_id):
    Q = EmpiricalDistribution.uniform(points([0.1, 0.3, 0.6]))
    vals = [robust_risk(Q, f_id, r, sq, unit) for r in np.linspace(0, 1.2, 25)]
    assert np.all(np.diff(vals) >= -1e-7)
    assert vals[-1] == pytest.approx(1.0, abs=1e-7)


def test_dual_matches_primal_on_grid(sq):
    sp = SampleSpace(((0.0, 1.0),), (), 6)
    f = lambda pts: np.sin(4 * pts.x[:, 0])
    Q = EmpiricalDistribution(points([0.0, 0.4, 1.0]), np.array([0.5, 0.3, 0.2]))
    for rho in (0.01, 0.1, 0.3):
        assert robust_risk(Q, f, rho, sq, sp, tol=1e-11) == pytest.approx(primal_oracle(Q, f, rho, sq, sp), abs=1e-7)


def test_worst_case_distribution_feasible_and_tight(sq):
    sp = SampleSpace(((0.0, 1.0),), (), 11)
    f = lambda pts: pts.x[:, 0] ** 2
    Q = EmpiricalDistribution.uniform(points([0.0, 0.5]))
    for rho in (0.02, 0.1, 0.3):
        wc = worst_case_distribution(Q, f, rho, sq, sp, tol=1e-11)
        assert wc.transport_cost_used <= rho + 1e-6
        assert wc.weights.sum() == pytest.approx(1.0)
        assert wc.value == pytest.approx(primal_oracle(Q, f, rho, sq, sp), abs=1e-5)


def test_empirical_distribution_validation():
    with pytest.raises(DomainError):
        EmpiricalDistribution(points([0.0, 1.0]), np.array([0.5, 0.6]))
    with pytest.raises(DomainError):
        EmpiricalDistribution(points([0.0]), np.array([-1.0]))


def test_train_robust_picks_minimum(sq):
    sp = SampleSpace(((0.0, 1.0),), (), 11)
    fam = LossFamily.custom(lambda t, x, l: (x[:, 0] - t[0]) ** 2, theta_box=((0.0, 1.0),),
                            theta_grid_resolution=11)
    Q = EmpiricalDistribution.uniform(points([0.4, 0.6]))
    theta, val = train_robust(Q, fam, 0.0, sq, sp)
    assert theta[0] == pytest.approx(0.5)
    assert val == pytest.approx(0.01)


def test_excess_gap_check(unit, f_id):
    c1 = TransportCost(2, 1)
    Q = EmpiricalDistribution.uniform(points([0.2, 0.4]))
    rep = excess_gap_check(Q, f_id, 0.1, 0.05, 1.0, 1.0, 0.5, c1, unit)
    assert rep.robust_value == pytest.approx(0.4, abs=1e-6)
    assert rep.bound == pytest.approx(0.65)
    assert rep.holds
    with pytest.raises(DomainError):
        excess_gap_check(Q, f_id, 0.1, 0.05, 1.0, 2.0, 0.5, c1, unit)
