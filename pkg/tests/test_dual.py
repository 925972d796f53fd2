import numpy as np
import pytest

from wdrocert.dual import TransportGeometry, inner_max, phi, phi_right_derivative, psi
from wdrocert.errors import DomainError
from wdrocert.space import SamplePoint, SampleSpace, TransportCost

from conftest import points


def analytic_phi(lam):
    # sup over [0,1] of z - lam z^2 from xi = 0
    return 1.0 - lam if lam <= 0.5 else 1.0 / (4.0 * lam)


@pytest.mark.parametrize("lam", [0.0, 0.25, 0.5, 1.0, 2.0, 10.0])
def test_phi_identity_refined_matches_calculus(lam, unit, sq, f_id):
    assert phi(lam, f_id, SamplePoint((0.0,)), sq, unit, refine=True) == pytest.approx(analytic_phi(lam), abs=1e-9)


def test_phi_at_zero_is_grid_max(unit, sq, f_id):
    assert phi(0.0, f_id, SamplePoint((0.3,)), sq, unit) == 1.0


def test_phi_nonincreasing_and_convex(unit, sq, f_id):
    lams = np.linspace(0, 5, 101)
    vals = np.array([phi(l, f_id, SamplePoint((0.2,)), sq, unit) for l in lams])
    assert np.all(np.diff(vals) <= 1e-12)
    assert np.all(vals[:-2] + vals[2:] - 2 * vals[1:-1] >= -1e-12)


def test_phi_at_least_f_at_xi(unit, sq, f_id):
    for lam in (0.0, 1.0, 100.0, 1e6):
        assert phi(lam, f_id, SamplePoint((0.37,)), sq, unit) >= 0.37 - 1e-15


def test_right_derivative_envelope(unit, sq, f_id):
    xi = SamplePoint((0.0,))
    for lam in (0.7, 1.3, 4.0):
        h = 1e-7
        fd = (phi(lam + h, f_id, xi, sq, unit, refine=True) - phi(lam, f_id, xi, sq, unit, refine=True)) / h
        assert phi_right_derivative(lam, f_id, xi, sq, unit, refine=True) == pytest.approx(fd, abs=1e-5)
    # below 1/2 the maximizer is the corner z = 1
    assert phi_right_derivative(0.2, f_id, xi, sq, unit) == pytest.approx(-1.0)


def test_right_derivative_takes_cheapest_tie():
    sp = SampleSpace(((-1.0, 1.0),), (), 3)
    f = lambda pts: np.abs(pts.x[:, 0])
    res = inner_max(f, 0.0, SamplePoint((0.0,)), TransportCost(2, 2), sp)
    assert len(res.maximizers) == 2
    assert phi_right_derivative(0.0, f, SamplePoint((0.5,)), TransportCost(2, 2), sp) == pytest.approx(-0.25)


def test_xi_off_grid_is_candidate(sq):
    sp = SampleSpace(((0.0, 1.0),), (), 2)
    f = lambda pts: -np.abs(pts.x[:, 0] - 0.4)
    assert phi(5.0, f, SamplePoint((0.4,)), sq, sp) == 0.0


def test_psi_is_scaled_phi(unit, sq, f_id):
    xi = SamplePoint((0.1,))
    for mu in (0.5, 1.0, 3.0):
        assert psi(mu, f_id, xi, sq, unit) == pytest.approx(mu * phi(1.0 / mu, f_id, xi, sq, unit))
    with pytest.raises(DomainError):
        psi(0.0, f_id, xi, sq, unit)


def test_negative_lambda_rejected(unit, sq, f_id):
    with pytest.raises(DomainError):
        phi(-0.1, f_id, SamplePoint((0.0,)), sq, unit)


def test_labels_fixed_by_infinite_kappa():
    sp = SampleSpace(((0.0, 1.0),), (2,), 3)
    f = lambda pts: pts.labels[:, 0].astype(float)
    xi = SamplePoint((0.5,), (0,))
    assert phi(0.0, f, xi, TransportCost(2, 2, np.inf), sp) == 0.0
    assert phi(0.0, f, xi, TransportCost(2, 2, 1.0), sp) == 1.0
    assert phi(2.0, f, xi, TransportCost(2, 2, 1.0), sp) == 0.0


def test_geometry_vectorised_matches_single(unit, sq, f_id):
    atoms = points([0.0, 0.33, 0.9])
    prob = TransportGeometry(atoms, sq, unit).problem(f_id)
    for lam in (0.0, 0.8, 3.0):
        vec = prob.phi_grid(lam)
        single = [phi(lam, f_id, atoms.point(i), sq, unit) for i in range(3)]
        assert np.allclose(vec, single)
