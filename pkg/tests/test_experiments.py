import math

import numpy as np
import pytest

from wdrocert.errors import DomainError, InfeasibleRadiusError
from wdrocert.experiments import (
    GroundTruth,
    Setup,
    TrialSeed,
    fmt,
    load_dataset,
    measure_uniform_gap,
    run_coverage,
    run_coverage_reg,
    run_excess,
    splitmix64,
    sweep_radius_scaling,
    write_coverage,
)
from wdrocert.losses import LossFamily
from wdrocert.regularized import ReferenceKernel, RegParams
from wdrocert.space import SampleSpace, TransportCost


@pytest.fixture
def setup_q1(unit, ident):
    return Setup(unit, TransportCost(2, 1), ident, GroundTruth("uniform_box", unit))


def test_splitmix_known_value():
    # first output of the reference generator seeded with 0
    assert splitmix64(0x9E3779B97F4A7C15) == 0xE220A8397B1DCDAF


def test_trial_seeds_distinct_and_reproducible():
    seeds = {TrialSeed(7, i).seed for i in range(1000)}
    assert len(seeds) == 1000
    a = TrialSeed(7, 3).rng().random(5)
    b = TrialSeed(7, 3).rng().random(5)
    assert np.array_equal(a, b)


def test_uniform_truth_mean_and_samples(unit, f_id):
    truth = GroundTruth("uniform_box", unit)
    assert truth.true_mean(f_id) == pytest.approx(0.5, abs=1e-12)
    Q = truth.sample(2000, TrialSeed(0, 0))
    assert len(Q) == 2000 and np.all((Q.atoms.x >= 0) & (Q.atoms.x <= 1))
    assert Q.expectation(f_id) == pytest.approx(0.5, abs=0.05)


def test_gaussian_truth_sigma_zero(unit, f_id):
    truth = GroundTruth("truncated_gaussian", unit, mean=(0.3,), sigma=0.0)
    assert truth.true_mean(f_id) == pytest.approx(0.3)
    assert np.allclose(truth.sample(5, TrialSeed(1, 0)).atoms.x, 0.3)
    with pytest.raises(DomainError):
        GroundTruth("truncated_gaussian", unit, mean=(1.5,), sigma=0.1)


def test_label_mixture_truth():
    sp = SampleSpace(((-1.0, 1.0),), (2,), 21)
    truth = GroundTruth("label_mixture", sp, sigma=0.2, class_means=((-0.5,), (0.5,)), class_probs=(0.3, 0.7))
    lab = lambda pts: pts.labels[:, 0].astype(float)
    assert truth.true_mean(lab) == pytest.approx(0.7)
    Q = truth.sample(4000, TrialSeed(0, 1))
    assert Q.expectation(lab) == pytest.approx(0.7, abs=0.03)


def test_load_dataset(tmp_path):
    sp = SampleSpace(((0.0, 1.0),), (2,))
    p = tmp_path / "d.csv"
    p.write_text("x1,y\n0.1,0\n0.9,1\n")
    pts = load_dataset(p, sp)
    assert pts.x[:, 0].tolist() == [0.1, 0.9] and pts.labels[:, 0].tolist() == [0, 1]
    p.write_text("x1,y\n0.1,5\n")
    with pytest.raises(DomainError):
        load_dataset(p, sp)


def test_coverage_monotone_and_degenerate(setup_q1):
    reps = run_coverage(setup_q1, 30, [0.0, 0.05, 0.2, 1.0], trials=40, master_seed=1)
    cov = [r.coverage for r in reps]
    assert all(b >= a for a, b in zip(cov, cov[1:]))
    assert cov[-1] == 1.0 and reps[-1].degenerate and not reps[0].degenerate


def test_coverage_workers_identical(setup_q1):
    a = run_coverage(setup_q1, 20, [0.0, 0.05], trials=12, master_seed=5, workers=1)
    b = run_coverage(setup_q1, 20, [0.0, 0.05], trials=12, master_seed=5, workers=4)
    for x, y in zip(a, b):
        assert x.coverage == y.coverage
        assert [r.min_slack for r in x.per_trial] == [r.min_slack for r in y.per_trial]


def test_sweep_threshold_matches_coverage(setup_q1):
    rows, th = sweep_radius_scaling(setup_q1, [25], trials=20, target=0.9, master_seed=2)
    rho_star = rows[0].rho_star
    assert rows[0].rho_star_sqrt_n == pytest.approx(rho_star * 5)
    cov = run_coverage(setup_q1, 25, [rho_star], trials=20, master_seed=2)[0].coverage
    assert cov >= 0.9
    if rho_star > 1e-5:
        below = run_coverage(setup_q1, 25, [rho_star - 1e-5], trials=20, master_seed=2)[0].coverage
        assert below < 0.9


def test_reg_coverage_requires_rho_above_moment(unit, ident):
    k = ReferenceKernel("truncated_gaussian", 0.05, 41)
    s = Setup(unit, TransportCost(2, 2), ident, GroundTruth("uniform_box", unit), kernel=k, reg=RegParams(0, 0.1))
    with pytest.raises(InfeasibleRadiusError):
        run_coverage_reg(s, 20, [0.5 * s.moments.m_c], trials=2)
    rep = run_coverage_reg(s, 20, [2 * s.moments.m_c], trials=10)[0]
    assert 0 <= rep.coverage <= 1


def test_gap_and_excess(setup_q1):
    g = measure_uniform_gap(setup_q1, 30, 0.5, trials=10, master_seed=3, mu_points=8, alpha=50.0)
    assert len(g.records) == 10
    # sup(a) + sup(-a) >= 0 over the same (mu, theta) grid
    assert all(r.gap + r.reverse_gap >= 0 for r in g.records)
    assert g.within_alpha == 1.0
    ex = run_excess(setup_q1, 30, 0.05, trials=10, master_seed=3, lambda_low=0.5, mu_points=8)
    assert ex.checks == 10 and ex.violations == 0


def test_fmt_and_write(tmp_path, setup_q1):
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt((1.0, 2.5)) == "1;2.5"
    assert fmt(math.inf) == "inf"
    reps = run_coverage(setup_q1, 10, [0.0], trials=3)
    paths = write_coverage(tmp_path, reps)
    assert all(p.exists() for p in paths)
    assert paths[0].read_text().splitlines()[0].startswith("n,")


def test_custom_family_grid_of_members(unit):
    fam = LossFamily.custom(lambda t, x, l: (x[:, 0] - t[0]) ** 2, theta_box=((0, 1),), theta_grid_resolution=3)
    s = Setup(unit, TransportCost(2, 2), fam, GroundTruth("uniform_box", unit))
    assert len(s.members) == 3
    assert s.true_means[1] == pytest.approx(1 / 12, abs=1e-3)
