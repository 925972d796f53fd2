"""Seeded Monte Carlo harness: coverage of the exact bound, radius scaling, uniform gap and excess risk.

Every trial draws its sample from a stream that depends only on
``(master_seed, trial_index)``, so results do not depend on the worker
count.  Population expectations use a density table on ``grid(space)``.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.special import logsumexp
from scipy.stats import truncnorm

from .certificates import critical_radius, lambda_low_numeric
from .dual import TransportGeometry
from .errors import ConfigError, DomainError, InfeasibleRadiusError, WdroError
from .losses import LossFamily, family_constants
from .regularized import ReferenceKernel, RegParams, RegProblem, kernel_moments, solve_reg_problem
from .risk import EmpiricalDistribution, excess_gap_check, robust_risk_problem
from .space import PointSet, SampleSpace, TransportCost, grid_points

TRUTH_KINDS = ("uniform_box", "truncated_gaussian", "label_mixture", "dataset")
MASK64 = (1 << 64) - 1
GAMMA64 = 0x9E3779B97F4A7C15


# ------------------------------------------------------------------ seeds


def splitmix64(x: int) -> int:
    z = x & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class TrialSeed:
    master_seed: int
    trial_index: int

    @property
    def seed(self) -> int:
        """Element ``trial_index + 1`` of the splitmix64 stream started at ``master_seed``."""
        return splitmix64((self.master_seed + (self.trial_index + 1) * GAMMA64) & MASK64)

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


# ----------------------------------------------------------- ground truth


def load_dataset(path, space: SampleSpace) -> PointSet:
    """Read a CSV with header ``x1..xm,y``.

    With labels in the space, ``y`` is the first (only) label coordinate;
    otherwise ``y`` is the last continuous coordinate.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ConfigError(f"dataset {path} has no data rows", "ground_truth.path")
    header = [h.strip() for h in rows[0]]
    m = len(header) - 1
    if header != [f"x{i + 1}" for i in range(m)] + ["y"]:
        raise ConfigError(f"dataset {path}: header must be x1..xm,y, got {header}", "ground_truth.path")
    data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    if space.n_labels:
        if space.n_labels != 1 or m != space.n_continuous:
            raise ConfigError("dataset columns do not match the space (x1..xm continuous, y label)",
                              "ground_truth.path")
        pts = PointSet(data[:, :m], np.rint(data[:, m:]).astype(np.int64))
    else:
        if m + 1 != space.n_continuous:
            raise ConfigError("dataset columns do not match the space (x1..xm features, y response)",
                              "ground_truth.path")
        pts = PointSet(data, np.zeros((len(data), 0), dtype=np.int64))
    space.check(pts, "dataset row")
    return pts


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Population ``P`` on a sample space.

    ``truncated_gaussian`` uses an isotropic ``sigma`` around ``mean``;
    ``label_mixture`` draws the first label with ``class_probs`` and the
    continuous part around ``class_means[label]``.  Unused label
    coordinates are uniform.
    """

    kind: str
    space: SampleSpace
    mean: tuple = ()
    sigma: float = 1.0
    class_means: tuple = ()
    class_probs: tuple = ()
    data: PointSet | None = None
    replace: bool = True

    def __post_init__(self):
        sp = self.space
        if self.kind not in TRUTH_KINDS:
            raise DomainError(f"unknown ground truth kind {self.kind!r}; expected one of {TRUTH_KINDS}")
        if self.kind in ("truncated_gaussian", "label_mixture") and not self.sigma >= 0:
            raise DomainError("sigma must be >= 0")
        if self.kind == "truncated_gaussian":
            mean = tuple(float(v) for v in self.mean)
            if len(mean) != sp.n_continuous:
                raise DomainError(f"mean needs {sp.n_continuous} entries")
            object.__setattr__(self, "mean", mean)
        if self.kind == "label_mixture":
            if not sp.n_labels:
                raise DomainError("label_mixture needs a label coordinate")
            k = sp.alphabets[0]
            probs = np.asarray(self.class_probs, dtype=float)
            means = np.asarray(self.class_means, dtype=float).reshape(len(probs), -1) if len(probs) else probs
            if probs.shape != (k,) or np.any(probs < 0) or abs(probs.sum() - 1) > 1e-12:
                raise DomainError(f"class_probs must be {k} nonnegative numbers summing to 1")
            if means.shape != (k, sp.n_continuous):
                raise DomainError(f"class_means must be {k} vectors of length {sp.n_continuous}")
            object.__setattr__(self, "class_probs", tuple(probs))
            object.__setattr__(self, "class_means", tuple(map(tuple, means)))
        if self.kind == "dataset" and (self.data is None or len(self.data) == 0):
            raise DomainError("dataset ground truth needs data rows")
        for c in self._centers():
            if not sp.contains(PointSet(np.array([c]), np.zeros((1, sp.n_labels), dtype=np.int64))):
                raise DomainError(f"center {c} lies outside the sample space")

    def _centers(self):
        if self.kind == "truncated_gaussian":
            return [self.mean]
        if self.kind == "label_mixture":
            return list(self.class_means)
        return []

    # -- population table
    @cached_property
    def table(self) -> EmpiricalDistribution:
        """``P`` as weights on ``grid(space)`` (the dataset itself for ``dataset``)."""
        if self.kind == "dataset":
            return EmpiricalDistribution.uniform(self.data)
        sp = self.space
        pts = grid_points(sp)
        n = len(pts)
        logw = np.zeros(n)
        start = 0
        if self.kind == "label_mixture":
            start = 1
            parts = []
            for k, (p, mu) in enumerate(zip(self.class_probs, self.class_means)):
                with np.errstate(divide="ignore"):
                    lp = np.log(p) + np.where(pts.labels[:, 0] == k, 0.0, -np.inf)
                parts.append(lp + self._continuous_logw(pts, mu))
            logw = logsumexp(np.array(parts), axis=0)
        elif self.kind == "truncated_gaussian":
            logw = self._continuous_logw(pts, self.mean)
        else:
            logw = self._continuous_logw(pts, None)
        for a in sp.alphabets[start:]:
            logw = logw - math.log(a)
        w = np.exp(logw - logsumexp(logw))
        keep = w > 0
        return EmpiricalDistribution(pts.take(np.flatnonzero(keep)), w[keep] / w[keep].sum())

    def _continuous_logw(self, pts: PointSet, mean) -> np.ndarray:
        """Sum over axes of normalized log trapezoid weights times the axis density."""
        sp = self.space
        out = np.zeros(len(pts))
        for i, (lo, hi) in enumerate(sp.boxes):
            nodes = sp.axis_nodes(i)
            if len(nodes) == 1:
                continue
            trap = np.full(len(nodes), 1.0)
            trap[[0, -1]] = 0.5
            log_axis = np.log(trap)
            if mean is not None:
                if self.sigma == 0:
                    near = np.argmin(np.abs(nodes - mean[i]))
                    log_axis = np.where(np.arange(len(nodes)) == near, 0.0, -np.inf)
                else:
                    log_axis = log_axis - 0.5 * ((nodes - mean[i]) / self.sigma) ** 2
            log_axis = log_axis - logsumexp(log_axis)
            idx = np.rint((pts.x[:, i] - lo) / (hi - lo) * (len(nodes) - 1)).astype(int)
            out = out + log_axis[idx]
        return out

    # -- sampling
    def sample(self, n: int, trial_seed: TrialSeed) -> EmpiricalDistribution:
        if n < 1:
            raise DomainError("n must be >= 1")
        rng = trial_seed.rng()
        sp = self.space
        if self.kind == "dataset":
            if not self.replace and n > len(self.data):
                raise DomainError(f"dataset has {len(self.data)} rows, cannot draw {n} without replacement")
            idx = rng.choice(len(self.data), size=n, replace=self.replace)
            return EmpiricalDistribution.uniform(self.data.take(idx))
        labels = np.zeros((n, sp.n_labels), dtype=np.int64)
        start = 0
        if self.kind == "label_mixture":
            cls = rng.choice(len(self.class_probs), size=n, p=np.asarray(self.class_probs))
            labels[:, 0] = cls
            centers = np.asarray(self.class_means)[cls]
            start = 1
        elif self.kind == "truncated_gaussian":
            centers = np.broadcast_to(np.asarray(self.mean), (n, sp.n_continuous))
        else:
            centers = None
        u = rng.random((n, sp.n_continuous))
        x = np.empty((n, sp.n_continuous))
        for i, (lo, hi) in enumerate(sp.boxes):
            if centers is None or lo == hi:
                x[:, i] = lo + (hi - lo) * u[:, i]
            elif self.sigma == 0:
                x[:, i] = centers[:, i]
            else:
                mu = centers[:, i]
                a, b = (lo - mu) / self.sigma, (hi - mu) / self.sigma
                x[:, i] = np.clip(truncnorm.ppf(u[:, i], a, b, loc=mu, scale=self.sigma), lo, hi)
        for j, a in enumerate(sp.alphabets[start:], start):
            labels[:, j] = rng.integers(0, a, size=n)
        return EmpiricalDistribution.uniform(PointSet(x, labels))

    def true_mean(self, f) -> float:
        return self.table.expectation(f)


def sample(ground_truth: GroundTruth, n: int, trial_seed: TrialSeed) -> EmpiricalDistribution:
    return ground_truth.sample(n, trial_seed)


def true_mean(ground_truth: GroundTruth, f, space: SampleSpace | None = None) -> float:
    if space is not None and space != ground_truth.space:
        raise DomainError("ground truth was built on a different space")
    return ground_truth.true_mean(f)


# -------------------------------------------------------------- setup


@dataclass(frozen=True, eq=False)
class Setup:
    """Everything a trial needs besides its seed."""

    space: SampleSpace
    cost: TransportCost
    family: LossFamily
    truth: GroundTruth
    tol: float = 1e-8
    kernel: ReferenceKernel | None = None
    reg: RegParams | None = None

    @cached_property
    def members(self):
        return self.family.members()

    @cached_property
    def thetas(self) -> np.ndarray:
        return self.family.theta_grid()

    @cached_property
    def true_means(self) -> np.ndarray:
        return np.array([self.truth.true_mean(f) for f in self.members])

    @cached_property
    def rho_crit(self) -> float:
        """Critical radius estimate with ``P`` itself as the reference sample."""
        return critical_radius(self.family, self.truth.table, self.cost, self.space)

    @cached_property
    def moments(self):
        if self.kernel is None:
            raise ConfigError("a kernel block is required", "kernel")
        return kernel_moments(self.kernel, self.cost, self.space)

    @cached_property
    def reg_true_means(self) -> np.ndarray:
        """``E_{xi ~ P, zeta ~ pi0(.|xi)}[f(zeta)]`` for each member."""
        tab = self.truth.table
        out = []
        first = None
        for f in self.members:
            if first is None:
                first = RegProblem(tab.atoms, f, self.kernel, self.cost, self.space, self.reg)
                prob = first
            else:
                prob = RegProblem(tab.atoms, f, self.kernel, self.cost, self.space, self.reg,
                                  first.nodes, first.logw, first.costs)
            out.append(float(tab.weights @ prob.mean_f()))
        return np.array(out)


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    seed: int
    worst_theta: tuple
    min_slack: float


@dataclass
class CoverageReport:
    n: int
    rho: float
    trials: int
    coverage: float
    per_trial: list = field(default_factory=list)
    failures: int = 0
    degenerate: bool = False
    wall_time: float = 0.0
    note: str = ""


def _map(fn, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _theta_tuple(theta) -> tuple:
    return tuple(float(v) for v in np.atleast_1d(theta))


def _reports(setup: Setup, n: int, rhos, results, trials: int, seeds, t0: float, note: str = ""):
    reports = []
    for k, rho in enumerate(rhos):
        records = []
        covered = failures = 0
        for idx, res in enumerate(results):
            if res is None:
                failures += 1
                records.append(TrialRecord(idx, seeds[idx], (), math.nan))
                continue
            slack, j = res[k]
            covered += slack >= 0
            records.append(TrialRecord(idx, seeds[idx], _theta_tuple(setup.thetas[j]), float(slack)))
        done = trials - failures
        reports.append(CoverageReport(n, float(rho), trials, float(covered / done) if done else math.nan,
                                      records, failures, wall_time=time.perf_counter() - t0, note=note))
    return reports


def _coverage_trial(setup: Setup, n: int, rhos, master_seed: int, index: int):
    Q = setup.truth.sample(n, TrialSeed(master_seed, index))
    geo = TransportGeometry(Q.atoms, setup.cost, setup.space)
    slacks = np.empty((len(rhos), len(setup.members)))
    for j, f in enumerate(setup.members):
        prob = geo.problem(f)
        for k, rho in enumerate(rhos):
            slacks[k, j] = robust_risk_problem(prob, Q.weights, rho, setup.tol) - setup.true_means[j]
    return [(slacks[k].min(), int(np.argmin(slacks[k]))) for k in range(len(rhos))]


def _guarded(fn):
    def run(index):
        try:
            return fn(index)
        except WdroError:
            return None
    return run


def run_coverage(setup: Setup, n: int, rhos, trials: int = 200, master_seed: int = 0,
                 workers: int = 1, check_degeneracy: bool = True) -> list[CoverageReport]:
    """Coverage of ``min_theta R_hat_rho(f) - E_P[f] >= 0`` for each radius, with shared trial seeds."""
    rhos = [float(r) for r in rhos]
    if any(r < 0 for r in rhos):
        raise DomainError("rho must be >= 0")
    t0 = time.perf_counter()
    setup.true_means  # populate the shared cache before threads start
    seeds = [TrialSeed(master_seed, i).seed for i in range(trials)]
    results = _map(_guarded(lambda i: _coverage_trial(setup, n, rhos, master_seed, i)), range(trials), workers)
    reports = _reports(setup, n, rhos, results, trials, seeds, t0)
    if check_degeneracy:
        rc = setup.rho_crit
        for r in reports:
            if r.rho >= rc - 1e-12 * (1.0 + rc):
                r.degenerate = True
                r.note = f"rho >= critical radius estimate {rc:.6g}: degenerate regime, bound is vacuous"
    return reports


# ---------------------------------------------------------- radius sweep


@dataclass(frozen=True)
class SweepRow:
    n: int
    rho_star: float
    rho_star_sqrt_n: float
    flagged: bool = False


def _threshold_trial(setup: Setup, n: int, rho_cap: float, rho_tol: float, master_seed: int, index: int):
    """Smallest radius at which this trial's sample covers every member."""
    Q = setup.truth.sample(n, TrialSeed(master_seed, index))
    geo = TransportGeometry(Q.atoms, setup.cost, setup.space)
    probs = [geo.problem(f) for f in setup.members]

    def slack(rho):
        return min(robust_risk_problem(p, Q.weights, rho, setup.tol) - m
                   for p, m in zip(probs, setup.true_means))

    if slack(0.0) >= 0:
        return 0.0
    if slack(rho_cap) < 0:
        return math.inf
    lo, hi = 0.0, rho_cap
    while hi - lo > rho_tol:
        mid = 0.5 * (lo + hi)
        if slack(mid) >= 0:
            hi = mid
        else:
            lo = mid
    return hi


def sweep_radius_scaling(setup: Setup, n_list, trials: int = 200, target: float = 0.9,
                         master_seed: int = 0, rho_cap: float | None = None, rho_tol: float = 1e-6,
                         workers: int = 1) -> tuple[list[SweepRow], dict]:
    """Minimal radius reaching ``target`` coverage for each ``n``.

    Coverage is monotone in the radius for every trial, so the answer is the
    ``ceil(target * trials)``-th smallest per-trial threshold.
    """
    if not 0 < target <= 1:
        raise DomainError("target must lie in (0, 1]")
    cap = setup.space.diameter_cost(setup.cost) if rho_cap is None else float(rho_cap)
    setup.true_means
    rows, thresholds = [], {}
    k = math.ceil(target * trials - 1e-12)
    for n in n_list:
        th = _map(_guarded(lambda i: _threshold_trial(setup, n, cap, rho_tol, master_seed, i)),
                  range(trials), workers)
        th = np.array([math.inf if t is None else t for t in th])
        thresholds[n] = th
        rho_star = float(np.sort(th)[k - 1])
        flagged = not math.isfinite(rho_star)
        rows.append(SweepRow(int(n), rho_star, rho_star * math.sqrt(n), flagged))
    return rows, thresholds


# -------------------------------------------------------- regularized coverage


def _reg_trial(setup: Setup, n: int, rhos, master_seed: int, index: int):
    Q = setup.truth.sample(n, TrialSeed(master_seed, index))
    m_c = setup.moments.m_c
    slacks = np.empty((len(rhos), len(setup.members)))
    first = None
    for j, f in enumerate(setup.members):
        if first is None:
            prob = first = RegProblem(Q.atoms, f, setup.kernel, setup.cost, setup.space, setup.reg)
        else:
            prob = RegProblem(Q.atoms, f, setup.kernel, setup.cost, setup.space, setup.reg,
                              first.nodes, first.logw, first.costs)
        for k, rho in enumerate(rhos):
            val = solve_reg_problem(prob, Q.weights, rho, m_c, setup.tol).value
            slacks[k, j] = val - setup.reg_true_means[j]
    return [(slacks[k].min(), int(np.argmin(slacks[k]))) for k in range(len(rhos))]


def run_coverage_reg(setup: Setup, n: int, rhos, trials: int = 200, master_seed: int = 0,
                     workers: int = 1) -> list[CoverageReport]:
    """Coverage of ``R_hat^{tau,eps}_rho(f) >= E_{P x pi0}[f]`` (feasible-coupling right-hand side)."""
    if setup.kernel is None or setup.reg is None:
        raise ConfigError("regularized coverage needs kernel and reg blocks", "reg")
    rhos = [float(r) for r in rhos]
    m_c = setup.moments.m_c
    for r in rhos:
        if not r > m_c:
            raise InfeasibleRadiusError(f"rho = {r} must exceed m_c = {m_c} for the regularized problem")
    t0 = time.perf_counter()
    setup.reg_true_means
    seeds = [TrialSeed(master_seed, i).seed for i in range(trials)]
    results = _map(_guarded(lambda i: _reg_trial(setup, n, rhos, master_seed, i)), range(trials), workers)
    note = "right-hand side is E over P x pi0 (coupling with conditionals pi0; KL term 0, cost <= m_c)"
    return _reports(setup, n, rhos, results, trials, seeds, t0, note)


# ------------------------------------------------------------ uniform gap


@dataclass(frozen=True)
class GapRecord:
    trial_index: int
    seed: int
    gap: float
    reverse_gap: float


@dataclass
class GapReport:
    n: int
    lambda_low: float
    mu_grid: list
    records: list
    alpha: float | None = None

    @property
    def gaps(self) -> np.ndarray:
        return np.array([r.gap for r in self.records])

    def quantile_sqrt_n(self, q: float = 0.95) -> float:
        return float(np.quantile(self.gaps * math.sqrt(self.n), q))

    @property
    def within_alpha(self) -> float | None:
        if self.alpha is None:
            return None
        return float(np.mean(self.gaps <= self.alpha / math.sqrt(self.n)))


def _psi_table(setup: Setup, atoms: PointSet, mus) -> np.ndarray:
    """``psi(mu, f, xi)`` for every (member, mu, atom)."""
    geo = TransportGeometry(atoms, setup.cost, setup.space)
    out = np.empty((len(setup.members), len(mus), len(atoms)))
    for j, f in enumerate(setup.members):
        prob = geo.problem(f)
        for k, mu in enumerate(mus):
            out[j, k] = prob.psi(mu)
    return out


def _population_psi(setup: Setup, mus) -> np.ndarray:
    tab = setup.truth.table
    return _psi_table(setup, tab.atoms, mus) @ tab.weights


def _gap_trial(setup: Setup, n: int, mus, pop: np.ndarray, master_seed: int, index: int):
    Q = setup.truth.sample(n, TrialSeed(master_seed, index))
    emp = _psi_table(setup, Q.atoms, mus) @ Q.weights
    return float(np.max(pop - emp)), float(np.max(emp - pop))


def default_mu_grid(lambda_low: float, points: int = 32) -> np.ndarray:
    top = 1.0 / lambda_low
    return top * np.arange(1, points + 1) / points


def measure_uniform_gap(setup: Setup, n: int, lambda_low: float, trials: int = 200, master_seed: int = 0,
                        mu_points: int = 32, alpha: float | None = None, workers: int = 1) -> GapReport:
    """Per trial, ``sup_{mu, theta} E_P[psi] - E_Phat[psi]`` over ``mu in (0, 1/lambda_low]``.

    ``reverse_gap`` records the opposite deviation, which is the one that
    enters the excess-risk bound.
    """
    if not lambda_low > 0:
        raise DomainError("lambda_low must be > 0")
    mus = default_mu_grid(lambda_low, mu_points)
    pop = _population_psi(setup, mus)
    out = _map(lambda i: _gap_trial(setup, n, mus, pop, master_seed, i), range(trials), workers)
    records = [GapRecord(i, TrialSeed(master_seed, i).seed, g, r) for i, (g, r) in enumerate(out)]
    return GapReport(n, lambda_low, list(mus), records, alpha)


# ------------------------------------------------------------ excess risk


@dataclass
class ExcessSummary:
    n: int
    rho: float
    trials: int
    checks: int
    violations: int
    min_slack: float
    rows: list = field(default_factory=list)


def _excess_trial(setup: Setup, n: int, rho: float, mus, pop, lip: float, master_seed: int, index: int):
    seed = TrialSeed(master_seed, index)
    Q = setup.truth.sample(n, seed)
    emp = _psi_table(setup, Q.atoms, mus) @ Q.weights
    gap = max(float(np.max(emp - pop)), 0.0)
    rows = []
    for j, f in enumerate(setup.members):
        rep = excess_gap_check(Q, f, rho, gap, lip, setup.cost.power_q, float(setup.true_means[j]),
                               setup.cost, setup.space, setup.tol)
        rows.append((index, seed.seed, _theta_tuple(setup.thetas[j]), rep.robust_value, rep.bound, rep.slack,
                     rep.holds))
    return rows


def run_excess(setup: Setup, n: int, rho: float, trials: int = 200, master_seed: int = 0,
               lambda_low: float | None = None, mu_points: int = 32, workers: int = 1) -> ExcessSummary:
    """Excess-risk bound with ``alpha / sqrt(n)`` replaced by the measured reverse uniform gap."""
    if not setup.cost.is_pure_power(setup.space):
        raise DomainError("excess check needs a cost that is a pure power of the distance (no label term)")
    lam = lambda_low if lambda_low is not None else lambda_low_numeric(
        setup.family, setup.truth.table, setup.cost, setup.space)
    mus = default_mu_grid(lam, mu_points)
    pop = _population_psi(setup, mus)
    lip = family_constants(setup.family, setup.space, setup.cost.p_norm).lip_xi
    setup.true_means
    out = _map(lambda i: _excess_trial(setup, n, rho, mus, pop, lip, master_seed, i), range(trials), workers)
    rows = [r for trial in out for r in trial]
    violations = sum(not r[6] for r in rows)
    return ExcessSummary(n, rho, trials, len(rows), violations, min(r[5] for r in rows), rows)


# ------------------------------------------------------------ csv output


def fmt(v) -> str:
    """17 significant digits for floats; tuples joined by ``;``."""
    if isinstance(v, (tuple, list, np.ndarray)):
        return ";".join(fmt(x) for x in v)
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def write_coverage(out_dir, reports: list[CoverageReport]) -> list[Path]:
    out = Path(out_dir)
    cov = write_csv(out / "coverage.csv", ["n", "rho", "trials", "coverage"],
                    [(r.n, r.rho, r.trials, r.coverage) for r in reports])
    trials = write_csv(out / "trials.csv", ["n", "rho", "trial_index", "seed", "worst_theta", "min_slack"],
                       [(r.n, r.rho, t.trial_index, t.seed, t.worst_theta, t.min_slack)
                        for r in reports for t in r.per_trial])
    return [cov, trials]


def write_sweep(out_dir, rows: list[SweepRow]) -> Path:
    return write_csv(Path(out_dir) / "sweep.csv", ["n", "rho_star", "rho_star_sqrt_n", "flagged"],
                     [(r.n, r.rho_star, r.rho_star_sqrt_n, r.flagged) for r in rows])


def write_gap(out_dir, reports: list[GapReport]) -> Path:
    return write_csv(Path(out_dir) / "gap.csv",
                     ["n", "trial_index", "seed", "gap", "gap_sqrt_n", "reverse_gap"],
                     [(g.n, r.trial_index, r.seed, r.gap, r.gap * math.sqrt(g.n), r.reverse_gap)
                      for g in reports for r in g.records])


def write_excess(out_dir, summary: ExcessSummary) -> Path:
    return write_csv(Path(out_dir) / "excess.csv",
                     ["trial_index", "seed", "theta", "robust_value", "bound", "slack", "holds"],
                     summary.rows)
