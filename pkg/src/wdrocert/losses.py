"""Parametric loss families ``F = {f(theta, .) : theta in Theta}`` and their constants.

Coordinate conventions on a :class:`~wdrocert.space.SampleSpace`:

* ``least_squares``: the last continuous coordinate is the response ``y``,
  the others are the features ``x``; ``theta`` has ``m - 1`` entries.
* ``logistic`` / ``hinge``: all continuous coordinates are features, the
  first label coordinate (alphabet size 2) is the class, mapped 0 -> -1 and
  1 -> +1; ``theta`` has ``m`` entries.
* ``kmeans``: ``theta`` stacks ``K`` centers of dimension ``m``.
* ``tabulated``: member ``t`` is a table of values on ``grid(table_space)``,
  evaluated off-grid by multilinear interpolation; ``theta = (t,)``.
* ``custom``: ``fn(theta, x, labels) -> values`` for any vectorized callable.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.interpolate import RegularGridInterpolator

from .errors import DimensionError, DomainError
from .space import PointSet, SamplePoint, SampleSpace, as_pointset, distance_matrix, grid_points

KINDS = ("least_squares", "logistic", "hinge", "kmeans", "tabulated", "custom")
SMOOTH_KINDS = ("least_squares", "logistic")


@dataclass(frozen=True, eq=False)
class LossFamily:
    kind: str
    theta_box: tuple[tuple[float, float], ...] = ()
    theta_grid_resolution: int = 1
    kmeans_clusters: int = 1
    tables: np.ndarray | None = None
    table_space: SampleSpace | None = None
    fn: Callable | None = None
    differentiable: bool = False
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown loss kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "tabulated":
            if self.tables is None or self.table_space is None:
                raise DomainError("tabulated family needs tables and table_space")
            tables = np.atleast_2d(np.asarray(self.tables, dtype=float))
            n_nodes = len(grid_points(self.table_space))
            if tables.shape[1] != n_nodes:
                raise DimensionError(
                    f"tabulated family: tables have {tables.shape[1]} columns, grid has {n_nodes} points"
                )
            tables.setflags(write=False)
            object.__setattr__(self, "tables", tables)
            object.__setattr__(self, "theta_box", ((0.0, float(len(tables) - 1)),))
            object.__setattr__(self, "theta_grid_resolution", len(tables))
        box = tuple((float(lo), float(hi)) for lo, hi in self.theta_box)
        for i, (lo, hi) in enumerate(box):
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise DomainError(f"theta_box[{i}]: need finite lo <= hi, got ({lo}, {hi})")
        object.__setattr__(self, "theta_box", box)
        if int(self.theta_grid_resolution) < 1:
            raise DomainError("theta_grid_resolution must be >= 1")
        if self.kind == "kmeans" and (self.kmeans_clusters < 1 or len(box) % self.kmeans_clusters):
            raise DimensionError("kmeans theta_box must have K * m coordinates")
        if self.kind == "custom" and self.fn is None:
            raise DomainError("custom family needs fn")

    @property
    def smooth(self) -> bool:
        """Whether members are differentiable in the continuous sample coordinates."""
        return self.kind in SMOOTH_KINDS or (self.kind == "custom" and self.differentiable)

    @property
    def theta_dim(self) -> int:
        return len(self.theta_box)

    def theta_grid(self) -> np.ndarray:
        """All grid parameters, shape (T, p), in lexicographic order."""
        if self.kind == "tabulated":
            return np.arange(len(self.tables), dtype=float).reshape(-1, 1)
        if not self.theta_box:
            return np.zeros((1, 0))
        r = int(self.theta_grid_resolution)
        axes = []
        for lo, hi in self.theta_box:
            if r == 1 or lo == hi:
                axes.append(np.array([0.5 * (lo + hi)]))
            else:
                axes.append(lo + (hi - lo) * np.arange(r) / (r - 1))
        return np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, len(self.theta_box))

    def member(self, theta) -> "Member":
        return Member(self, np.atleast_1d(np.asarray(theta, dtype=float)))

    def members(self) -> list["Member"]:
        return [self.member(t) for t in self.theta_grid()]

    def check_theta(self, theta: np.ndarray) -> None:
        if theta.shape != (self.theta_dim,):
            raise DimensionError(f"theta must have {self.theta_dim} entries, got shape {theta.shape}")
        for i, (lo, hi) in enumerate(self.theta_box):
            slack = 1e-12 * (1 + abs(lo) + abs(hi))
            if not (lo - slack <= theta[i] <= hi + slack):
                raise DomainError(f"theta[{i}] = {theta[i]} outside [{lo}, {hi}]")

    def values(self, theta, points: PointSet) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        self.check_theta(theta)
        return _EVALUATORS[self.kind](self, theta, points)

    @classmethod
    def custom(cls, fn, theta_box=(), theta_grid_resolution=1, differentiable=False, name="custom"):
        return cls("custom", tuple(theta_box), theta_grid_resolution, fn=fn,
                   differentiable=differentiable, name=name)

    @classmethod
    def from_functions(cls, space: SampleSpace, functions, name="tabulated"):
        """Tabulate plain callables ``g(x, labels) -> values`` on ``grid(space)``."""
        pts = grid_points(space)
        tables = np.array([np.asarray(g(pts.x, pts.labels), dtype=float) for g in functions])
        return cls("tabulated", tables=tables, table_space=space, name=name)


@dataclass(frozen=True, eq=False)
class Member:
    """One member function ``f(theta, .)``; callable on a :class:`PointSet`."""

    family: LossFamily
    theta: np.ndarray = field(repr=True)

    def __call__(self, points) -> np.ndarray:
        return self.family.values(self.theta, as_pointset(points))

    @property
    def smooth(self) -> bool:
        return self.family.smooth


def _signed_class(family: LossFamily, points: PointSet) -> np.ndarray:
    if points.labels.shape[1] < 1:
        raise DimensionError(f"{family.kind} loss needs a class label coordinate")
    lab = points.labels[:, 0]
    if np.any((lab != 0) & (lab != 1)):
        raise DomainError(f"{family.kind} loss needs binary labels in {{0, 1}}")
    return 2.0 * lab - 1.0


def _features(family: LossFamily, theta: np.ndarray, x: np.ndarray) -> None:
    if x.shape[1] != theta.shape[0]:
        raise DimensionError(f"{family.kind}: theta has {theta.shape[0]} entries, features have {x.shape[1]}")


def _least_squares(family, theta, points):
    if points.x.shape[1] < 2:
        raise DimensionError("least_squares needs features plus a response coordinate")
    x, y = points.x[:, :-1], points.x[:, -1]
    _features(family, theta, x)
    return (x @ theta - y) ** 2


def _logistic(family, theta, points):
    _features(family, theta, points.x)
    y = _signed_class(family, points)
    return np.logaddexp(0.0, -y * (points.x @ theta))


def _hinge(family, theta, points):
    _features(family, theta, points.x)
    y = _signed_class(family, points)
    return np.maximum(0.0, 1.0 - y * (points.x @ theta))


def _kmeans(family, theta, points):
    k = family.kmeans_clusters
    centers = theta.reshape(k, -1)
    if centers.shape[1] != points.x.shape[1]:
        raise DimensionError("kmeans centers and samples have different dimensions")
    d2 = ((points.x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1)
    return d2.min(axis=1)


def _custom(family, theta, points):
    out = np.asarray(family.fn(theta, points.x, points.labels), dtype=float)
    return np.broadcast_to(out, (len(points),)).astype(float)


def _tabulated(family, theta, points):
    idx = int(round(theta[0]))
    if abs(theta[0] - idx) > 1e-9:
        raise DomainError("tabulated theta must be an integer member index")
    return _interpolate_table(family.table_space, family.tables[idx], points)


def _interpolate_table(space: SampleSpace, table: np.ndarray, points: PointSet) -> np.ndarray:
    space.check(points, "xi")
    axes = [space.axis_nodes(i) for i in range(space.n_continuous)]
    n_combo = int(np.prod(space.alphabets)) if space.alphabets else 1
    shape = tuple(len(a) for a in axes) + (n_combo,)
    cube = table.reshape(shape)
    if space.alphabets:
        combo = np.ravel_multi_index(tuple(points.labels.T), space.alphabets)
    else:
        combo = np.zeros(len(points), dtype=int)
    live = [i for i, a in enumerate(axes) if len(a) > 1]
    out = np.empty(len(points))
    for c in np.unique(combo):
        rows = combo == c
        sub = cube[..., c]
        sub = sub.reshape(tuple(len(axes[i]) for i in live)) if live else sub.reshape(())
        if not live:
            out[rows] = float(sub)
            continue
        interp = RegularGridInterpolator(tuple(axes[i] for i in live), sub, method="linear")
        q = np.clip(points.x[rows][:, live], [axes[i][0] for i in live], [axes[i][-1] for i in live])
        out[rows] = interp(q)
    return out


_EVALUATORS = {
    "least_squares": _least_squares,
    "logistic": _logistic,
    "hinge": _hinge,
    "kmeans": _kmeans,
    "custom": _custom,
    "tabulated": _tabulated,
}


def loss_eval(family: LossFamily, theta, xi: SamplePoint) -> float:
    return float(family.values(theta, as_pointset(xi))[0])


# ---------------------------------------------------------------- constants


@dataclass(frozen=True)
class FamilyConstants:
    sup_norm: float
    lip_xi: float
    lip_theta: float
    dudley: float
    method: str = "closed-form"

    def __post_init__(self):
        for name in ("sup_norm", "lip_xi", "lip_theta", "dudley"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise DomainError(f"{name} must be finite and nonnegative, got {v}")


def _interval_product(a, b):
    cands = (a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1])
    return min(cands), max(cands)


def _dot_range(theta_box, x_box):
    lo = hi = 0.0
    for tb, xb in zip(theta_box, x_box):
        plo, phi = _interval_product(tb, xb)
        lo += plo
        hi += phi
    return lo, hi


def _abs_max(box) -> np.ndarray:
    return np.array([max(abs(lo), abs(hi)) for lo, hi in box], dtype=float)


def _dual_norm(v: np.ndarray, p: float) -> float:
    if v.size == 0:
        return 0.0
    if p == 1:
        return float(np.max(np.abs(v)))
    if math.isinf(p):
        return float(np.sum(np.abs(v)))
    q = p / (p - 1.0)
    return float(np.sum(np.abs(v) ** q) ** (1.0 / q))


def family_constants(family: LossFamily, space: SampleSpace, p_norm: float = 2.0) -> FamilyConstants:
    """Bounds on ``||F||_inf``, ``Lip_F`` (w.r.t. the sample metric) and the theta-Lipschitz constant.

    Closed forms are used for the linear and k-means kinds; ``custom`` and
    ``tabulated`` families fall back to grid maximization (``method`` then
    reads ``"grid-estimated"``).
    """
    boxes = space.boxes
    kind = family.kind
    if kind == "least_squares":
        r_lo, r_hi = _dot_range(family.theta_box, boxes[:-1])
        y_lo, y_hi = boxes[-1]
        r_lo, r_hi = r_lo - y_hi, r_hi - y_lo
        big_r = max(abs(r_lo), abs(r_hi))
        grad = np.append(_abs_max(family.theta_box), 1.0)
        sup = big_r**2
        lip_xi = 2.0 * big_r * _dual_norm(grad, p_norm)
        lip_theta = 2.0 * big_r * float(np.linalg.norm(_abs_max(boxes[:-1])))
    elif kind in ("logistic", "hinge"):
        m_lo, m_hi = _dot_range(family.theta_box, boxes)
        margin = max(abs(m_lo), abs(m_hi))
        theta_norm = _dual_norm(_abs_max(family.theta_box), p_norm)
        if kind == "logistic":
            sup = float(np.logaddexp(0.0, margin))
            lip_xi = max(theta_norm, margin)
        else:
            sup = 1.0 + margin
            lip_xi = max(theta_norm, 2.0 * margin)
        lip_theta = float(np.linalg.norm(_abs_max(boxes)))
    elif kind == "kmeans":
        k = family.kmeans_clusters
        centers = np.array(family.theta_box).reshape(k, -1, 2)
        diffs = []
        for c in centers:
            diffs.append(np.array([
                max(abs(chi - xlo), abs(xhi - clo)) for (clo, chi), (xlo, xhi) in zip(c, boxes)
            ]))
        sup = min(float(np.sum(d**2)) for d in diffs)
        lip_xi = max(2.0 * _dual_norm(d, p_norm) for d in diffs)
        lip_theta = max(2.0 * float(np.linalg.norm(d)) for d in diffs)
    else:
        return _grid_constants(family, space, p_norm)
    dudley = dudley_entropy(lip_theta, family.theta_box)
    return FamilyConstants(float(sup), float(lip_xi), float(lip_theta), float(dudley))


def _grid_constants(family: LossFamily, space: SampleSpace, p_norm: float) -> FamilyConstants:
    pts = grid_points(space)
    thetas = family.theta_grid()
    vals = np.array([family.values(t, pts) for t in thetas])
    sup = float(np.max(np.abs(vals)))
    dist = distance_matrix(space, pts, pts, p_norm)
    off = dist > 0
    lip_xi = 0.0
    for row in vals:
        dq = np.abs(row[:, None] - row[None, :])[off] / dist[off]
        if dq.size:
            lip_xi = max(lip_xi, float(dq.max()))
    lip_theta = 0.0
    diam = 0.0
    for i in range(len(thetas)):
        for j in range(i + 1, len(thetas)):
            gap = float(np.max(np.abs(vals[i] - vals[j])))
            diam = max(diam, gap)
            step = float(np.linalg.norm(thetas[i] - thetas[j]))
            if step > 0:
                lip_theta = max(lip_theta, gap / step)
    if family.kind == "tabulated":
        # finite family: N(t) <= T for t <= diam and 1 beyond
        dudley = diam * math.sqrt(math.log(len(thetas))) if len(thetas) > 1 else 0.0
    else:
        dudley = dudley_entropy(lip_theta, family.theta_box)
    return FamilyConstants(sup, lip_xi, lip_theta, dudley, method="grid-estimated")


def dudley_entropy(lip_theta: float, theta_box, tail_fraction: float = 1e-5) -> float:
    """Upper bound on Dudley's entropy integral of a Lipschitz parametric family.

    Packing numbers of ``{f(theta, .)}`` in sup norm are bounded by those of the
    box under ``lip_theta * ||.||_2``, themselves bounded by
    ``N(t) <= prod_i (floor(a_i / t) + 1)`` with ``a_i = lip_theta * sqrt(p) * len_i``.
    The integrand is piecewise constant and integrated exactly down to
    ``tail_fraction * t_max``; the remaining tail uses the continuous bound
    ``log(a_i / t + 1)`` and adaptive quadrature.
    """
    if lip_theta < 0 or not math.isfinite(lip_theta):
        raise DomainError(f"lip_theta must be finite and >= 0, got {lip_theta}")
    lengths = np.array([hi - lo for lo, hi in theta_box], dtype=float)
    if lengths.size == 0 or lip_theta == 0:
        return 0.0
    a = lip_theta * math.sqrt(len(lengths)) * lengths
    a = a[a > 0]
    if a.size == 0:
        return 0.0
    t_max = float(a.max())
    t_lo = tail_fraction * t_max

    def integrand(t):
        return np.sqrt(np.sum(np.log(np.floor(a[:, None] / t) + 1.0), axis=0))

    breaks = [t_lo, t_max]
    for ai in a:
        k_max = int(math.floor(ai / t_lo))
        k = np.arange(1, k_max + 1, dtype=float)
        b = ai / k
        breaks.append(b[(b > t_lo) & (b < t_max)])
    pts = np.unique(np.concatenate([np.atleast_1d(np.asarray(b, dtype=float)) for b in breaks]))
    widths = np.diff(pts)
    heights = integrand(pts[1:])
    body = float(np.sum(widths * heights))

    def tail(t):
        return math.sqrt(float(np.sum(np.log(a / t + 1.0))))

    tail_val, _ = integrate.quad(tail, 0.0, t_lo, limit=200)
    return body + tail_val


def is_constant_family(family: LossFamily, space: SampleSpace, tolerance: float = 0.0) -> bool:
    """True iff some grid member oscillates by at most ``tolerance`` over the grid."""
    if tolerance < 0:
        raise DomainError("tolerance must be >= 0")
    pts = grid_points(space)
    for theta in family.theta_grid():
        v = family.values(theta, pts)
        if float(v.max() - v.min()) <= tolerance:
            return True
    return False
