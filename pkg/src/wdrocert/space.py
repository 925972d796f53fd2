"""Compact mixed sample spaces, transport costs and grid discretizations.

A sample ``xi = (x, labels)`` has ``m`` continuous coordinates living in
closed intervals and ``k`` label coordinates living in finite alphabets
``{0, ..., size - 1}``.  Vectorized code works on :class:`PointSet`, a pair of
arrays; :class:`SamplePoint` is the single-point view used at API edges.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionError, DomainError

_BOX_SLACK = 1e-12


@dataclass(frozen=True)
class SamplePoint:
    continuous: tuple[float, ...] = ()
    labels: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "continuous", tuple(float(v) for v in self.continuous))
        object.__setattr__(self, "labels", tuple(int(v) for v in self.labels))


@dataclass(frozen=True)
class PointSet:
    """``n`` points stored as a float array ``x`` (n, m) and an int array ``labels`` (n, k)."""

    x: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        labels = np.asarray(self.labels, dtype=np.int64)
        if x.ndim == 1:
            x = x.reshape(-1, 1) if x.size else x.reshape(0, 0)
        if labels.ndim == 1:
            labels = labels.reshape(-1, 1) if labels.size else labels.reshape(len(x), 0)
        if x.ndim != 2 or labels.ndim != 2:
            raise DimensionError("point arrays must be two-dimensional")
        if x.shape[0] != labels.shape[0]:
            if x.shape[1] == 0:
                x = np.zeros((labels.shape[0], 0))
            elif labels.shape[1] == 0:
                labels = np.zeros((x.shape[0], 0), dtype=np.int64)
            else:
                raise DimensionError(
                    f"continuous part has {x.shape[0]} rows but labels have {labels.shape[0]}"
                )
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.x.shape[0]

    @classmethod
    def from_points(cls, points) -> "PointSet":
        points = list(points)
        if not points:
            raise DimensionError("empty point list")
        m, k = len(points[0].continuous), len(points[0].labels)
        for p in points:
            if len(p.continuous) != m or len(p.labels) != k:
                raise DimensionError("points have inconsistent dimensions")
        x = np.array([p.continuous for p in points], dtype=float).reshape(len(points), m)
        labels = np.array([p.labels for p in points], dtype=np.int64).reshape(len(points), k)
        return cls(x, labels)

    def point(self, i: int) -> SamplePoint:
        return SamplePoint(tuple(self.x[i]), tuple(self.labels[i]))

    def to_points(self) -> list[SamplePoint]:
        return [self.point(i) for i in range(len(self))]

    def take(self, index) -> "PointSet":
        index = np.atleast_1d(np.asarray(index))
        return PointSet(self.x[index], self.labels[index])

    def concat(self, other: "PointSet") -> "PointSet":
        return PointSet(np.vstack([self.x, other.x]), np.vstack([self.labels, other.labels]))


def as_pointset(points) -> PointSet:
    """Accept a PointSet, a SamplePoint or a sequence of SamplePoints."""
    if isinstance(points, PointSet):
        return points
    if isinstance(points, SamplePoint):
        return PointSet.from_points([points])
    return PointSet.from_points(points)


@dataclass(frozen=True)
class SampleSpace:
    """Product of closed intervals and finite alphabets.

    Attributes:
        boxes: ``(lo, hi)`` per continuous coordinate.
        alphabets: alphabet size per label coordinate.
        grid_resolution: nodes per non-degenerate continuous axis.
    """

    boxes: tuple[tuple[float, float], ...] = ()
    alphabets: tuple[int, ...] = ()
    grid_resolution: int = 41

    def __post_init__(self):
        boxes = tuple((float(lo), float(hi)) for lo, hi in self.boxes)
        alphabets = tuple(int(a) for a in self.alphabets)
        object.__setattr__(self, "boxes", boxes)
        object.__setattr__(self, "alphabets", alphabets)
        for i, (lo, hi) in enumerate(boxes):
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise DomainError(f"boxes[{i}]: need finite lo <= hi, got ({lo}, {hi})")
        for i, a in enumerate(alphabets):
            if a < 1:
                raise DomainError(f"alphabets[{i}]: alphabet size must be >= 1, got {a}")
        if int(self.grid_resolution) != self.grid_resolution or self.grid_resolution < 2:
            raise DomainError(f"grid_resolution must be an integer >= 2, got {self.grid_resolution}")
        object.__setattr__(self, "grid_resolution", int(self.grid_resolution))
        if not boxes and not alphabets:
            raise DimensionError("a sample space needs at least one coordinate")

    @property
    def n_continuous(self) -> int:
        return len(self.boxes)

    @property
    def n_labels(self) -> int:
        return len(self.alphabets)

    @property
    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.boxes], dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.boxes], dtype=float)

    def with_resolution(self, resolution: int) -> "SampleSpace":
        return SampleSpace(self.boxes, self.alphabets, resolution)

    def check(self, points: PointSet, name: str = "point") -> None:
        """Raise if ``points`` do not belong to the space."""
        if points.x.shape[1] != self.n_continuous:
            raise DimensionError(
                f"{name}: expected {self.n_continuous} continuous coordinates, got {points.x.shape[1]}"
            )
        if points.labels.shape[1] != self.n_labels:
            raise DimensionError(
                f"{name}: expected {self.n_labels} label coordinates, got {points.labels.shape[1]}"
            )
        if len(points) == 0:
            return
        for i, (lo, hi) in enumerate(self.boxes):
            col = points.x[:, i]
            slack = _BOX_SLACK * (1.0 + abs(lo) + abs(hi))
            if np.any(col < lo - slack) or np.any(col > hi + slack) or np.any(~np.isfinite(col)):
                raise DomainError(f"{name}: continuous coordinate {i} outside [{lo}, {hi}]")
        for j, a in enumerate(self.alphabets):
            col = points.labels[:, j]
            if np.any(col < 0) or np.any(col >= a):
                raise DomainError(f"{name}: label coordinate {j} outside alphabet of size {a}")

    def contains(self, points) -> bool:
        try:
            self.check(as_pointset(points))
        except (DimensionError, DomainError):
            return False
        return True

    def axis_nodes(self, i: int, resolution: int | None = None) -> np.ndarray:
        lo, hi = self.boxes[i]
        r = self.grid_resolution if resolution is None else int(resolution)
        if r < 2:
            raise DomainError(f"grid resolution must be >= 2, got {r}")
        if lo == hi:
            return np.array([lo])
        k = np.arange(r, dtype=float)
        nodes = lo + (hi - lo) * (k / (r - 1))
        nodes[-1] = hi
        return nodes

    def cell_width(self, i: int) -> float:
        lo, hi = self.boxes[i]
        return (hi - lo) / (self.grid_resolution - 1)

    def diameter_cost(self, cost: "TransportCost") -> float:
        """Largest cost between two points of the space."""
        lo = PointSet(self.lower.reshape(1, -1), np.zeros((1, self.n_labels), dtype=np.int64))
        hi_labels = np.array([[a - 1 for a in self.alphabets]], dtype=np.int64).reshape(1, -1)
        hi = PointSet(self.upper.reshape(1, -1), hi_labels)
        return float(cost.matrix(lo, hi)[0, 0])


@lru_cache(maxsize=64)
def _grid_arrays(space: SampleSpace, resolution: int) -> PointSet:
    axes = [space.axis_nodes(i, resolution) for i in range(space.n_continuous)]
    if axes:
        mesh = np.meshgrid(*axes, indexing="ij")
        cont = np.stack([g.ravel() for g in mesh], axis=1)
    else:
        cont = np.zeros((1, 0))
    if space.alphabets:
        combos = np.array(list(itertools.product(*[range(a) for a in space.alphabets])), dtype=np.int64)
    else:
        combos = np.zeros((1, 0), dtype=np.int64)
    nc, nl = cont.shape[0], combos.shape[0]
    x = np.repeat(cont, nl, axis=0)
    labels = np.tile(combos, (nc, 1))
    x.setflags(write=False)
    labels.setflags(write=False)
    return PointSet(x, labels)


def grid_points(space: SampleSpace, resolution: int | None = None) -> PointSet:
    """Grid of ``space`` as arrays; continuous axes vary slowest, labels fastest."""
    r = space.grid_resolution if resolution is None else int(resolution)
    if r < 2:
        raise DomainError(f"grid resolution must be >= 2, got {r}")
    return _grid_arrays(space, r)


def grid(space: SampleSpace, resolution: int | None = None) -> list[SamplePoint]:
    """Ordered list of grid points (endpoints included, lexicographic over axes)."""
    return grid_points(space, resolution).to_points()


def _pnorm_rows(diff: np.ndarray, p: float) -> np.ndarray:
    a = np.abs(diff)
    if a.shape[-1] == 0:
        return np.zeros(a.shape[:-1])
    if math.isinf(p):
        return a.max(axis=-1)
    if p == 1:
        return a.sum(axis=-1)
    if p == 2:
        return np.sqrt((a * a).sum(axis=-1))
    return (a**p).sum(axis=-1) ** (1.0 / p)


@dataclass(frozen=True)
class TransportCost:
    """``c(xi, zeta) = ||x - x'||_p ** q + kappa * (#label mismatches) ** label_power``.

    ``label_weight_kappa = inf`` forbids label changes (infinite cost), which
    models the usual "labels are not transported" convention.
    """

    p_norm: float = 2.0
    power_q: float = 2.0
    label_weight_kappa: float = 1.0
    label_power: float = 1.0

    def __post_init__(self):
        p, q = float(self.p_norm), float(self.power_q)
        kappa, lp = float(self.label_weight_kappa), float(self.label_power)
        if not p >= 1:
            raise DomainError(f"p_norm must lie in [1, inf], got {p}")
        if not (q >= 1 and math.isfinite(q)):
            raise DomainError(f"power_q must lie in [1, inf), got {q}")
        if not kappa >= 0:
            raise DomainError(f"label_weight_kappa must be >= 0, got {kappa}")
        if not (lp >= 1 and math.isfinite(lp)):
            raise DomainError(f"label_power must lie in [1, inf), got {lp}")
        object.__setattr__(self, "p_norm", p)
        object.__setattr__(self, "power_q", q)
        object.__setattr__(self, "label_weight_kappa", kappa)
        object.__setattr__(self, "label_power", lp)

    @property
    def labels_fixed(self) -> bool:
        return math.isinf(self.label_weight_kappa)

    def matrix(self, a: PointSet, b: PointSet) -> np.ndarray:
        """Cost matrix of shape (len(a), len(b))."""
        _check_same_dims(a, b)
        diff = a.x[:, None, :] - b.x[None, :, :]
        out = _pnorm_rows(diff, self.p_norm)
        if self.power_q != 1:
            out = out**self.power_q
        if a.labels.shape[1]:
            mism = (a.labels[:, None, :] != b.labels[None, :, :]).sum(axis=-1)
            if self.labels_fixed:
                out = np.where(mism > 0, np.inf, out)
            elif self.label_weight_kappa > 0:
                out = out + self.label_weight_kappa * mism.astype(float) ** self.label_power
        return out

    def is_pure_power(self, space: SampleSpace) -> bool:
        """True when the cost equals ``d ** q`` on every pair it allows to be transported."""
        return space.n_labels == 0 or self.labels_fixed


def _check_same_dims(a: PointSet, b: PointSet) -> None:
    if a.x.shape[1] != b.x.shape[1]:
        raise DimensionError(
            f"continuous dimension mismatch: {a.x.shape[1]} vs {b.x.shape[1]} "
            f"(coordinate {min(a.x.shape[1], b.x.shape[1])} missing)"
        )
    if a.labels.shape[1] != b.labels.shape[1]:
        raise DimensionError(
            f"label dimension mismatch: {a.labels.shape[1]} vs {b.labels.shape[1]} "
            f"(label coordinate {min(a.labels.shape[1], b.labels.shape[1])} missing)"
        )


def distance_matrix(space: SampleSpace, a: PointSet, b: PointSet, p_norm: float = 2.0) -> np.ndarray:
    """``d = ||x - x'||_p + 1{labels differ}``, the metric used for Lipschitz checks."""
    space.check(a, "xi")
    space.check(b, "zeta")
    out = _pnorm_rows(a.x[:, None, :] - b.x[None, :, :], p_norm)
    if a.labels.shape[1]:
        out = out + np.any(a.labels[:, None, :] != b.labels[None, :, :], axis=-1)
    return out


def cost_eval(cost: TransportCost, xi: SamplePoint, zeta: SamplePoint) -> float:
    a, b = as_pointset(xi), as_pointset(zeta)
    return float(cost.matrix(a, b)[0, 0])


def distance_eval(space: SampleSpace, xi: SamplePoint, zeta: SamplePoint, p_norm: float = 2.0) -> float:
    a, b = as_pointset(xi), as_pointset(zeta)
    _check_same_dims(a, b)
    return float(distance_matrix(space, a, b, p_norm)[0, 0])
