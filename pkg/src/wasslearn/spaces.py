"""Instance spaces, point sets and finitely supported distributions.

Every other module computes over the objects defined here: an
:class:`InstanceSpace` fixes the metric and the bounds of ``Z = X x Y``, a
:class:`PointSet` stores a batch of points as arrays, and an
:class:`EmpiricalDistribution` attaches probability weights to a point set.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

METRIC_KINDS = ("euclidean_product", "lp_product", "feature_only", "interval", "hinge_product")
WEIGHT_TOL = 1e-12
BOUND_TOL = 1e-9


class StructuralError(ValueError):
    """Shapes or dimensions of the inputs do not fit together."""


class DataError(ValueError):
    """A dataset is empty, malformed or violates the space bounds."""


@dataclass(frozen=True)
class Point:
    features: tuple[float, ...]
    label: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(float(v) for v in np.ravel(self.features)))
        if self.label is not None:
            object.__setattr__(self, "label", float(self.label))


@dataclass(frozen=True, eq=False)
class PointSet:
    """A batch of ``k`` points: ``features`` is ``(k, d)``, ``labels`` is ``(k,)`` or None."""

    features: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        x = np.array(self.features, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2:
            raise StructuralError(f"features must be 2-D, got shape {x.shape}")
        x.setflags(write=False)
        object.__setattr__(self, "features", x)
        if self.labels is not None:
            y = np.array(self.labels, dtype=float).ravel()
            if y.shape[0] != x.shape[0]:
                raise StructuralError(f"{x.shape[0]} feature rows but {y.shape[0]} labels")
            y.setflags(write=False)
            object.__setattr__(self, "labels", y)

    @classmethod
    def from_points(cls, points: Sequence[Point]) -> PointSet:
        if len(points) == 0:
            raise StructuralError("empty point list")
        labeled = {p.label is not None for p in points}
        if len(labeled) > 1:
            raise StructuralError("cannot mix labeled and unlabeled points")
        x = np.array([p.features for p in points], dtype=float)
        y = np.array([p.label for p in points], dtype=float) if labeled.pop() else None
        return cls(x, y)

    def __len__(self) -> int:
        return self.features.shape[0]

    def __getitem__(self, i: int) -> Point:
        label = None if self.labels is None else self.labels[i]
        return Point(self.features[i], label)

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def dimension(self) -> int:
        return self.features.shape[1]

    @property
    def labeled(self) -> bool:
        return self.labels is not None

    def take(self, index) -> PointSet:
        labels = None if self.labels is None else self.labels[index]
        return PointSet(self.features[index], labels)

    def concat(self, other: PointSet) -> PointSet:
        if self.labeled != other.labeled or self.dimension != other.dimension:
            raise StructuralError("point sets differ in dimension or labeling")
        labels = None if self.labels is None else np.concatenate([self.labels, other.labels])
        return PointSet(np.vstack([self.features, other.features]), labels)

    def unlabeled(self) -> PointSet:
        return PointSet(self.features)

    def stacked(self) -> np.ndarray:
        """Features with the label appended as a last column (when labeled)."""
        if self.labels is None:
            return np.asarray(self.features)
        return np.column_stack([self.features, self.labels])


def as_point_set(points) -> PointSet:
    if isinstance(points, PointSet):
        return points
    if isinstance(points, EmpiricalDistribution):
        return points.support
    if isinstance(points, Point):
        return PointSet.from_points([points])
    points = list(points)
    if points and isinstance(points[0], Point):
        return PointSet.from_points(points)
    return PointSet(np.asarray(points, dtype=float))


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    """Finitely supported probability measure.

    Duplicate atoms are kept as separate atoms; their weights simply add up in
    every expectation.
    """

    support: PointSet
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        support = as_point_set(self.support)
        object.__setattr__(self, "support", support)
        n = len(support)
        if n == 0:
            raise DataError("empty dataset")
        w = np.full(n, 1.0 / n) if self.weights is None else np.array(self.weights, dtype=float).ravel()
        if w.shape[0] != n:
            raise StructuralError(f"{n} atoms but {w.shape[0]} weights")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, points) -> EmpiricalDistribution:
        return cls(as_point_set(points))

    def __len__(self) -> int:
        return len(self.support)

    @property
    def features(self) -> np.ndarray:
        return self.support.features

    @property
    def labels(self) -> np.ndarray | None:
        return self.support.labels

    def expectation(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))

    def feature_marginal(self) -> EmpiricalDistribution:
        return EmpiricalDistribution(self.support.unlabeled(), self.weights)


@dataclass(frozen=True)
class InstanceSpace:
    """Bounded instance space ``Z = X x Y`` with one of the supported metrics.

    ``feature_bound`` is the radius of the Euclidean ball holding the features,
    ``label_bound`` bounds ``|y|``. The ``interval`` kind is the one-dimensional
    unlabeled space ``[lo, hi]`` with ``|z - z'|``; ``metric_order`` is the
    exponent of the ``lp_product`` metric and the feature norm of
    ``feature_only``.
    """

    dimension: int
    feature_bound: float = 1.0
    label_bound: float = 1.0
    metric_kind: str = "euclidean_product"
    metric_order: float = 2.0
    interval: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if self.metric_kind not in METRIC_KINDS:
            raise ValueError(f"unknown metric kind {self.metric_kind!r}")
        if self.dimension < 1:
            raise ValueError("dimension must be a positive integer")
        if self.metric_kind == "interval":
            lo, hi = self.interval
            if self.dimension != 1 or not hi > lo:
                raise ValueError("interval space needs dimension 1 and lo < hi")
        if not (self.feature_bound >= 0 and self.label_bound >= 0):
            raise ValueError("bounds must be nonnegative")
        if not (math.isfinite(self.feature_bound) and math.isfinite(self.label_bound)):
            raise ValueError("instance space must be bounded")
        if self.metric_order < 1:
            raise ValueError("metric order must be >= 1")

    @classmethod
    def unit_interval(cls, lo: float = 0.0, hi: float = 2.0) -> InstanceSpace:
        return cls(dimension=1, metric_kind="interval", interval=(float(lo), float(hi)))

    @property
    def labeled(self) -> bool:
        return self.metric_kind not in ("feature_only", "interval")

    @cached_property
    def feature_diameter(self) -> float:
        if self.metric_kind == "interval":
            return self.interval[1] - self.interval[0]
        if self.metric_kind in ("lp_product", "feature_only"):
            # ||v||_q <= d^(1/q - 1/2) ||v||_2 when q < 2
            q = self.metric_order
            return 2.0 * self.feature_bound * self.dimension ** max(0.0, 1.0 / q - 0.5)
        return 2.0 * self.feature_bound

    @cached_property
    def diameter(self) -> float:
        dx = self.feature_diameter
        if not self.labeled:
            return dx
        dy = 2.0 * self.label_bound
        if self.metric_kind == "euclidean_product":
            return 2.0 * math.sqrt(self.feature_bound**2 + self.label_bound**2)
        if self.metric_kind == "lp_product":
            q = self.metric_order
            return (dx**q + dy**q) ** (1.0 / q)
        return dx + (1.0 if self.label_bound > 0 else 0.0)

    def _check(self, a: PointSet, b: PointSet) -> None:
        d = self.dimension
        if a.dimension != d or b.dimension != d:
            raise StructuralError(f"space has dimension {d}, points have {a.dimension} and {b.dimension}")
        if self.labeled and (a.labels is None or b.labels is None):
            raise StructuralError(f"metric {self.metric_kind} needs labeled points")

    def pairwise(self, a, b) -> np.ndarray:
        """Matrix of distances ``d(a_i, b_j)``."""
        a, b = as_point_set(a), as_point_set(b)
        self._check(a, b)
        diff = a.features[:, None, :] - b.features[None, :, :]
        dy = None if not self.labeled else np.abs(a.labels[:, None] - b.labels[None, :])
        return self._metric(diff, dy)

    def paired(self, a, b) -> np.ndarray:
        """Row-wise distances ``d(a_i, b_i)`` for point sets of equal length."""
        a, b = as_point_set(a), as_point_set(b)
        self._check(a, b)
        if len(a) != len(b):
            raise StructuralError("paired distances need point sets of equal length")
        dy = None if not self.labeled else np.abs(a.labels - b.labels)
        return self._metric(a.features - b.features, dy)

    def _metric(self, diff: np.ndarray, dy: np.ndarray | None) -> np.ndarray:
        kind = self.metric_kind
        if kind == "interval":
            return np.abs(diff[..., 0])
        if kind == "feature_only":
            return _norm(diff, self.metric_order)
        if kind == "euclidean_product":
            return np.sqrt(np.sum(diff * diff, axis=-1) + dy**2)
        if kind == "lp_product":
            q = self.metric_order
            return (np.sum(np.abs(diff) ** q, axis=-1) + dy**q) ** (1.0 / q)
        return np.sqrt(np.sum(diff * diff, axis=-1)) + (dy > 0)

    def distance(self, a, b) -> float:
        return float(self.pairwise(a, b)[0, 0])

    def validate(self, points, offset: int = 0) -> None:
        """Raise :class:`DataError` naming the first point outside the space."""
        pts = as_point_set(points)
        if pts.dimension != self.dimension:
            raise StructuralError(f"space has dimension {self.dimension}, points have {pts.dimension}")
        if self.labeled and pts.labels is None:
            raise StructuralError("labeled space needs labeled points")
        x = pts.features
        if self.metric_kind == "interval":
            lo, hi = self.interval
            bad = np.flatnonzero((x[:, 0] < lo - BOUND_TOL) | (x[:, 0] > hi + BOUND_TOL))
            if bad.size:
                raise DataError(f"row {bad[0] + offset}: value {x[bad[0], 0]!r} outside [{lo}, {hi}]")
            return
        norms = np.linalg.norm(x, axis=1)
        bad = np.flatnonzero(norms > self.feature_bound + BOUND_TOL)
        if bad.size:
            raise DataError(
                f"row {bad[0] + offset}: feature norm {norms[bad[0]]!r} exceeds bound {self.feature_bound}"
            )
        if self.labeled:
            bad = np.flatnonzero(np.abs(pts.labels) > self.label_bound + BOUND_TOL)
            if bad.size:
                raise DataError(
                    f"row {bad[0] + offset}: label {pts.labels[bad[0]]!r} exceeds bound {self.label_bound}"
                )

    def feature_space(self) -> InstanceSpace:
        """The unlabeled space of features with the same feature norm."""
        if not self.labeled:
            return self
        q = self.metric_order if self.metric_kind == "lp_product" else 2.0
        return InstanceSpace(self.dimension, self.feature_bound, 0.0, "feature_only", q)


def _norm(diff: np.ndarray, q: float) -> np.ndarray:
    if q == 2.0:
        return np.sqrt(np.sum(diff * diff, axis=-1))
    if q == 1.0:
        return np.sum(np.abs(diff), axis=-1)
    return np.sum(np.abs(diff) ** q, axis=-1) ** (1.0 / q)


def distance(space: InstanceSpace, a: Point, b: Point) -> float:
    return space.distance(a, b)


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_rows(path: str | Path) -> np.ndarray:
    """Parse a numeric CSV into a 2-D array; a non-numeric first row is a header."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    with path.open(newline="") as fh:
        rows = [(i + 1, r) for i, r in enumerate(csv.reader(fh)) if any(c.strip() for c in r)]
    if rows and not all(_is_number(c) for c in rows[0][1]):
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path}: empty dataset")
    width = len(rows[0][1])
    out = np.empty((len(rows), width))
    for k, (line, row) in enumerate(rows):
        if len(row) != width:
            raise DataError(f"{path}: row {line} has {len(row)} fields, expected {width}")
        try:
            out[k] = [float(c) for c in row]
        except ValueError as exc:
            raise DataError(f"{path}: row {line}: {exc}") from None
    if not np.all(np.isfinite(out)):
        line = rows[int(np.flatnonzero(~np.isfinite(out).all(axis=1))[0])][0]
        raise DataError(f"{path}: row {line}: non-finite value")
    return out


def load_dataset(path: str | Path, schema: str, space: InstanceSpace) -> EmpiricalDistribution:
    """Read a CSV dataset into a uniformly weighted distribution.

    ``schema`` is ``"labeled"`` (last column is the label) or ``"unlabeled"``.
    """
    if schema not in ("labeled", "unlabeled"):
        raise ValueError(f"unknown schema {schema!r}")
    table = read_rows(path)
    expected = space.dimension + (schema == "labeled")
    if table.shape[1] != expected:
        raise DataError(f"{path}: rows have {table.shape[1]} fields, expected {expected}")
    if schema == "labeled":
        pts = PointSet(table[:, :-1], table[:, -1])
    else:
        pts = PointSet(table)
    try:
        space.validate(pts, offset=1)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None
    return EmpiricalDistribution.uniform(pts)


def save_dataset(path: str | Path, dist: EmpiricalDistribution) -> None:
    """Write a uniformly weighted distribution in the dataset CSV format."""
    if not np.allclose(dist.weights, 1.0 / len(dist), rtol=0, atol=WEIGHT_TOL):
        raise ValueError("only uniformly weighted distributions can be saved as datasets")
    table = dist.support.stacked()
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        for row in table:
            writer.writerow([format(v, ".17g") for v in row])


def sample_uniform_interval(n: int, seed: int) -> EmpiricalDistribution:
    """``n`` i.i.d. draws from Unif[0, 1] as an unlabeled empirical distribution."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    return EmpiricalDistribution.uniform(PointSet(rng.uniform(0.0, 1.0, size=(n, 1))))


def uniform_grid(n: int, lo: float = 0.0, hi: float = 1.0) -> EmpiricalDistribution:
    """Midpoint grid of ``n`` equally weighted atoms on ``[lo, hi]``."""
    x = lo + (hi - lo) * (np.arange(n) + 0.5) / n
    return EmpiricalDistribution.uniform(PointSet(x[:, None]))


def regular_candidates(space: InstanceSpace, per_axis: int, limit: int = 20000) -> PointSet:
    """A tensor grid of candidate points covering the bounded space."""
    if per_axis < 2:
        raise ValueError("grid needs at least 2 points per axis")
    if space.metric_kind == "interval":
        return PointSet(np.linspace(*space.interval, per_axis)[:, None])
    axes = [np.linspace(-space.feature_bound, space.feature_bound, per_axis)] * space.dimension
    if space.labeled:
        axes.append(np.linspace(-space.label_bound, space.label_bound, per_axis))
    total = per_axis ** len(axes)
    if total > limit:
        raise ValueError(f"grid would have {total} points (limit {limit})")
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
    x = mesh[:, : space.dimension]
    keep = np.linalg.norm(x, axis=1) <= space.feature_bound + BOUND_TOL
    mesh = mesh[keep]
    if space.labeled:
        return PointSet(mesh[:, :-1], mesh[:, -1])
    return PointSet(mesh)


def merge_points(parts: Iterable[PointSet]) -> PointSet:
    parts = list(parts)
    out = parts[0]
    for p in parts[1:]:
        out = out.concat(p)
    return out


@dataclass(frozen=True)
class AmbiguityBall:
    """Wasserstein ball of order ``p`` and radius ``radius`` around a distribution."""

    p: float
    radius: float

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("Wasserstein order p must be >= 1")
        if not self.radius >= 0:
            raise ValueError("radius must be nonnegative")

    @property
    def budget(self) -> float:
        """Transport budget ``radius ** p``."""
        return self.radius**self.p
