"""Loss functions (hypotheses) and hypothesis classes.

A :class:`Hypothesis` is a bounded nonnegative loss ``f : Z -> [0, M]``
evaluated in batches over a :class:`~wasslearn.spaces.PointSet`, together with
the regularity metadata the bounds need (Lipschitz constant, smooth anchor).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .bounds import EntropyProfile
from .spaces import InstanceSpace, Point, PointSet, as_point_set

Loss = Callable[[PointSet], np.ndarray]


@dataclass(frozen=True)
class SmoothAnchor:
    """``f(z) <= constant * d(z, point) ** order`` for every ``z``."""

    constant: float
    point: Point
    order: float

    def constant_for(self, p: float, diameter: float) -> float | None:
        """Constant valid for exponent ``p``; None when ``p`` exceeds the anchor order."""
        if p > self.order:
            return None
        return self.constant * diameter ** (self.order - p)


@dataclass(frozen=True, eq=False)
class Hypothesis:
    loss: Loss
    upper_bound: float
    lipschitz_constant: float | None = None
    smooth_anchor: SmoothAnchor | None = None
    family_tag: str = "custom"
    name: str = ""

    def values(self, points) -> np.ndarray:
        return np.asarray(self.loss(as_point_set(points)), dtype=float)

    def evaluate(self, point: Point) -> float:
        return float(self.values(PointSet.from_points([point]))[0])

    def __call__(self, points) -> np.ndarray:
        return self.values(points)


@dataclass(frozen=True, eq=False)
class HypothesisClass:
    """Finite (or grid-discretized) hypothesis class with uniform metadata.

    Member order is the tie-breaking order of every argmin over the class.
    """

    members: tuple[Hypothesis, ...]
    upper_bound: float
    lipschitz_constant: float | None = None
    anchor_index: int | None = None
    entropy_profile: EntropyProfile | None = None
    name: str = "class"

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))

    def __len__(self) -> int:
        return len(self.members)

    def __getitem__(self, i: int) -> Hypothesis:
        return self.members[i]

    def __iter__(self):
        return iter(self.members)

    def ids(self) -> list[str]:
        return [m.name or f"h{i}" for i, m in enumerate(self.members)]


@dataclass(frozen=True, eq=False)
class Predictor:
    """Real-valued predictor on features with its sup norm and Lipschitz constant."""

    fn: Callable[[np.ndarray], np.ndarray]
    sup_norm: float
    lipschitz: float
    name: str = ""

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)


def linear_predictor(w, b: float = 0.0, feature_bound: float = 1.0) -> Predictor:
    w = np.array(w, dtype=float)
    norm = float(np.linalg.norm(w))
    label = "lin(" + ",".join(f"{v:.4g}" for v in w) + (f";{b:.4g}" if b else "") + ")"
    return Predictor(lambda x: x @ w + b, norm * feature_bound + abs(b), norm, label)


@dataclass(frozen=True)
class Nonlinearity:
    fn: Callable[[np.ndarray], np.ndarray]
    sup: float
    derivative_sup: float
    name: str


TANH = Nonlinearity(np.tanh, 1.0, 1.0, "tanh")
CENTERED_LOGISTIC = Nonlinearity(lambda t: np.tanh(t / 2.0), 1.0, 0.5, "centered_logistic")


def _require_grid(grid) -> list:
    grid = list(grid)
    if not grid:
        raise ValueError("empty grid")
    return grid


def make_hinge_class(predictor_grid: Sequence[Predictor], space: InstanceSpace) -> HypothesisClass:
    """Hinge losses ``max(0, 1 - y h(x))`` for labels in ``{-1, +1}``.

    Each member is Lipschitz with constant ``max(2 ||h||_X, L_h)`` for the
    metric ``||x - x'|| + 1{y != y'}`` (``hinge_product``).
    """
    grid = _require_grid(predictor_grid)
    members = []
    for k, h in enumerate(grid):
        members.append(
            Hypothesis(
                loss=lambda pts, h=h: np.maximum(0.0, 1.0 - pts.labels * h(pts.features)),
                upper_bound=1.0 + h.sup_norm,
                lipschitz_constant=max(2.0 * h.sup_norm, h.lipschitz),
                family_tag="hinge",
                name=h.name or f"hinge{k}",
            )
        )
    M = max(m.upper_bound for m in members)
    L = max(m.lipschitz_constant for m in members)
    return HypothesisClass(tuple(members), M, L, None, EntropyProfile.finite(len(members), M), "hinge")


def _zero_anchor(space: InstanceSpace) -> SmoothAnchor:
    # (y - 0)^2 = |y|^2 <= d((x, y), (x, 0))^2 <= d((x, y), (0, 0))^2
    return SmoothAnchor(1.0, Point(np.zeros(space.dimension), 0.0), 2.0)


def make_quadratic_class(predictor_grid: Sequence[Predictor], space: InstanceSpace) -> HypothesisClass:
    """Squared losses ``(y - h(x))^2``; the zero predictor, when present, is the smooth anchor."""
    grid = _require_grid(predictor_grid)
    B = space.label_bound
    members = []
    anchor_index = None
    for k, h in enumerate(grid):
        is_zero = h.sup_norm == 0.0
        if is_zero and anchor_index is None:
            anchor_index = k
        members.append(
            Hypothesis(
                loss=lambda pts, h=h: (pts.labels - h(pts.features)) ** 2,
                upper_bound=(B + h.sup_norm) ** 2,
                lipschitz_constant=2.0 * math.sqrt(2.0) * (B + h.sup_norm) * (1.0 + h.lipschitz),
                smooth_anchor=_zero_anchor(space) if is_zero else None,
                family_tag="quadratic",
                name=h.name or f"quad{k}",
            )
        )
    M = max(m.upper_bound for m in members)
    L = max(m.lipschitz_constant for m in members)
    return HypothesisClass(tuple(members), M, L, anchor_index, EntropyProfile.finite(len(members), M), "quadratic")


def make_sigmoid_network_class(
    weight_grid, space: InstanceSpace, s: Nonlinearity = TANH
) -> HypothesisClass:
    """Single-neuron regressors ``(y - s(w . x))^2`` with ``||w||_2 <= 1``."""
    grid = [np.asarray(w, dtype=float) for w in _require_grid(weight_grid)]
    B = space.label_bound
    for w in grid:
        if w.shape != (space.dimension,):
            raise ValueError(f"weight {w} does not have dimension {space.dimension}")
        if np.linalg.norm(w) > 1.0 + 1e-12:
            raise ValueError(f"weight {w.tolist()} lies outside the unit ball")
    L = 2.0 * math.sqrt(2.0) * (B + s.sup) * (1.0 + s.derivative_sup)
    M = (s.sup + B) ** 2
    members = []
    anchor_index = None
    for k, w in enumerate(grid):
        is_zero = not np.any(w)
        if is_zero and anchor_index is None:
            anchor_index = k
        members.append(
            Hypothesis(
                loss=lambda pts, w=w: (pts.labels - s.fn(pts.features @ w)) ** 2,
                upper_bound=M,
                lipschitz_constant=L,
                smooth_anchor=_zero_anchor(space) if is_zero else None,
                family_tag="sigmoid_network",
                name="net(" + ",".join(f"{v:.4g}" for v in w) + ")",
            )
        )
    profile = EntropyProfile.network(space.dimension, space.feature_bound, B, s.sup, s.derivative_sup)
    return HypothesisClass(tuple(members), M, L, anchor_index, profile, "sigmoid_network")


def gaussian_kernel(a: np.ndarray, b: np.ndarray, sigma: float) -> np.ndarray:
    sq = np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=2)
    return np.exp(-sq / sigma**2)


def make_rkhs_ball_class(
    centers, coefficient_grid, sigma: float, r: float, space: InstanceSpace, tol: float = 1e-9
) -> HypothesisClass:
    """Squared losses of finite Gaussian-kernel expansions inside the RKHS ball of radius ``r``."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    grid = [np.asarray(a, dtype=float) for a in _require_grid(coefficient_grid)]
    gram = gaussian_kernel(centers, centers, sigma)
    B = space.label_bound
    for a in grid:
        if a.shape != (centers.shape[0],):
            raise ValueError(f"coefficient vector {a.tolist()} does not match {centers.shape[0]} centers")
        norm_sq = float(a @ gram @ a)
        if norm_sq > r**2 + tol:
            raise ValueError(f"coefficients {a.tolist()} have RKHS norm {math.sqrt(norm_sq)!r} > {r}")
    M = 2.0 * (r**2 + B**2)
    L = 2.0 * math.sqrt(2.0) * (r + B) * (1.0 + r * math.sqrt(2.0) / sigma)
    members = []
    anchor_index = None
    for k, a in enumerate(grid):
        is_zero = not np.any(a)
        if is_zero and anchor_index is None:
            anchor_index = k
        members.append(
            Hypothesis(
                loss=lambda pts, a=a: (pts.labels - gaussian_kernel(pts.features, centers, sigma) @ a) ** 2,
                upper_bound=M,
                lipschitz_constant=L,
                smooth_anchor=_zero_anchor(space) if is_zero else None,
                family_tag="gaussian_rkhs",
                name="rkhs(" + ",".join(f"{v:.4g}" for v in a) + ")",
            )
        )
    profile = EntropyProfile.rkhs(space.dimension, space.feature_bound, sigma, r, B)
    return HypothesisClass(tuple(members), M, L, anchor_index, profile, "gaussian_rkhs")


def lipschitz_envelope(anchors, offsets, L: float, space: InstanceSpace, name: str = "") -> Hypothesis:
    """``f(z) = min_k (offset_k + L d(z, anchor_k))``, an L-Lipschitz nonnegative loss."""
    anchors = as_point_set(anchors)
    offsets = np.asarray(offsets, dtype=float)
    if np.any(offsets < 0):
        raise ValueError("offsets must be nonnegative")
    M = float(offsets.min() + L * space.diameter)
    return Hypothesis(
        loss=lambda pts: np.min(offsets[None, :] + L * space.pairwise(pts, anchors), axis=1),
        upper_bound=M,
        lipschitz_constant=float(L),
        family_tag="lipschitz_envelope",
        name=name,
    )


def anchored_bump(C0: float, z0: Point, p: float, space: InstanceSpace, phase: float = 0.0, name: str = "") -> Hypothesis:
    """A non-Lipschitz-looking loss dominated by ``C0 d(z, z0)^p``."""
    anchor = PointSet.from_points([z0])

    def loss(pts: PointSet) -> np.ndarray:
        d = space.pairwise(pts, anchor)[:, 0]
        wiggle = 0.5 + 0.5 * np.cos(7.0 * d + phase)
        return C0 * d**p * wiggle

    return Hypothesis(
        loss=loss,
        upper_bound=C0 * space.diameter**p,
        smooth_anchor=SmoothAnchor(C0, z0, p),
        family_tag="anchored",
        name=name,
    )


def sample_space_points(space: InstanceSpace, k: int, rng: np.random.Generator) -> PointSet:
    """``k`` random points spread over the bounded space (used by metadata spot checks)."""
    if space.metric_kind == "interval":
        lo, hi = space.interval
        return PointSet(rng.uniform(lo, hi, size=(k, 1)))
    d = space.dimension
    direction = rng.normal(size=(k, d))
    direction /= np.maximum(np.linalg.norm(direction, axis=1, keepdims=True), 1e-300)
    radius = space.feature_bound * rng.uniform(0, 1, size=(k, 1)) ** (1.0 / d)
    x = direction * radius
    if not space.labeled:
        return PointSet(x)
    if space.metric_kind == "hinge_product":
        y = rng.choice([-1.0, 1.0], size=k)
    else:
        y = rng.uniform(-space.label_bound, space.label_bound, size=k)
    return PointSet(x, y)


@dataclass
class MetadataReport:
    bounded: bool
    lipschitz: bool | None
    anchored: bool | None
    worst_lipschitz_ratio: float = field(default=0.0)


def check_metadata(f: Hypothesis, space: InstanceSpace, rng: np.random.Generator, pairs: int = 1000,
                   slack: float = 1e-9) -> MetadataReport:
    """Spot-check boundedness, the Lipschitz constant and the smooth anchor on random points."""
    a = sample_space_points(space, pairs, rng)
    b = sample_space_points(space, pairs, rng)
    fa, fb = f.values(a), f.values(b)
    bounded = bool(np.all(fa >= -slack) and np.all(fa <= f.upper_bound + slack))
    lip = None
    ratio = 0.0
    if f.lipschitz_constant is not None:
        d = space.paired(a, b)
        gap = np.abs(fa - fb)
        lip = bool(np.all(gap <= f.lipschitz_constant * d + slack))
        pos = d > 0
        ratio = float(np.max(gap[pos] / d[pos])) if pos.any() else 0.0
    anchored = None
    if f.smooth_anchor is not None:
        anc = f.smooth_anchor
        d0 = space.pairwise(a, PointSet.from_points([anc.point]))[:, 0]
        anchored = bool(np.all(fa <= anc.constant * d0**anc.order + slack))
    return MetadataReport(bounded, lip, anchored, ratio)
