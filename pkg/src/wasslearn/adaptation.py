"""Domain adaptation under a feature-space pushforward drift.

Target features are ``T(X)`` for source features ``X``; labels keep the same
conditional law given the pre-image. The adaptation procedure sees labeled
source data and unlabeled target features only: it estimates the feature
Wasserstein distance, inflates it by concentration terms to a radius, and runs
local minimax ERM at that radius.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bounds import BoundReport, EntropyProfile, adaptation_bound, comp_entropy_integral
from .erm import ErmResult, minimax_erm, ordinary_erm
from .hypotheses import Hypothesis, HypothesisClass, linear_predictor, make_quadratic_class
from .spaces import AmbiguityBall, EmpiricalDistribution, InstanceSpace, PointSet
from .transport import wasserstein

# Concentration constants of the empirical-measure tail bound. Only their
# existence is known; these defaults are placeholders, not derived values.
DEFAULT_CA = 1.0
DEFAULT_CB = 1.0


class Transform:
    kind = "identity"

    def forward(self, x: np.ndarray) -> np.ndarray:
        return np.array(x, dtype=float)

    def inverse(self, x: np.ndarray) -> np.ndarray:
        return np.array(x, dtype=float)

    def params(self) -> dict:
        return {}

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params()}


@dataclass(frozen=True)
class Shift(Transform):
    offset: tuple[float, ...]
    kind = "shift"

    def forward(self, x):
        return np.asarray(x, dtype=float) + np.asarray(self.offset)

    def inverse(self, x):
        return np.asarray(x, dtype=float) - np.asarray(self.offset)

    def params(self):
        return {"offset": list(self.offset)}


@dataclass(frozen=True)
class Affine(Transform):
    matrix: tuple[tuple[float, ...], ...]
    offset: tuple[float, ...]
    kind = "affine"

    def __post_init__(self):
        A = np.asarray(self.matrix, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or abs(np.linalg.det(A)) < 1e-12:
            raise ValueError("affine transform needs an invertible square matrix")

    def forward(self, x):
        return np.asarray(x, dtype=float) @ np.asarray(self.matrix).T + np.asarray(self.offset)

    def inverse(self, x):
        A = np.asarray(self.matrix, dtype=float)
        return np.linalg.solve(A, (np.asarray(x, dtype=float) - np.asarray(self.offset)).T).T

    def params(self):
        return {"matrix": [list(r) for r in self.matrix], "offset": list(self.offset)}


@dataclass(frozen=True)
class CubicMonotone(Transform):
    """Componentwise increasing map ``x_k -> a_k x_k + b_k x_k^3 + c_k`` (``a_k > 0``, ``b_k >= 0``)."""

    scale: tuple[float, ...]
    cubic: tuple[float, ...]
    offset: tuple[float, ...]
    kind = "cubic_monotone"

    def __post_init__(self):
        if any(a <= 0 for a in self.scale) or any(b < 0 for b in self.cubic):
            raise ValueError("componentwise map is not strictly increasing")

    def forward(self, x):
        x = np.asarray(x, dtype=float)
        a, b, c = (np.asarray(v) for v in (self.scale, self.cubic, self.offset))
        return a * x + b * x**3 + c

    def inverse(self, x):
        # Newton on an increasing cubic, started from the linear solution
        t = np.asarray(x, dtype=float)
        a, b, c = (np.asarray(v) for v in (self.scale, self.cubic, self.offset))
        u = (t - c) / a
        for _ in range(100):
            step = (a * u + b * u**3 + c - t) / (a + 3.0 * b * u**2)
            u = u - step
            if np.max(np.abs(step)) < 1e-15:
                break
        return u

    def params(self):
        return {"scale": list(self.scale), "cubic": list(self.cubic), "offset": list(self.offset)}


@dataclass(frozen=True, eq=False)
class DriftScenario:
    transform: Transform
    source_sampler: Callable[[np.random.Generator, int], np.ndarray]
    label_conditional: Callable[[np.random.Generator, np.ndarray], np.ndarray]
    name: str = "scenario"


@dataclass(frozen=True, eq=False)
class DriftData:
    source: EmpiricalDistribution
    target_features: EmpiricalDistribution
    target_test: EmpiricalDistribution


def generate_drift(scenario: DriftScenario, n: int, m: int, seed: int, n_test: int | None = None) -> DriftData:
    """Labeled source sample, unlabeled target features and a labeled target test set.

    Source, target and test draws use independent substreams of ``seed``.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be at least 1")
    n_test = m if n_test is None else n_test
    src_rng, tgt_rng, test_rng = (np.random.default_rng([seed, k]) for k in range(3))
    T = scenario.transform

    x = scenario.source_sampler(src_rng, n)
    source = PointSet(x, scenario.label_conditional(src_rng, x))
    target = PointSet(T.forward(scenario.source_sampler(tgt_rng, m)))
    pre = scenario.source_sampler(test_rng, n_test)
    test = PointSet(T.forward(pre), scenario.label_conditional(test_rng, pre))
    return DriftData(*(EmpiricalDistribution.uniform(s) for s in (source, target, test)))


def feature_wasserstein(source_features: EmpiricalDistribution, target_features: EmpiricalDistribution,
                        p: float, space: InstanceSpace) -> float:
    """``W_p`` between feature marginals under the feature-only metric of ``space``."""
    fs = space.feature_space()
    return wasserstein(p, source_features.feature_marginal(), target_features.feature_marginal(), fs)[0]


def adaptation_radius(W_hat: float, n: int, m: int, p: float, d: int, delta: float,
                      C_a: float = DEFAULT_CA, C_b: float = DEFAULT_CB) -> float:
    """``W_hat + (log(4 C_a / delta) / (C_b n))^(p/d) + (log(4 C_a / delta) / (C_b m))^(p/d)``."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if C_a <= 0 or C_b <= 0:
        raise ValueError("concentration constants must be positive")
    if d <= 2 * p:
        warnings.warn(f"d = {d} <= 2p = {2 * p}: the dimension condition of the adaptation bound fails",
                      stacklevel=2)
    log_term = math.log(4.0 * C_a / delta)
    return W_hat + (log_term / (C_b * n)) ** (p / d) + (log_term / (C_b * m)) ** (p / d)


def dimension_flags(d: int, p: float) -> tuple[str, ...]:
    return () if d > 2 * p else ("dimension_not_above_2p",)


def target_candidates(source: EmpiricalDistribution, target_features: EmpiricalDistribution,
                      label_grid) -> PointSet:
    """Source support plus every target feature vector paired with each grid label."""
    labels = np.asarray(list(label_grid), dtype=float)
    x = np.repeat(target_features.features, labels.size, axis=0)
    y = np.tile(labels, len(target_features))
    return source.support.concat(PointSet(x, y))


@dataclass(frozen=True, eq=False)
class AdaptationRun:
    labeled_source: EmpiricalDistribution
    unlabeled_target_features: EmpiricalDistribution
    delta: float
    concentration_constants: tuple[float, float]
    w_hat: float
    radius: float
    result: ErmResult
    baseline: ErmResult
    target_risk: float
    baseline_target_risk: float
    best_target_risk: float
    bound: BoundReport
    flags: tuple[str, ...] = field(default=())

    @property
    def realized_excess(self) -> float:
        return self.target_risk - self.best_target_risk

    def to_dict(self) -> dict:
        return {
            "n": len(self.labeled_source),
            "m": len(self.unlabeled_target_features),
            "delta": self.delta,
            "concentration_constants": {"C_a": self.concentration_constants[0], "C_b": self.concentration_constants[1],
                                        "note": "placeholder values, not derived"},
            "w_hat": self.w_hat,
            "radius": self.radius,
            "minimax": self.result.to_dict(),
            "ordinary": self.baseline.to_dict(),
            "target_risk": self.target_risk,
            "ordinary_target_risk": self.baseline_target_risk,
            "best_target_risk": self.best_target_risk,
            "realized_excess": self.realized_excess,
            "bound": self.bound.to_dict(),
            "flags": list(self.flags),
        }


def run_adaptation(F: HypothesisClass, data: DriftData, space: InstanceSpace, p: float, delta: float,
                   C_a: float = DEFAULT_CA, C_b: float = DEFAULT_CB, label_grid=None) -> AdaptationRun:
    """Estimate the radius from unlabeled data, run minimax ERM, and score on target test data."""
    source, target = data.source, data.target_features
    n, m = len(source), len(target)
    w_hat = feature_wasserstein(source, target, p, space)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        radius = adaptation_radius(w_hat, n, m, p, space.dimension, delta, C_a, C_b)
    if label_grid is None:
        B = space.label_bound
        label_grid = (-B, 0.0, B)
    cands = target_candidates(source, target, label_grid)
    result = minimax_erm(F, source, AmbiguityBall(p, radius), cands, space)
    baseline = ordinary_erm(F, source)
    test = data.target_test
    risks = [test.expectation(f.values(test.support)) for f in F]
    comp = comp_entropy_integral(F.entropy_profile) if F.entropy_profile is not None else 0.0
    L = F.lipschitz_constant if F.lipschitz_constant is not None else math.inf
    bound = adaptation_bound(comp, L, space.diameter, radius, p, F.upper_bound, n, delta)
    return AdaptationRun(source, target, delta, (C_a, C_b), w_hat, radius, result, baseline,
                         risks[result.selected_index], risks[baseline.selected_index], min(risks), bound,
                         dimension_flags(space.dimension, p))


def pushforward_instance(transform: Transform, n: int, d: int, seed: int, label_bound: float = 1.0):
    """Discrete ``P`` on ``(x, y)`` atoms with random weights and ``Q`` its pushforward under ``T x id``."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=(n, d))
    y = rng.uniform(-label_bound, label_bound, size=n)
    w = rng.dirichlet(np.ones(n))
    P = EmpiricalDistribution(PointSet(x, y), w)
    Q = EmpiricalDistribution(PointSet(transform.forward(x), y), w)
    return P, Q


def verify_pushforward_identity(transform: Transform, n: int, p: float, seed: int, d: int = 2) -> float:
    """``|W_p(P, Q) - W_p(mu, nu)|`` for an exact pushforward pair under the order-``p`` product metric.

    Componentwise increasing maps (shifts included) are optimal for the
    separable cost, which the identity requires.
    """
    P, Q = pushforward_instance(transform, n, d, seed)
    bound = float(max(np.abs(P.features).max(), np.abs(Q.features).max()) * math.sqrt(d)) + 1.0
    space = InstanceSpace(d, bound, 1.0, "lp_product", p)
    joint = wasserstein(p, P, Q, space)[0]
    marginal = feature_wasserstein(P, Q, p, space)
    return abs(joint - marginal)


def shift_trap_scenario(shift: float = 0.5, noise: float = 0.3) -> DriftScenario:
    """Three features uniform on ``[-0.5, 0.5]^3``; ``y = 0.5 x_2 + noise``; drift shifts ``x_1``."""

    def sampler(rng, k):
        return rng.uniform(-0.5, 0.5, size=(k, 3))

    def labels(rng, x):
        return 0.5 * x[:, 1] + rng.uniform(-noise, noise, size=x.shape[0])

    return DriftScenario(Shift((shift, 0.0, 0.0)), sampler, labels, "shift_trap")


def shift_trap_class(space: InstanceSpace, alpha: float = 1.0, start: float = 0.5, width: float = 0.25) -> HypothesisClass:
    """A well-specified squared loss and a ramp on ``x_1`` that is zero on the source support.

    The ramp is the nonrobust member: ordinary ERM on source data always
    prefers it, yet it is costly wherever the drift pushes ``x_1`` past ``start``.
    """
    r0 = space.feature_bound
    quad = make_quadratic_class([linear_predictor([0.0, 0.5, 0.0], 0.0, r0)], space)
    trap = Hypothesis(
        lambda pts: alpha * np.clip((pts.features[:, 0] - start) / width, 0.0, 1.0),
        alpha,
        alpha / width,
        family_tag="ramp",
        name="trap",
    )
    members = (quad[0], trap)
    M = max(quad.upper_bound, alpha)
    L = max(quad.lipschitz_constant, alpha / width)
    return HypothesisClass(members, M, L, quad.anchor_index, EntropyProfile.finite(2, M), "shift_trap")
