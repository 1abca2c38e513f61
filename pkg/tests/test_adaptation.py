import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wasslearn import adaptation as ad
from wasslearn.spaces import EmpiricalDistribution, InstanceSpace, PointSet


def _scenario(T, d=1):
    return ad.DriftScenario(T, lambda rng, k: rng.uniform(-0.5, 0.5, (k, d)),
                            lambda rng, x: 0.5 * x[:, 0])


def test_identity_drift_has_same_law():
    data = ad.generate_drift(_scenario(ad.Transform()), 50, 50, 1)
    assert data.source.features.shape == (50, 1)
    again = ad.generate_drift(_scenario(ad.Transform()), 50, 50, 1)
    assert np.array_equal(data.target_features.features, again.target_features.features)


def test_shift_distance_approaches_offset():
    data = ad.generate_drift(_scenario(ad.Shift((0.3,))), 2000, 2000, 4)
    space = InstanceSpace(1, 1.0, 1.0)
    w = ad.feature_wasserstein(data.source, data.target_features, 1.0, space)
    assert w == pytest.approx(0.3, rel=0.05)


def test_feature_wasserstein_small_cases():
    space = InstanceSpace(2, 2.0, 1.0, "lp_product", 2.0)
    P = EmpiricalDistribution.uniform(PointSet([[0.0, 0.0]], [0.1]))
    Q = EmpiricalDistribution.uniform(PointSet([[0.3, 0.4]], [0.9]))
    assert ad.feature_wasserstein(P, P, 1.0, space) == 0.0
    assert ad.feature_wasserstein(P, Q, 1.0, space) == pytest.approx(0.5)
    rng = np.random.default_rng(2)
    for _ in range(10):
        a, b = rng.uniform(-1, 1, (3, 2)), rng.uniform(-1, 1, (3, 2))
        P, Q = (EmpiricalDistribution.uniform(PointSet(v)) for v in (a, b))
        D = np.linalg.norm(a[:, None] - b[None], axis=2) ** 2
        best = min(sum(D[i, s[i]] for i in range(3)) / 3 for s in itertools.permutations(range(3)))
        assert ad.feature_wasserstein(P, Q, 2.0, space) == pytest.approx(math.sqrt(best), abs=1e-12)


def test_radius_rule():
    # log(4 C_a / delta) = 1 with delta inside (0, 1)
    assert ad.adaptation_radius(0.2, 1, 1, 1.0, 3, 0.5, math.e / 8, 1.0) == pytest.approx(2.2)
    big = ad.adaptation_radius(0.2, 10**12, 10**12, 1.0, 3, 0.05)
    assert big == pytest.approx(0.2, abs=1e-3)
    values = [ad.adaptation_radius(0.2, n, 50, 1.0, 3, 0.05) for n in (1, 10, 100, 1000)]
    assert np.all(np.diff(values) < 0)
    with pytest.raises(ValueError):
        ad.adaptation_radius(0.2, 10, 10, 1.0, 3, 1.5)
    with pytest.raises(ValueError):
        ad.adaptation_radius(0.2, 10, 10, 1.0, 3, 0.1, C_a=0.0)
    with pytest.warns(UserWarning):
        ad.adaptation_radius(0.2, 10, 10, 1.0, 2, 0.1)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_transform_inverse(seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, (5, 2))
    transforms = [
        ad.Shift(tuple(rng.uniform(-1, 1, 2))),
        ad.CubicMonotone(tuple(rng.uniform(0.2, 2, 2)), tuple(rng.uniform(0, 1, 2)), tuple(rng.uniform(-1, 1, 2))),
        ad.Affine(((1.0, 0.3), (0.0, 0.8)), tuple(rng.uniform(-1, 1, 2))),
    ]
    for T in transforms:
        assert np.allclose(T.inverse(T.forward(x)), x, atol=1e-10)


def test_pushforward_examples():
    assert ad.verify_pushforward_identity(ad.Transform(), 5, 1.0, 0, d=1) <= 1e-9
    assert ad.verify_pushforward_identity(ad.Shift((0.4,)), 5, 1.0, 1, d=1) <= 1e-9
    T = ad.CubicMonotone((1.0, 0.5), (0.3, 0.8), (0.0, -0.2))
    assert ad.verify_pushforward_identity(T, 8, 2.0, 2) <= 1e-9


def test_triangle_assembly():
    """Proxy population distance is at most the sum of the three sample distances."""
    space = InstanceSpace(2, 2.0, 1.0, "lp_product", 1.0)
    scenario = _scenario(ad.Shift((0.3, 0.0)), d=2)
    for seed in range(5):
        small = ad.generate_drift(scenario, 15, 15, seed)
        large = ad.generate_drift(scenario, 60, 60, 100 + seed)
        mu, nu = large.source, large.target_features
        lhs = ad.feature_wasserstein(mu, nu, 1.0, space)
        rhs = (ad.feature_wasserstein(mu, small.source, 1.0, space)
               + ad.feature_wasserstein(small.source, small.target_features, 1.0, space)
               + ad.feature_wasserstein(nu, small.target_features, 1.0, space))
        assert lhs <= rhs + 1e-7


def test_shift_trap_run():
    space = InstanceSpace(3, 1.5, 0.6, "lp_product", 1.0)
    F = ad.shift_trap_class(space)
    run = ad.run_adaptation(F, ad.generate_drift(ad.shift_trap_scenario(), 30, 30, 0, 100), space, 1.0, 0.1)
    assert run.baseline.selected.name == "trap"
    assert run.result.selected.name != "trap"
    assert run.target_risk < run.baseline_target_risk
    assert run.realized_excess >= 0
    assert run.bound.vacuous
    assert "dimension_not_above_2p" not in run.flags
    d = run.to_dict()
    assert d["concentration_constants"]["C_a"] == ad.DEFAULT_CA


def test_zero_drift_keeps_good_predictor():
    space = InstanceSpace(3, 1.5, 0.6, "lp_product", 1.0)
    F = ad.shift_trap_class(space)
    run = ad.run_adaptation(F, ad.generate_drift(ad.shift_trap_scenario(shift=0.0), 30, 30, 5, 100), space, 1.0, 0.1)
    assert run.target_risk <= run.best_target_risk + 0.05
