import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wasslearn.spaces import (
    AmbiguityBall,
    DataError,
    EmpiricalDistribution,
    InstanceSpace,
    Point,
    PointSet,
    StructuralError,
    distance,
    load_dataset,
    sample_uniform_interval,
    save_dataset,
    uniform_grid,
)


def test_euclidean_product_examples():
    space = InstanceSpace(1, 5.0, 5.0)
    a = Point((0.0,), 0.0)
    assert distance(space, a, a) == 0.0
    assert distance(space, a, Point((3.0,), 4.0)) == pytest.approx(5.0)


def test_lp_product_l1():
    space = InstanceSpace(2, 2.0, 2.0, "lp_product", 1.0)
    assert distance(space, Point((1.0, 0.0), 2.0), Point((0.0, 0.0), 0.0)) == pytest.approx(3.0)


def test_hinge_product_label_flip():
    space = InstanceSpace(1, 1.0, 1.0, "hinge_product", 2.0)
    assert distance(space, Point((0.2,), 1.0), Point((0.5,), -1.0)) == pytest.approx(1.3)


coords = st.floats(-1, 1, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(coords, coords, coords), min_size=3, max_size=3),
       st.sampled_from([("euclidean_product", 2.0), ("lp_product", 1.0), ("lp_product", 2.0)]))
def test_metric_axioms(rows, kind):
    space = InstanceSpace(2, 2.0, 1.0, kind[0], kind[1])
    arr = np.array(rows)
    pts = PointSet(arr[:, :2], arr[:, 2])
    D = space.pairwise(pts, pts)
    assert np.allclose(np.diag(D), 0.0)
    assert np.allclose(D, D.T)
    assert np.all(D >= 0)
    for i in range(3):
        for j in range(3):
            for k in range(3):
                assert D[i, k] <= D[i, j] + D[j, k] + 1e-12


def test_load_dataset_uniform_weights(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("x,y\n0.1,0.2\n0.3,-0.1\n0.0,0.0\n")
    P = load_dataset(path, "labeled", InstanceSpace(1, 1.0, 1.0))
    assert np.allclose(P.weights, 1 / 3)


def test_load_dataset_errors(tmp_path):
    empty = tmp_path / "e.csv"
    empty.write_text("")
    with pytest.raises(DataError, match="empty dataset"):
        load_dataset(empty, "labeled", InstanceSpace(1))
    bad = tmp_path / "b.csv"
    bad.write_text("0.1,0.2\n0.3,5.0\n")
    with pytest.raises(DataError, match="row 2"):
        load_dataset(bad, "labeled", InstanceSpace(1, 1.0, 1.0))


def test_save_load_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    P = EmpiricalDistribution.uniform(PointSet(rng.uniform(-0.5, 0.5, (4, 2)), rng.uniform(-1, 1, 4)))
    save_dataset(tmp_path / "r.csv", P)
    Q = load_dataset(tmp_path / "r.csv", "labeled", InstanceSpace(2, 1.0, 1.0))
    assert np.array_equal(P.features, Q.features)
    assert np.array_equal(P.labels, Q.labels)


def test_sample_uniform_interval():
    a, b = sample_uniform_interval(5, 7), sample_uniform_interval(5, 7)
    assert np.array_equal(a.features, b.features)
    big = sample_uniform_interval(1000, 3)
    assert 0.45 <= big.features.mean() <= 0.55
    one = sample_uniform_interval(1, 0)
    assert len(one) == 1 and one.weights[0] == 1.0


def test_uniform_grid_midpoints():
    g = uniform_grid(4)
    assert np.allclose(g.features[:, 0], [0.125, 0.375, 0.625, 0.875])


def test_distribution_validation():
    with pytest.raises(ValueError):
        EmpiricalDistribution(PointSet(np.zeros((2, 1))), [0.7, 0.7])
    with pytest.raises(StructuralError):
        PointSet(np.zeros((2, 1)), np.zeros(3))


def test_ball():
    assert AmbiguityBall(2.0, 0.5).budget == pytest.approx(0.25)
    with pytest.raises(ValueError):
        AmbiguityBall(0.5, 0.1)
    with pytest.raises(ValueError):
        AmbiguityBall(1.0, -0.1)


def test_unbounded_space_rejected():
    with pytest.raises(ValueError):
        InstanceSpace(1, float("inf"), 1.0)
