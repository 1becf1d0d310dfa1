import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condf.errors import ShapeError, TrainingError
from condf.forest import (
    Forest,
    ForestKind,
    Tree,
    TreeParams,
    forest_predict_dist,
    train_forest,
    train_tree,
    tree_predict_dist,
)

KINDS = list(ForestKind)


def _leaf(counts):
    return Tree(
        np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]),
        np.array([counts]), n_features=1,
    )


def _separable(n=60, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, n)
    x[x == 0] = 0.5
    return x[:, None], np.where(x < 0, 0, 1)


@pytest.mark.parametrize("kind", KINDS)
def test_single_row_is_leaf(kind):
    tree = train_tree([[3.0, 1.0]], [1], kind, 0)
    assert tree.n_nodes == 1 and tree.counts.tolist() == [[0, 1]]


@pytest.mark.parametrize("kind", KINDS)
def test_pure_input_is_single_leaf(kind):
    rng = np.random.default_rng(0)
    tree = train_tree(rng.normal(size=(30, 3)), np.zeros(30, dtype=int), kind, 1)
    assert tree.n_nodes == 1


def test_separable_random_forest_tree_depth_one():
    X, y = _separable()
    tree = train_tree(X, y, ForestKind.RANDOM_FOREST, 0)
    assert tree.depth() == 1
    assert (tree.predict_dist(X).argmax(axis=1) == y).all()


def test_empty_input_and_bad_labels():
    with pytest.raises(TrainingError):
        train_tree(np.zeros((0, 2)), [], "random_forest", 0)
    with pytest.raises(TrainingError):
        train_tree([[1.0]], [3], "random_forest", 0)


@pytest.mark.parametrize("kind", KINDS)
def test_grows_to_purity_on_distinct_rows(kind):
    rng = np.random.default_rng(5)
    X = rng.normal(size=(50, 3))
    y = rng.integers(0, 2, 50)
    tree = train_tree(X, y, kind, 2)
    leaves = tree.counts[tree.is_leaf]
    assert ((leaves > 0).sum(axis=1) == 1).all()


def test_max_depth_and_min_samples_split():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(80, 3))
    y = rng.integers(0, 2, 80)
    assert train_tree(X, y, "completely_random", 0, TreeParams(max_depth=2)).depth() <= 2
    tree = train_tree(X, y, "random_forest", 0, TreeParams(min_samples_split=100))
    assert tree.n_nodes == 1


def test_internal_nodes_route_left_on_less_equal():
    rng = np.random.default_rng(7)
    X = rng.integers(0, 5, (60, 2)).astype(float)
    y = rng.integers(0, 2, 60)
    tree = train_tree(X, y, "random_forest", 3)
    for i in np.flatnonzero(~tree.is_leaf):
        f, t = tree.feature[i], tree.threshold[i]
        # a threshold never coincides with a value on the right side
        assert t >= X[:, f].min() and t < X[:, f].max()


def test_leaf_distribution():
    assert tree_predict_dist(_leaf([3, 1]), [0.0]).tolist() == [0.75, 0.25]
    assert tree_predict_dist(_leaf([5, 0]), [0.0]).tolist() == [1.0, 0.0]
    with pytest.raises(ShapeError):
        tree_predict_dist(_leaf([1, 1]), [0.0, 1.0])


def test_forest_averaging():
    forest = Forest(ForestKind.COMPLETELY_RANDOM, [_leaf([1, 0]), _leaf([0, 1])], 0)
    assert forest_predict_dist(forest, [0.0]).tolist() == [0.5, 0.5]
    agree = Forest(ForestKind.COMPLETELY_RANDOM, [_leaf([2, 0]), _leaf([7, 0])], 0)
    assert forest_predict_dist(agree, [0.0]).tolist() == [1.0, 0.0]


def test_forest_single_tree_on_pure_data():
    f = train_forest(np.ones((5, 2)), np.ones(5, dtype=int), "completely_random", 1, 0)
    assert len(f.trees) == 1 and f.trees[0].n_nodes == 1


def test_forest_needs_a_tree():
    with pytest.raises(TrainingError):
        train_forest([[1.0]], [0], "random_forest", 0, 0)


@pytest.mark.parametrize("kind", KINDS)
def test_forest_determinism(kind):
    rng = np.random.default_rng(8)
    X = rng.normal(size=(40, 4))
    y = rng.integers(0, 2, 40)
    probe = rng.normal(size=(25, 4))
    a = train_forest(X, y, kind, 7, seed=11).predict_dist(probe)
    b = train_forest(X, y, kind, 7, seed=11).predict_dist(probe)
    np.testing.assert_array_equal(a, b)


def test_per_tree_seeds_independent_of_forest_size():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(40, 4))
    y = rng.integers(0, 2, 40)
    small = train_forest(X, y, "random_forest", 3, seed=5)
    big = train_forest(X, y, "random_forest", 6, seed=5)
    for a, b in zip(small.trees, big.trees):
        np.testing.assert_array_equal(a.threshold, b.threshold)


@pytest.mark.parametrize("n_trees", [25, 50])
def test_random_forest_fits_separable_data(n_trees):
    X, y = _separable(120, seed=1)
    f = train_forest(X, y, "random_forest", n_trees, seed=0)
    assert (f.predict_dist(X).argmax(axis=1) == y).mean() >= 0.99


def test_completely_random_constant_label_is_degenerate():
    rng = np.random.default_rng(10)
    X = rng.normal(size=(30, 3))
    for label in (0, 1):
        f = train_forest(X, np.full(30, label), "completely_random", 5, seed=0)
        dist = f.predict_dist(rng.normal(size=(10, 3)))
        expected = np.zeros((10, 2))
        expected[:, label] = 1
        np.testing.assert_array_equal(dist, expected)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(KINDS), st.integers(0, 2**32 - 1), st.integers(2, 40), st.integers(1, 5))
def test_distributions_are_normalized(kind, seed, n, d):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = rng.integers(0, 2, n)
    f = train_forest(X, y, kind, 4, seed)
    dist = f.predict_dist(rng.normal(size=(20, d)) * 3)
    assert (dist >= 0).all()
    np.testing.assert_allclose(dist.sum(axis=1), 1, atol=1e-9)


def test_serialization_round_trip():
    rng = np.random.default_rng(12)
    X = rng.normal(size=(30, 3))
    y = rng.integers(0, 2, 30)
    f = train_forest(X, y, "completely_random", 3, 4)
    g = Forest.from_dict(f.to_dict())
    np.testing.assert_array_equal(f.predict_dist(X), g.predict_dist(X))
