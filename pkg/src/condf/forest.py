"""Decision trees, random forests and completely-random tree forests.

Trees are stored as flat node arrays (the layout scikit-learn uses):
node ``i`` is a leaf when ``left[i] == -1``; otherwise rows with
``x[feature[i]] <= threshold[i]`` go to ``left[i]`` and the rest to
``right[i]``. ``counts[i]`` holds the training class counts reaching the
node, indexed 0 = InTrace, 1 = OutTrace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ShapeError, TrainingError

N_CLASSES = 2


class ForestKind(str, Enum):
    RANDOM_FOREST = "random_forest"
    COMPLETELY_RANDOM = "completely_random"


@dataclass(frozen=True)
class TreeParams:
    min_samples_split: int = 2
    max_depth: int | None = None
    max_features: int | None = None  # None -> ceil(sqrt(d)) for random-forest trees


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray
    n_features: int

    @property
    def n_nodes(self):
        return self.feature.shape[0]

    @property
    def is_leaf(self):
        return self.left < 0

    def depth(self):
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.left[i] >= 0:
                depths[self.left[i]] = depths[self.right[i]] = depths[i] + 1
        return int(depths.max())

    def apply(self, X):
        """Leaf index reached by each row of ``X``."""
        X = _check_X(X, self.n_features)
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = self.left[node] >= 0
        while active.any():
            r = rows[active]
            n = node[r]
            go_left = X[r, self.feature[n]] <= self.threshold[n]
            node[r] = np.where(go_left, self.left[n], self.right[n])
            active[r] = self.left[node[r]] >= 0
        return node

    def predict_dist(self, X):
        leaf_counts = self.counts[self.apply(X)].astype(np.float64)
        return leaf_counts / leaf_counts.sum(axis=1, keepdims=True)

    def to_dict(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "counts": self.counts.tolist(),
            "n_features": self.n_features,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.array(d["feature"], dtype=np.int64),
            np.array(d["threshold"], dtype=np.float64),
            np.array(d["left"], dtype=np.int64),
            np.array(d["right"], dtype=np.int64),
            np.array(d["counts"], dtype=np.int64).reshape(-1, N_CLASSES),
            int(d["n_features"]),
        )


def _check_X(X, n_features):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != n_features:
        raise ShapeError(f"expected {n_features} features, got array of shape {X.shape}")
    return X


def _check_training_input(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2:
        raise ShapeError(f"X must be 2-D, got shape {X.shape}")
    if X.shape[0] == 0:
        raise TrainingError("cannot train on an empty dataset")
    if X.shape[0] != y.shape[0]:
        raise ShapeError(f"{X.shape[0]} rows but {y.shape[0]} labels")
    if not np.isin(y, (0, 1)).all():
        raise TrainingError("labels must be binary (0/1)")
    return X, y


def _best_gini_split(Xn, yn, candidates):
    """Best (feature, threshold) over ``candidates`` (ascending order).

    Minimizing weighted Gini impurity is equivalent to maximizing
    ``sum_c nL_c^2 / nL + sum_c nR_c^2 / nR``; ties keep the first feature
    and the lowest threshold. Every candidate must be non-constant.
    """
    n = yn.shape[0]
    V = Xn[:, candidates]
    order = np.argsort(V, axis=0, kind="stable")
    vs = np.take_along_axis(V, order, axis=0)
    is0 = (yn[order] == 0).astype(np.float64)
    l0 = np.cumsum(is0, axis=0)[:-1]
    n_left = np.arange(1, n, dtype=np.float64)[:, None]
    n_right = n - n_left
    l1 = n_left - l0
    r0 = l0[-1:] + is0[-1:] - l0
    r1 = n_right - r0
    purity = (l0 * l0 + l1 * l1) / n_left + (r0 * r0 + r1 * r1) / n_right
    purity[vs[1:] <= vs[:-1]] = -np.inf
    pos = np.argmax(purity, axis=0)
    col = int(np.argmax(purity[pos, np.arange(len(candidates))]))
    i = pos[col]
    lo, hi = vs[i, col], vs[i + 1, col]
    t = 0.5 * (lo + hi)
    # midpoint of two adjacent floats can round up to the upper value
    if t >= hi:
        t = lo
    return int(candidates[col]), float(t)


def train_tree(X, y, kind, rng_seed, params=None):
    """Grow one tree to purity (or until ``params`` stop it).

    Random-forest trees pick the Gini-optimal midpoint split among
    ``ceil(sqrt(d))`` sampled features; features constant at the node are
    skipped without counting towards that budget. Completely-random trees
    split a uniformly chosen non-constant feature at a threshold drawn
    uniformly between its node-local min and max.
    """
    X, y = _check_training_input(X, y)
    kind = ForestKind(kind)
    params = params or TreeParams()
    rng = np.random.default_rng(rng_seed)
    n, d = X.shape
    if kind is ForestKind.RANDOM_FOREST:
        mtry = params.max_features or max(1, math.ceil(math.sqrt(d)))
    else:
        mtry = 1

    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(np.bincount(y[idx], minlength=N_CLASSES))
        return len(feature) - 1

    stack = [(new_node(np.arange(n)), np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        c = counts[node]
        if (
            (c > 0).sum() < 2
            or idx.shape[0] < params.min_samples_split
            or (params.max_depth is not None and depth >= params.max_depth)
            or d == 0
        ):
            continue
        Xn = X[idx]
        nonconst = np.flatnonzero(Xn.max(axis=0) > Xn.min(axis=0))
        if nonconst.size == 0:
            continue
        if kind is ForestKind.RANDOM_FOREST:
            mask = np.zeros(d, dtype=bool)
            mask[nonconst] = True
            perm = rng.permutation(d)
            usable = perm[mask[perm]][:mtry]
            f, t = _best_gini_split(Xn, y[idx], np.sort(usable))
        else:
            f = int(nonconst[rng.integers(nonconst.size)])
            lo, hi = Xn[:, f].min(), Xn[:, f].max()
            t = rng.uniform(lo, hi)
        go_left = Xn[:, f] <= t
        li, ri = idx[go_left], idx[~go_left]
        if li.size == 0 or ri.size == 0:
            continue
        feature[node] = int(f)
        threshold[node] = float(t)
        lnode = new_node(li)
        rnode = new_node(ri)
        left[node], right[node] = lnode, rnode
        stack.append((rnode, ri, depth + 1))
        stack.append((lnode, li, depth + 1))

    return Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(counts, dtype=np.int64).reshape(-1, N_CLASSES),
        d,
    )


def tree_predict_dist(tree, x):
    """Normalized leaf class counts; ``x`` may be one vector or a matrix."""
    x = np.asarray(x, dtype=np.float64)
    dist = tree.predict_dist(x)
    return dist[0] if x.ndim == 1 else dist


def tree_seeds(seed, n_trees):
    """Per-tree seeds, a pure function of ``(seed, tree_index)``."""
    return [
        int(np.random.SeedSequence(seed, spawn_key=(i,)).generate_state(1, np.uint64)[0])
        for i in range(n_trees)
    ]


@dataclass
class Forest:
    kind: ForestKind
    trees: list
    seed: int
    n_classes: int = N_CLASSES
    bootstrap: bool = True

    def predict_dist(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        total = np.zeros((X.shape[0], N_CLASSES))
        for tree in self.trees:
            total += tree.predict_dist(X)
        return total / len(self.trees)

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "seed": self.seed,
            "bootstrap": self.bootstrap,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            ForestKind(d["kind"]),
            [Tree.from_dict(t) for t in d["trees"]],
            int(d["seed"]),
            bootstrap=bool(d.get("bootstrap", True)),
        )


def train_forest(X, y, kind, n_trees, seed, params=None, bootstrap=True):
    """Train ``n_trees`` trees.

    Random-forest trees are fit on bootstrap resamples of size N (when
    ``bootstrap`` is set); completely-random trees always see the full data.
    """
    if n_trees < 1:
        raise TrainingError("n_trees must be >= 1")
    X, y = _check_training_input(X, y)
    kind = ForestKind(kind)
    trees = []
    n = X.shape[0]
    for s in tree_seeds(seed, n_trees):
        if kind is ForestKind.RANDOM_FOREST and bootstrap:
            rng = np.random.default_rng(s)
            rows = rng.integers(0, n, size=n)
            # derive the tree's own stream after the bootstrap draw
            trees.append(train_tree(X[rows], y[rows], kind, rng.integers(2**63), params))
        else:
            trees.append(train_tree(X, y, kind, s, params))
    return Forest(kind, trees, int(seed), bootstrap=bootstrap and kind is ForestKind.RANDOM_FOREST)


def forest_predict_dist(forest, x):
    """Mean of the trees' class distributions."""
    x = np.asarray(x, dtype=np.float64)
    dist = forest.predict_dist(x)
    return dist[0] if x.ndim == 1 else dist
