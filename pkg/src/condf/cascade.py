"""Simplified deep forest: a cascade of forest levels without multi-grained scanning.

Each level holds ``M`` forests. A level's class distributions (``2M``
values per row) are appended to the ``K`` selected input features to form
the next level's input. During training the appended distributions are
produced out-of-fold, so no row's augmentation comes from a model that saw
that row's label.
"""

from __future__ import annotations

import gzip
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from . import metrics
from .dataset import ScalerParams, zscore_apply, zscore_fit
from .errors import FoldingError, ShapeError, TrainingError
from .forest import Forest, ForestKind, TreeParams, train_forest
from .selection import FeatureSubset, SearchConfig, con_select, inconsistency_rate

logger = logging.getLogger(__name__)

MODEL_FORMAT = "condf-cascade/1"
METRICS = ("accuracy", "mcc", "f_intrace", "f_outtrace")


@dataclass(frozen=True)
class CascadeConfig:
    n_random_forests: int = 4
    n_completely_random: int = 4
    trees_per_forest: int = 500
    k_folds: int = 3
    max_levels: int = 20
    patience: int = 1
    seed: int = 0
    metric: str = "accuracy"
    bootstrap: bool = True
    max_depth: int | None = None
    select_features: bool = True
    search: SearchConfig = field(default_factory=SearchConfig)
    n_jobs: int = 1

    def __post_init__(self):
        if self.n_random_forests < 0 or self.n_completely_random < 0 or self.n_forests < 1:
            raise ValueError("need at least one forest per level")
        if self.trees_per_forest < 1:
            raise ValueError("trees_per_forest must be >= 1")
        if self.k_folds < 2:
            raise ValueError("k_folds must be >= 2")
        if self.max_levels < 1 or self.patience < 1:
            raise ValueError("max_levels and patience must be >= 1")
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        if isinstance(self.search, dict):
            object.__setattr__(self, "search", SearchConfig(**self.search))

    @property
    def n_forests(self):
        return self.n_random_forests + self.n_completely_random

    def kinds(self):
        return [ForestKind.RANDOM_FOREST] * self.n_random_forests + [
            ForestKind.COMPLETELY_RANDOM
        ] * self.n_completely_random

    def tree_params(self):
        return TreeParams(max_depth=self.max_depth)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class CascadeLevel:
    forests: list
    # fold index of every training row and the rows each fold-model was fit on
    fold_of: np.ndarray = field(default=None, repr=False)
    fold_train_rows: list = field(default=None, repr=False)

    def predict_dists(self, X):
        return [f.predict_dist(X) for f in self.forests]


@dataclass
class CascadeModel:
    scaler: ScalerParams
    subset: FeatureSubset
    levels: list
    cv_scores: list
    chosen_depth: int
    config: CascadeConfig = field(default_factory=CascadeConfig)
    levels_trained: int = 0

    @property
    def n_inputs(self):
        return len(self.subset.indices)


def forest_seed(seed, level_index, slot, fold):
    """Seed of one forest; ``fold == k_folds`` denotes the full-data forest."""
    ss = np.random.SeedSequence(seed, spawn_key=(level_index, slot, fold))
    return int(ss.generate_state(1, np.uint64)[0])


def fold_seed(seed, level_index):
    ss = np.random.SeedSequence(seed, spawn_key=(level_index,))
    return int(ss.generate_state(1, np.uint64)[0])


def stratified_folds(y, k, seed):
    """Assign each row to one of ``k`` folds, class by class."""
    y = np.asarray(y)
    if y.shape[0] < k:
        raise FoldingError(f"{y.shape[0]} rows cannot fill {k} folds")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(y.shape[0], dtype=np.int64)
    offset = 0
    for c in (0, 1):
        rows = np.flatnonzero(y == c)
        rows = rows[rng.permutation(rows.size)]
        # continue the round-robin across classes so fold sizes stay balanced
        fold_of[rows] = (np.arange(rows.size) + offset) % k
        offset += rows.size
    for f in range(k):
        present = np.unique(y[fold_of != f])
        if present.size < 2:
            raise FoldingError(f"training part of fold {f} is missing a class")
    return fold_of


def _fit_slot(X, y, rows, kind, config, seed, predict_rows):
    forest = train_forest(
        X[rows], y[rows], kind, config.trees_per_forest, seed,
        params=config.tree_params(), bootstrap=config.bootstrap,
    )
    if predict_rows is None:
        return forest
    return forest.predict_dist(X[predict_rows])


def _run(tasks, n_jobs):
    if n_jobs == 1:
        return [fn(*args) for fn, *args in tasks]
    return Parallel(n_jobs=n_jobs)(delayed(fn)(*args) for fn, *args in tasks)


def score_predictions(y_true, proba, metric="accuracy"):
    pred = predict_labels(proba)
    if metric == "accuracy":
        return float(np.mean(pred == np.asarray(y_true)))
    counts = metrics.confusion(y_true, pred)
    return float(getattr(metrics, metric)(counts))


def predict_labels(proba):
    """InTrace (0) iff P(InTrace) > 0.5; an exact tie goes to OutTrace (1)."""
    proba = np.asarray(proba)
    return np.where(proba[:, 0] > 0.5, 0, 1).astype(np.int64)


def cross_fit_level(X_in, y, config, level_index):
    """Train one cascade level.

    Returns ``(level, augmented, cv_score)`` where ``augmented`` is the
    N x 2M matrix of out-of-fold class distributions and ``cv_score`` the
    configured metric of their average against ``y``.
    """
    X_in = np.asarray(X_in, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X_in.shape[0] != y.shape[0]:
        raise ShapeError(f"{X_in.shape[0]} rows but {y.shape[0]} labels")
    k = config.k_folds
    fold_of = stratified_folds(y, k, fold_seed(config.seed, level_index))
    train_rows = [np.flatnonzero(fold_of != f) for f in range(k)]
    test_rows = [np.flatnonzero(fold_of == f) for f in range(k)]
    all_rows = np.arange(y.shape[0])

    kinds = config.kinds()
    tasks = []
    for slot, kind in enumerate(kinds):
        for f in range(k):
            seed = forest_seed(config.seed, level_index, slot, f)
            tasks.append((_fit_slot, X_in, y, train_rows[f], kind, config, seed, test_rows[f]))
        seed = forest_seed(config.seed, level_index, slot, k)
        tasks.append((_fit_slot, X_in, y, all_rows, kind, config, seed, None))
    results = _run(tasks, config.n_jobs)

    M = len(kinds)
    augmented = np.empty((y.shape[0], 2 * M))
    forests = []
    it = iter(results)
    for slot in range(M):
        for f in range(k):
            augmented[test_rows[f], 2 * slot: 2 * slot + 2] = next(it)
        forests.append(next(it))

    mean_dist = augmented.reshape(y.shape[0], M, 2).mean(axis=1)
    cv_score = score_predictions(y, mean_dist, config.metric)
    level = CascadeLevel(forests, fold_of, train_rows)
    return level, augmented, cv_score


def select_subset(train_std, config):
    if config.select_features:
        return con_select(train_std, config.search)
    all_idx = tuple(range(train_std.n_features))
    return FeatureSubset(all_idx, inconsistency_rate(train_std, all_idx), False, train_std.feature_names)


def train_cascade(train, config=None):
    """Standardize, select features, then grow levels until the score stalls.

    Growth stops after ``config.patience`` consecutive levels that fail to
    beat the best cross-validated score, or at ``config.max_levels``. The
    returned model keeps levels up to the best-scoring one (earliest on ties).
    """
    config = config or CascadeConfig()
    if train.n_rows == 0:
        raise TrainingError("training set is empty")
    if (train.class_counts() == 0).any():
        raise TrainingError("training set must contain both InTrace and OutTrace instances")

    scaler = zscore_fit(train)
    train_std = zscore_apply(scaler, train)
    subset = select_subset(train_std, config)
    base = train_std.X[:, list(subset.indices)]
    y = train.y
    logger.info("%s: %d of %d features selected", train.project_name, len(subset), train.n_features)

    levels, scores = [], []
    best, stale = -np.inf, 0
    X_in = base
    for level_index in range(config.max_levels):
        level, augmented, score = cross_fit_level(X_in, y, config, level_index)
        levels.append(level)
        scores.append(score)
        logger.debug("level %d: cv %s = %.4f", level_index + 1, config.metric, score)
        if score > best:
            best, stale = score, 0
        else:
            stale += 1
            if stale >= config.patience:
                break
        X_in = np.hstack([base, augmented])

    chosen = int(np.argmax(scores)) + 1
    return CascadeModel(
        scaler=scaler,
        subset=subset,
        levels=levels[:chosen],
        cv_scores=scores[:chosen],
        chosen_depth=chosen,
        config=config,
        levels_trained=len(levels),
    )


def cascade_predict_proba(model, data):
    std = zscore_apply(model.scaler, data)
    base = std.X[:, list(model.subset.indices)]
    X_in = base
    dists = None
    for depth, level in enumerate(model.levels[: model.chosen_depth], start=1):
        dists = level.predict_dists(X_in)
        if depth < model.chosen_depth:
            X_in = np.hstack([base, *dists])
    return np.mean(dists, axis=0)


def cascade_predict(model, data):
    """Return ``(labels, probabilities)``; labels are 0 = InTrace, 1 = OutTrace."""
    proba = cascade_predict_proba(model, data)
    return predict_labels(proba), proba


class ConDF:
    """Estimator-style wrapper around :func:`train_cascade`."""

    def __init__(self, config=None, **overrides):
        config = config or CascadeConfig()
        self.config = replace(config, **overrides) if overrides else config
        self.model_ = None

    def fit(self, train):
        self.model_ = train_cascade(train, self.config)
        return self

    def predict_proba(self, data):
        return cascade_predict_proba(self._fitted(), data)

    def predict(self, data):
        return predict_labels(self.predict_proba(data))

    def _fitted(self):
        if self.model_ is None:
            raise TrainingError("model is not fitted")
        return self.model_


def model_to_dict(model):
    return {
        "format": MODEL_FORMAT,
        "config": model.config.to_dict(),
        "scaler": model.scaler.to_dict(),
        "subset": model.subset.to_dict(),
        "chosen_depth": model.chosen_depth,
        "cv_scores": list(model.cv_scores),
        "levels_trained": model.levels_trained,
        "levels": [[f.to_dict() for f in level.forests] for level in model.levels],
    }


def model_from_dict(d):
    if d.get("format") != MODEL_FORMAT:
        raise ValueError(f"unsupported model format {d.get('format')!r}")
    return CascadeModel(
        scaler=ScalerParams.from_dict(d["scaler"]),
        subset=FeatureSubset.from_dict(d["subset"]),
        levels=[CascadeLevel([Forest.from_dict(f) for f in lv]) for lv in d["levels"]],
        cv_scores=list(d["cv_scores"]),
        chosen_depth=int(d["chosen_depth"]),
        config=CascadeConfig.from_dict(d["config"]),
        levels_trained=int(d.get("levels_trained", len(d["levels"]))),
    )


def _open(path, mode):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, mode + "t", encoding="utf-8")
    return path.open(mode, encoding="utf-8")


def save_model(model, path):
    """Write the model as JSON (gzip-compressed when ``path`` ends in .gz)."""
    with _open(path, "w") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path):
    with _open(path, "r") as fh:
        return model_from_dict(json.load(fh))
