"""Consistency-based feature subset selection (Con).

The inconsistency of a feature subset groups rows by their value pattern on
that subset; every row outside its pattern's majority class counts as
inconsistent. Con searches for the smallest subset whose inconsistency
equals that of the full feature set.
"""

from __future__ import annotations

import heapq
import json
import logging
from dataclasses import dataclass

import numpy as np

from .errors import MeasureError, SelectionError

logger = logging.getLogger(__name__)


def _check_subset(subset, n_features):
    idx = np.asarray(list(subset), dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= n_features):
        raise IndexError(f"feature index out of range [0, {n_features}): {idx.tolist()}")
    return idx


def build_pattern_table(data, subset):
    """Map each value pattern on ``subset`` to its ``(n_InTrace, n_OutTrace)``.

    The empty subset yields a single pattern ``()`` covering every row.
    """
    idx = _check_subset(subset, data.n_features)
    table = {}
    cols = data.X[:, idx] + 0.0
    for row, label in zip(cols, data.y):
        key = tuple(row.tolist())
        counts = table.setdefault(key, [0, 0])
        counts[label] += 1
    return {k: tuple(v) for k, v in table.items()}


def _pattern_counts(X, y, idx):
    """Per-pattern class counts as an (n_patterns, 2) array."""
    n = X.shape[0]
    if idx.size == 0:
        return np.bincount(y, minlength=2)[None, :]
    cols = np.ascontiguousarray(X[:, idx])
    # hash whole rows as raw bytes; values are pre-normalized so -0.0 == 0.0
    keys = cols.view(np.dtype((np.void, cols.dtype.itemsize * cols.shape[1]))).ravel()
    _, inverse = np.unique(keys, return_inverse=True)
    inverse = inverse.reshape(n)
    return np.stack(
        [np.bincount(inverse[y == c], minlength=inverse.max() + 1) for c in (0, 1)], axis=1
    )


def _inconsistency(X, y, idx):
    counts = _pattern_counts(X, y, idx)
    return float((counts.sum(axis=1) - counts.max(axis=1)).sum() / X.shape[0])


def inconsistency_rate(data, subset):
    """Fraction of rows not in the majority class of their value pattern."""
    if data.n_rows == 0:
        raise MeasureError("inconsistency is undefined for an empty dataset")
    idx = _check_subset(subset, data.n_features)
    return _inconsistency(data.X + 0.0, data.y, idx)


def consistency(data, subset):
    return 1.0 - inconsistency_rate(data, subset)


@dataclass(frozen=True)
class SearchConfig:
    stale_limit: int = 5
    max_subset_size: int | None = None
    max_expansions: int | None = None
    prune: bool = True


@dataclass(frozen=True)
class FeatureSubset:
    indices: tuple
    inconsistency: float
    warning: bool = False
    feature_names: tuple = ()

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if list(idx) != sorted(set(idx)):
            raise ValueError(f"subset indices must be unique and ascending: {idx}")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    def __len__(self):
        return len(self.indices)

    def to_dict(self):
        return {
            "indices": list(self.indices),
            "feature_names": list(self.feature_names),
            "inconsistency": self.inconsistency,
            "warning": self.warning,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["indices"]), float(d["inconsistency"]), bool(d.get("warning", False)),
                   tuple(d.get("feature_names", ())))


def con_select(data, search=None):
    """Best-first forward search for a minimal fully-consistent subset.

    Open subsets are expanded in order of (inconsistency, size, indices).
    Search stops at the first expansion producing a subset whose
    inconsistency equals the full set's, or after ``stale_limit``
    consecutive expansions that do not improve the best subset seen. A
    matching subset is then pruned by backward elimination when
    ``search.prune`` is set. When nothing matches, the full feature set is
    returned with ``warning=True``.
    """
    search = search or SearchConfig()
    if data.n_rows == 0:
        raise SelectionError("cannot select features on an empty dataset")
    if data.n_features == 0:
        raise SelectionError("dataset has no features")
    X = data.X + 0.0
    y = data.y
    d = data.n_features
    max_size = d if search.max_subset_size is None else min(search.max_subset_size, d)

    def score(subset):
        return _inconsistency(X, y, np.asarray(subset, dtype=np.int64))

    def result(subset, inc, warning):
        subset = tuple(sorted(subset))
        names = tuple(data.feature_names[i] for i in subset)
        return FeatureSubset(subset, inc, warning, names)

    target = score(tuple(range(d)))
    empty_inc = score(())
    if empty_inc == target:
        logger.warning("empty subset is already as consistent as the full set (%s)", data.project_name)
        return result((), empty_inc, True)

    visited = {()}
    open_list = [(empty_inc, 0, ())]
    best = (empty_inc, 0, ())
    stale = 0
    expansions = 0
    found = None
    while open_list and found is None:
        if search.max_expansions is not None and expansions >= search.max_expansions:
            break
        _, size, subset = heapq.heappop(open_list)
        expansions += 1
        if size >= max_size:
            continue
        improved = False
        matches = []
        for f in range(d):
            if f in subset:
                continue
            child = tuple(sorted(subset + (f,)))
            if child in visited:
                continue
            visited.add(child)
            inc = score(child)
            entry = (inc, len(child), child)
            heapq.heappush(open_list, entry)
            if entry < best:
                best = entry
                improved = True
            if inc == target:
                matches.append(child)
        if matches:
            found = min(matches)
            break
        stale = 0 if improved else stale + 1
        if stale >= search.stale_limit:
            break

    if found is None:
        logger.warning(
            "no subset matched full-set inconsistency %.6f after %d expansions; using all features",
            target, expansions,
        )
        return result(tuple(range(d)), target, True)

    if search.prune:
        found = _backward_prune(found, target, score)
    return result(found, target, False)


def _backward_prune(subset, target, score):
    # drop features whose removal keeps full-set inconsistency, highest index first
    current = list(subset)
    changed = True
    while changed and current:
        changed = False
        for f in sorted(current, reverse=True):
            trial = tuple(x for x in current if x != f)
            if score(trial) == target:
                current = list(trial)
                changed = True
                break
    return tuple(current)


def apply_subset(data, subset):
    """Restrict ``data`` to the subset's columns, in subset order."""
    indices = subset.indices if isinstance(subset, FeatureSubset) else tuple(subset)
    idx = _check_subset(indices, data.n_features)
    names = tuple(data.feature_names[i] for i in idx)
    return data.with_X(data.X[:, idx], names)


__all__ = [
    "FeatureSubset",
    "SearchConfig",
    "apply_subset",
    "build_pattern_table",
    "con_select",
    "consistency",
    "inconsistency_rate",
]
