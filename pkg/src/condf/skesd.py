"""Scott-Knott Effect Size Difference ranking.

Methods are clustered by Scott-Knott's recursive bipartition of their sorted
means (a split is kept when the lambda statistic exceeds the chi-square
critical value), then adjacent clusters whose pooled observations differ by a
negligible Cohen's d are merged. Rank 1 is the best (highest-mean) group.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2

from .errors import RankingInputError, TransformError

ALPHA = 0.05
NEGLIGIBLE_D = 0.2
TRANSFORMS = ("log", "log_shift", "none")


def log_transform(values):
    """``ln(x + 1)`` for non-negative ``x``."""
    arr = np.asarray(values, dtype=np.float64)
    if (arr < 0).any():
        raise TransformError("log transform needs non-negative values (shift MCC by +1 first)")
    return np.log1p(arr)


def apply_transform(values, transform):
    if transform == "log":
        return log_transform(values)
    if transform == "log_shift":
        # MCC lives in [-1, 1]; the +1 shift is monotone
        return log_transform(np.asarray(values, dtype=np.float64) + 1.0)
    if transform == "none":
        return np.asarray(values, dtype=np.float64)
    raise ValueError(f"unknown transform {transform!r}; expected one of {TRANSFORMS}")


def cohens_d(a, b):
    """Cohen's d with the pooled (n-1 weighted) sample standard deviation."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValueError("cohens_d needs at least two observations per sample")
    diff = a.mean() - b.mean()
    pooled_var = ((a.size - 1) * a.var(ddof=1) + (b.size - 1) * b.var(ddof=1)) / (a.size + b.size - 2)
    if pooled_var <= 0:
        if diff == 0:
            return 0.0
        return math.copysign(math.inf, diff)
    return float(diff / math.sqrt(pooled_var))


@dataclass(frozen=True)
class ObservationMatrix:
    method_names: tuple
    values: np.ndarray

    def __post_init__(self):
        names = tuple(self.method_names)
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != len(names):
            raise RankingInputError("values must be a (methods x observations) matrix")
        if len(set(names)) != len(names):
            raise RankingInputError("method names must be unique")
        if len(names) < 1:
            raise RankingInputError("need at least one method")
        if values.shape[1] < 2:
            raise RankingInputError("each method needs at least two observations")
        if not np.isfinite(values).all():
            raise RankingInputError("observations must be finite")
        object.__setattr__(self, "method_names", names)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_dict(cls, mapping):
        names = list(mapping)
        return cls(tuple(names), np.array([list(mapping[n]) for n in names], dtype=np.float64))


@dataclass
class RankingResult:
    rank_of: dict
    groups: list
    group_means: list = field(default_factory=list)

    def to_dict(self):
        return {
            "groups": [
                {"rank": i + 1, "methods": list(g), "mean": m}
                for i, (g, m) in enumerate(zip(self.groups, self.group_means))
            ],
            "rank_of": dict(self.rank_of),
        }

    @classmethod
    def from_dict(cls, d):
        groups = [list(g["methods"]) for g in d["groups"]]
        means = [g.get("mean") for g in d["groups"]]
        return cls(dict(d["rank_of"]), groups, means)


def _order_methods(names, values):
    means = values.mean(axis=1)
    # name breaks mean ties so the result does not depend on input order
    return sorted(range(len(names)), key=lambda i: (-means[i], names[i]))


def _error_variance(values):
    """Pooled within-method variance of a method mean and its degrees of freedom."""
    k, n = values.shape
    dof = k * (n - 1)
    mse = ((values - values.mean(axis=1, keepdims=True)) ** 2).sum() / dof
    return mse / n, dof


def sk_lambda(means, s2_mean, dof):
    """Best split of ordered ``means`` and its lambda statistic.

    Returns ``(split, lam)`` where ``split`` is the size of the upper part.
    """
    means = np.asarray(means, dtype=np.float64)
    k = means.size
    total = means.sum()
    best_b, split = -1.0, 1
    for i in range(1, k):
        t1 = means[:i].sum()
        t2 = total - t1
        b = t1 * t1 / i + t2 * t2 / (k - i) - total * total / k
        if b > best_b + 1e-12 * max(1.0, abs(best_b)):
            best_b, split = b, i
    best_b = max(best_b, 0.0)
    sigma2 = (((means - means.mean()) ** 2).sum() + dof * s2_mean) / (k + dof)
    if best_b <= 1e-15 * max(1.0, float((means**2).sum())):
        return split, 0.0
    if sigma2 <= 0:
        return split, math.inf
    return split, math.pi / (2 * (math.pi - 2)) * best_b / sigma2


def sk_critical(k, alpha=ALPHA):
    return float(chi2.ppf(1 - alpha, k / (math.pi - 2)))


def scott_knott_partition(matrix, alpha=ALPHA):
    """Scott-Knott clusters of methods, best (highest mean) cluster first.

    ``matrix`` holds already-transformed observations. Returns a list of
    lists of method names.
    """
    names = matrix.method_names
    values = matrix.values
    order = _order_methods(names, values)
    if len(order) == 1:
        return [[names[order[0]]]]
    means = values.mean(axis=1)
    s2_mean, dof = _error_variance(values)

    def split(members):
        if len(members) < 2:
            return [members]
        cut, lam = sk_lambda(means[members], s2_mean, dof)
        if lam > sk_critical(len(members), alpha):
            return split(members[:cut]) + split(members[cut:])
        return [members]

    return [[names[i] for i in grp] for grp in split(order)]


def merge_negligible(groups, observations, d_threshold=NEGLIGIBLE_D):
    """Merge adjacent groups whose pooled observations have |d| < threshold.

    ``groups`` must be ordered by mean, best first. Merging restarts from the
    top after every merge until no adjacent pair qualifies.
    """
    groups = [list(g) for g in groups]

    def pooled(g):
        return np.concatenate([observations[m] for m in g])

    merged = True
    while merged and len(groups) > 1:
        merged = False
        for i in range(len(groups) - 1):
            if abs(cohens_d(pooled(groups[i]), pooled(groups[i + 1]))) < d_threshold:
                groups[i : i + 2] = [groups[i] + groups[i + 1]]
                merged = True
                break
    return groups


def esd_rank(matrix, alpha=ALPHA, d_threshold=NEGLIGIBLE_D, transform="log"):
    """Rank methods with Scott-Knott ESD.

    ``transform`` is ``"log"`` (ln(x+1), for F-measures), ``"log_shift"``
    (ln(x+2), for MCC) or ``"none"``.
    """
    transformed = ObservationMatrix(matrix.method_names, apply_transform(matrix.values, transform))
    obs = dict(zip(transformed.method_names, transformed.values))
    groups = scott_knott_partition(transformed, alpha)
    groups = merge_negligible(groups, obs, d_threshold)
    # merging keeps mean order, but re-sort defensively by pooled mean
    groups.sort(key=lambda g: -np.concatenate([obs[m] for m in g]).mean())
    means = [float(np.concatenate([obs[m] for m in g]).mean()) for g in groups]
    rank_of = {m: r for r, g in enumerate(groups, start=1) for m in g}
    return RankingResult(rank_of, groups, means)


def two_stage_rank(per_project, alpha=ALPHA, d_threshold=NEGLIGIBLE_D, transform="log"):
    """Rank within each project, then rank the per-project ranks.

    Stage two uses negated ranks (so higher is better) without a transform.
    With a single project the stage-one result is returned.
    """
    per_project = list(per_project)
    if not per_project:
        raise RankingInputError("no projects to rank")
    methods = sorted(per_project[0].method_names)
    for m in per_project[1:]:
        if sorted(m.method_names) != methods:
            raise RankingInputError("every project must contain the same methods")
    stage1 = [esd_rank(m, alpha, d_threshold, transform) for m in per_project]
    if len(stage1) == 1:
        return stage1[0]
    ranks = np.array([[-r.rank_of[m] for r in stage1] for m in methods], dtype=np.float64)
    return esd_rank(ObservationMatrix(tuple(methods), ranks), alpha, d_threshold, transform="none")
