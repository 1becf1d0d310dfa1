"""Independent reference implementations used only by the tests.

These deliberately avoid the package's code paths: plain Python loops,
exhaustive enumeration, and mpmath for the chi-square tail.
"""

import itertools
import math
from collections import Counter, defaultdict

import mpmath


def brute_inconsistency(rows, labels, subset):
    groups = defaultdict(Counter)
    for row, lab in zip(rows, labels):
        groups[tuple(row[i] for i in subset)][lab] += 1
    bad = sum(sum(c.values()) - max(c.values()) for c in groups.values())
    return bad / len(rows)


def minimal_consistent_size(rows, labels, n_features):
    """Smallest subset size whose inconsistency equals the full set's."""
    target = brute_inconsistency(rows, labels, range(n_features))
    for size in range(n_features + 1):
        for combo in itertools.combinations(range(n_features), size):
            if brute_inconsistency(rows, labels, combo) == target:
                return size, combo
    raise AssertionError("unreachable: the full set always matches")


def _mean(xs):
    return math.fsum(xs) / len(xs)


def _sample_var(xs):
    m = _mean(xs)
    return math.fsum((x - m) ** 2 for x in xs) / (len(xs) - 1)


def brute_cohens_d(a, b):
    na, nb = len(a), len(b)
    pooled = ((na - 1) * _sample_var(a) + (nb - 1) * _sample_var(b)) / (na + nb - 2)
    diff = _mean(a) - _mean(b)
    if pooled <= 0:
        return 0.0 if diff == 0 else math.copysign(math.inf, diff)
    return diff / math.sqrt(pooled)


def chi2_sf(x, dof):
    """Upper tail probability of chi-square via the regularized incomplete gamma."""
    if math.isinf(x):
        return 0.0
    return float(mpmath.gammainc(dof / 2.0, x / 2.0, mpmath.inf, regularized=True))


def brute_sk_esd(observations, alpha=0.05, d_threshold=0.2):
    """Scott-Knott ESD grouping by exhaustive split enumeration.

    ``observations`` maps method name to an already-transformed list of
    values (equal lengths). Returns a list of groups (lists of names), best
    group first.
    """
    names = sorted(observations, key=lambda m: (-_mean(observations[m]), m))
    means = {m: _mean(observations[m]) for m in names}
    k_all = len(names)
    n = len(observations[names[0]])
    dof = k_all * (n - 1)
    sse = math.fsum((x - means[m]) ** 2 for m in names for x in observations[m])
    s2_mean = (sse / dof) / n

    def between_ss(parts):
        allm = [means[m] for p in parts for m in p]
        grand = _mean(allm)
        return math.fsum(len(p) * (_mean([means[m] for m in p]) - grand) ** 2 for p in parts)

    def split(seq):
        k = len(seq)
        if k < 2:
            return [seq]
        candidates = [(seq[:i], seq[i:]) for i in range(1, k)]
        scores = [between_ss(c) for c in candidates]
        best = max(scores)
        if best <= 1e-15 * max(1.0, math.fsum(means[m] ** 2 for m in seq)):
            return [seq]
        # first split attaining the maximum (up to rounding)
        chosen = next(c for c, s in zip(candidates, scores) if s >= best - 1e-12 * max(1.0, abs(best)))
        mu = _mean([means[m] for m in seq])
        sigma2 = (math.fsum((means[m] - mu) ** 2 for m in seq) + dof * s2_mean) / (k + dof)
        lam = math.inf if sigma2 <= 0 else math.pi / (2 * (math.pi - 2)) * best / sigma2
        if chi2_sf(lam, k / (math.pi - 2)) < alpha:
            return split(chosen[0]) + split(chosen[1])
        return [seq]

    groups = split(names)

    def pooled(g):
        return [x for m in g for x in observations[m]]

    changed = True
    while changed and len(groups) > 1:
        changed = False
        for i in range(len(groups) - 1):
            if abs(brute_cohens_d(pooled(groups[i]), pooled(groups[i + 1]))) < d_threshold:
                groups = groups[:i] + [groups[i] + groups[i + 1]] + groups[i + 2:]
                changed = True
                break
    return groups
