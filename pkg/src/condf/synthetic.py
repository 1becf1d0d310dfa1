"""Synthetic crash-like datasets for tests, demos and smoke runs.

Features are small non-negative integers, like the count features of the
crash benchmark. The label is InTrace exactly when two informative features
both reach a threshold, optionally with a fraction of labels flipped.
"""

from __future__ import annotations

import math

import numpy as np

from .dataset import Dataset, N_BENCHMARK_FEATURES, benchmark_feature_names


def make_crash_data(
    n_rows=300,
    n_features=12,
    in_ratio=0.25,
    informative=(0, 1),
    levels=10,
    label_noise=0.0,
    shuffle_labels=False,
    seed=0,
    project_name="synthetic",
):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, levels, size=(n_rows, n_features)).astype(np.float64)
    # P(both >= t) = ((levels - t) / levels)^2 ~= in_ratio
    t = int(round(levels * (1 - math.sqrt(in_ratio))))
    a, b = informative
    inside = (X[:, a] >= t) & (X[:, b] >= t)
    y = np.where(inside, 0, 1)
    if label_noise > 0:
        flip = rng.random(n_rows) < label_noise
        y = np.where(flip, 1 - y, y)
    if shuffle_labels:
        y = rng.permutation(y)
    # keep both classes present with at least two rows each
    for c in (0, 1):
        missing = 2 - int((y == c).sum())
        if missing > 0:
            y[rng.choice(np.flatnonzero(y != c), missing, replace=False)] = c
    if n_features == N_BENCHMARK_FEATURES:
        names = benchmark_feature_names()
    else:
        names = [f"f{i}" for i in range(n_features)]
    return Dataset(names, X, y, project_name)


# (name, rows, InTrace ratio, label noise) loosely shaped like the seven benchmark projects
SYNTHETIC_PROJECTS = (
    ("SynCodec", 200, 0.29, 0.05),
    ("SynColle", 260, 0.20, 0.03),
    ("SynIO", 220, 0.22, 0.04),
    ("SynJsoup", 200, 0.20, 0.08),
    ("SynJSqlP", 220, 0.10, 0.02),
    ("SynMango", 240, 0.08, 0.02),
    ("SynOrmli", 260, 0.25, 0.03),
)


def synthetic_suite(n_features=12, seed=0, scale=1.0):
    """Seven synthetic projects with varied size, imbalance and noise."""
    out = []
    for i, (name, rows, ratio, noise) in enumerate(SYNTHETIC_PROJECTS):
        out.append(
            make_crash_data(
                n_rows=max(20, int(rows * scale)),
                n_features=n_features,
                in_ratio=ratio,
                label_noise=noise,
                seed=seed * 1000 + i,
                project_name=name,
            )
        )
    return out
