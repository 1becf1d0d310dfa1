"""Crash-data ingestion, z-score standardization and stratified splitting."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FitError, LabelError, ParseError, SchemaError, ShapeError, SplitError

logger = logging.getLogger(__name__)

IN_TRACE = "InTrace"
OUT_TRACE = "OutTrace"
# InTrace -> 0, OutTrace -> 1 everywhere in the package
LABELS = (IN_TRACE, OUT_TRACE)
LABEL_COLUMN = "label"
N_BENCHMARK_FEATURES = 89


def benchmark_feature_names():
    """The 89 crash feature names used by the benchmark CSVs."""
    names = [f"ST{i:02d}" for i in range(1, 12)]
    names += [f"TC{i:02d}" for i in range(1, 24)]
    names += [f"BC{i:02d}" for i in range(1, 24)]
    names += [f"NTC{i:02d}" for i in range(1, 17)]
    names += [f"NBC{i:02d}" for i in range(1, 17)]
    return names


def encode_labels(labels):
    out = np.empty(len(labels), dtype=np.int64)
    for i, lab in enumerate(labels):
        if lab == IN_TRACE:
            out[i] = 0
        elif lab == OUT_TRACE:
            out[i] = 1
        else:
            raise LabelError(f"unknown label {lab!r} at position {i}")
    return out


def decode_labels(y):
    return [LABELS[int(v)] for v in y]


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with binary residence labels.

    ``y`` holds encoded labels (0 = InTrace, 1 = OutTrace); use
    :attr:`labels` for the string form.
    """

    feature_names: tuple
    X: np.ndarray
    y: np.ndarray
    project_name: str = ""

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64, copy=True)
        if X.ndim == 1 and X.size == 0:
            X = X.reshape(0, len(self.feature_names))
        y = np.asarray(self.y)
        if y.dtype.kind in "USO":
            y = encode_labels(list(y))
        y = np.array(y, dtype=np.int64, copy=True)
        names = tuple(self.feature_names)
        if X.ndim != 2:
            raise ShapeError(f"X must be 2-D, got shape {X.shape}")
        if X.shape[0] != y.shape[0]:
            raise ShapeError(f"{X.shape[0]} rows but {y.shape[0]} labels")
        if X.shape[1] != len(names):
            raise ShapeError(f"{X.shape[1]} columns but {len(names)} feature names")
        if len(set(names)) != len(names):
            raise SchemaError("feature names must be unique")
        if y.size and not np.isin(y, (0, 1)).all():
            raise LabelError("labels must be 0 (InTrace) or 1 (OutTrace)")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n_rows(self):
        return self.X.shape[0]

    @property
    def n_features(self):
        return self.X.shape[1]

    @property
    def labels(self):
        return decode_labels(self.y)

    def class_counts(self):
        return np.bincount(self.y, minlength=2)

    def take(self, rows):
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.feature_names, self.X[rows], self.y[rows], self.project_name)

    def with_X(self, X, feature_names=None):
        names = self.feature_names if feature_names is None else feature_names
        return Dataset(names, X, self.y, self.project_name)


def load_csv(path, project_name=None):
    """Read a crash-data CSV with a header row and a ``label`` column."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected a header row") from None
        header = [h.strip() for h in header]
        if LABEL_COLUMN not in header:
            raise SchemaError(f"{path}: no {LABEL_COLUMN!r} column in header")
        if header.count(LABEL_COLUMN) > 1:
            raise SchemaError(f"{path}: duplicate {LABEL_COLUMN!r} column")
        label_at = header.index(LABEL_COLUMN)
        feature_cols = [i for i in range(len(header)) if i != label_at]
        names = [header[i] for i in feature_cols]

        rows, labels = [], []
        for line_no, record in enumerate(reader, start=2):
            if not record or all(not cell.strip() for cell in record):
                continue
            if len(record) != len(header):
                raise ParseError(
                    f"{path}:{line_no}: expected {len(header)} fields, got {len(record)}",
                    row=line_no,
                )
            values = []
            for i in feature_cols:
                try:
                    values.append(float(record[i]))
                except ValueError:
                    raise ParseError(
                        f"{path}:{line_no}: column {header[i]!r} is not numeric: {record[i]!r}",
                        row=line_no,
                        column=header[i],
                    ) from None
            label = record[label_at].strip()
            if label not in LABELS:
                raise LabelError(f"{path}:{line_no}: unknown label {label!r}")
            rows.append(values)
            labels.append(label)

    if len(names) != N_BENCHMARK_FEATURES:
        logger.warning("%s has %d features (benchmark files have %d)", path, len(names), N_BENCHMARK_FEATURES)
    X = np.array(rows, dtype=np.float64).reshape(len(rows), len(names))
    return Dataset(names, X, encode_labels(labels), project_name or path.stem)


def write_csv(data, path):
    """Write ``data`` in the format :func:`load_csv` reads (label column last)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([*data.feature_names, LABEL_COLUMN])
        for row, label in zip(data.X, data.labels):
            writer.writerow([repr(float(v)) for v in row] + [label])


@dataclass(frozen=True)
class ScalerParams:
    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.means, dtype=np.float64)
        stds = np.asarray(self.stds, dtype=np.float64)
        if means.shape != stds.shape or means.ndim != 1:
            raise ShapeError("means and stds must be 1-D arrays of equal length")
        if (stds < 0).any():
            raise FitError("standard deviations must be non-negative")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)

    def to_dict(self):
        return {"means": self.means.tolist(), "stds": self.stds.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["means"]), np.array(d["stds"]))


def zscore_fit(train):
    """Per-column mean and population standard deviation of ``train``."""
    if train.n_rows == 0:
        raise FitError("cannot fit a scaler on an empty dataset")
    means = train.X.mean(axis=0)
    stds = train.X.std(axis=0)
    # exact zero for constant columns; std() can leave ~1e-17 residue
    constant = (train.X == train.X[0]).all(axis=0)
    stds[constant] = 0.0
    return ScalerParams(means, stds)


def zscore_apply(params, data):
    """Standardize ``data``; zero-variance columns become 0."""
    if data.n_features != params.means.shape[0]:
        raise ShapeError(
            f"scaler fitted on {params.means.shape[0]} features, data has {data.n_features}"
        )
    safe = np.where(params.stds > 0, params.stds, 1.0)
    Z = (data.X - params.means) / safe
    Z[:, params.stds == 0] = 0.0
    # normalize -0.0 so pattern hashing sees one zero
    Z += 0.0
    return data.with_X(Z)


@dataclass(frozen=True)
class SplitPair:
    train: Dataset
    test: Dataset
    seed: int
    train_rows: np.ndarray = field(repr=False, default=None)
    test_rows: np.ndarray = field(repr=False, default=None)


def stratified_split(data, seed):
    """Half of each class (rounded down) to train, the remainder to test.

    Row order within each half follows one seeded shuffle of the whole
    dataset, so the result is a pure function of ``(data, seed)``.
    """
    counts = data.class_counts()
    for c, n in enumerate(counts):
        if n < 2:
            raise SplitError(
                f"class {LABELS[c]} has {n} instance(s); stratified split needs at least 2 per class"
            )
    rng = np.random.default_rng(seed)
    order = rng.permutation(data.n_rows)
    quota = counts // 2
    taken = np.zeros(2, dtype=np.int64)
    train_rows, test_rows = [], []
    for r in order:
        c = data.y[r]
        if taken[c] < quota[c]:
            train_rows.append(r)
            taken[c] += 1
        else:
            test_rows.append(r)
    train_rows = np.array(train_rows, dtype=np.int64)
    test_rows = np.array(test_rows, dtype=np.int64)
    return SplitPair(data.take(train_rows), data.take(test_rows), seed, train_rows, test_rows)
