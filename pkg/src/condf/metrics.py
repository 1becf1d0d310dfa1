"""Confusion counts, F-measures for both classes, and MCC.

InTrace is the positive class. All indicators are total functions: a
zero-denominator case yields 0.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass

import numpy as np

from .dataset import encode_labels
from .errors import ShapeError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        for name in ("tp", "fp", "fn", "tn"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    @property
    def total(self):
        return self.tp + self.fp + self.fn + self.tn

    def swapped(self):
        """Counts with OutTrace treated as the positive class."""
        return ConfusionCounts(tp=self.tn, fp=self.fn, fn=self.fp, tn=self.tp)


@dataclass(frozen=True)
class IndicatorSet:
    f_intrace: float
    f_outtrace: float
    mcc: float

    def to_dict(self):
        return {"f_intrace": self.f_intrace, "f_outtrace": self.f_outtrace, "mcc": self.mcc}


INDICATORS = ("f_intrace", "f_outtrace", "mcc")


def _as_codes(labels):
    arr = np.asarray(labels)
    if arr.dtype.kind in "USO":
        return encode_labels(list(arr))
    return arr.astype(np.int64)


def confusion(y_true, y_pred):
    t = _as_codes(y_true)
    p = _as_codes(y_pred)
    if t.shape != p.shape:
        raise ShapeError(f"{t.shape[0]} true labels but {p.shape[0]} predictions")
    return ConfusionCounts(
        tp=int(np.sum((t == 0) & (p == 0))),
        fp=int(np.sum((t == 1) & (p == 0))),
        fn=int(np.sum((t == 0) & (p == 1))),
        tn=int(np.sum((t == 1) & (p == 1))),
    )


def f_intrace(c):
    # 2PR/(P+R) reduces to 2tp/(2tp+fp+fn)
    if c.tp == 0:
        return 0.0
    return 2 * c.tp / (2 * c.tp + c.fp + c.fn)


def f_outtrace(c):
    return f_intrace(c.swapped())


def mcc(c):
    # integer products keep the result exactly symmetric under class swap
    denom = (c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn)
    if denom == 0:
        return 0.0
    value = (c.tp * c.tn - c.fp * c.fn) / math.sqrt(denom)
    return max(-1.0, min(1.0, value))


def indicators(c):
    return IndicatorSet(f_intrace(c), f_outtrace(c), mcc(c))


def evaluate(y_true, y_pred):
    return indicators(confusion(y_true, y_pred))


def summarize(runs):
    """Per-indicator mean and population standard deviation.

    Returns two dicts keyed by indicator name: ``(means, stds)``.
    """
    runs = list(runs)
    if not runs:
        raise ValueError("summarize needs at least one run")
    # statistics works in exact arithmetic, so constant runs give std exactly 0
    columns = {k: [float(getattr(r, k)) for r in runs] for k in INDICATORS}
    means = {k: statistics.fmean(v) for k, v in columns.items()}
    stds = {k: statistics.pstdev(v) for k, v in columns.items()}
    return means, stds
