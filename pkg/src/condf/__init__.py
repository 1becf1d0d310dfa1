"""Crash fault residence prediction with consistency-based feature selection
and a simplified cascade deep forest."""

__version__ = "0.1.0"

from .cascade import CascadeConfig, CascadeModel, ConDF, cascade_predict, train_cascade  # noqa: E402
from .dataset import Dataset, load_csv, stratified_split, zscore_apply, zscore_fit  # noqa: E402
from .metrics import ConfusionCounts, IndicatorSet, confusion, evaluate, f_intrace, f_outtrace, mcc  # noqa: E402
from .selection import FeatureSubset, SearchConfig, apply_subset, con_select, inconsistency_rate  # noqa: E402
from .skesd import ObservationMatrix, RankingResult, esd_rank, two_stage_rank  # noqa: E402

__all__ = [
    "CascadeConfig",
    "CascadeModel",
    "ConDF",
    "ConfusionCounts",
    "Dataset",
    "FeatureSubset",
    "IndicatorSet",
    "ObservationMatrix",
    "RankingResult",
    "SearchConfig",
    "apply_subset",
    "cascade_predict",
    "con_select",
    "confusion",
    "esd_rank",
    "evaluate",
    "f_intrace",
    "f_outtrace",
    "inconsistency_rate",
    "load_csv",
    "mcc",
    "stratified_split",
    "train_cascade",
    "two_stage_rank",
    "zscore_apply",
    "zscore_fit",
]
