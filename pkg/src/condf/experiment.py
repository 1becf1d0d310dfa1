"""Repeated stratified hold-out evaluation, report rendering and method ranking."""

from __future__ import annotations

import json
import logging
import platform
import re
import time
import zlib
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from . import __version__
from .cascade import CascadeConfig, cascade_predict, predict_labels, train_cascade
from .dataset import Dataset, load_csv, stratified_split, zscore_apply, zscore_fit
from .errors import CondfError, RankingInputError, RenderError
from .forest import ForestKind, train_forest
from .metrics import INDICATORS, IndicatorSet, evaluate, summarize
from .selection import apply_subset, con_select
from .skesd import ObservationMatrix, two_stage_rank

logger = logging.getLogger(__name__)

METHODS = ("condf", "df_only", "rf_baseline")
REPORT_FORMAT = "condf-report/1"
INDICATOR_TITLES = {"f_intrace": "F_InTrace", "f_outtrace": "F_OutTrace", "mcc": "MCC"}
# MCC lies in [-1, 1]; shift by +1 before the log transform
INDICATOR_TRANSFORMS = {"f_intrace": "log", "f_outtrace": "log", "mcc": "log_shift"}


def _derive(*parts):
    words = []
    for p in parts:
        words.append(zlib.crc32(p.encode("utf-8")) if isinstance(p, str) else int(p))
    return int(np.random.SeedSequence(words).generate_state(1, np.uint64)[0])


def split_seed(master_seed, project, repeat):
    """Split seed shared by every method so comparisons are paired."""
    return _derive(master_seed, project, repeat)


def method_seed(master_seed, project, repeat, method):
    return _derive(master_seed, project, repeat, method)


@dataclass
class ExperimentConfig:
    projects: list = field(default_factory=list)
    repeats: int = 50
    seed: int = 0
    cascade: CascadeConfig = field(default_factory=CascadeConfig)
    methods: tuple = ("condf",)
    out_dir: str = "results"
    n_jobs: int = 1

    def __post_init__(self):
        if isinstance(self.cascade, dict):
            self.cascade = CascadeConfig.from_dict(self.cascade)
        self.methods = tuple(self.methods)
        self.projects = list(self.projects)
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if not self.methods:
            raise ValueError("at least one method is required")

    def to_dict(self):
        d = asdict(self)
        d["projects"] = [str(p) if not isinstance(p, Dataset) else p.project_name for p in self.projects]
        d["methods"] = list(self.methods)
        return d


def fit_predict(method, train, test, cascade, seed):
    """Fit ``method`` on ``train``; return (test labels, extra info)."""
    if method in ("condf", "df_only"):
        cfg = replace(cascade, seed=seed, select_features=(method == "condf"), n_jobs=1)
        model = train_cascade(train, cfg)
        pred, _ = cascade_predict(model, test)
        return pred, {"n_selected": len(model.subset), "depth": model.chosen_depth}
    if method == "rf_baseline":
        scaler = zscore_fit(train)
        train_std = zscore_apply(scaler, train)
        subset = con_select(train_std, cascade.search)
        Xtr = apply_subset(train_std, subset).X
        forest = train_forest(
            Xtr, train.y, ForestKind.RANDOM_FOREST, cascade.trees_per_forest, seed,
            params=cascade.tree_params(), bootstrap=cascade.bootstrap,
        )
        Xte = apply_subset(zscore_apply(scaler, test), subset).X
        return predict_labels(forest.predict_dist(Xte)), {"n_selected": len(subset), "depth": 0}
    raise ValueError(f"unknown method {method!r}")


def _one_repeat(data, repeat, config):
    split = stratified_split(data, split_seed(config.seed, data.project_name, repeat))
    out = {}
    for method in config.methods:
        seed = method_seed(config.seed, data.project_name, repeat, method)
        pred, info = fit_predict(method, split.train, split.test, config.cascade, seed)
        out[method] = (evaluate(split.test.y, pred), info)
    return out


def _load(project):
    if isinstance(project, Dataset):
        return project
    return load_csv(project)


def run_experiment(config):
    """Evaluate every method on every project over ``config.repeats`` splits.

    Per-run indicator values are retained for ranking. A project whose data
    fails to load or fit is recorded with a ``failure`` entry.
    """
    start = time.perf_counter()
    projects = {}
    for project in config.projects:
        name = project.project_name if isinstance(project, Dataset) else Path(project).stem
        try:
            data = _load(project)
            name = data.project_name
            if config.n_jobs == 1:
                repeats = [_one_repeat(data, r, config) for r in range(config.repeats)]
            else:
                repeats = Parallel(n_jobs=config.n_jobs)(
                    delayed(_one_repeat)(data, r, config) for r in range(config.repeats)
                )
        except (CondfError, OSError, ValueError) as exc:
            logger.error("project %s failed: %s", name, exc)
            projects[name] = {"failure": f"{type(exc).__name__}: {exc}"}
            continue
        entry = {
            "n_rows": data.n_rows,
            "class_counts": {"InTrace": int(data.class_counts()[0]), "OutTrace": int(data.class_counts()[1])},
            "methods": {},
        }
        for method in config.methods:
            runs = [rep[method][0] for rep in repeats]
            means, stds = summarize(runs)
            entry["methods"][method] = {
                "mean": means,
                "std": stds,
                "runs": [r.to_dict() for r in runs],
                "n_selected": [rep[method][1]["n_selected"] for rep in repeats],
                "depth": [rep[method][1]["depth"] for rep in repeats],
            }
        projects[name] = entry
        logger.info("finished %s", name)
    return {
        "format": REPORT_FORMAT,
        "metadata": {
            "config": config.to_dict(),
            "wall_time_s": time.perf_counter() - start,
            "versions": {
                "condf": __version__,
                "numpy": np.__version__,
                "python": platform.python_version(),
            },
        },
        "projects": projects,
    }


def report_body(report):
    """The report without run-dependent timing, for reproducibility checks."""
    body = json.loads(json.dumps(report))
    body["metadata"].pop("wall_time_s", None)
    return body


def missing_cells(report):
    """``(project, method, indicator)`` triples absent from the report."""
    methods = report["metadata"]["config"]["methods"]
    missing = []
    for name, entry in report["projects"].items():
        for m in methods:
            cell = entry.get("methods", {}).get(m)
            for ind in INDICATORS:
                if cell is None or ind not in cell.get("mean", {}) or ind not in cell.get("std", {}):
                    missing.append((name, m, ind))
    return missing


def format_cell(mean, std):
    return f"{mean:.3f}({std:.2f})"


_CELL = re.compile(r"^\s*(-?\d+\.\d+)\((\d+\.\d+)\)\s*$")


def parse_cell(text):
    m = _CELL.match(text)
    if not m:
        raise ValueError(f"not a mean(std) cell: {text!r}")
    return float(m.group(1)), float(m.group(2))


def _methods_of(report):
    methods = list(report["metadata"]["config"]["methods"])
    if not methods:
        raise RenderError("report has no methods to render")
    return methods


def render_markdown(report):
    methods = _methods_of(report)
    ok = {n: e for n, e in report["projects"].items() if "failure" not in e}
    lines = []
    for ind in INDICATORS:
        lines.append(f"## {INDICATOR_TITLES[ind]}")
        lines.append("")
        lines.append("| Project | " + " | ".join(methods) + " |")
        lines.append("|---|" + "---|" * len(methods))
        for name, entry in ok.items():
            cells = [
                format_cell(entry["methods"][m]["mean"][ind], entry["methods"][m]["std"][ind])
                for m in methods
            ]
            lines.append(f"| {name} | " + " | ".join(cells) + " |")
        if ok:
            cells = []
            for m in methods:
                project_means = [e["methods"][m]["mean"][ind] for e in ok.values()]
                cells.append(format_cell(float(np.mean(project_means)), float(np.std(project_means))))
            lines.append("| Average | " + " | ".join(cells) + " |")
        lines.append("")
    failed = {n: e["failure"] for n, e in report["projects"].items() if "failure" in e}
    if failed:
        lines.append("## Failures")
        lines.append("")
        for n, msg in failed.items():
            lines.append(f"- {n}: {msg}")
        lines.append("")
    return "\n".join(lines)


def parse_markdown(text):
    """Recover ``{indicator: {project: {method: (mean, std)}}}`` from markdown."""
    titles = {v: k for k, v in INDICATOR_TITLES.items()}
    out, ind, methods = {}, None, None
    for line in text.splitlines():
        if line.startswith("## "):
            ind = titles.get(line[3:].strip())
            methods = None
            if ind:
                out[ind] = {}
        elif ind and line.startswith("| Project |"):
            methods = [c.strip() for c in line.strip("|").split("|")[1:]]
        elif ind and methods and line.startswith("| ") and not line.startswith("|---"):
            cells = [c.strip() for c in line.strip().strip("|").split("|")]
            out[ind][cells[0]] = {m: parse_cell(c) for m, c in zip(methods, cells[1:])}
    return out


def render_report(report, fmt, out_dir):
    """Write the report as ``report.json`` or ``report.md``; returns the path."""
    _methods_of(report)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path = out_dir / "report.json"
        path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    elif fmt == "markdown":
        path = out_dir / "report.md"
        path.write_text(render_markdown(report), encoding="utf-8")
    else:
        raise RenderError(f"unknown format {fmt!r}")
    return path


def observation_matrices(report, indicator):
    """Per-project (methods x repeats) matrices of raw indicator values."""
    methods = _methods_of(report)
    matrices = []
    for name, entry in report["projects"].items():
        if "failure" in entry:
            logger.warning("skipping failed project %s in ranking", name)
            continue
        rows = []
        for m in methods:
            runs = entry["methods"].get(m, {}).get("runs")
            if not runs:
                raise RankingInputError(
                    f"no per-run values for {name}/{m}; rerun `evaluate` so raw runs are retained"
                )
            rows.append([r[indicator] for r in runs])
        if len(rows[0]) < 2:
            raise RankingInputError(f"{name}: ranking needs at least 2 repeats, report has 1")
        matrices.append(ObservationMatrix(tuple(methods), np.array(rows)))
    if not matrices:
        raise RankingInputError("no successful projects to rank")
    return matrices


def rank_methods(report, out_dir=None):
    """Two-stage Scott-Knott ESD ranking per indicator.

    Returns ``{indicator: RankingResult}`` and, when ``out_dir`` is given,
    writes ``ranking_<indicator>.json`` files there.
    """
    results = {}
    for ind in INDICATORS:
        results[ind] = two_stage_rank(observation_matrices(report, ind), transform=INDICATOR_TRANSFORMS[ind])
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for ind, res in results.items():
            payload = {"indicator": ind, **res.to_dict()}
            (out_dir / f"ranking_{ind}.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return results


def render_rankings(results):
    lines = []
    for ind, res in results.items():
        lines.append(f"{INDICATOR_TITLES[ind]}:")
        for rank, (group, mean) in enumerate(zip(res.groups, res.group_means), start=1):
            lines.append(f"  rank {rank}: {', '.join(group)}  (mean {mean:.3f})")
    return "\n".join(lines)


def indicator_sets(report, project, method):
    runs = report["projects"][project]["methods"][method]["runs"]
    return [IndicatorSet(**r) for r in runs]
