"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

from .cascade import CascadeConfig, cascade_predict, load_model, save_model, train_cascade
from .dataset import LABELS, load_csv, write_csv, zscore_apply, zscore_fit
from .errors import DataError
from .experiment import (
    METHODS,
    ExperimentConfig,
    rank_methods,
    render_rankings,
    render_report,
    run_experiment,
)
from .metrics import evaluate
from .selection import con_select
from .synthetic import synthetic_suite

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

logger = logging.getLogger("condf")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_cascade_flags(p):
    p.add_argument("--trees", type=int, help="trees per forest (default 500)")
    p.add_argument("--forests", type=int, help="forests per level M, split evenly between the two kinds (default 8)")
    p.add_argument("--kfolds", type=int, help="folds for out-of-fold level features (default 3)")
    p.add_argument("--max-levels", type=int, help="maximum cascade levels (default 20)")
    p.add_argument("--seed", type=int, help="master seed (default 0)")


def build_parser():
    parser = _Parser(prog="condf", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("evaluate", help="run the repeated hold-out protocol over project CSVs")
    p.add_argument("--config", type=Path, help="JSON config; command-line flags override it")
    p.add_argument("--projects", nargs="+", type=Path)
    p.add_argument("--repeats", type=int)
    p.add_argument("--methods", help=f"comma-separated subset of {','.join(METHODS)}")
    p.add_argument("--out", type=Path)
    p.add_argument("--format", choices=("json", "markdown"))
    p.add_argument("--jobs", type=int, help="parallel worker processes over repeats")
    _add_cascade_flags(p)

    p = sub.add_parser("report", help="render report.json as json or markdown")
    p.add_argument("--report", type=Path, required=True)
    p.add_argument("--format", choices=("json", "markdown"), default="markdown")
    p.add_argument("--out", type=Path)

    p = sub.add_parser("rank", help="two-stage Scott-Knott ESD ranking of the methods in a report")
    p.add_argument("--report", type=Path, required=True)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("select", help="run consistency-based feature selection and print the subset")
    p.add_argument("--projects", nargs=1, type=Path, required=True)
    p.add_argument("--out", type=Path, help="also write the subset JSON here")

    p = sub.add_parser("train", help="fit one ConDF model on a CSV")
    p.add_argument("--projects", nargs=1, type=Path, required=True)
    p.add_argument("--model", type=Path, required=True, help="output model file (.json or .json.gz)")
    p.add_argument("--config", type=Path)
    p.add_argument("--no-select", action="store_true", help="skip feature selection (plain DF)")
    _add_cascade_flags(p)

    p = sub.add_parser("predict", help="predict with a saved model")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--projects", nargs=1, type=Path, required=True)
    p.add_argument("--out", type=Path, help="write per-row predictions CSV here")

    p = sub.add_parser("synth", help="write synthetic crash-like project CSVs")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--projects", type=int, default=7, help="number of projects (max 7)")
    p.add_argument("--features", type=int, default=12)
    p.add_argument("--scale", type=float, default=1.0, help="row-count multiplier")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _read_config(path):
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None


def _cascade_from(base, args):
    cascade = dict(base)
    if args.trees is not None:
        cascade["trees_per_forest"] = args.trees
    if args.forests is not None:
        cascade["n_random_forests"] = math.ceil(args.forests / 2)
        cascade["n_completely_random"] = args.forests // 2
    if args.kfolds is not None:
        cascade["k_folds"] = args.kfolds
    if args.max_levels is not None:
        cascade["max_levels"] = args.max_levels
    if args.seed is not None:
        cascade["seed"] = args.seed
    try:
        return CascadeConfig(**cascade)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid cascade settings: {exc}") from None


def experiment_config(args):
    """Merge a JSON config file with command-line flags (flags win)."""
    cfg = _read_config(args.config)
    cascade = dict(cfg.get("cascade", {}))
    for key, field_name in (("trees", "trees_per_forest"), ("kfolds", "k_folds"), ("max_levels", "max_levels")):
        if key in cfg:
            cascade[field_name] = cfg[key]
    if "forests" in cfg:
        cascade["n_random_forests"] = math.ceil(cfg["forests"] / 2)
        cascade["n_completely_random"] = cfg["forests"] // 2
    cascade_cfg = _cascade_from(cascade, args)

    projects = args.projects if args.projects else cfg.get("projects", [])
    if not projects:
        raise UsageError("no projects given (use --projects or a config file)")
    methods = args.methods.split(",") if args.methods else cfg.get("methods", ["condf"])
    methods = [m.strip() for m in methods if m.strip()]
    try:
        return ExperimentConfig(
            projects=[str(p) for p in projects],
            repeats=args.repeats if args.repeats is not None else cfg.get("repeats", 50),
            seed=args.seed if args.seed is not None else cfg.get("seed", 0),
            cascade=replace(cascade_cfg, seed=args.seed if args.seed is not None else cfg.get("seed", cascade_cfg.seed)),
            methods=tuple(methods),
            out_dir=str(args.out or cfg.get("out", "results")),
            n_jobs=args.jobs if args.jobs is not None else cfg.get("jobs", 1),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_evaluate(args):
    config = experiment_config(args)
    fmt = args.format or _read_config(args.config).get("format", "json")
    for p in config.projects:
        if not Path(p).exists():
            raise DataError(f"project file not found: {p}")
    report = run_experiment(config)
    out = Path(config.out_dir)
    render_report(report, "json", out)
    if fmt == "markdown":
        render_report(report, "markdown", out)
    print(f"wrote {out / 'report.json'}")
    failed = [n for n, e in report["projects"].items() if "failure" in e]
    if failed:
        print(f"failed projects: {', '.join(failed)}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def _load_report(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"report not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"report {path} is not valid JSON: {exc}") from None


def cmd_report(args):
    report = _load_report(args.report)
    path = render_report(report, args.format, args.out or args.report.parent)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_rank(args):
    report = _load_report(args.report)
    results = rank_methods(report, args.out or args.report.parent)
    print(render_rankings(results))
    return EXIT_OK


def cmd_select(args):
    data = load_csv(args.projects[0])
    std = zscore_apply(zscore_fit(data), data)
    subset = con_select(std)
    text = subset.to_json()
    print(text)
    if args.out:
        args.out.write_text(text + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_train(args):
    cfg = _read_config(args.config)
    cascade = _cascade_from(cfg.get("cascade", cfg), args)
    if args.no_select:
        cascade = replace(cascade, select_features=False)
    data = load_csv(args.projects[0])
    model = train_cascade(data, cascade)
    save_model(model, args.model)
    print(
        f"trained on {data.n_rows} rows: {len(model.subset)} features selected, "
        f"depth {model.chosen_depth}, cv scores {[round(s, 4) for s in model.cv_scores]}"
    )
    return EXIT_OK


def cmd_predict(args):
    try:
        model = load_model(args.model)
    except FileNotFoundError:
        raise DataError(f"model not found: {args.model}") from None
    data = load_csv(args.projects[0])
    labels, proba = cascade_predict(model, data)
    if args.out:
        with args.out.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["row", "prediction", "p_intrace", "p_outtrace"])
            for i, (lab, p) in enumerate(zip(labels, proba)):
                w.writerow([i, LABELS[lab], repr(float(p[0])), repr(float(p[1]))])
    scores = evaluate(data.y, labels)
    print(json.dumps(scores.to_dict(), indent=2))
    return EXIT_OK


def cmd_synth(args):
    if not 1 <= args.projects <= 7:
        raise UsageError("--projects must be between 1 and 7")
    args.out.mkdir(parents=True, exist_ok=True)
    for data in synthetic_suite(args.features, args.seed, args.scale)[: args.projects]:
        path = args.out / f"{data.project_name}.csv"
        write_csv(data, path)
        print(path)
    return EXIT_OK


COMMANDS = {
    "evaluate": cmd_evaluate,
    "report": cmd_report,
    "rank": cmd_rank,
    "select": cmd_select,
    "train": cmd_train,
    "predict": cmd_predict,
    "synth": cmd_synth,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"condf: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError) as exc:
        print(f"condf: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        logger.debug("internal error", exc_info=True)
        print(f"condf: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
