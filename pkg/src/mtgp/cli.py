"""Command-line interface: train, predict, benchmark, check.

Exit codes: 0 success, 1 self-check failure, 2 input validation failure,
3 computation failure. All commands are deterministic under fixed seeds and
write byte-identical CSV output across runs on the same platform.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__, benchmark, model_io
from .data import read_query_csv, read_task_csv
from .errors import (
    DomainError,
    MTGPError,
    ShapeError,
    ValidationError,
)
from .gp import GPModel, gp_predict
from .kernels import KERNEL_KINDS, SQUARED_EXPONENTIAL
from .multitask import mtgp_predict
from .selfcheck import run_self_checks
from .training import MTGPFamily, TrainConfig, train_gp, train_mtgp

FAMILIES = ("gp", "mtgp-slfm", "mtgp-lmc")

# benchmark runs many small trainings; the short budget doubles as
# regularization on the 5-sample cells and is applied to both models
BENCHMARK_TRAIN_DEFAULTS = {
    "learning_rate": 0.05,
    "max_iterations": 200,
    "convergence_tolerance": 1e-7,
    "num_restarts": 4,
    "seed": 0,
}


def _fmt(x) -> str:
    return repr(float(x))


def _load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: top-level JSON value must be an object")
    return doc


def _validate_keys(doc: dict, allowed: dict, path: str):
    for key in doc:
        if key not in allowed:
            raise ValidationError(f"{path}: unknown key {key!r}")


def _get_typed(doc: dict, key: str, kind, default, path: str):
    if key not in doc or doc[key] is None:
        return default
    value = doc[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    bool_mismatch = isinstance(value, bool) and kind is not bool
    if not isinstance(value, kind) or bool_mismatch:
        raise ValidationError(f"{path}: key {key!r} must be of type {kind.__name__}")
    return value


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

_RUN_CONFIG_KEYS = {
    "family",
    "kernel",
    "q",
    "rank",
    "standardize",
    "learning_rate",
    "max_iterations",
    "convergence_tolerance",
    "num_restarts",
    "seed",
    "output_dir",
}


def _parse_run_config(path) -> dict:
    doc = _load_json(path)
    _validate_keys(doc, _RUN_CONFIG_KEYS, path)
    family = doc.get("family")
    if family not in FAMILIES:
        raise ValidationError(f"{path}: key 'family' must be one of {list(FAMILIES)}")
    kernel = _get_typed(doc, "kernel", str, SQUARED_EXPONENTIAL, path)
    if kernel not in KERNEL_KINDS:
        raise ValidationError(f"{path}: key 'kernel' must be one of {list(KERNEL_KINDS)}")
    config = {
        "family": family,
        "kernel": kernel,
        "q": _get_typed(doc, "q", int, None, path),
        "rank": _get_typed(doc, "rank", int, 1, path),
        "standardize": _get_typed(doc, "standardize", bool, True, path),
        "learning_rate": _get_typed(doc, "learning_rate", float, 0.05, path),
        "max_iterations": _get_typed(doc, "max_iterations", int, 2000, path),
        "convergence_tolerance": _get_typed(doc, "convergence_tolerance", float, 1e-7, path),
        "num_restarts": _get_typed(doc, "num_restarts", int, 4, path),
        "seed": _get_typed(doc, "seed", int, 0, path),
        "output_dir": _get_typed(doc, "output_dir", str, None, path),
    }
    if config["q"] is not None and config["q"] < 1:
        raise ValidationError(f"{path}: key 'q' must be a positive integer")
    if config["rank"] < 1:
        raise ValidationError(f"{path}: key 'rank' must be a positive integer")
    return config


def _open_trace(path):
    if path is None:
        return None, None
    fh = open(path, "w", encoding="utf-8")

    def trace(restart, iteration, objective, grad_norm):
        fh.write(
            json.dumps(
                {
                    "restart": restart,
                    "iteration": iteration,
                    "objective": objective,
                    "grad_norm": grad_norm,
                },
                sort_keys=True,
            )
        )
        fh.write("\n")

    return trace, fh


def cmd_train(args) -> int:
    config = _parse_run_config(args.config)
    if args.seed is not None:
        config["seed"] = args.seed
    out_dir = args.out or config["output_dir"]
    if out_dir is None:
        raise ValidationError("no output directory: pass --out or set 'output_dir' in the config")
    dataset, _ = read_task_csv(args.data)
    train_config = TrainConfig(
        learning_rate=config["learning_rate"],
        max_iterations=config["max_iterations"],
        convergence_tolerance=config["convergence_tolerance"],
        num_restarts=config["num_restarts"],
        seed=config["seed"],
    )
    trace, trace_fh = _open_trace(args.trace)
    try:
        if config["family"] == "gp":
            if dataset.num_tasks != 1:
                raise ValidationError(
                    f"family 'gp' requires a single task, data has {dataset.num_tasks}"
                )
            model = train_gp(
                dataset.inputs[0],
                dataset.targets[0],
                train_config,
                kernel_kind=config["kernel"],
                standardize=config["standardize"],
                trace=trace,
            )
        else:
            mode = "slfm" if config["family"] == "mtgp-slfm" else "lmc"
            family = MTGPFamily(
                mode=mode,
                kernel_kind=config["kernel"],
                num_terms=config["q"],
                rank=config["rank"],
            )
            model = train_mtgp(
                dataset,
                train_config,
                family=family,
                standardize=config["standardize"],
                trace=trace,
            )
    finally:
        if trace_fh is not None:
            trace_fh.close()
    os.makedirs(out_dir, exist_ok=True)
    model_path = os.path.join(out_dir, "model.json")
    model_io.save_model(model, model_path, config["family"])
    metrics = {
        "log_marginal_likelihood": model.fit_info["log_marginal_likelihood"],
        "objective": model.fit_info["objective"],
        "iterations": model.fit_info["iterations"],
        "winning_restart": model.fit_info["restart"],
        "num_restarts": train_config.num_restarts,
        "wall_time_s": model.fit_info["wall_time_s"],
    }
    with open(os.path.join(out_dir, "metrics.json"), "w", encoding="utf-8") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {model_path} (log marginal likelihood {metrics['log_marginal_likelihood']:.6f})")
    return 0


# ---------------------------------------------------------------------------
# predict
# ---------------------------------------------------------------------------


def cmd_predict(args) -> int:
    model = model_io.load_model(args.model)
    X, tasks, xcols = read_query_csv(args.data)
    if X.shape[0] > 0 and X.shape[1] != model.input_dim:
        raise ValidationError(
            f"query has {X.shape[1]} input columns, model expects {model.input_dim}"
        )
    num_tasks = 1 if isinstance(model, GPModel) else model.num_tasks
    bad = tasks[(tasks < 0) | (tasks >= num_tasks)]
    if bad.size:
        raise ValidationError(
            f"query task index {int(bad[0])} out of range for a {num_tasks}-task model"
        )
    mean = np.zeros(X.shape[0])
    stddev = np.zeros(X.shape[0])
    for d in sorted(set(tasks.tolist())):
        rows = np.where(tasks == d)[0]
        if isinstance(model, GPModel):
            pred = gp_predict(model, X[rows])
        else:
            pred = mtgp_predict(model, d, X[rows])
        mean[rows] = pred.mean
        stddev[rows] = pred.stddev
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(xcols + ["task", "mean", "stddev"])
        for i in range(X.shape[0]):
            writer.writerow(
                [_fmt(v) for v in X[i]] + [int(tasks[i]), _fmt(mean[i]), _fmt(stddev[i])]
            )
    print(f"wrote {args.out} ({X.shape[0]} rows)")
    return 0


# ---------------------------------------------------------------------------
# benchmark
# ---------------------------------------------------------------------------

_STUDY_KEYS = {
    "correlations",
    "sizes",
    "replicates",
    "n_test",
    "observation_noise",
    "seed",
    "train",
}
_TRAIN_KEYS = {"learning_rate", "max_iterations", "convergence_tolerance", "num_restarts", "seed"}


def _parse_sizes(text: str) -> tuple:
    pairs = []
    for chunk in text.split(";"):
        parts = chunk.split(",")
        if len(parts) != 2:
            raise ValidationError(f"bad --sizes entry {chunk!r}; expected 'n1,n2'")
        try:
            pairs.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise ValidationError(f"bad --sizes entry {chunk!r}; expected integers") from None
    return tuple(pairs)


def _parse_correlations(text: str) -> tuple:
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ValidationError(f"bad --correlations value {text!r}") from None
    for v in values:
        if not 0.0 < v <= 1.0:
            raise ValidationError(f"correlation target {v} outside (0, 1]")
    return values


def _parse_study_config(args):
    doc = _load_json(args.config) if args.config else {}
    if args.config:
        _validate_keys(doc, _STUDY_KEYS, args.config)
    path = args.config or "<defaults>"
    correlations = doc.get("correlations", list(benchmark.DEFAULT_CORRELATIONS))
    if not isinstance(correlations, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in correlations
    ):
        raise ValidationError(f"{path}: 'correlations' must be a list of numbers")
    sizes = doc.get("sizes", [list(p) for p in benchmark.DEFAULT_SIZE_GRID])
    try:
        size_grid = tuple((int(p[0]), int(p[1])) for p in sizes)
    except (TypeError, ValueError, IndexError):
        raise ValidationError(f"{path}: 'sizes' must be a list of [n1, n2] pairs") from None
    train_doc = doc.get("train", {})
    if not isinstance(train_doc, dict):
        raise ValidationError(f"{path}: 'train' must be an object")
    _validate_keys(train_doc, _TRAIN_KEYS, path)
    train_kwargs = dict(BENCHMARK_TRAIN_DEFAULTS)
    train_kwargs.update(train_doc)
    study = benchmark.StudyConfig(
        correlations=tuple(float(v) for v in correlations),
        size_grid=size_grid,
        replicates=_get_typed(doc, "replicates", int, 5, path),
        n_test=_get_typed(doc, "n_test", int, 100, path),
        observation_noise=_get_typed(doc, "observation_noise", float, 0.0, path),
        seed=_get_typed(doc, "seed", int, 0, path),
    )
    # flag overrides
    if args.correlations is not None:
        study = benchmark.StudyConfig(
            correlations=_parse_correlations(args.correlations),
            size_grid=study.size_grid,
            replicates=study.replicates,
            n_test=study.n_test,
            observation_noise=study.observation_noise,
            seed=study.seed,
        )
    if args.sizes is not None:
        study = benchmark.StudyConfig(
            correlations=study.correlations,
            size_grid=_parse_sizes(args.sizes),
            replicates=study.replicates,
            n_test=study.n_test,
            observation_noise=study.observation_noise,
            seed=study.seed,
        )
    if args.replicates is not None:
        study = benchmark.StudyConfig(
            correlations=study.correlations,
            size_grid=study.size_grid,
            replicates=args.replicates,
            n_test=study.n_test,
            observation_noise=study.observation_noise,
            seed=study.seed,
        )
    if args.seed is not None:
        study = benchmark.StudyConfig(
            correlations=study.correlations,
            size_grid=study.size_grid,
            replicates=study.replicates,
            n_test=study.n_test,
            observation_noise=study.observation_noise,
            seed=args.seed,
        )
    return study, TrainConfig(**train_kwargs)


_ROW_FIELDS = [
    "correlation_target",
    "correlation_achieved",
    "aux_a",
    "aux_b",
    "n_primary",
    "n_auxiliary",
    "replicate",
    "seed",
    "gp_rmse",
    "mtgp_rmse",
    "percent_improvement",
]


def _write_study_files(result, out_dir: str):
    os.makedirs(out_dir, exist_ok=True)
    rows_path = os.path.join(out_dir, "study_rows.csv")
    with open(rows_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_ROW_FIELDS)
        for row in result.rows:
            writer.writerow(
                [
                    row[f] if isinstance(row[f], int) else _fmt(row[f])
                    for f in _ROW_FIELDS
                ]
            )
    summary = {
        "config": {
            "correlations": list(result.config.correlations),
            "sizes": [list(p) for p in result.config.size_grid],
            "replicates": result.config.replicates,
            "n_test": result.config.n_test,
            "observation_noise": result.config.observation_noise,
            "seed": result.config.seed,
        },
        "calibrations": {
            f"{target:g}": {
                "a": params.a,
                "b": params.b,
                "achieved": benchmark.achieved_correlation(params),
            }
            for target, params in result.calibrations.items()
        },
        "aggregates": result.aggregates,
    }
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    grid = np.linspace(0.0, 1.0, 200)
    primary = benchmark.forrester(grid, benchmark.PRIMARY_PARAMS)
    for target, params in result.calibrations.items():
        path = os.path.join(out_dir, f"series_functions_r{target:g}.csv")
        aux = benchmark.forrester(grid, params)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["x", "primary", "auxiliary"])
            for i in range(grid.size):
                writer.writerow([_fmt(grid[i]), _fmt(primary[i]), _fmt(aux[i])])
    for (target, n1, n2), series in sorted(result.series.items()):
        path = os.path.join(
            out_dir, f"series_predictions_r{target:g}_t1-{n1}_t2-{n2}.csv"
        )
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                ["x", "true", "gp_mean", "gp_lo", "gp_hi", "mtgp_mean", "mtgp_lo", "mtgp_hi"]
            )
            for i in range(series["x"].size):
                writer.writerow(
                    [
                        _fmt(series["x"][i]),
                        _fmt(series["true"][i]),
                        _fmt(series["gp_mean"][i]),
                        _fmt(series["gp_mean"][i] - 2.0 * series["gp_stddev"][i]),
                        _fmt(series["gp_mean"][i] + 2.0 * series["gp_stddev"][i]),
                        _fmt(series["mtgp_mean"][i]),
                        _fmt(series["mtgp_mean"][i] - 2.0 * series["mtgp_stddev"][i]),
                        _fmt(series["mtgp_mean"][i] + 2.0 * series["mtgp_stddev"][i]),
                    ]
                )
    return rows_path


def cmd_benchmark(args) -> int:
    study, train_config = _parse_study_config(args)
    result = benchmark.run_study(study, train_config)
    _write_study_files(result, args.out)
    print(benchmark.format_study_table(result))
    print(f"artifacts written to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------


def cmd_check(args) -> int:
    results = run_self_checks(seed=args.seed if args.seed is not None else 0)
    failed = 0
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(f"{status}  {res.name}: {res.detail}")
        failed += 0 if res.passed else 1
    if failed:
        print(f"{failed} of {len(results)} checks failed")
        return 1
    print(f"all {len(results)} checks passed")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mtgp",
        description="Single- and multi-task Gaussian process regression toolkit",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="fit a model from a task-data CSV")
    p_train.add_argument("--data", required=True, help="task-data CSV (x1..xP, task, y)")
    p_train.add_argument("--config", required=True, help="run-config JSON")
    p_train.add_argument("--out", help="output directory for model.json and metrics.json")
    p_train.add_argument("--seed", type=int, help="override the config seed")
    p_train.add_argument("--trace", help="write per-iteration JSONL trace here")
    p_train.set_defaults(func=cmd_train)

    p_pred = sub.add_parser("predict", help="predict from a saved model")
    p_pred.add_argument("--model", required=True, help="model.json path")
    p_pred.add_argument("--data", required=True, help="query CSV (x1..xP, task)")
    p_pred.add_argument("--out", required=True, help="output predictions CSV")
    p_pred.set_defaults(func=cmd_predict)

    p_bench = sub.add_parser("benchmark", help="run the two-task Forrester study")
    p_bench.add_argument("--config", help="study-config JSON (optional)")
    p_bench.add_argument("--out", required=True, help="output directory")
    p_bench.add_argument("--correlations", help="comma-separated targets, e.g. 0.89,0.53")
    p_bench.add_argument("--sizes", help="semicolon-separated pairs, e.g. 5,5;5,20")
    p_bench.add_argument("--replicates", type=int, help="replicates per cell")
    p_bench.add_argument("--seed", type=int, help="study seed")
    p_bench.set_defaults(func=cmd_benchmark)

    p_check = sub.add_parser("check", help="run the embedded verification suite")
    p_check.add_argument("--seed", type=int, help="seed for the randomized checks")
    p_check.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ShapeError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MTGPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def entrypoint():
    sys.exit(main())
