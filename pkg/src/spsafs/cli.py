"""Config-driven benchmark harness: ``run``, ``rank``, ``regress``, ``validate-config``.

Invoke with ``python3 -m spsafs <command> --config FILE``. The config is an
INI file; every key can be overridden with ``--set section.key=value``.
Exit codes: 0 success, 1 some cells failed, 2 configuration or input error.

Seeds. For repetition ``r`` the dataset (when synthetic) uses
``derive_seed(root, "data", r)``, each method's optimizer uses
``derive_seed(root, "method:<name>", r)`` and every reported loss is
measured with the shared evaluation seed ``derive_seed(root, "eval", r)``
so rows of one repetition are comparable.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines, engine
from .data_io import CsvSchema, DataError, SyntheticSpec, derive_seed, load_csv, make_synthetic
from .evaluators import CvConfig, CvEvaluator, ModelSpec, cv_loss
from .types import CLASSIFICATION, REGRESSION, Dataset, FeatureMask

SCHEMA_VERSION = 1
OUT_ENV = "SPSAFS_OUT"
TRACE_COLUMNS = ("k", "y_plus", "y_minus", "gain_used", "running_best_loss", "mask_plus_hex", "mask_minus_hex")
RANK_COLUMNS = ("method", "m", "model", "mean_loss", "sd")
REGRESS_COLUMNS = ("method", "percent", "subset_size", "mean_loss", "sd")
TABLE_COLUMNS = ("method", "repetitions", "failures", "mean_loss", "sd_loss", "mean_evaluations", "mean_runtime")

OPTIMIZERS = ("spsafs", "bspsa")
SEARCHES = ("sfs", "sbs", "sffs", "sfbs")
RANKERS = ("correlation", "relief")
METHODS = OPTIMIZERS + SEARCHES + RANKERS + ("exhaustive", "full")
MODELS = ("knn", "gnb", "cart", "ols")

SUMMARY_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "method", "repetition", "status"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "method": {"enum": list(METHODS)},
        "repetition": {"type": "integer", "minimum": 0},
        "status": {"enum": ["ok", "failed"]},
        "error": {"type": "string"},
        "p": {"type": "integer", "minimum": 1},
        "method_seed": {"type": "integer", "minimum": 0},
        "eval_seed": {"type": "integer", "minimum": 0},
        "mask_hex": {"type": "string", "pattern": "^[0-9a-f]+$"},
        "selected": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "loss": {"type": "number"},
        "best_mask_hex": {"type": "string", "pattern": "^[0-9a-f]+$"},
        "best_loss": {"type": "number"},
        "evaluations": {"type": "integer", "minimum": 0},
        "iterations": {"type": "integer", "minimum": 0},
        "truncated": {"type": "boolean"},
    },
    "additionalProperties": False,
}

DEFAULTS = {
    "experiment": {"methods": "spsafs, full", "repetitions": "10", "root_seed": "0", "output_dir": "", "jobs": "1"},
    "dataset": {
        "source": "synthetic",
        "path": "",
        "target": "y",
        "task": CLASSIFICATION,
        "delimiter": ",",
        "has_header": "true",
        "id_columns": "",
        "missing": "reject",
        "n": "200",
        "p": "10",
        "informative": "0, 1, 2",
        "noise_sd": "0.0",
        "noise_correlation": "0.0",
        "class_sep": "0.5",
        "seed": "",
    },
    "model": {"kind": "knn", "k": "5", "max_depth": "5", "min_leaf": "1"},
    "cv": {"folds": "5", "stratified": "true"},
    "method.spsafs": {
        "iterations": "300",
        "c": "0.05",
        "smoothing_window": "2",
        "gradient_window": "all",
        "bb_variant": "ratio_gg",
        "gain_bounds": "",
        "a": "0.75",
        "A": "100",
        "alpha": "0.6",
    },
    "method.bspsa": {"iterations": "300", "c": "0.05", "a": "0.75", "A": "100", "alpha": "0.6"},
    "method.search": {"max_evaluations": "1000000000", "target_subset_size": ""},
    "method.relief": {"num_samples": ""},
    "rank": {"m_list": "5, 10, 15, 20, 25, 30, 35, 40", "models": "", "methods": ""},
    "regress": {"percentages": "10, 20, 30, 40, 50, 60, 70, 80, 90, 100", "methods": ""},
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending ``section.key``."""


@dataclass(frozen=True)
class ExperimentConfig:
    methods: tuple[str, ...]
    repetitions: int
    root_seed: int
    output_dir: Path
    jobs: int
    dataset: CsvSchema | SyntheticSpec
    dataset_path: Path | None
    model: ModelSpec
    cv: CvConfig
    spsafs: engine.SpsaFsConfig
    bspsa: engine.MonotoneGainConfig
    bspsa_iterations: int
    search: baselines.SearchBudget
    relief_samples: int | None
    m_list: tuple[int, ...] = ()
    rank_models: tuple[ModelSpec, ...] = ()
    rank_methods: tuple[str, ...] = ()
    percentages: tuple[int, ...] = ()
    regress_methods: tuple[str, ...] = ()
    raw: dict = field(default_factory=dict, compare=False)


# ---------------------------------------------------------------- config


def read_config(path, overrides=()) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys are case-sensitive ("A" vs "a")
    parser.read_dict(DEFAULTS)
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, option = key.strip().rpartition(".")
        if not sep or not dot:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, option, value.strip())
    for section in parser.sections():
        if section not in DEFAULTS:
            raise ConfigError(f"unknown section [{section}]")
        for option in parser[section]:
            if option not in DEFAULTS[section]:
                raise ConfigError(f"unknown key {section}.{option}")
    return parser


def _get(parser, section, key, kind=str, *, optional=False):
    text = parser.get(section, key).strip()
    if optional and text == "":
        return None
    try:
        if kind is bool:
            return parser.getboolean(section, key)
        return kind(text)
    except ValueError:
        raise ConfigError(f"{section}.{key}: cannot read {text!r} as {kind.__name__}") from None


def _list(parser, section, key, kind=str):
    text = parser.get(section, key).strip()
    if not text:
        return ()
    try:
        return tuple(kind(t.strip()) for t in text.split(",") if t.strip())
    except ValueError:
        raise ConfigError(f"{section}.{key}: cannot read {text!r} as a list of {kind.__name__}") from None


def _model(kind: str, parser, where: str) -> ModelSpec:
    if kind not in MODELS:
        raise ConfigError(f"{where}: unknown model {kind!r}, expected one of {MODELS}")
    return ModelSpec(
        kind,
        k=_get(parser, "model", "k", int),
        max_depth=_get(parser, "model", "max_depth", int),
        min_leaf=_get(parser, "model", "min_leaf", int),
    )


def _check_methods(methods, where, allowed=METHODS):
    if not methods:
        raise ConfigError(f"{where}: at least one method is required")
    for m in methods:
        if m not in allowed:
            raise ConfigError(f"{where}: unknown method {m!r}, expected one of {allowed}")


def build_config(parser: configparser.ConfigParser, base_dir: Path = Path(".")) -> ExperimentConfig:
    """Validate a parsed config. Errors name the ``section.key`` at fault."""
    methods = _list(parser, "experiment", "methods")
    _check_methods(methods, "experiment.methods")
    reps = _get(parser, "experiment", "repetitions", int)
    if reps < 1:
        raise ConfigError("experiment.repetitions: must be >= 1")
    jobs = _get(parser, "experiment", "jobs", int)
    if jobs < 1:
        raise ConfigError("experiment.jobs: must be >= 1")
    root_seed = _get(parser, "experiment", "root_seed", int)
    if root_seed < 0:
        raise ConfigError("experiment.root_seed: must be >= 0")
    out = parser.get("experiment", "output_dir").strip() or os.environ.get(OUT_ENV, "") or "spsafs-out"

    task = parser.get("dataset", "task").strip()
    source = parser.get("dataset", "source").strip()
    dataset_path = None
    try:
        if source == "csv":
            path = parser.get("dataset", "path").strip()
            if not path:
                raise ConfigError("dataset.path: required when dataset.source = csv")
            dataset_path = Path(path) if Path(path).is_absolute() else base_dir / path
            dataset = CsvSchema(
                target_column=parser.get("dataset", "target").strip(),
                task_kind=task,
                id_columns=_list(parser, "dataset", "id_columns"),
                delimiter=parser.get("dataset", "delimiter") or ",",
                has_header=_get(parser, "dataset", "has_header", bool),
                missing=parser.get("dataset", "missing").strip(),
            )
        elif source == "synthetic":
            p = _get(parser, "dataset", "p", int)
            dataset = SyntheticSpec(
                n=_get(parser, "dataset", "n", int),
                p=p,
                informative=_list(parser, "dataset", "informative", int),
                noise_sd=_get(parser, "dataset", "noise_sd", float),
                task_kind=task,
                seed=_get(parser, "dataset", "seed", int, optional=True) or 0,
                noise_correlation=_get(parser, "dataset", "noise_correlation", float),
                class_sep=_get(parser, "dataset", "class_sep", float),
            )
            if dataset.n < 2 or p < 1:
                raise ConfigError("dataset.n / dataset.p: need n >= 2 and p >= 1")
            if not dataset.informative or not all(0 <= j < p for j in dataset.informative):
                raise ConfigError(f"dataset.informative: indices must lie in [0, {p})")
        else:
            raise ConfigError(f"dataset.source: expected 'csv' or 'synthetic', got {source!r}")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"dataset: {exc}") from None

    model = _model(parser.get("model", "kind").strip(), parser, "model.kind")
    if (model.kind == "ols") != (task == REGRESSION):
        raise ConfigError(f"model.kind: {model.kind!r} does not fit a {task} dataset")
    folds = _get(parser, "cv", "folds", int)
    if folds < 1:
        raise ConfigError("cv.folds: must be >= 1")
    cv = CvConfig(folds=folds, stratified=_get(parser, "cv", "stratified", bool), shuffle_seed_base=root_seed)

    s = "method.spsafs"
    window = parser.get(s, "gradient_window").strip()
    variant = parser.get(s, "bb_variant").strip()
    try:
        fallback = engine.MonotoneGainConfig(
            a=_get(parser, s, "a", float), A=_get(parser, s, "A", float),
            alpha=_get(parser, s, "alpha", float), c=_get(parser, s, "c", float),
        )
        spsafs = engine.SpsaFsConfig(
            c=_get(parser, s, "c", float),
            iterations=_get(parser, s, "iterations", int),
            smoothing_window=_get(parser, s, "smoothing_window", int),
            gradient_window=engine.GradientWindow(None if window == "all" else _get(parser, s, "gradient_window", int)),
            bb_variant=None if variant in ("none", "off") else variant,
            fallback=fallback,
            gain_bounds=_list(parser, s, "gain_bounds", float) or None,
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{s}: {exc}") from None
    b = "method.bspsa"
    try:
        bspsa = engine.MonotoneGainConfig(
            a=_get(parser, b, "a", float), A=_get(parser, b, "A", float),
            alpha=_get(parser, b, "alpha", float), c=_get(parser, b, "c", float),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{b}: {exc}") from None
    bspsa_iterations = _get(parser, b, "iterations", int)
    if bspsa_iterations < 1:
        raise ConfigError(f"{b}.iterations: must be >= 1")
    try:
        search = baselines.SearchBudget(
            _get(parser, "method.search", "max_evaluations", int),
            _get(parser, "method.search", "target_subset_size", int, optional=True),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"method.search: {exc}") from None
    relief_samples = _get(parser, "method.relief", "num_samples", int, optional=True)

    if task == REGRESSION and "relief" in methods:
        raise ConfigError("experiment.methods: relief needs a classification dataset")
    if isinstance(dataset, SyntheticSpec) and "exhaustive" in methods and dataset.p > baselines.MAX_EXHAUSTIVE_P:
        raise ConfigError(f"experiment.methods: exhaustive needs p <= {baselines.MAX_EXHAUSTIVE_P}")

    m_list = _list(parser, "rank", "m_list", int)
    if any(m < 1 for m in m_list):
        raise ConfigError("rank.m_list: entries must be >= 1")
    rank_models = tuple(_model(k, parser, "rank.models") for k in _list(parser, "rank", "models"))
    for rm in rank_models:
        if (rm.kind == "ols") != (task == REGRESSION):
            raise ConfigError(f"rank.models: {rm.kind!r} does not fit a {task} dataset")
    rank_methods = _list(parser, "rank", "methods") or methods
    _check_methods(rank_methods, "rank.methods")
    percentages = _list(parser, "regress", "percentages", int)
    if any(not 0 < q <= 100 for q in percentages):
        raise ConfigError("regress.percentages: entries must lie in (0, 100]")
    regress_methods = _list(parser, "regress", "methods") or methods
    _check_methods(regress_methods, "regress.methods")

    return ExperimentConfig(
        methods=methods, repetitions=reps, root_seed=root_seed, output_dir=Path(out), jobs=jobs,
        dataset=dataset, dataset_path=dataset_path, model=model, cv=cv, spsafs=spsafs, bspsa=bspsa,
        bspsa_iterations=bspsa_iterations, search=search, relief_samples=relief_samples,
        m_list=m_list, rank_models=rank_models, rank_methods=rank_methods,
        percentages=percentages, regress_methods=regress_methods,
        raw={sec: dict(parser[sec]) for sec in parser.sections()},
    )


def effective_config_text(parser: configparser.ConfigParser) -> str:
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def load_dataset(cfg: ExperimentConfig, repetition: int = 0) -> Dataset:
    """Materialize the dataset for one repetition (CSV data is the same every time)."""
    if isinstance(cfg.dataset, CsvSchema):
        return load_csv(cfg.dataset_path, cfg.dataset)
    spec = cfg.dataset
    if not cfg.raw.get("dataset", {}).get("seed", "").strip():
        spec = dataclasses.replace(spec, seed=derive_seed(cfg.root_seed, "data", repetition))
    return make_synthetic(spec)


def method_seed(cfg: ExperimentConfig, method: str, repetition: int) -> int:
    return derive_seed(cfg.root_seed, f"method:{method}", repetition)


def eval_seed(cfg: ExperimentConfig, repetition: int) -> int:
    return derive_seed(cfg.root_seed, "eval", repetition)


# ---------------------------------------------------------------- cells


@dataclass
class CellResult:
    method: str
    repetition: int
    summary: dict
    trace_rows: list | None = None
    order: list | None = None  # feature ranking, best first
    wall_time: float = 0.0


def _trace_rows(trace) -> list[tuple]:
    best = trace.running_best()
    return [
        (r.k, repr(r.y_plus), repr(r.y_minus), repr(r.gain_used), repr(float(b)), r.mask_plus.to_hex(), r.mask_minus.to_hex())
        for r, b in zip(trace.records, best)
    ]


def run_cell(cfg: ExperimentConfig, dataset: Dataset, method: str, repetition: int, want_order: bool = False) -> CellResult:
    """Run one (method, repetition) cell. Never raises; failures go in the summary."""
    seed = method_seed(cfg, method, repetition)
    eseed = eval_seed(cfg, repetition)
    summary = {
        "schema_version": SCHEMA_VERSION, "method": method, "repetition": repetition,
        "status": "ok", "p": dataset.p, "method_seed": seed, "eval_seed": eseed,
    }
    started = time.perf_counter()
    rows = order = None
    try:
        ev = CvEvaluator(dataset, cfg.model, cfg.cv)
        p = dataset.p
        if method in OPTIMIZERS:
            if method == "spsafs":
                trace = engine.run_spsafs(ev, p, cfg.spsafs, seed=seed)
            else:
                trace = engine.run_bspsa(ev, p, cfg.bspsa, cfg.bspsa_iterations, seed=seed)
            mask = trace.final_mask
            if mask.is_empty:
                mask = trace.best_mask
            rows = _trace_rows(trace)
            order = engine.rank_features(trace, p)
            summary.update(best_mask_hex=trace.best_mask.to_hex(), best_loss=trace.best_loss, iterations=trace.iterations_run)
        elif method in SEARCHES:
            budget = cfg.search
            if want_order:
                # a ranking needs every feature placed, so run to the far end
                budget = baselines.SearchBudget(budget.max_evaluations, p if method in ("sfs", "sffs") else 1)
            res = getattr(baselines, method)(ev, p, budget, noise_seed=eseed)
            mask, order = res.mask, res.order
            summary.update(best_mask_hex=res.mask.to_hex(), best_loss=res.loss, truncated=res.truncated)
        elif method in RANKERS:
            if method == "correlation":
                ranking = baselines.rank_correlation(dataset)
            else:
                ranking = baselines.rank_relief(dataset, cfg.relief_samples, seed=seed)
            order = list(ranking.order)
            size = cfg.search.target_subset_size or max(1, round(p / 2))
            mask = FeatureMask.from_indices(ranking.top(min(size, p)), p)
        elif method == "exhaustive":
            res = baselines.exhaustive_best(ev, p, noise_seed=eseed)
            mask = res.mask
            summary.update(best_mask_hex=res.mask.to_hex(), best_loss=res.loss)
        else:  # full
            mask = FeatureMask.full(p)
            order = list(range(p))
        if order is not None:
            order = list(order) + [j for j in range(p) if j not in order]
        calls = ev.calls
        loss = cv_loss(dataset, mask, cfg.model, cfg.cv, eseed)
        summary.update(mask_hex=mask.to_hex(), selected=list(mask.indices), loss=loss, evaluations=calls)
    except Exception as exc:  # recorded per cell, the run continues
        summary = {k: summary[k] for k in ("schema_version", "method", "repetition", "p", "method_seed", "eval_seed")}
        summary.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        rows = order = None
    wall = time.perf_counter() - started
    return CellResult(method, repetition, summary, rows, order if want_order else None, wall)


def _cell_job(args):
    cfg, method, repetition, want_order = args
    return run_cell(cfg, load_dataset(cfg, repetition), method, repetition, want_order)


def run_cells(cfg: ExperimentConfig, methods, want_order: bool = False) -> list[CellResult]:
    jobs = [(cfg, m, r, want_order) for r in range(cfg.repetitions) for m in methods]
    if cfg.jobs == 1:
        datasets = {}
        out = []
        for c, m, r, w in jobs:
            if r not in datasets:
                datasets = {r: load_dataset(cfg, r)}
            out.append(run_cell(cfg, datasets[r], m, r, w))
        return out
    with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
        return list(pool.map(_cell_job, jobs))


# ---------------------------------------------------------------- writers


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _mean_sd(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return math.nan, math.nan
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), sd


def _fmt(x: float) -> str:
    return repr(float(x))


def write_run_outputs(cfg: ExperimentConfig, results: list[CellResult]) -> None:
    out = cfg.output_dir
    _write_json(out / "summary.schema.json", SUMMARY_SCHEMA)
    timing_rows = []
    for res in results:
        stem = f"{res.method}_rep{res.repetition}"
        _write_json(out / "summaries" / f"{stem}.json", res.summary)
        if res.trace_rows is not None:
            _write_csv(out / "traces" / f"{stem}.csv", TRACE_COLUMNS, res.trace_rows)
        timing_rows.append((res.method, res.repetition, _fmt(res.wall_time)))
    _write_csv(out / "timings.csv", ("method", "repetition", "wall_time"), timing_rows)
    table = []
    for method in cfg.methods:
        cells = [r for r in results if r.method == method]
        ok = [r for r in cells if r.summary["status"] == "ok"]
        mean, sd = _mean_sd([r.summary["loss"] for r in ok])
        evals, _ = _mean_sd([r.summary["evaluations"] for r in ok])
        runtime, _ = _mean_sd([r.wall_time for r in ok])
        table.append((method, len(cells), len(cells) - len(ok), _fmt(mean), _fmt(sd), _fmt(evals), _fmt(runtime)))
    _write_csv(out / "table.csv", TABLE_COLUMNS, table)


# ---------------------------------------------------------------- commands


def cmd_run(cfg: ExperimentConfig) -> int:
    results = run_cells(cfg, cfg.methods)
    write_run_outputs(cfg, results)
    return 1 if any(r.summary["status"] != "ok" for r in results) else 0


def _subset_losses(cfg, results, sizes_for, models, method_list):
    """Evaluate top-m masks from each cell's feature order; returns long rows."""
    failed = False
    by_key: dict[tuple, list[float]] = {}
    datasets = {}
    for res in results:
        if res.summary["status"] != "ok" or res.order is None:
            failed = True
            continue
        r = res.repetition
        if r not in datasets:
            datasets = {r: load_dataset(cfg, r)}
        ds = datasets[r]
        for size_key, m in sizes_for(ds.p):
            # the full baseline is a flat reference line at every size
            mask = FeatureMask.full(ds.p) if res.method == "full" else FeatureMask.from_indices(res.order[:m], ds.p)
            for model in models:
                loss = cv_loss(ds, mask, model, cfg.cv, eval_seed(cfg, r))
                by_key.setdefault((res.method, size_key, model.label()), []).append(loss)
    rows = []
    for method in method_list:
        for size_key, _ in sizes_for(_p_of(cfg)):
            for model in models:
                losses = by_key.get((method, size_key, model.label()))
                if losses:
                    mean, sd = _mean_sd(losses)
                    rows.append((method, size_key, model.label(), _fmt(mean), _fmt(sd)))
    return rows, failed


def _p_of(cfg: ExperimentConfig) -> int:
    if isinstance(cfg.dataset, SyntheticSpec):
        return cfg.dataset.p
    return load_dataset(cfg).p


def cmd_rank(cfg: ExperimentConfig) -> int:
    """Top-m subsets from each method's feature ordering, scored by every rank model."""
    p = _p_of(cfg)
    bad = [m for m in cfg.m_list if m > p]
    if not cfg.m_list:
        raise ConfigError("rank.m_list: at least one m is required")
    good = [m for m in cfg.m_list if m <= p]
    for m in bad:
        print(f"rank.m_list: m = {m} exceeds p = {p}; entry skipped", file=sys.stderr)
    models = cfg.rank_models or (cfg.model,)
    methods = [m for m in cfg.rank_methods if m != "exhaustive"]
    results = run_cells(cfg, methods, want_order=True)
    rows, failed = _subset_losses(cfg, results, lambda _p: [(m, m) for m in good], models, methods)
    _write_csv(cfg.output_dir / "rank.csv", RANK_COLUMNS, rows)
    return 1 if failed or bad else 0


def cmd_regress(cfg: ExperimentConfig) -> int:
    """1 - R^2 of each method's top subsets at percentages of p."""
    if cfg.model.kind != "ols":
        raise ConfigError("model.kind: regress needs the ols model")
    if not cfg.percentages:
        raise ConfigError("regress.percentages: at least one percentage is required")
    methods = [m for m in cfg.regress_methods if m != "exhaustive"]
    results = run_cells(cfg, methods, want_order=True)

    def sizes(p):
        return [(q, max(1, math.ceil(q * p / 100))) for q in cfg.percentages]

    rows, failed = _subset_losses(cfg, results, sizes, (cfg.model,), methods)
    p = _p_of(cfg)
    size_of = dict(sizes(p))
    rows = [(m, q, p if m == "full" else size_of[q], mean, sd) for m, q, _, mean, sd in rows]
    _write_csv(cfg.output_dir / "regress.csv", REGRESS_COLUMNS, rows)
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="python3 -m spsafs", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "run every method x repetition and write traces, summaries and a table"),
        ("rank", "score top-m subsets of each method's feature ranking"),
        ("regress", "1 - R^2 curves over subset-size percentages"),
        ("validate-config", "check a config and exit"),
    ):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", type=Path, help="INI config file")
        sp.add_argument("--seed", type=int, help="override experiment.root_seed")
        sp.add_argument("--jobs", type=int, help="override experiment.jobs")
        sp.add_argument("--out", type=Path, help=f"output directory (default: experiment.output_dir, then ${OUT_ENV})")
        sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override a config key")
        sp.add_argument("--print-effective-config", action="store_true", help="print the merged config first")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"experiment.root_seed={args.seed}")
    if args.jobs is not None:
        overrides.append(f"experiment.jobs={args.jobs}")
    if args.out is not None:
        overrides.append(f"experiment.output_dir={args.out}")
    try:
        parser = read_config(args.config, overrides)
        if args.print_effective_config:
            sys.stdout.write(effective_config_text(parser))
        base = args.config.parent if args.config is not None else Path(".")
        cfg = build_config(parser, base)
        if cfg.dataset_path is not None and not cfg.dataset_path.is_file():
            raise FileNotFoundError(f"dataset file not found: {cfg.dataset_path}")
        if args.command == "validate-config":
            print("config ok")
            return 0
        if isinstance(cfg.dataset, CsvSchema):
            ds = load_dataset(cfg)
            if "exhaustive" in cfg.methods and ds.p > baselines.MAX_EXHAUSTIVE_P:
                raise ConfigError(f"experiment.methods: exhaustive needs p <= {baselines.MAX_EXHAUSTIVE_P}")
            if ds.task_kind == REGRESSION and "relief" in cfg.methods:
                raise ConfigError("experiment.methods: relief needs a classification dataset")
        command = {"run": cmd_run, "rank": cmd_rank, "regress": cmd_regress}[args.command]
        return command(cfg)
    except (ConfigError, DataError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
