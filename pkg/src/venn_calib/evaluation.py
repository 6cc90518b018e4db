"""Losses, aggregate metrics and the repeated random-split experiment."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import calibrators
from .data_io import PRNG_NAME, SHUFFLE_VERSION, EncodedDataset, derive_seed, impute, split_indices, train_size
from .errors import ConfigError, DatasetTooSmall, EmptyInput, LengthMismatch, SingleClassDataset
from .merging import get_merge
from .scoring import make_classifier, train_or_prior

METHODS = ("RAW", "DIR", "VA", "SVA")
REPORT_SCHEMA_ID = "venn-calib-report/1"


def log_loss(p, y) -> float:
    """-ln(1 - p) for y = 0, -ln p for y = 1; infinite for a confident miss."""
    q = float(p) if y == 1 else 1.0 - float(p)
    return math.inf if q <= 0 else -math.log(q)


def square_loss(p, y) -> float:
    return (y - float(p)) ** 2


def _check_lengths(preds, labels):
    if len(preds) != len(labels):
        raise LengthMismatch(f"{len(preds)} predictions for {len(labels)} labels")
    if len(preds) == 0:
        raise EmptyInput("no predictions")


def mle(preds: Sequence, labels: Sequence) -> float:
    """Mean log error; +inf as soon as one term is."""
    _check_lengths(preds, labels)
    return sum(log_loss(p, y) for p, y in zip(preds, labels)) / len(preds)


def rmse(preds: Sequence, labels: Sequence) -> float:
    _check_lengths(preds, labels)
    return math.sqrt(sum(square_loss(p, y) for p, y in zip(preds, labels)) / len(preds))


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = "dataset"
    classifier: str = "logistic"
    classifier_params: dict = field(default_factory=dict)
    methods: tuple[str, ...] = ("RAW", "DIR", "SVA")
    merge: str = "log"
    repeats: int = 100
    va_repeats: int = 16
    train_fraction: float = 2 / 3
    master_seed: int = 0
    classifier_specific_splits: bool = False

    def __post_init__(self):
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}; choose from {METHODS}")
        if self.repeats < 1 or self.va_repeats < 1:
            raise ConfigError("repeats must be positive")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must lie in (0, 1)")
        get_merge(self.merge)
        make_classifier(self.classifier, **self.classifier_params)

    def repeats_for(self, method: str) -> int:
        return self.va_repeats if method == "VA" else self.repeats

    def seed_for(self, method: str, r: int) -> int:
        # VA draws its splits from its own stream; the others share one.
        parts = ["va" if method == "VA" else "main", r]
        if self.classifier_specific_splits:
            parts.append(self.classifier)
        return derive_seed(self.master_seed, *parts)


@dataclass
class MethodResult:
    method: str
    repeats: int
    mle: list[float]
    rmse: list[float]
    seeds: list[int]
    boundary_predictions: int = 0  # final predictions equal to 0 or 1
    pair_boundary: int = 0  # VA/SVA pairs with p0 == 1 or p1 == 0
    clamped: int = 0  # RAW scores clamped into [0, 1]

    @property
    def inf_count(self) -> int:
        return sum(1 for v in self.mle if math.isinf(v))

    @property
    def mean_mle(self) -> float:
        return sum(self.mle) / len(self.mle)

    @property
    def mean_rmse(self) -> float:
        return sum(self.rmse) / len(self.rmse)


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    n_observations: int
    n_train: int
    n_test: int
    results: dict[str, MethodResult]

    def to_dict(self) -> dict:
        cfg = asdict(self.config)
        cfg["methods"] = list(self.config.methods)
        return {
            "schema": REPORT_SCHEMA_ID,
            "config": cfg,
            "prng": {"name": PRNG_NAME, "shuffle": SHUFFLE_VERSION, "seed_derivation": "blake2b-64"},
            "n_observations": self.n_observations,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "methods": {
                name: {
                    "repeats": res.repeats,
                    "mean_mle": _num(res.mean_mle),
                    "mean_rmse": res.mean_rmse,
                    "inf_count": res.inf_count,
                    "boundary_predictions": res.boundary_predictions,
                    "pair_boundary": res.pair_boundary,
                    "clamped": res.clamped,
                    "mle": [_num(v) for v in res.mle],
                    "rmse": res.rmse,
                    "seeds": res.seeds,
                }
                for name, res in self.results.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["method", "metric", "mean", "repeats", "inf_count"])
        for name, res in self.results.items():
            writer.writerow([name, "MLE", repr(res.mean_mle), res.repeats, res.inf_count])
            writer.writerow([name, "RMSE", repr(res.mean_rmse), res.repeats, 0])
        return buf.getvalue()


def _num(value: float):
    # JSON has no infinity literal
    return "inf" if math.isinf(value) else value


REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema", "config", "prng", "n_observations", "n_train", "n_test", "methods"],
    "properties": {
        "schema": {"const": REPORT_SCHEMA_ID},
        "config": {
            "type": "object",
            "required": ["dataset", "classifier", "methods", "merge", "repeats", "va_repeats",
                         "train_fraction", "master_seed"],
        },
        "prng": {"type": "object", "required": ["name", "shuffle"]},
        "n_observations": {"type": "integer", "minimum": 3},
        "n_train": {"type": "integer", "minimum": 1},
        "n_test": {"type": "integer", "minimum": 1},
        "methods": {
            "type": "object",
            "propertyNames": {"enum": list(METHODS)},
            "additionalProperties": {
                "type": "object",
                "required": ["repeats", "mean_mle", "mean_rmse", "inf_count", "mle", "rmse", "seeds"],
                "properties": {
                    "repeats": {"type": "integer", "minimum": 1},
                    "mean_mle": {"anyOf": [{"type": "number", "minimum": 0}, {"const": "inf"}]},
                    "mean_rmse": {"type": "number", "minimum": 0, "maximum": 1},
                    "inf_count": {"type": "integer", "minimum": 0},
                    "mle": {"type": "array",
                            "items": {"anyOf": [{"type": "number", "minimum": 0}, {"const": "inf"}]}},
                    "rmse": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
                    "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                },
            },
        },
    },
}


def _as_dataset(data) -> EncodedDataset:
    if isinstance(data, EncodedDataset):
        return data
    return EncodedDataset.from_observations(list(data))


def _repeat(cfg: ExperimentConfig, data: EncodedDataset, methods: tuple[str, ...], r: int) -> dict:
    """One split: fit each method on the training part and score the test part."""
    seed = cfg.seed_for(methods[0], r)
    train_idx, test_idx = split_indices(len(data), seed, cfg.train_fraction)
    ds = impute(data, train_idx) if data.has_missing else data
    train = ds.observations(train_idx)
    X_test = ds.X[np.asarray(test_idx, dtype=int)]
    y_test = [int(v) for v in ds.y[np.asarray(test_idx, dtype=int)]]
    classifier = make_classifier(cfg.classifier, **cfg.classifier_params)
    merge = get_merge(cfg.merge)

    out = {}
    fn = None
    if {"RAW", "DIR", "SVA"} & set(methods):
        fn = train_or_prior(classifier, train)
    for method in methods:
        pair_boundary = clamped = 0
        if method == "RAW":
            scores = fn.score_many(X_test)
            clamped = int(np.sum((scores < 0) | (scores > 1)))
            preds = [float(s) for s in np.clip(scores, 0.0, 1.0)]
        elif method == "DIR":
            preds = [float(p) for p in calibrators.dir_predict_many(calibrators.dir_from_scoring(fn, train), X_test)]
        else:
            if method == "SVA":
                pairs = calibrators.sva_predict_many(calibrators.sva_from_scoring(fn, train), X_test)
            else:
                pairs = [calibrators.va_predict(classifier, train, x) for x in X_test]
            pair_boundary = sum(1 for p in pairs if p.p0 == 1 or p.p1 == 0)
            preds = [merge(p) for p in pairs]
        out[method] = {
            "mle": mle(preds, y_test),
            "rmse": rmse(preds, y_test),
            "seed": seed,
            "boundary": sum(1 for p in preds if p in (0.0, 1.0)),
            "pair_boundary": pair_boundary,
            "clamped": clamped,
        }
    return out


def _repeat_task(args):
    return _repeat(*args)


def run_experiment(cfg: ExperimentConfig, data, jobs: int = 1) -> ExperimentReport:
    """Repeat random train/test splits and collect MLE/RMSE per method.

    RAW, DIR and SVA share one split stream (and, within a repeat, one
    trained scorer); VA uses its own stream and repeat count. The report is
    a pure function of ``(cfg, data)`` whatever ``jobs`` is.
    """
    data = _as_dataset(data)
    n = len(data)
    if n < 3:
        raise DatasetTooSmall(f"need at least 3 observations, got {n}")
    if len(set(data.y.tolist())) < 2:
        raise SingleClassDataset("dataset has a single label")
    groups = [m for m in ("RAW", "DIR", "SVA") if m in cfg.methods]
    tasks = []
    if groups:
        tasks += [(cfg, data, tuple(groups), r) for r in range(cfg.repeats)]
    if "VA" in cfg.methods:
        tasks += [(cfg, data, ("VA",), r) for r in range(cfg.va_repeats)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_repeat_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        outcomes = [_repeat_task(t) for t in tasks]

    results: dict[str, MethodResult] = {}
    for method in cfg.methods:
        per = [o[method] for o in outcomes if method in o]
        results[method] = MethodResult(
            method=method,
            repeats=len(per),
            mle=[p["mle"] for p in per],
            rmse=[p["rmse"] for p in per],
            seeds=[p["seed"] for p in per],
            boundary_predictions=sum(p["boundary"] for p in per),
            pair_boundary=sum(p["pair_boundary"] for p in per),
            clamped=sum(p["clamped"] for p in per),
        )
    m = train_size(n, cfg.train_fraction)
    return ExperimentReport(cfg, n, m, n - m, results)


def best_method(report: ExperimentReport, metric: str = "MLE") -> str:
    key = (lambda r: r.mean_mle) if metric == "MLE" else (lambda r: r.mean_rmse)
    return min(report.results.values(), key=key).method


def format_summary(reports: Sequence[ExperimentReport], metric: str = "MLE") -> str:
    """Text table: one row per dataset, one column per classifier x method,
    plus a column naming the best column of the row."""
    columns: list[tuple[str, str]] = []
    rows: dict[str, dict[tuple[str, str], float]] = {}
    for rep in reports:
        for name, res in rep.results.items():
            col = (rep.config.classifier, name)
            if col not in columns:
                columns.append(col)
            value = res.mean_mle if metric == "MLE" else res.mean_rmse
            rows.setdefault(rep.config.dataset, {})[col] = value
    titles = [f"{c}/{m}" for c, m in columns]
    width = max([10] + [len(t) for t in titles])
    lines = [f"{metric}", "dataset".ljust(14) + "".join(t.rjust(width + 1) for t in titles) + "  best"]
    for dataset, values in rows.items():
        cells = []
        for col in columns:
            v = values.get(col)
            cells.append(("-" if v is None else ("inf" if math.isinf(v) else f"{v:.4f}")).rjust(width + 1))
        present = {c: v for c, v in values.items()}
        best = min(present, key=present.get)
        lines.append(dataset.ljust(14) + "".join(cells) + f"  {best[0]}/{best[1]}")
    return "\n".join(lines) + "\n"
