"""Command-line entry point: ``venn-calib {pava,calibrate,experiment,validity}``.

Exit codes: 0 success (or the checked property held), 1 property failed,
2 usage/config error, 3 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import calibrators
from .data_io import BUNDLED, DatasetSpec, bundled_spec, derive_seed, encode, impute, load_csv, read_key_values, split_indices
from .errors import ConfigError, DataError, DatasetTooSmall, InvalidLabel, InvalidScore, NonFiniteFeature, SingleClassDataset, VennCalibError
from .evaluation import METHODS, ExperimentConfig, format_summary, run_experiment
from .isotonic import ScoredLabel, fit_pava
from .merging import MERGES, get_merge
from .scoring import CLASSIFIERS, IdentityScorer, make_classifier, train_or_prior
from .validity import BernoulliGenerator, VAPredictor, VennPredictor, identity_suite, monte_carlo_unbiasedness, membership_counterexample
from .venn import label_taxonomy, trivial_taxonomy

log = logging.getLogger("venn_calib")

EXIT_OK, EXIT_PROPERTY, EXIT_CONFIG, EXIT_DATA = 0, 1, 2, 3
COUNTEREXAMPLE_BAND = (0.63, 0.70)  # mean lower end expected for the membership scenario at l=1000 (pilot checked)
DATA_ERRORS = (DataError, DatasetTooSmall, SingleClassDataset, NonFiniteFeature)


class UsageError(Exception):
    pass


def fmt(x) -> str:
    """Shortest round-trip float text, without a trailing '.0'."""
    r = repr(float(x))
    return r[:-2] if r.endswith(".0") else r


def default_seed() -> int:
    value = os.environ.get("VENN_CALIB_SEED")
    if value is None:
        return 0
    try:
        return int(value)
    except ValueError:
        raise UsageError(f"VENN_CALIB_SEED must be an integer, got {value!r}") from None


def parse_params(items) -> dict:
    params = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"--param expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        params[key.strip()] = _coerce(value.strip())
    return params


def _coerce(value: str):
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    return value


def resolve_dataset(name: str) -> DatasetSpec:
    if name in BUNDLED:
        return bundled_spec(name)
    path = Path(name)
    if path.suffix == ".csv":
        raise UsageError(f"{name}: pass a dataset spec file (key = value), not the CSV itself")
    if not path.exists():
        raise UsageError(f"no bundled dataset or spec file named {name!r}")
    return DatasetSpec.from_file(path)


# -- pava ------------------------------------------------------------------------

def cmd_pava(args) -> int:
    try:
        handle = sys.stdin if args.input == "-" else open(args.input, newline="")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    data = []
    with handle:
        for lineno, row in enumerate(csv.reader(handle), 1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                print(f"error: line {lineno}: expected 'score,label'", file=sys.stderr)
                return EXIT_CONFIG
            try:
                data.append(ScoredLabel(float(row[0]), int(row[1])))
            except (ValueError, InvalidScore, InvalidLabel) as exc:
                if lineno == 1 and not data:
                    continue  # header
                print(f"error: line {lineno}: {exc}", file=sys.stderr)
                return EXIT_CONFIG
    if not data:
        print("error: no (score, label) rows in input", file=sys.stderr)
        return EXIT_CONFIG
    cal = fit_pava(data)
    out = sys.stdout if args.output in (None, "-") else open(args.output, "w", newline="")
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["score", "fitted_value"])
        for t, p in zip(cal.domain, cal.values):
            writer.writerow([fmt(t), fmt(p)])
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


# -- calibrate -------------------------------------------------------------------

def _calibration_data(args):
    spec = resolve_dataset(args.dataset)
    raw = load_csv(spec)
    seed = args.seed if args.seed is not None else default_seed()
    if args.test_file:
        test_spec = resolve_dataset(args.test_file)
        test_raw = load_csv(test_spec)
        if test_raw.header != raw.header:
            raise ConfigError("training and test files have different headers")
        n_train = len(raw.rows)
        raw.rows = raw.rows + test_raw.rows
        raw.lines = raw.lines + test_raw.lines
        dataset = encode(raw, spec)
        train_idx, test_idx = list(range(n_train)), list(range(n_train, len(dataset)))
    else:
        dataset = encode(raw, spec)
        train_idx, test_idx = split_indices(len(dataset), derive_seed(seed, "main", 0), args.train_fraction)
    if dataset.has_missing:
        dataset = impute(dataset, train_idx)
    return dataset.observations(train_idx), dataset.observations(test_idx)


def cmd_calibrate(args) -> int:
    classifier = make_classifier(args.classifier, **parse_params(args.param))
    merge = get_merge(args.merge)
    train, test = _calibration_data(args)
    X_test = np.array([z.x for z in test])
    if args.method == "RAW":
        scores = np.clip(train_or_prior(classifier, train).score_many(X_test), 0.0, 1.0)
        pairs = [(float(s), float(s)) for s in scores]
    elif args.method == "DIR":
        preds = calibrators.dir_predict_many(calibrators.dir_fit(classifier, train), X_test)
        pairs = [(p, p) for p in preds]
    elif args.method == "SVA":
        pairs = [tuple(p) for p in calibrators.sva_predict_many(calibrators.sva_fit(classifier, train), X_test)]
    else:
        pairs = [tuple(calibrators.va_predict(classifier, train, z.x)) for z in test]
    out = sys.stdout if args.output in (None, "-") else open(args.output, "w", newline="")
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["p0", "p1", "merged_p", "y"])
        for (p0, p1), z in zip(pairs, test):
            merged = p0 if args.method in ("RAW", "DIR") else merge((p0, p1))
            writer.writerow([fmt(p0), fmt(p1), fmt(merged), z.y])
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


# -- experiment ------------------------------------------------------------------

def _split_list(value) -> list[str]:
    if value is None:
        return []
    if isinstance(value, str):
        value = [value]
    return [part.strip() for v in value for part in v.split(",") if part.strip()]


def experiment_settings(args) -> dict:
    """Merge the optional config file with command-line flags (flags win)."""
    settings = {
        "datasets": [], "classifiers": ["logistic"], "methods": ["RAW", "DIR", "SVA"], "merge": "log",
        "repeats": 100, "va_repeats": 16, "train_fraction": 2 / 3, "master_seed": None,
        "classifier_specific_splits": False, "params": {},
    }
    if args.config:
        for key, value in read_key_values(args.config).items():
            if key.startswith("param."):
                _, clf, name = key.split(".", 2)
                settings["params"].setdefault(clf, {})[name] = _coerce(value)
            elif key in ("datasets", "classifiers", "methods"):
                settings[key] = _split_list(value)
            elif key in ("repeats", "va_repeats", "master_seed"):
                settings[key] = int(value)
            elif key == "train_fraction":
                settings[key] = float(value)
            elif key == "merge":
                settings[key] = value
            elif key == "classifier_specific_splits":
                settings[key] = value.lower() in ("1", "true", "yes")
            else:
                raise UsageError(f"unknown config key {key!r}")
    for key in ("datasets", "classifiers", "methods"):
        value = _split_list(getattr(args, key))
        if value:
            settings[key] = value
    for key in ("merge", "repeats", "va_repeats", "train_fraction"):
        if getattr(args, key) is not None:
            settings[key] = getattr(args, key)
    if args.seed is not None:
        settings["master_seed"] = args.seed
    if settings["master_seed"] is None:
        settings["master_seed"] = default_seed()
    for item in args.param or []:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise UsageError(f"experiment --param expects classifier.key=value, got {item!r}")
        key, value = item.split("=", 1)
        clf, name = key.split(".", 1)
        settings["params"].setdefault(clf.strip(), {})[name.strip()] = _coerce(value.strip())
    if not settings["datasets"]:
        raise UsageError("no datasets given")
    return settings


def cmd_experiment(args) -> int:
    settings = experiment_settings(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    reports = []
    for dataset_name in settings["datasets"]:
        spec = resolve_dataset(dataset_name)
        data = encode(load_csv(spec), spec)
        for clf in settings["classifiers"]:
            cfg = ExperimentConfig(
                dataset=spec.dataset_id,
                classifier=clf,
                classifier_params=settings["params"].get(clf, {}),
                methods=tuple(m.upper() for m in settings["methods"]),
                merge=settings["merge"],
                repeats=settings["repeats"],
                va_repeats=settings["va_repeats"],
                train_fraction=settings["train_fraction"],
                master_seed=settings["master_seed"],
                classifier_specific_splits=settings["classifier_specific_splits"],
            )
            log.info("running %s x %s", spec.dataset_id, clf)
            report = run_experiment(cfg, data, jobs=args.jobs)
            reports.append(report)
            stem = out_dir / f"{spec.dataset_id}__{clf}"
            if args.format in ("csv", "both"):
                stem.with_suffix(".csv").write_text(report.to_csv())
            if args.format in ("json", "both"):
                stem.with_suffix(".json").write_text(report.to_json())
    summary = format_summary(reports, "MLE") + "\n" + format_summary(reports, "RMSE")
    (out_dir / "summary.txt").write_text(summary)
    print(summary, end="")
    return EXIT_OK


# -- validity --------------------------------------------------------------------

def cmd_validity(args) -> int:
    seed = args.seed if args.seed is not None else default_seed()
    if args.scenario == "identity":
        taxonomies = [trivial_taxonomy(), label_taxonomy(), calibrators.va_taxonomy(IdentityScorer())]
        worst = identity_suite(taxonomies, args.trials or 1000, seed)
        ok = all(v == 0 for v in worst.values())
        result = {"scenario": "identity", "bags": args.trials or 1000, "seed": seed,
                  "max_deviation": {k: str(v) for k, v in worst.items()}, "holds": ok}
    elif args.scenario == "unbiasedness":
        predictor = (VennPredictor(trivial_taxonomy()) if args.predictor == "trivial"
                     else VAPredictor(IdentityScorer()))
        report = monte_carlo_unbiasedness(BernoulliGenerator(args.p), predictor, args.l or 20,
                                          args.trials or 10_000, seed, jobs=args.jobs)
        ok = report.holds
        result = {"scenario": "unbiasedness", "predictor": args.predictor, "p": args.p,
                  "l": args.l or 20, "seed": seed, **report.to_dict()}
    else:
        l = args.l or 1000
        report = membership_counterexample(l, args.trials or 1000, seed, method=args.method, jobs=args.jobs)
        if args.method.upper() == "SVA":
            # the band lies above 1/2, so in_band also means 1/2 is outside [mean lower, 1]
            in_band = COUNTEREXAMPLE_BAND[0] <= report.lower_mean <= COUNTEREXAMPLE_BAND[1]
            ok = report.upper_min == 1.0 and in_band
            expected = "violation of unbiasedness in the large"
        else:
            ok = report.holds
            expected = "unbiasedness in the large"
        result = {"scenario": "prop2", "method": args.method.upper(), "l": l, "seed": seed,
                  "expected": expected, **report.to_dict(), "holds": ok}
    print(json.dumps(result, indent=2, sort_keys=True))
    return EXIT_OK if ok else EXIT_PROPERTY


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="venn-calib", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pava", help="fit an isotonic calibrator to score,label rows")
    p.add_argument("input", help="CSV of score,label rows ('-' for stdin)")
    p.add_argument("-o", "--output", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_pava)

    p = sub.add_parser("calibrate", help="per-test-object (p0, p1, merged_p, y) rows")
    p.add_argument("--dataset", required=True, help=f"spec file or bundled name ({', '.join(BUNDLED)})")
    p.add_argument("--test-file", help="spec of a separate test file (same columns)")
    p.add_argument("--classifier", default="logistic", choices=sorted(CLASSIFIERS))
    p.add_argument("--param", action="append", help="classifier hyperparameter key=value")
    p.add_argument("--method", default="SVA", type=str.upper, choices=METHODS)
    p.add_argument("--merge", default="log", choices=sorted(MERGES))
    p.add_argument("--seed", type=int)
    p.add_argument("--train-fraction", type=float, default=2 / 3)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("experiment", help="repeated random-split comparison of methods")
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--datasets", action="append", help="comma-separated spec files or bundled names")
    p.add_argument("--classifiers", action="append", help=f"comma-separated, from {sorted(CLASSIFIERS)}")
    p.add_argument("--methods", action="append", help=f"comma-separated, from {list(METHODS)}")
    p.add_argument("--merge", choices=sorted(MERGES))
    p.add_argument("--repeats", type=int)
    p.add_argument("--va-repeats", type=int)
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--param", action="append", help="classifier.key=value")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--format", choices=("csv", "json", "both"), default="both")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("validity", help="run a validity scenario and print a JSON report")
    p.add_argument("--scenario", required=True, choices=("identity", "unbiasedness", "prop2"))
    p.add_argument("--l", type=int, help="training size")
    p.add_argument("--trials", type=int, help="Monte Carlo trials (bags for identity)")
    p.add_argument("--seed", type=int)
    p.add_argument("--p", type=float, default=0.5, help="Bernoulli parameter (unbiasedness)")
    p.add_argument("--predictor", choices=("trivial", "va"), default="trivial")
    p.add_argument("--method", choices=("SVA", "VA", "sva", "va"), default="SVA")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_validity)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (UsageError, ConfigError, KeyError, ValueError, VennCalibError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
