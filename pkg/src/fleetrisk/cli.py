"""Command-line pipeline: prepare -> tune -> train -> predict -> evaluate -> report.

Every command is deterministic for a fixed --seed, and every output file is
written to a temporary name and renamed into place, so a failing run never
leaves partial artifacts.  Exit codes: 0 success, 1 input error, 2 config
error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from datetime import date

import numpy as np

from . import dataprep, evaluation, mfsvm, model_selection, serialize
from .errors import ConfigError, InputError, TrainingError
from .hierarchy import HierarchyConfig, train_hierarchy
from .hierarchy import predict_probs as hierarchy_probs
from .kernels import FAMILIES, KernelSpec
from .membership import MembershipSpec

# Model variant -> membership weighting. "svm" trains with uniform weights,
# "fsvm" weights by input-space class geometry, "mfsvm" by kernel-space
# geometry, and "hmfsvm" is the layered ensemble built on mfsvm units.
VARIANTS = ("svm", "fsvm", "mfsvm", "hmfsvm")

_VARIANT_MEMBERSHIP = {
    "svm": None,
    "fsvm": MembershipSpec("input_space"),
    "mfsvm": MembershipSpec("kernel_space"),
    "hmfsvm": MembershipSpec("kernel_space"),
}


def _bucket_token(prob: float) -> str:
    return evaluation.bucket_risk(prob).value.replace(" ", "")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def _standardize_fit(X):
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0.0] = 1.0
    return mean, scale


def _balance_costs(y):
    n = y.size
    n_pos = int(np.sum(y > 0))
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise TrainingError("both classes are required to balance costs")
    return n / (2.0 * n_pos), n / (2.0 * n_neg)


def _parse_exponents(text: str) -> tuple:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise ConfigError(f"bad exponent list {text!r}") from exc


# ---------------------------------------------------------------- prepare

def cmd_prepare(args) -> int:
    try:
        as_of = date.fromisoformat(args.as_of)
    except ValueError:
        raise InputError(f"bad --as-of date {args.as_of!r} (expected YYYY-MM-DD)")
    records, rejects = dataprep.parse_fleet_csv(args.input)
    kept, removals = dataprep.clean(records)
    rows, skipped = dataprep.derive_features(kept, as_of)
    final, excluded = dataprep.apply_filters(rows)
    log_lines = [
        f"parsed {len(records)} rows, rejected {len(rejects)}",
        *(f"  row {n}: {reason}" for n, reason in rejects),
        f"cleaned {len(kept)} rows, removed {sum(removals.values())}",
        *(f"  {reason}: {count}" for reason, count in sorted(removals.items())),
        f"derived {len(rows)} vehicles, skipped {len(skipped)}",
        f"filtered to {len(final)} vehicles, excluded {len(excluded)}",
        *(f"  {vid}: {reason}" for vid, reason in excluded),
    ]
    if args.balance:
        y = np.array([r.label for r in final])
        if np.all(y > 0) or np.all(y < 0):
            raise TrainingError("cannot balance a single-class dataset")
        idx = np.arange(len(final)).reshape(-1, 1)
        idx_b, _ = model_selection.undersample_majority(idx, y, seed=args.seed)
        final = [final[int(i)] for i in idx_b[:, 0]]
        log_lines.append(f"balanced to {len(final)} vehicles")
    buf = io.StringIO()
    _write_feature_rows(final, buf)
    serialize.atomic_write_text(args.output, buf.getvalue())
    log_lines.append(f"wrote {len(final)} feature rows to {args.output}")
    text = "\n".join(log_lines) + "\n"
    if args.log:
        serialize.atomic_write_text(args.log, text)
    print(text, end="")
    return 0


def _write_feature_rows(rows, buf) -> None:
    # Same layout as dataprep.write_feature_csv, but to a stream so the
    # file itself can be written atomically.
    vocab = dataprep.repair_vocabulary(rows)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["vehicle", *dataprep._BASE_FEATURES,
                *(dataprep._REPAIR_PREFIX + v for v in vocab), "label"])
    for row in rows:
        w.writerow([
            row.vehicle, repr(row.age_years), row.garage_visit_count,
            repr(row.odometer), repr(row.avg_labor_hours), repr(row.avg_parts_cost),
            row.last_job_task_count, repr(row.last_job_labor_hours),
            *(row.repair_counts.get(v, 0) for v in vocab), int(row.label),
        ])


# ------------------------------------------------------------------- tune

def cmd_tune(args) -> int:
    rows = dataprep.read_feature_csv(args.features)
    X, y, _, _ = dataprep.feature_matrix(rows)
    mean, scale = _standardize_fit(X)
    Xs = (X - mean) / scale
    spec = model_selection.GridSpec(
        c_exponents=_parse_exponents(args.c_exponents),
        gamma_exponents=_parse_exponents(args.gamma_exponents),
        fine_step=args.fine_step, fine_radius=args.fine_radius,
        nu=args.nu, seed=args.seed, family=args.family, coef0=args.coef0,
    )
    report = model_selection.grid_search(
        Xs, y, spec, _VARIANT_MEMBERSHIP[args.variant], jobs=args.jobs,
    )
    lines = [["c_exp", "gamma_exp", "cv_accuracy"]]
    for ce, ge in sorted(report.cells):
        lines.append([repr(ce), repr(ge), repr(report.cells[(ce, ge)])])
    serialize.atomic_write_text(args.output, _csv_text(lines[0], lines[1:]))
    ce, ge, acc = report.best_fine
    print(f"coarse best: c_exp={report.best_coarse[0]} gamma_exp={report.best_coarse[1]} "
          f"cv_accuracy={report.best_coarse[2]:.6f}")
    print(f"fine best:   c_exp={ce} gamma_exp={ge} cv_accuracy={acc:.6f}")
    print(f"C={report.best_c!r} gamma={report.best_gamma!r}")
    print(f"wrote {len(report.cells)} cells to {args.output}")
    return 0


# ------------------------------------------------------------------ train

def _pipeline_doc(variant, columns, mean, scale, inner_doc) -> dict:
    return {
        "schema": serialize.PIPELINE_SCHEMA,
        "variant": variant,
        "columns": list(columns),
        "scaler_mean": serialize.hex_vector(mean),
        "scaler_scale": serialize.hex_vector(scale),
        "model": inner_doc,
    }


def _load_pipeline(path: str) -> dict:
    doc = serialize.load_doc(path)
    found = doc.get("schema")
    if found != serialize.PIPELINE_SCHEMA:
        raise InputError(
            f"schema mismatch: expected {serialize.PIPELINE_SCHEMA}, found {found}"
        )
    return doc


def cmd_train(args) -> int:
    rows = dataprep.read_feature_csv(args.features)
    X, y, _, columns = dataprep.feature_matrix(rows)
    mean, scale = _standardize_fit(X)
    Xs = (X - mean) / scale
    kernel = KernelSpec(args.family, gamma=args.gamma, coef0=args.coef0)
    cost_pos = cost_neg = 1.0
    if args.balance_costs:
        cost_pos, cost_neg = _balance_costs(y)
    if args.variant == "hmfsvm":
        config = HierarchyConfig(
            kernel=kernel, C=args.c, membership=_VARIANT_MEMBERSHIP["hmfsvm"],
            seed=args.seed,
        )
        model = train_hierarchy(Xs, y, config)
    else:
        model = mfsvm.train(
            Xs, y, kernel, C=args.c,
            membership_spec=_VARIANT_MEMBERSHIP[args.variant],
            cost_pos=cost_pos, cost_neg=cost_neg, calibrate=True,
        )
    doc = _pipeline_doc(args.variant, columns, mean, scale, serialize.model_to_doc(model))
    serialize.atomic_write_text(args.model, serialize.dumps_doc(doc))
    print(f"trained {args.variant} on {len(y)} vehicles; wrote {args.model}")
    return 0


# ---------------------------------------------------------------- predict

def _score_features(doc: dict, rows):
    columns = doc["columns"]
    vocab = [c[len(dataprep._REPAIR_PREFIX):] for c in columns
             if c.startswith(dataprep._REPAIR_PREFIX)]
    X, y, ids, got_columns = dataprep.feature_matrix(rows, vocab=vocab)
    if got_columns != columns:
        raise InputError("feature columns do not match the trained model")
    mean = serialize.unhex_vector(doc["scaler_mean"])
    scale = serialize.unhex_vector(doc["scaler_scale"])
    return (X - mean) / scale, y, ids


def _pipeline_probs(doc: dict, Xs) -> np.ndarray:
    model = serialize.model_from_doc(doc["model"])
    if doc["variant"] == "hmfsvm":
        return hierarchy_probs(model, Xs)
    return model.predict_probs(Xs)


def cmd_predict(args) -> int:
    doc = _load_pipeline(args.model)
    rows = dataprep.read_feature_csv(args.features)
    Xs, _, ids = _score_features(doc, rows)
    probs = _pipeline_probs(doc, Xs)
    out = [(vid, repr(float(p)), _bucket_token(float(p))) for vid, p in zip(ids, probs)]
    serialize.atomic_write_text(
        args.output, _csv_text(["vehicle_id", "probability", "bucket"], out))
    print(f"wrote {len(out)} predictions to {args.output}")
    return 0


# --------------------------------------------------------------- evaluate

def _read_predictions(path: str):
    import os
    if not os.path.exists(path):
        raise InputError(f"prediction file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = ("vehicle_id", "probability")
        if not reader.fieldnames or any(c not in reader.fieldnames for c in need):
            raise InputError(f"prediction file must have columns {need}")
        out = []
        for row_no, row in enumerate(reader, start=2):
            try:
                out.append((row["vehicle_id"], float(row["probability"])))
            except (ValueError, TypeError) as exc:
                raise InputError(f"bad prediction row {row_no}: {exc}") from exc
    return out


def _labels_for(preds, truth_rows):
    truth = {r.vehicle: r.label for r in truth_rows}
    labels = []
    for vid, _ in preds:
        if vid not in truth:
            raise InputError(f"vehicle {vid} not present in truth file")
        labels.append(truth[vid])
    return np.array(labels)


def _evaluation_report(preds, labels, mcnemar_preds=None) -> str:
    probs = np.array([p for _, p in preds])
    pred_labels = np.where(probs >= 0.5, 1.0, -1.0)
    conf = evaluation.confusion_from(pred_labels, labels)
    mets = evaluation.metrics(conf)
    auc = evaluation.roc_auc(probs, labels)["auc"]
    lines = [f"samples\t{conf.total}"]
    for name in ("accuracy", "sensitivity", "specificity"):
        value = mets[name]
        lines.append(f"{name}\t{'undefined' if value is None else repr(value)}")
    lines.append(f"auc\t{auc!r}")
    lines.append("")
    tallies = evaluation.bucket_tallies(probs)
    lines.append(evaluation.format_bucket_table(tallies))
    if mcnemar_preds is not None:
        other = np.array([p for _, p in mcnemar_preds])
        result = evaluation.mcnemar(pred_labels, np.where(other >= 0.5, 1.0, -1.0), labels)
        lines.append("")
        lines.append("mcnemar")
        for key in ("b", "c", "statistic", "p_value", "method", "significant_5pct"):
            lines.append(f"  {key}\t{result[key]}")
    return "\n".join(lines) + "\n"


def cmd_evaluate(args) -> int:
    preds = _read_predictions(args.predictions)
    truth_rows = dataprep.read_feature_csv(args.truth)
    labels = _labels_for(preds, truth_rows)
    other = None
    if args.mcnemar:
        other = _read_predictions(args.mcnemar)
        if [v for v, _ in other] != [v for v, _ in preds]:
            raise InputError("mcnemar prediction file covers different vehicles")
    text = _evaluation_report(preds, labels, other)
    if args.roc:
        probs = np.array([p for _, p in preds])
        curve = evaluation.roc_auc(probs, labels)["curve"]
        roc_rows = [(repr(t), repr(f), repr(tp)) for t, f, tp in curve]
        serialize.atomic_write_text(
            args.roc, _csv_text(["threshold", "fpr", "tpr"], roc_rows))
    if args.output:
        serialize.atomic_write_text(args.output, text)
    print(text, end="")
    return 0


# ----------------------------------------------------------------- report

def cmd_report(args) -> int:
    preds = _read_predictions(args.predictions)
    probs = np.array([p for _, p in preds])
    text = evaluation.format_bucket_table(evaluation.bucket_tallies(probs)) + "\n"
    if args.output:
        serialize.atomic_write_text(args.output, text)
    print(text, end="")
    return 0


# ------------------------------------------------------------------ entry

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fleetrisk",
        description="Vehicle-fleet failure-risk modeling pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="ingest raw job CSV into a feature CSV")
    p.add_argument("--input", required=True, help="raw fleet job CSV")
    p.add_argument("--output", required=True, help="feature CSV to write")
    p.add_argument("--as-of", default="2017-01-01",
                   help="reference date (ISO) for vehicle age")
    p.add_argument("--balance", action="store_true",
                   help="undersample the majority class to parity")
    p.add_argument("--log", help="also write the stage log to this path")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("tune", help="grid-search C and gamma by cross-validation")
    p.add_argument("--features", required=True)
    p.add_argument("--output", required=True, help="grid CSV to write")
    p.add_argument("--variant", choices=VARIANTS[:3], default="mfsvm")
    p.add_argument("--family", choices=FAMILIES, default="rbf")
    p.add_argument("--coef0", type=float, default=0.0)
    p.add_argument("--c-exponents", default="-5,-3,-1,1,3,5,7,9,11,13,15,17",
                   help="comma-separated log2(C) lattice")
    p.add_argument("--gamma-exponents",
                   default=",".join(str(e) for e in range(-18, 5)),
                   help="comma-separated log2(gamma) lattice")
    p.add_argument("--fine-step", type=float, default=0.25)
    p.add_argument("--fine-radius", type=float, default=1.0)
    p.add_argument("--nu", type=int, default=5, help="cross-validation folds")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel worker processes for grid cells")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("train", help="train a model and serialize it")
    p.add_argument("--features", required=True)
    p.add_argument("--model", required=True, help="model JSON to write")
    p.add_argument("--variant", choices=VARIANTS, default="mfsvm")
    p.add_argument("--family", choices=FAMILIES, default="rbf")
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--coef0", type=float, default=0.0)
    p.add_argument("--balance-costs", action="store_true",
                   help="scale class penalties inversely to class frequency")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score a feature CSV with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--output", required=True, help="prediction CSV to write")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions against labeled features")
    p.add_argument("--predictions", required=True)
    p.add_argument("--truth", required=True, help="feature CSV with labels")
    p.add_argument("--output", help="write the metric report here")
    p.add_argument("--roc", help="write the ROC curve CSV here")
    p.add_argument("--mcnemar",
                   help="second prediction CSV to compare via McNemar's test")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="risk-bucket tally table from predictions")
    p.add_argument("--predictions", required=True)
    p.add_argument("--output", help="write the table here")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_report)
    return parser


def entry(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, TrainingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(entry())
