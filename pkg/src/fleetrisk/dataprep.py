"""Fleet maintenance-history ingestion and feature construction.

The pipeline runs in four explicit stages, each of which returns what it
kept plus a log of what it removed, so row counts always reconcile:

  parse_fleet_csv -> clean -> derive_features -> apply_filters

Blank fields survive parsing as ``None`` and are removed by ``clean``;
values that are present but malformed (bad dates, non-numeric text) are
parse-stage rejections.  All aggregation is per-vehicle and insensitive to
input row order.
"""

from __future__ import annotations

import csv
import math
import os
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import date

import numpy as np

from .errors import InputError

DAYS_PER_YEAR = 365.25

# Logical field -> default CSV header name (identity mapping; override via
# the ``columns`` argument of parse_fleet_csv for differently-named files).
DEFAULT_COLUMNS = {
    "vehicle_registration_number": "vehicle_registration_number",
    "registration_date": "registration_date",
    "job_date": "job_date",
    "odometer": "odometer",
    "work_area_description": "work_area_description",
    "labor_hours": "labor_hours",
    "parts_cost": "parts_cost",
    "labor_cost": "labor_cost",
    "breakdown_or_callout": "breakdown_or_callout",
    "tasks_in_job": "tasks_in_job",
}

_TRUE_FLAGS = {"1", "y", "yes", "true", "t"}
_FALSE_FLAGS = {"0", "n", "no", "false", "f"}

AGE_LIMIT_YEARS = 14.0
ODOMETER_MIN_MILES = 100.0
ODOMETER_MAX_MILES = 182000.0


@dataclass(frozen=True)
class RawJobRecord:
    """One garage job line.  Fields are None when the source cell was blank."""

    vehicle: str | None
    registration_date: date | None
    job_date: date | None
    odometer: float | None
    work_area: str | None
    labor_hours: float | None
    parts_cost: float | None
    labor_cost: float | None
    breakdown: bool | None
    tasks: int | None


@dataclass(frozen=True)
class VehicleFeatureRow:
    """Per-vehicle summary of its job history, plus the failure label."""

    vehicle: str
    age_years: float
    garage_visit_count: int
    odometer: float
    repair_counts: dict = field(repr=False)
    avg_labor_hours: float = 0.0
    avg_parts_cost: float = 0.0
    last_job_task_count: int = 0
    last_job_labor_hours: float = 0.0
    label: float = -1.0


def _parse_date(text: str) -> date:
    return date.fromisoformat(text.strip())


def _parse_opt(text: str | None, convert, reason: str):
    """Blank -> None; malformed non-blank -> (None, reason)."""
    if text is None or not text.strip():
        return None, None
    try:
        return convert(text.strip()), None
    except (ValueError, TypeError):
        return None, reason


def _parse_flag(text: str):
    low = text.strip().lower()
    if low in _TRUE_FLAGS:
        return True
    if low in _FALSE_FLAGS:
        return False
    raise ValueError(text)


def parse_fleet_csv(path: str, columns: dict | None = None):
    """Read a fleet job CSV into records, logging malformed rows.

    Returns (records, rejection_log) where the log holds (row_number,
    reason) pairs; the header is row 1, so the first data row is row 2.
    Missing file or missing mandatory header columns are fatal.
    """
    cols = dict(DEFAULT_COLUMNS)
    if columns:
        unknown = set(columns) - set(cols)
        if unknown:
            raise InputError(f"unknown column mappings: {sorted(unknown)}")
        cols.update(columns)
    if not os.path.exists(path):
        raise InputError(f"input file not found: {path}")
    records: list[RawJobRecord] = []
    rejects: list[tuple[int, str]] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in cols.values() if c not in header]
        if missing:
            raise InputError(f"missing mandatory columns: {missing}")
        for row_no, row in enumerate(reader, start=2):
            def cell(key):
                return row.get(cols[key])

            reg_date, err_rd = _parse_opt(cell("registration_date"), _parse_date, "invalid date")
            job_date, err_jd = _parse_opt(cell("job_date"), _parse_date, "invalid date")
            odometer, err_od = _parse_opt(cell("odometer"), float, "invalid number")
            labor_h, err_lh = _parse_opt(cell("labor_hours"), float, "invalid number")
            parts_c, err_pc = _parse_opt(cell("parts_cost"), float, "invalid number")
            labor_c, err_lc = _parse_opt(cell("labor_cost"), float, "invalid number")
            flag, err_fl = _parse_opt(cell("breakdown_or_callout"), _parse_flag, "invalid flag")
            tasks, err_tk = _parse_opt(cell("tasks_in_job"), int, "invalid integer")
            err = err_rd or err_jd or err_od or err_lh or err_pc or err_lc or err_fl or err_tk
            if err is None:
                for v in (odometer, labor_h, parts_c, labor_c):
                    if v is not None and not math.isfinite(v):
                        err = "invalid number"
                        break
            if err is not None:
                rejects.append((row_no, err))
                continue
            vid = (cell("vehicle_registration_number") or "").strip() or None
            area = (cell("work_area_description") or "").strip() or None
            records.append(RawJobRecord(
                vehicle=vid, registration_date=reg_date, job_date=job_date,
                odometer=odometer, work_area=area, labor_hours=labor_h,
                parts_cost=parts_c, labor_cost=labor_c, breakdown=flag,
                tasks=tasks,
            ))
    return records, rejects


def clean(records):
    """Drop records with blank mandatory fields or out-of-range numerics.

    Returns (kept, removal_counts) with removal_counts keyed by reason
    ("null", "out of range"); kept + removed always equals the input size.
    """
    kept: list[RawJobRecord] = []
    removed: Counter = Counter()
    for rec in records:
        values = (
            rec.vehicle, rec.registration_date, rec.job_date, rec.odometer,
            rec.work_area, rec.labor_hours, rec.parts_cost, rec.labor_cost,
            rec.breakdown, rec.tasks,
        )
        if any(v is None for v in values):
            removed["null"] += 1
            continue
        if (rec.odometer < 0 or rec.labor_hours < 0 or rec.parts_cost < 0
                or rec.labor_cost < 0 or rec.tasks < 0):
            removed["out of range"] += 1
            continue
        kept.append(rec)
    return kept, dict(removed)


def _last_job(recs: list[RawJobRecord]) -> RawJobRecord:
    # Total ordering so the result cannot depend on input row order.
    return max(recs, key=lambda r: (
        r.job_date, r.tasks, r.labor_hours, r.parts_cost, r.labor_cost,
        r.odometer, r.work_area,
    ))


def derive_features(records, as_of: date):
    """Aggregate cleaned job records into one feature row per vehicle.

    Age is (as_of - registration_date) in 365.25-day years; the odometer
    feature is the vehicle's highest recorded reading; the label is +1 when
    any record was a breakdown or callout, else -1.
    """
    groups: dict[str, list[RawJobRecord]] = defaultdict(list)
    for rec in records:
        groups[rec.vehicle].append(rec)
    rows: list[VehicleFeatureRow] = []
    skipped: list[tuple[str, str]] = []
    for vid in sorted(groups):
        recs = groups[vid]
        if not recs:
            skipped.append((vid, "no records"))
            continue
        latest_job = max(r.job_date for r in recs)
        if latest_job > as_of:
            raise InputError(
                f"job date {latest_job} for vehicle {vid} is after as-of date {as_of}"
            )
        reg = min(r.registration_date for r in recs)
        last = _last_job(recs)
        rows.append(VehicleFeatureRow(
            vehicle=vid,
            age_years=(as_of - reg).days / DAYS_PER_YEAR,
            garage_visit_count=len(recs),
            odometer=max(r.odometer for r in recs),
            repair_counts=dict(sorted(Counter(r.work_area for r in recs).items())),
            avg_labor_hours=float(np.mean([r.labor_hours for r in recs])),
            avg_parts_cost=float(np.mean([r.parts_cost for r in recs])),
            last_job_task_count=last.tasks,
            last_job_labor_hours=last.labor_hours,
            label=1.0 if any(r.breakdown for r in recs) else -1.0,
        ))
    return rows, skipped


def apply_filters(rows):
    """Keep vehicles with age < 14 years and 100 < odometer < 182000 miles.

    Bounds are strict on both sides.  Returns (kept, exclusion_log) with
    (vehicle, reason) entries for every removed row.
    """
    kept: list[VehicleFeatureRow] = []
    excluded: list[tuple[str, str]] = []
    for row in rows:
        if not row.age_years < AGE_LIMIT_YEARS:
            excluded.append((row.vehicle, "age out of range"))
        elif not (ODOMETER_MIN_MILES < row.odometer < ODOMETER_MAX_MILES):
            excluded.append((row.vehicle, "mileage out of range"))
        else:
            kept.append(row)
    return kept, excluded


_BASE_FEATURES = (
    "age_years", "garage_visit_count", "odometer", "avg_labor_hours",
    "avg_parts_cost", "last_job_task_count", "last_job_labor_hours",
)
_REPAIR_PREFIX = "repairs:"


def repair_vocabulary(rows) -> list[str]:
    vocab: set[str] = set()
    for row in rows:
        vocab.update(row.repair_counts)
    return sorted(vocab)


def write_feature_csv(rows, path: str) -> None:
    """One vehicle per line; repair-type counts become repairs:<name> columns."""
    vocab = repair_vocabulary(rows)
    header = ["vehicle", *_BASE_FEATURES, *(_REPAIR_PREFIX + v for v in vocab), "label"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([
                row.vehicle,
                repr(row.age_years), row.garage_visit_count, repr(row.odometer),
                repr(row.avg_labor_hours), repr(row.avg_parts_cost),
                row.last_job_task_count, repr(row.last_job_labor_hours),
                *(row.repair_counts.get(v, 0) for v in vocab),
                int(row.label),
            ])


def read_feature_csv(path: str) -> list[VehicleFeatureRow]:
    if not os.path.exists(path):
        raise InputError(f"feature file not found: {path}")
    rows: list[VehicleFeatureRow] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in ("vehicle", *_BASE_FEATURES, "label") if c not in header]
        if missing:
            raise InputError(f"missing feature columns: {missing}")
        vocab = [c[len(_REPAIR_PREFIX):] for c in header if c.startswith(_REPAIR_PREFIX)]
        for row_no, row in enumerate(reader, start=2):
            try:
                rows.append(VehicleFeatureRow(
                    vehicle=row["vehicle"],
                    age_years=float(row["age_years"]),
                    garage_visit_count=int(row["garage_visit_count"]),
                    odometer=float(row["odometer"]),
                    repair_counts={
                        v: int(row[_REPAIR_PREFIX + v]) for v in vocab
                        if int(row[_REPAIR_PREFIX + v]) != 0
                    },
                    avg_labor_hours=float(row["avg_labor_hours"]),
                    avg_parts_cost=float(row["avg_parts_cost"]),
                    last_job_task_count=int(row["last_job_task_count"]),
                    last_job_labor_hours=float(row["last_job_labor_hours"]),
                    label=float(row["label"]),
                ))
            except (KeyError, ValueError) as exc:
                raise InputError(f"bad feature row {row_no}: {exc}") from exc
    return rows


def feature_matrix(rows, vocab: list[str] | None = None):
    """Numeric design matrix for training.

    Returns (X, y, vehicle_ids, column_names); columns are the base
    features followed by one count column per repair type (sorted union
    unless ``vocab`` pins the order, e.g. when scoring with a saved model).
    """
    if not rows:
        raise InputError("no feature rows")
    if vocab is None:
        vocab = repair_vocabulary(rows)
    names = [*_BASE_FEATURES, *(_REPAIR_PREFIX + v for v in vocab)]
    X = np.zeros((len(rows), len(names)))
    y = np.zeros(len(rows))
    ids = []
    for i, row in enumerate(rows):
        X[i, :7] = (
            row.age_years, row.garage_visit_count, row.odometer,
            row.avg_labor_hours, row.avg_parts_cost,
            row.last_job_task_count, row.last_job_labor_hours,
        )
        for j, v in enumerate(vocab):
            X[i, 7 + j] = row.repair_counts.get(v, 0)
        y[i] = row.label
        ids.append(row.vehicle)
    return X, y, ids, names
