"""Seeded synthetic fleet job-history generator.

The real garage data is proprietary, so tests and demos run on a generated
fleet with the same shape: one CSV row per garage job, multiple jobs per
vehicle.  Failure risk rises with age, mileage, and neglect (visit-heavy
vehicles), but the dominant term is an age x usage-rate interaction, so the
risk surface is deliberately not linearly separable in the raw features.

Run ``python -m fleetrisk.synthetic --out fleet.csv`` to write a fixture;
identical seeds give byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from datetime import date, timedelta

import numpy as np

from .dataprep import DEFAULT_COLUMNS

WORK_AREAS = (
    "audit", "automatic transmission", "body exteriors", "brakes",
    "electrical", "engine", "tyres",
)

_DEFAULT_AS_OF = date(2017, 1, 1)


def _sigmoid(z: float) -> float:
    if z >= 0.0:
        e = math.exp(-z)
        return 1.0 / (1.0 + e)
    e = math.exp(z)
    return e / (1.0 + e)


def _work_area_probs(age_years: float, failing: bool, neglect: float) -> np.ndarray:
    # Older vehicles shift toward drivetrain work; vehicles heading for a
    # failure show symptomatic engine/transmission/electrical jobs first,
    # and neglected ones wear brakes and tyres.
    a = min(age_years / 14.0, 1.2)
    w = np.array([
        1.4 - 0.8 * a,      # audit
        0.3 + 0.6 * a,      # automatic transmission
        0.5 + 0.3 * a,      # body exteriors
        0.6 + 0.3 * a,      # brakes
        0.5 + 0.2 * a,      # electrical
        0.4 + 0.5 * a,      # engine
        0.8,                # tyres
    ])
    if failing:
        w[1] *= 1.8
        w[4] *= 1.6
        w[5] *= 1.8
    w[3] *= 1.0 + 1.2 * neglect
    w[6] *= 1.0 + 1.2 * neglect
    return w / w.sum()


def failure_probability(age_years: float, odometer: float, neglect: float) -> float:
    """Ground-truth failure risk for one vehicle.

    ``neglect`` in [0, 1] is the latent maintenance-neglect score that also
    drives visit counts and labor hours.  The dominant age x mileage product
    term traces a bathtub curve along the fleet's age-mileage ridge (early
    defects plus wear-out, with a reliable mid-life), so risk is strongly
    non-monotone and a linear model cannot recover the surface.
    """
    z_a = (age_years - 7.0) / 3.5
    z_o = (odometer - 85000.0) / 45000.0
    z_m = 2.0 * neglect - 1.0
    score = 2.2 * (z_a * z_o - 0.85) + 1.0 * z_m + 0.7 * z_a + 0.55 * z_o
    return _sigmoid(3.2 * score)


def generate_fleet(
    n_vehicles: int = 400,
    seed: int = 0,
    as_of: date = _DEFAULT_AS_OF,
    dirty: int = 0,
    return_truth: bool = False,
):
    """Build raw job rows (dicts of CSV strings) for a synthetic fleet.

    ``dirty`` appends that many malformed/incomplete rows cycling through
    six defect kinds (blank cells, bad dates, bad numbers, bad flags,
    negative costs) so ingestion-stage logging can be exercised.  With
    ``return_truth`` the per-vehicle latent state (age, recorded odometer,
    neglect, failure probability, outcome) comes back alongside the rows.
    """
    rng = np.random.default_rng(seed)
    rows: list[dict] = []
    truth: dict[str, tuple] = {}
    for v in range(n_vehicles):
        vid = f"VEH{v:05d}"
        age = float(rng.uniform(0.5, 16.0))
        if rng.uniform() < 0.02:
            odometer = float(rng.uniform(10.0, 95.0))
        else:
            rate = float(np.exp(rng.normal(9.4, 0.35)))
            odometer = age * rate
        neglect = float(rng.uniform())
        amin = min(age / 14.0, 1.2)

        p_fail = failure_probability(age, odometer, neglect)
        failed = bool(rng.uniform() < p_fail)

        reg_date = as_of - timedelta(days=round(age * 365.25))
        total_days = max((as_of - reg_date).days, 2)
        n_jobs = 1 + round(4.0 * neglect) + int(rng.poisson(0.6 + 1.2 * amin))
        first_ok = min(60, total_days - 1)
        # Last visit is always recent so the highest odometer reading is a
        # faithful proxy for current mileage.
        last_off = total_days - int(rng.integers(1, min(90, total_days)))
        other = rng.integers(first_ok, total_days, size=n_jobs - 1)
        job_offsets = np.sort(np.append(other, last_off))
        flags = rng.uniform(size=n_jobs) < 0.35 if failed else np.zeros(n_jobs, dtype=bool)
        if failed and not flags.any():
            flags[-1] = True

        jobs = []
        for j in range(n_jobs):
            job_date = reg_date + timedelta(days=int(job_offsets[j]))
            frac = (job_date - reg_date).days / total_days
            job_odo = max(odometer * frac * float(rng.uniform(0.98, 1.0)), 0.0)
            labor = float(rng.gamma(8.0, 0.25) * (0.45 + 1.35 * neglect + 0.2 * amin))
            parts = labor * float(rng.uniform(20.0, 60.0)) + float(rng.exponential(15.0))
            area = str(rng.choice(WORK_AREAS, p=_work_area_probs(age, failed, neglect)))
            jobs.append({
                "vehicle_registration_number": vid,
                "registration_date": reg_date.isoformat(),
                "job_date": job_date.isoformat(),
                "odometer": f"{job_odo:.1f}",
                "work_area_description": area,
                "labor_hours": f"{labor:.2f}",
                "parts_cost": f"{parts:.2f}",
                "labor_cost": f"{labor * 45.0 * float(rng.uniform(0.9, 1.1)):.2f}",
                "breakdown_or_callout": "yes" if flags[j] else "no",
                "tasks_in_job": str(1 + int(rng.poisson(2.0))),
            })
        rows.extend(jobs)
        truth[vid] = (age, odometer, neglect, p_fail, failed)
    rows.extend(_dirty_rows(dirty, as_of))
    if return_truth:
        return rows, truth
    return rows


def _dirty_rows(count: int, as_of: date) -> list[dict]:
    base = {
        "vehicle_registration_number": "BAD00000",
        "registration_date": (as_of - timedelta(days=1200)).isoformat(),
        "job_date": (as_of - timedelta(days=30)).isoformat(),
        "odometer": "40000.0",
        "work_area_description": "brakes",
        "labor_hours": "3.00",
        "parts_cost": "120.00",
        "labor_cost": "135.00",
        "breakdown_or_callout": "no",
        "tasks_in_job": "2",
    }
    defects = (
        ("odometer", ""),                   # blank cell -> cleaned as null
        ("parts_cost", "-5.0"),             # negative -> cleaned out of range
        ("job_date", "2016-13-40"),         # parse reject: invalid date
        ("labor_hours", "three"),           # parse reject: invalid number
        ("breakdown_or_callout", "maybe"),  # parse reject: invalid flag
        ("vehicle_registration_number", ""),  # blank id -> cleaned as null
    )
    rows = []
    for i in range(count):
        field, value = defects[i % len(defects)]
        row = dict(base)
        row["vehicle_registration_number"] = f"BAD{i:05d}"
        row[field] = value
        rows.append(row)
    return rows


def write_raw_csv(rows, path: str) -> None:
    header = list(DEFAULT_COLUMNS.values())
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=header)
        w.writeheader()
        for row in rows:
            w.writerow(row)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="python -m fleetrisk.synthetic",
        description="Write a seeded synthetic fleet job-history CSV.",
    )
    parser.add_argument("--out", required=True, help="output CSV path")
    parser.add_argument("--vehicles", type=int, default=400)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--dirty", type=int, default=0,
                        help="number of malformed rows to append")
    parser.add_argument("--as-of", default=_DEFAULT_AS_OF.isoformat(),
                        help="reference date (ISO) for ages and job dates")
    args = parser.parse_args(argv)
    rows = generate_fleet(
        n_vehicles=args.vehicles, seed=args.seed,
        as_of=date.fromisoformat(args.as_of), dirty=args.dirty,
    )
    write_raw_csv(rows, args.out)
    print(f"wrote {len(rows)} job rows to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
