#!/usr/bin/env python3
"""Writes the synthetic COMPAS-shaped fixtures used by the integration tests.

Output is deterministic for a given seed.
"""

import argparse
import csv
import datetime as dt
import math
import random
from pathlib import Path

COLUMNS = [
    "id", "age", "c_charge_degree", "race", "sex", "priors_count",
    "days_b_screening_arrest", "c_jail_in", "c_jail_out", "score_text", "is_recid",
]
BASE = dt.datetime(2013, 1, 1, 9, 0, 0)


def stamp(t):
    return t.strftime("%Y-%m-%d %H:%M:%S")


def person(rng, race):
    age = rng.randint(18, 70)
    sex = "Female" if rng.random() < 0.2 else "Male"
    charge = "F" if rng.random() < 0.65 else "M"
    priors = min(int(rng.expovariate(0.3 if race == "African-American" else 0.45)), 30)
    stay = rng.choice([0.2, 1.5, 3, 12, 40, 120]) * rng.uniform(0.8, 1.2)
    logit = -0.4 + 0.18 * priors - 0.03 * (age - 35) + (0.3 if charge == "F" else 0.0)
    recid = int(rng.random() < 1.0 / (1.0 + math.exp(-logit)))
    jail_in = BASE + dt.timedelta(days=rng.randint(0, 700), hours=rng.randint(0, 12))
    return {
        "age": age,
        "c_charge_degree": charge,
        "race": race,
        "sex": sex,
        "priors_count": priors,
        "days_b_screening_arrest": rng.randint(-2, 2),
        "c_jail_in": stamp(jail_in),
        "c_jail_out": stamp(jail_in + dt.timedelta(days=stay)),
        "score_text": rng.choice(["Low", "Medium", "High"]),
        "is_recid": recid,
    }


def synthetic(rng, rows):
    out = []
    for i in range(rows):
        u = rng.random()
        race = "African-American" if u < 0.55 else "Caucasian" if u < 0.92 else "Hispanic"
        rec = person(rng, race)
        # a few rows the standard filters remove
        if i % 50 == 7:
            rec["days_b_screening_arrest"] = 45
        if i % 50 == 19:
            rec["c_charge_degree"] = "O"
        out.append(rec)
    return out


def no_disparity(rng, pairs):
    out = []
    for _ in range(pairs):
        rec = person(rng, "African-American")
        out.append(rec)
        out.append(dict(rec, race="Caucasian"))
    return out


def write(path, records):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=COLUMNS, lineterminator="\n")
        w.writeheader()
        for i, rec in enumerate(records, start=1):
            w.writerow(dict(rec, id=i))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("crates/fairchannel/tests/fixtures"))
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    write(args.out / "compas_synthetic.csv", synthetic(random.Random(args.seed), 200))
    write(args.out / "no_disparity.csv", no_disparity(random.Random(args.seed + 1), 30))


if __name__ == "__main__":
    main()
