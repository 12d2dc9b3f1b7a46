#!/usr/bin/env python3
"""Generate the 253-row synthetic sleep-study fixture used by the tests.

The real classroom dataset is not redistributed here; this fixture merely
matches its schema (configs/sleep_schema.json) and rough column ranges,
with stress depending on the mental-health scores so the propensity model
has something to learn. Deterministic: rerunning reproduces the same file.
"""

import csv
import sys
from pathlib import Path

import numpy as np

N = 253
SEED = 977


def main(out_path):
    rng = np.random.default_rng(SEED)
    gender = rng.binomial(1, 0.45, N)
    class_year = rng.integers(1, 5, N)
    early_class = rng.binomial(1, 0.5, N)
    gpa = np.clip(rng.normal(3.25, 0.4, N), 1.8, 4.0).round(2)
    classes_missed = rng.poisson(2.0, N)
    anxiety = np.clip(rng.gamma(2.0, 2.5, N), 0, 20).round(1)
    depression = np.clip(rng.gamma(1.8, 2.8, N), 0, 25).round(1)
    happiness = np.clip(rng.normal(25, 6, N), 0, 35).round(0)
    drinks = rng.poisson(4.0, N)
    all_nighter = rng.binomial(1, 0.35, N)
    avg_sleep = np.clip(rng.normal(8.0, 1.0, N), 4.5, 10.5).round(2)

    def z(v):
        return (v - v.mean()) / v.std()

    stress_score = (
        0.45 * z(anxiety) + 0.35 * z(depression) - 0.25 * z(happiness)
        + 0.15 * z(classes_missed.astype(float)) + 1.6 * rng.standard_normal(N)
    )
    stress = np.where(stress_score > np.quantile(stress_score, 0.62), "high", "normal")

    psqi = (
        6.0 + 1.2 * (stress == "high") + 0.8 * z(anxiety)
        - 0.9 * (avg_sleep - 8.0) + 0.6 * all_nighter + 1.5 * rng.standard_normal(N)
    )
    psqi = np.clip(np.round(psqi), 1, 18).astype(int)

    header = [
        "Gender", "ClassYear", "EarlyClass", "GPA", "ClassesMissed",
        "AnxietyScore", "DepressionScore", "Happiness", "Drinks",
        "AllNighter", "AverageSleep", "Stress", "PoorSleepQuality",
    ]
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(N):
            writer.writerow([
                gender[i], class_year[i], early_class[i], f"{gpa[i]:.2f}",
                classes_missed[i], f"{anxiety[i]:.1f}", f"{depression[i]:.1f}",
                f"{happiness[i]:.0f}", drinks[i], all_nighter[i],
                f"{avg_sleep[i]:.2f}", stress[i], psqi[i],
            ])
    n_high = int((stress == "high").sum())
    print(f"wrote {out_path} ({N} rows, {n_high} high-stress)")


if __name__ == "__main__":
    default = Path(__file__).resolve().parent.parent / "tests" / "data" / "sleep_synthetic.csv"
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else default)
