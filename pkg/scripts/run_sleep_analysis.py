#!/usr/bin/env python3
"""Run the observational analysis on a sleep-study CSV.

Point it at the public classroom sleep data (same column names as
configs/sleep_schema.json). Without an argument it runs on the synthetic
253-row fixture, which exercises the pipeline but has no scientific
meaning.
"""

import sys
from pathlib import Path

from deepcate.cli import main

if __name__ == "__main__":
    root = Path(__file__).resolve().parent.parent
    data = sys.argv[1] if len(sys.argv) > 1 else str(root / "tests" / "data" / "sleep_synthetic.csv")
    argv = [
        "analyze",
        "--data", data,
        "--schema", str(root / "configs" / "sleep_schema.json"),
        "--seed", "7",
        "--out-dir", "out/sleep",
        *sys.argv[2:],
    ]
    sys.exit(main(argv))
