#!/usr/bin/env python3
"""Full large-treatment benchmark (100 trials per cell, all four methods).

Equivalent to `deepcate simulate --config configs/table2_large.cfg`.
"""

import sys
from pathlib import Path

from deepcate.cli import main

if __name__ == "__main__":
    root = Path(__file__).resolve().parent.parent
    argv = [
        "simulate",
        "--config", str(root / "configs" / "table2_large.cfg"),
        "--out-dir", "out/table2",
        *sys.argv[1:],
    ]
    sys.exit(main(argv))
