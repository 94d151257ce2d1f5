#!/usr/bin/env python3
"""Regenerate the small sample CSVs consumed by the plotting frontend."""
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from levybool.runner import run

if __name__ == "__main__":
    out = pathlib.Path(__file__).resolve().parents[1] / "frontend" / "samples"
    paths = run("report-data", None, {"seed": 7}, str(out), threads=1)
    for p in paths:
        print(p)
