#!/usr/bin/env python3
"""Download the benchmark regression datasets into data/.

The library itself never touches the network; run this once wherever
internet access exists, then point the manifest at the resulting CSVs.

    python scripts/fetch_uci.py [--dest data]

Sources:
  boston  - http://lib.stat.cmu.edu/datasets/boston (also mirrored widely;
            506 rows, 13 features, target MEDV)
  wine    - https://archive.ics.uci.edu/ml/machine-learning-databases/
            wine-quality/winequality-red.csv (1599 rows, 11 features,
            target quality)
"""

import argparse
import csv
import io
import sys
import urllib.request
from pathlib import Path

WINE_URL = (
    "https://archive.ics.uci.edu/ml/machine-learning-databases/wine-quality/winequality-red.csv"
)
BOSTON_URL = "http://lib.stat.cmu.edu/datasets/boston"

BOSTON_COLUMNS = [
    "CRIM", "ZN", "INDUS", "CHAS", "NOX", "RM", "AGE",
    "DIS", "RAD", "TAX", "PTRATIO", "B", "LSTAT", "MEDV",
]


def fetch_wine(dest: Path) -> None:
    raw = urllib.request.urlopen(WINE_URL, timeout=60).read().decode()
    rows = list(csv.reader(io.StringIO(raw), delimiter=";"))
    out = dest / "winequality-red.csv"
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in rows:
            writer.writerow([cell.strip().strip('"') for cell in row])
    print(f"wrote {out} ({len(rows) - 1} rows)")


def fetch_boston(dest: Path) -> None:
    raw = urllib.request.urlopen(BOSTON_URL, timeout=60).read().decode()
    # The statlib file stores each record on two physical lines below a
    # 22-line header.
    lines = raw.splitlines()[22:]
    values = []
    for i in range(0, len(lines), 2):
        pair = lines[i].split() + lines[i + 1].split()
        if len(pair) == 14:
            values.append([float(v) for v in pair])
    out = dest / "boston.csv"
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BOSTON_COLUMNS)
        writer.writerows(values)
    print(f"wrote {out} ({len(values)} rows)")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dest", default="data")
    args = parser.parse_args()
    dest = Path(args.dest)
    dest.mkdir(parents=True, exist_ok=True)
    try:
        fetch_wine(dest)
        fetch_boston(dest)
    except Exception as err:  # noqa: BLE001 - report and fail the script
        print(f"download failed: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
