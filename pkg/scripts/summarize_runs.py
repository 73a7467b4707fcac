#!/usr/bin/env python3
"""Compare completed run directories:

    python3 scripts/summarize_runs.py runs/reference/* --out summary.csv
"""

import argparse
import sys
from pathlib import Path

from cflsim.cli import run_cli


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("dirs", nargs="+", type=Path)
    parser.add_argument("--out", type=Path, default=Path("summary.csv"))
    args = parser.parse_args()
    return run_cli(["--summarize", *map(str, args.dirs),
                    "--out", str(args.out)])


if __name__ == "__main__":
    sys.exit(main())
