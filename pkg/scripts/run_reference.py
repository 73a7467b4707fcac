#!/usr/bin/env python3
"""Run the full scheme sweep on the reference configuration.

Produces one output directory per scheme under runs/reference plus a
comparison table, mirroring the headline experiment:

    python3 scripts/run_reference.py [--out runs/reference] [--rounds N]
"""

import argparse
import sys
from pathlib import Path

from cflsim.cli import run_cli
from cflsim.orchestrator import SCHEME_NAMES

ROOT = Path(__file__).resolve().parent.parent


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", type=Path, default=Path("runs/reference"))
    parser.add_argument("--rounds", type=int, default=None)
    parser.add_argument("--config", type=Path,
                        default=ROOT / "configs" / "reference.yaml")
    args = parser.parse_args()

    argv = ["--config", str(args.config), "--sweep", "--out", str(args.out)]
    if args.rounds is not None:
        argv += ["--rounds", str(args.rounds)]
    rc = run_cli(argv)
    if rc != 0:
        return rc
    dirs = [str(args.out / name) for name in SCHEME_NAMES]
    rc = run_cli(["--summarize", *dirs, "--out", str(args.out / "summary.csv")])
    if rc == 0:
        print(f"wrote {args.out}/summary.csv")
    return rc


if __name__ == "__main__":
    sys.exit(main())
