"""Run the canned theorem checks and write one JSON report per check.

Usage: python scripts/run_verifications.py [--out DIR] [ID ...]
"""

import argparse
import sys
from pathlib import Path

from fdfisher.experiments import THEOREMS, run_verification, write_json


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("ids", nargs="*", metavar="ID", help=f"subset of {', '.join(THEOREMS)}")
    parser.add_argument("--out", default="results/verify", help="report directory")
    args = parser.parse_args(argv)
    ids = args.ids or list(THEOREMS)
    unknown = sorted(set(ids) - set(THEOREMS))
    if unknown:
        parser.error(f"unknown ids: {', '.join(unknown)}")
    out = Path(args.out)
    failed = []
    for theorem in ids:
        report = run_verification(theorem)
        write_json(report.as_dict(), out / f"{theorem}.json")
        print(report.summary(), flush=True)
        if not report.passed:
            failed.append(theorem)
    print(f"{len(ids) - len(failed)} passed, {len(failed)} failed; reports in {out}")
    return 5 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
