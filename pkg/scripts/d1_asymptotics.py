"""Tabulate the two components of D1 against alpha and fit their log-log slopes.

Writes a CSV with columns d, alpha, positive, negative, D1 and prints the
fitted slopes next to the predicted -d/2 and 1 - d/2.
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from fdfisher.oracles import d1_components


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--epsilon", type=float, default=0.2)
    parser.add_argument("--points", type=int, default=21)
    parser.add_argument("--out", default="results/d1_asymptotics.csv")
    args = parser.parse_args(argv)
    alphas = np.logspace(0, 5, args.points)
    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["d", "alpha", "positive", "negative", "D1"])
        for d in (1, 2, 3):
            parts = np.array([d1_components(args.epsilon, a, d) for a in alphas])
            for a, (p, n) in zip(alphas, parts):
                writer.writerow([d, f"{a:.17g}", f"{p:.17g}", f"{n:.17g}", f"{p - n:.17g}"])
            tail = alphas >= 1e3
            logs = np.log(alphas[tail])
            sp = np.polyfit(logs, np.log(parts[tail, 0]), 1)[0]
            sn = np.polyfit(logs, np.log(parts[tail, 1]), 1)[0]
            print(f"d={d}: slopes {sp:+.4f} (predicted {-d / 2:+.4f}), {sn:+.4f} (predicted {1 - d / 2:+.4f})")
    print(f"table written to {path}")


if __name__ == "__main__":
    main()
