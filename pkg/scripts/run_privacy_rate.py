"""How often a table loaded with n random items still exposes a pure cell.

Defaults to t=3000, k=15 with n at the privacy threshold and at 2x, 5x, 10x of it.

    python3 scripts/run_privacy_rate.py --trials 1000 -o privacy.csv
"""

import argparse
import sys

from pibf.experiments import PrivacyRateConfig, privacy_rate, to_csv
from pibf.ibf import privacy_threshold


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--t", type=int, default=3000)
    ap.add_argument("--k", type=int, default=15)
    ap.add_argument("--epsilon", type=float, default=0.01)
    ap.add_argument("--multiples", type=float, nargs="+", default=[0.5, 1, 2, 5, 10])
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("-o", "--output")
    args = ap.parse_args()

    base = privacy_threshold(args.t, args.k, args.epsilon)
    grid = [PrivacyRateConfig(args.t, args.k, args.epsilon, round(base * x)) for x in args.multiples]
    reports = privacy_rate(grid, args.trials, args.seed, args.workers)
    text = to_csv(reports)
    if args.output:
        with open(args.output, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    print(f"threshold n = {base}", file=sys.stderr)
    for r in reports:
        print(f"n={r.n:6d} pure-cell rate={r.decodable_rate:.4f} ({r.seconds:.1f}s)", file=sys.stderr)


if __name__ == "__main__":
    main()
