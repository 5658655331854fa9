"""Empirical decode failure rate of IBF subtraction over a grid of difference sizes.

    python3 scripts/run_decode_rate.py --m 10 50 100 --trials 1000 -o decode.csv
"""

import argparse
import sys

from pibf.experiments import DecodeRateConfig, decode_rate, to_csv


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--m", type=int, nargs="+", default=[10, 50, 100])
    ap.add_argument("--epsilon", type=float, default=0.01)
    ap.add_argument("--shared", type=int, default=100)
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("-o", "--output")
    args = ap.parse_args()

    grid = [DecodeRateConfig(m, args.epsilon, args.shared) for m in args.m]
    reports = decode_rate(grid, args.trials, args.seed, args.workers)
    text = to_csv(reports)
    if args.output:
        with open(args.output, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    for r in reports:
        print(f"m={r.m:4d} t={r.t:5d} failure={r.failure_rate:.4f} false_items={r.false_emissions} "
              f"({r.seconds:.1f}s)", file=sys.stderr)


if __name__ == "__main__":
    main()
