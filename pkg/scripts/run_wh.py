"""Wiener-Hammerstein ablation at desk scale (10k/5k) or, with ``--full``,
on the 100k-sample training split. Expect minutes per seed at full scale."""

import argparse
import sys

from rbmfuzzy import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", default="5")
    ap.add_argument("--full", action="store_true")
    ap.add_argument("--out-dir", default="runs/wh")
    ap.add_argument("--data", help="real benchmark CSV (columns uBenchMark, yBenchMark)")
    args = ap.parse_args()
    argv = ["bench", "wh", "--seeds", args.seeds, "--out-dir", args.out_dir]
    if args.full:
        argv.append("--full")
    if args.data:
        argv += ["--data", args.data]
    return cli.main(argv)


if __name__ == "__main__":
    sys.exit(main())
