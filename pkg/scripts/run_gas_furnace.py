"""Gas-furnace ablation over seeds, with and without re-solving W after the
probability step. Results land in ``<out-dir>/{fixed_w,resolve_w}``."""

import argparse
import sys

from rbmfuzzy import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", default="5")
    ap.add_argument("--out-dir", default="runs/gas-furnace")
    ap.add_argument("--data", help="real gas-furnace CSV (columns u, y)")
    args = ap.parse_args()
    extra = ["--data", args.data] if args.data else []
    for name, flags in (("fixed_w", []), ("resolve_w", ["--resolve-w"])):
        print(f"== {name}")
        code = cli.main(["bench", "gas-furnace", "--seeds", args.seeds,
                         "--out-dir", f"{args.out_dir}/{name}", *extra, *flags])
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
