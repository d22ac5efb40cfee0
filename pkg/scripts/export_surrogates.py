"""Write the built-in surrogate series to CSV so they can be fed back through
``rbmfuzzy --data`` or inspected elsewhere."""

import argparse
from pathlib import Path

from rbmfuzzy import benchdata
from rbmfuzzy.dataset import save_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="data")
    ap.add_argument("--gas-seed", type=int, default=benchdata.GAS_FURNACE_SEED)
    ap.add_argument("--wh-seed", type=int, default=benchdata.WH_SEED)
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    gas = benchdata.gas_furnace_surrogate(args.gas_seed)
    save_csv(gas, out / "gas_furnace.csv")
    wh = benchdata.wiener_hammerstein_surrogate(args.wh_seed)
    save_csv(wh, out / "wh.csv", "uBenchMark", "yBenchMark")
    print(f"wrote {len(gas)} gas-furnace rows and {len(wh)} W-H rows to {out}")


if __name__ == "__main__":
    main()
