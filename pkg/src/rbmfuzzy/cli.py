"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bench, crbm, fuzzy
from .config import (NORM_SCOPES, SOURCES, PipelineConfig, apply_overrides, dumps_config,
                     gas_furnace_preset, load_config, wh_preset)
from .dataset import build_regressors, delay_trials, denormalize, normalize
from .errors import ConfigError, DataError, RbmFuzzyError

log = logging.getLogger("rbmfuzzy")

# Published test/train MSE (x1e-3) per ablation cell, used only for side-by-side display.
REFERENCE_MSE = {
    "gas-furnace": {"train": {"std/norbm": 5.10, "std/rbm": 3.35, "prob/norbm": 3.25, "prob/rbm": 3.11},
                    "test": {"std/norbm": 26.2, "std/rbm": 23.7, "prob/norbm": 22.5, "prob/rbm": 19.3}},
    "wh": {"train": {"std/norbm": 18.9, "std/rbm": 17.7, "prob/norbm": 16.2, "prob/rbm": 14.1},
           "test": {"std/norbm": 26.4, "std/rbm": 22.8, "prob/norbm": 23.6, "prob/rbm": 19.3}},
}


def _common(p: argparse.ArgumentParser, seeds=False):
    p.add_argument("--data", help="CSV series to use instead of the built-in surrogate")
    p.add_argument("--source", choices=SOURCES, help="benchmark preset / data source")
    p.add_argument("--u-column", help="input column name in the CSV")
    p.add_argument("--y-column", help="output column name in the CSV")
    p.add_argument("--config", help="INI-style config file; CLI flags override it")
    p.add_argument("--seed", type=int, help="run seed (RBM init, clustering, widths)")
    if seeds:
        p.add_argument("--seeds", default="5", help="seed count N (0..N-1) or comma list")
    p.add_argument("--no-rbm", action="store_true", help="cluster the regressors directly")
    p.add_argument("--no-prob", action="store_true", help="keep P = I (standard rules)")
    p.add_argument("--resolve-w", action="store_true", help="re-solve W after fitting P")
    p.add_argument("--full", action="store_true", help="W-H: full 100k/88k split")
    p.add_argument("--norm-scope", choices=NORM_SCOPES, help="rows used for min-max statistics")
    p.add_argument("--out-dir", default="runs/latest", help="output directory")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="extra config override, repeatable")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rbmfuzzy", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run the full pipeline once")
    _common(p)

    p = sub.add_parser("eval", help="evaluate a saved model on a series")
    _common(p)
    p.add_argument("--model", required=True, help="model.kv written by train")

    p = sub.add_parser("ablate", help="2x2 RBM / probabilistic-rule grid over seeds")
    _common(p, seeds=True)

    p = sub.add_parser("bench", help="benchmark presets with the ablation grid")
    p.add_argument("benchmark", choices=("gas-furnace", "wh"))
    _common(p, seeds=True)

    p = sub.add_parser("delays-search", help="random search over (n_y, n_u)")
    _common(p)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--range", default="1,10", help="lo,hi for both delays")
    p.add_argument("--budget", type=int, default=None, help="max regressor rows per trial")
    return ap


def parse_seeds(text: str) -> list[int]:
    try:
        if "," in text:
            return [int(s) for s in text.split(",") if s.strip()]
        n = int(text)
    except ValueError:
        raise ConfigError(f"bad --seeds value {text!r}") from None
    if n < 1:
        raise ConfigError("--seeds must be >= 1")
    return list(range(n))


def resolve_config(args, source: str | None = None) -> PipelineConfig:
    """Preset for the data source, then the config file, then CLI flags."""
    source = source or args.source or "gas-furnace"
    cfg = wh_preset(args.full) if source == "wh" else gas_furnace_preset()
    if source == "csv":
        cfg = replace(cfg, data=replace(cfg.data, source="csv", path=args.data))
    if args.config:
        cfg = load_config(args.config, cfg)
    over = {}
    if args.data:
        over["dataset.path"] = args.data
    if args.u_column:
        over["dataset.u_column"] = args.u_column
    if args.y_column:
        over["dataset.y_column"] = args.y_column
    if args.norm_scope:
        over["dataset.norm_scope"] = args.norm_scope
    if args.seed is not None:
        over["seed"] = args.seed
    if args.no_rbm:
        over["use_rbm"] = False
    if args.no_prob:
        over["use_prob_rules"] = False
    if args.resolve_w:
        over["resolve_w"] = True
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        over[key.strip()] = value.strip()
    return apply_overrides(cfg, over)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    res = bench.run_pipeline(cfg)
    out = _out_dir(args)
    (out / "report.json").write_text(res.report.to_json(), encoding="utf-8")
    (out / "config.ini").write_text(dumps_config(cfg), encoding="utf-8")
    bench.emit_predictions(res.model, res.data.test, out / "predictions.csv", H=res.features.H_test)
    bench.save_run_model(out / "model.kv", res, cfg)
    bench.write_trace(res.trace, out / "trace.jsonl")
    r = res.report
    print(f"K={r.K} train MSE={r.train_mse:.6g} test MSE={r.test_mse:.6g} test RMS={r.test_rms:.6g}")
    print(f"outputs in {out}")
    return 0


def cmd_eval(args) -> int:
    cfg = resolve_config(args)
    model, rbm, norm, reg = bench.load_run_model(args.model)
    ts = bench.load_series(cfg)
    ds, _ = normalize(build_regressors(ts, reg), norm)
    H = crbm.transform(rbm, ds.X) if rbm is not None else ds.X
    yhat = bench.predict(model, H)
    m = bench.mse(ds.Y, yhat)
    report = {"rows": len(ds), "mse": m, "rms": float(np.sqrt(m)), "K": model.K,
              "mse_denorm": bench.mse(denormalize(ds.Y, norm), denormalize(yhat, norm))}
    out = _out_dir(args)
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    bench.emit_predictions(model, ds, out / "predictions.csv", H=H)
    print(f"rows={len(ds)} MSE={m:.6g} RMS={np.sqrt(m):.6g}")
    return 0


def _write_ablation(summary, out: Path, reference=None) -> str:
    table = bench.format_table(summary)
    if reference:
        lines = ["", "Reference values (x1e-3):"]
        for split_ in ("train", "test"):
            ref = reference[split_]
            lines.append(f"  {split_}: " + ", ".join(f"{k} {v}" for k, v in ref.items()))
        table += "\n" + "\n".join(lines)
    payload = {k: v for k, v in summary.items() if k != "reports"}
    payload["reports"] = [{c: r.to_dict() for c, r in row.items()} for row in summary["reports"]]
    (out / "ablation.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out / "table.txt").write_text(table + "\n", encoding="utf-8")
    return table


def cmd_ablate(args, source=None) -> int:
    cfg = resolve_config(args, source)
    summary = bench.ablate(cfg, parse_seeds(args.seeds))
    out = _out_dir(args)
    ref = REFERENCE_MSE.get(source) if source else None
    print(_write_ablation(summary, out, ref))
    return 0


def cmd_bench(args) -> int:
    return cmd_ablate(args, source=args.benchmark)


def cmd_delays(args) -> int:
    cfg = resolve_config(args)
    try:
        lo, hi = (int(v) for v in args.range.split(","))
    except ValueError:
        raise ConfigError(f"bad --range {args.range!r}") from None
    ts = bench.load_series(cfg)
    seed = cfg.seed if args.seed is None else args.seed
    trials = delay_trials(ts, (lo, hi), args.trials, args.budget, seed)
    out = _out_dir(args)
    rows = [{"n_y": c.n_y, "n_u": c.n_u, "mse": m} for c, m in trials]
    best = min(rows, key=lambda r: r["mse"])
    (out / "delays.json").write_text(json.dumps({"trials": rows, "best": best}, indent=2) + "\n",
                                     encoding="utf-8")
    print(f"best n_y={best['n_y']} n_u={best['n_u']} validation MSE={best['mse']:.6g}")
    return 0


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "ablate": cmd_ablate,
            "bench": cmd_bench, "delays-search": cmd_delays}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except RbmFuzzyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
