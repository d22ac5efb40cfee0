"""End-to-end pipeline, ablation grid and prediction export."""

from __future__ import annotations

import contextlib
import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import benchdata, crbm, elm, fuzzy, probcluster, probopt
from .config import PipelineConfig, to_dict
from .dataset import Dataset, TimeSeries, build_regressors, concat, denormalize, load_csv, normalize, split
from .errors import ConfigError, DataError, NumericalError, RbmFuzzyError, StageError

log = logging.getLogger(__name__)

TIMING_KEYS = ("timings",)


@dataclass
class RunReport:
    train_mse: float
    test_mse: float
    train_rms: float
    test_rms: float
    train_mse_denorm: float
    test_mse_denorm: float
    K: int
    seed: int
    use_rbm: bool
    use_prob_rules: bool
    split: dict
    loglik_identity: float | None = None
    loglik_optimized: float | None = None
    optimizer: dict | None = None
    config: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def to_dict(self, timing: bool = True) -> dict:
        d = asdict(self)
        if not timing:
            for k in TIMING_KEYS:
                d.pop(k, None)
        return d

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), indent=2, sort_keys=True) + "\n"


@dataclass
class PreparedData:
    train: Dataset
    test: Dataset
    raw_length: int
    n_rows: int


@dataclass
class Features:
    H_train: np.ndarray
    H_test: np.ndarray
    rbm: crbm.RbmModel | None = None


@dataclass
class RunResult:
    model: fuzzy.FuzzyModel
    report: RunReport
    data: PreparedData
    features: Features
    trace: list = field(default_factory=list)
    clusters: probcluster.ClusterSummary | None = None


class _Stages:
    """Times named stages and tags escaping errors with the stage name."""

    def __init__(self):
        self.timings = {}

    @contextlib.contextmanager
    def __call__(self, name):
        t0 = time.perf_counter()
        try:
            with np.errstate(over="ignore", under="ignore"):
                yield
        except StageError:
            raise
        except (RbmFuzzyError, FloatingPointError, np.linalg.LinAlgError) as exc:
            if not isinstance(exc, RbmFuzzyError):
                exc = NumericalError(str(exc))
            raise StageError(name, exc) from exc
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - t0


# ---------------------------------------------------------------- stages

def load_series(cfg: PipelineConfig) -> TimeSeries:
    d = cfg.data
    if d.path:
        return load_csv(d.path, d.u_column, d.y_column)
    if d.source == "gas-furnace":
        seed = benchdata.GAS_FURNACE_SEED if d.surrogate_seed is None else d.surrogate_seed
        return benchdata.gas_furnace_surrogate(seed)
    if d.source == "wh":
        seed = benchdata.WH_SEED if d.surrogate_seed is None else d.surrogate_seed
        return benchdata.wiener_hammerstein_surrogate(seed)
    raise ConfigError("csv source needs a path")


def prepare_data(cfg: PipelineConfig, ts: TimeSeries | None = None) -> PreparedData:
    """Regressors, chronological split and min-max scaling."""
    if ts is None:
        ts = load_series(cfg)
    ds = build_regressors(ts, cfg.regressors)
    d = cfg.data
    N = len(ds)
    n_test = N - d.n_train if d.n_test is None else d.n_test
    if d.n_train + n_test > N or n_test < 1:
        raise ConfigError(f"split {d.n_train}/{n_test} needs more than the {N} available rows")
    ds = ds.subset(slice(0, d.n_train + n_test))
    raw_train, raw_test = split(ds, d.n_train)
    if d.norm_scope == "all":
        _, norm = normalize(concat(raw_train, raw_test))
        train, _ = normalize(raw_train, norm)
        # all-scope stats cover the train rows, so they already lie in [0, 1]
        train = Dataset(np.clip(train.X, 0, 1), np.clip(train.Y, 0, 1), train.cfg, train.k, norm)
    else:
        train, norm = normalize(raw_train)
    test, _ = normalize(raw_test, norm)
    return PreparedData(train, test, len(ts), N)


def extract_features(cfg: PipelineConfig, data: PreparedData) -> Features:
    if not cfg.use_rbm:
        return Features(data.train.X, data.test.X)
    rcfg = replace(cfg.rbm, seed=cfg.seed)
    model = crbm.train(data.train.X, rcfg)
    return Features(crbm.transform(model, data.train.X), crbm.transform(model, data.test.X), model)


def fit_rules(cfg: PipelineConfig, H_train, Y_train):
    """Clustering, rule construction and the P = I consequent solve."""
    state, summary = probcluster.fit(H_train, replace(cfg.cluster, seed=cfg.seed))
    model = fuzzy.build_from_clusters(summary.centers, seed=cfg.seed, sigma_B=cfg.fuzzy.sigma_B_init)
    phi = fuzzy.firing_strengths(model, H_train)
    W = elm.solve_consequents(phi.T, Y_train)
    return model.replace(W=W), state, summary


def fit_probabilities(cfg: PipelineConfig, model: fuzzy.FuzzyModel, H_train, Y_train, labels):
    sigma_B = probopt.consequent_widths(Y_train, labels, model.K, cfg.fuzzy.sigma_B_floor)
    model = model.replace(sigma_B=sigma_B)
    phi = fuzzy.firing_strengths(model, H_train)
    ctx = probopt.LikelihoodContext(phi, Y_train, model.W, sigma_B)
    res = probopt.optimize_P(ctx, np.eye(model.K), cfg.probopt)
    return model.replace(P=res.P), res


def mse(y, yhat) -> float:
    r = np.asarray(y, dtype=float) - np.asarray(yhat, dtype=float)
    return float(np.mean(r * r))


def predict(model: fuzzy.FuzzyModel, H) -> np.ndarray:
    return fuzzy.infer_probabilistic(model, H)


def evaluate(cfg: PipelineConfig, model, data: PreparedData, feats: Features, *,
             K, timings, lik=None) -> RunReport:
    norm = data.train.norm
    out = {}
    for name, ds, H in (("train", data.train, feats.H_train), ("test", data.test, feats.H_test)):
        yhat = predict(model, H)
        if not np.all(np.isfinite(yhat)):
            raise NumericalError(f"non-finite predictions on the {name} split")
        out[name] = mse(ds.Y, yhat)
        out[name + "_denorm"] = mse(denormalize(ds.Y, norm), denormalize(yhat, norm))
    optimizer = None
    if lik is not None:
        optimizer = {"iterations": lik.iterations, "reason": lik.reason}
    return RunReport(
        train_mse=out["train"], test_mse=out["test"],
        train_rms=float(np.sqrt(out["train"])), test_rms=float(np.sqrt(out["test"])),
        train_mse_denorm=out["train_denorm"], test_mse_denorm=out["test_denorm"],
        K=int(K), seed=cfg.seed, use_rbm=cfg.use_rbm, use_prob_rules=cfg.use_prob_rules,
        split={"raw_length": data.raw_length, "rows": data.n_rows,
               "train": len(data.train), "test": len(data.test)},
        loglik_identity=None if lik is None else lik.loglik_init,
        loglik_optimized=None if lik is None else lik.loglik,
        optimizer=optimizer,
        config=_jsonable(to_dict(cfg)),
        timings={k: round(v, 6) for k, v in timings.items()},
    )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _finish(cfg, stage, data, feats, model, state, summary) -> RunResult:
    """Optional probability fit and evaluation for one ablation cell."""
    lik = None
    trace = []
    if cfg.use_prob_rules:
        with stage("probopt"):
            model, lik = fit_probabilities(cfg, model, feats.H_train, data.train.Y, state.labels)
            trace = lik.trace
            if cfg.resolve_w:
                Psi = fuzzy.design_vectors(model, feats.H_train, probabilistic=True).T
                model = model.replace(W=elm.solve_consequents(Psi, data.train.Y))
    with stage("evaluate"):
        report = evaluate(cfg, model, data, feats, K=model.K, timings=stage.timings, lik=lik)
    report.timings = {k: round(v, 6) for k, v in stage.timings.items()}
    return RunResult(model, report, data, feats, trace, summary)


def run_pipeline(cfg: PipelineConfig, ts: TimeSeries | None = None) -> RunResult:
    stage = _Stages()
    with stage("data"):
        data = prepare_data(cfg, ts)
    with stage("rbm"):
        feats = extract_features(cfg, data)
    with stage("cluster"):
        model, state, summary = fit_rules(cfg, feats.H_train, data.train.Y)
    return _finish(cfg, stage, data, feats, model, state, summary)


# ---------------------------------------------------------------- ablation

CELLS = ((False, False), (True, False), (False, True), (True, True))  # (use_rbm, use_prob_rules)


def cell_name(use_rbm: bool, use_prob: bool) -> str:
    return f"{'prob' if use_prob else 'std'}/{'rbm' if use_rbm else 'norbm'}"


def ablate(cfg: PipelineConfig, seeds, ts: TimeSeries | None = None) -> dict:
    """All four (use_rbm x use_prob_rules) cells for every seed.

    Within a seed the cells share the data split and the RBM; the two cells
    with the same feature map also share the clustering and the P = I
    consequents, so each switch is isolated.
    """
    seeds = list(seeds)
    if not seeds:
        raise ConfigError("ablation needs at least one seed")
    data_stage = _Stages()
    with data_stage("data"):
        if ts is None:
            ts = load_series(cfg)
        data = prepare_data(cfg, ts)
    per_seed = []
    for seed in seeds:
        base = replace(cfg, seed=seed)
        stage = _Stages()
        with stage("rbm"):
            rbm_feats = extract_features(replace(base, use_rbm=True), data)
        raw_feats = Features(data.train.X, data.test.X)
        row = {}
        for use_rbm in (False, True):
            feats = rbm_feats if use_rbm else raw_feats
            s = _Stages()
            with s("cluster"):
                model, state, summary = fit_rules(replace(base, use_rbm=use_rbm), feats.H_train, data.train.Y)
            for use_prob in (False, True):
                c = replace(base, use_rbm=use_rbm, use_prob_rules=use_prob)
                cs = _Stages()
                cs.timings = dict(data_stage.timings, **s.timings)
                if use_rbm:
                    cs.timings["rbm"] = stage.timings["rbm"]
                res = _finish(c, cs, data, feats, model, state, summary)
                row[cell_name(use_rbm, use_prob)] = res.report
        per_seed.append(row)
    return summarize_ablation(seeds, per_seed)


def summarize_ablation(seeds, per_seed) -> dict:
    cells = [cell_name(r, p) for r, p in CELLS]
    metrics = ("train_mse", "test_mse", "K")
    median = {c: {m: float(np.median([row[c].to_dict()[m] for row in per_seed])) for m in metrics}
              for c in cells}
    raw = [{c: {m: row[c].to_dict()[m] for m in metrics + ("loglik_identity", "loglik_optimized")}
            for c in cells} for row in per_seed]
    return {"seeds": list(seeds), "median": median, "per_seed": raw,
            "reports": per_seed}


def format_table(summary: dict, scale: float = 1e3) -> str:
    """Ablation medians laid out as rule type x feature map, in units of 1/scale."""
    med = summary["median"]
    lines = [f"MSE (x1e-{int(round(np.log10(scale)))}), median over seeds {summary['seeds']}",
             f"{'':32s}{'No RBM':>10s}{'RBM':>10s}"]
    for split_ in ("train", "test"):
        for rule, key in (("Standard fuzzy rule", "std"), ("Probabilistic fuzzy rule", "prob")):
            a = med[f"{key}/norbm"][f"{split_}_mse"] * scale
            b = med[f"{key}/rbm"][f"{split_}_mse"] * scale
            lines.append(f"{split_.capitalize() + ' ' + rule:32s}{a:10.2f}{b:10.2f}")
    lines.append(f"{'median K':32s}{med['std/norbm']['K']:10.1f}{med['std/rbm']['K']:10.1f}")
    return "\n".join(lines)


# ---------------------------------------------------------------- outputs

def emit_predictions(model: fuzzy.FuzzyModel, ds: Dataset, path, H=None, norm=None):
    """CSV with k, y_true, y_pred, residual, plus denormalized columns when
    normalization parameters are known. ``H`` defaults to ``ds.X``."""
    if len(ds) == 0:
        raise DataError("cannot emit predictions for an empty dataset")
    H = ds.X if H is None else H
    yhat = predict(model, H)
    norm = norm or ds.norm
    cols = ["k", "y_true", "y_pred", "residual"]
    if norm is not None:
        cols += ["y_true_denorm", "y_pred_denorm", "residual_denorm"]
        yt_d, yp_d = denormalize(ds.Y, norm), denormalize(yhat, norm)
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for i in range(len(ds)):
            row = [int(ds.k[i]), repr(float(ds.Y[i])), repr(float(yhat[i])), repr(float(ds.Y[i] - yhat[i]))]
            if norm is not None:
                row += [repr(float(yt_d[i])), repr(float(yp_d[i])), repr(float(yt_d[i] - yp_d[i]))]
            w.writerow(row)
    return path


def write_trace(trace, path):
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in trace:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


# ---------------------------------------------------------------- persistence

def save_run_model(path, result: RunResult, cfg: PipelineConfig):
    """One file holding everything ``eval`` needs: rules, RBM, scaling, delays."""
    norm = result.data.train.norm
    extra = {"n_y": cfg.regressors.n_y, "n_u": cfg.regressors.n_u, "use_rbm": cfg.use_rbm}
    extra.update({f"norm.{k}": float(v) for k, v in norm.as_dict().items()})
    if result.features.rbm is not None:
        r = result.features.rbm
        extra.update({"rbm.V": r.V, "rbm.b_vis": r.b_vis, "rbm.c_hid": r.c_hid})
    fuzzy.save(result.model, path, extra)


def load_run_model(path):
    """Inverse of :func:`save_run_model`: ``(model, rbm or None, norm, regressor cfg)``."""
    from . import kvfile
    from .dataset import NormParams, RegressorConfig

    d = kvfile.load(path)
    model = fuzzy.load(path)
    try:
        norm = NormParams(d["norm.u_min"], d["norm.u_max"], d["norm.y_min"], d["norm.y_max"])
        reg = RegressorConfig(d["n_y"], d["n_u"])
        rbm = None
        if d["use_rbm"]:
            rbm = crbm.RbmModel(d["rbm.V"], d["rbm.b_vis"], d["rbm.c_hid"])
    except KeyError as exc:
        raise DataError(f"{path}: missing entry {exc}") from None
    return model, rbm, norm, reg
