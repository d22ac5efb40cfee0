"""NARMAX regressor construction, min-max normalization, chronological splits
and CSV ingestion."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DataError


@dataclass(frozen=True)
class TimeSeries:
    u: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float).ravel()
        y = np.asarray(self.y, dtype=float).ravel()
        if u.shape != y.shape:
            raise DataError(f"u and y lengths differ: {u.size} vs {y.size}")
        if u.size < 1:
            raise DataError("empty time series")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(y))):
            raise DataError("time series contains non-finite values")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "y", y)

    def __len__(self):
        return self.u.size


@dataclass(frozen=True)
class RegressorConfig:
    n_y: int = 4
    n_u: int = 5

    def __post_init__(self):
        if int(self.n_y) != self.n_y or int(self.n_u) != self.n_u:
            raise ConfigError("delays must be integers")
        if self.n_y < 0 or self.n_u < 0:
            raise ConfigError(f"delays must be >= 0, got n_y={self.n_y}, n_u={self.n_u}")

    @property
    def width(self) -> int:
        return self.n_y + self.n_u + 1

    @property
    def lag(self) -> int:
        """First usable time index (every delayed term exists)."""
        return max(self.n_y, self.n_u)


@dataclass(frozen=True)
class NormParams:
    u_min: float
    u_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        for name, lo, hi in (("u", self.u_min, self.u_max), ("y", self.y_min, self.y_max)):
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise DataError(f"non-finite range on channel {name}")
            if not hi > lo:
                raise DataError(f"constant channel {name}: min={lo}, max={hi}")

    def scale_u(self, v):
        return (np.asarray(v, dtype=float) - self.u_min) / (self.u_max - self.u_min)

    def scale_y(self, v):
        return (np.asarray(v, dtype=float) - self.y_min) / (self.y_max - self.y_min)

    def unscale_y(self, v):
        return np.asarray(v, dtype=float) * (self.y_max - self.y_min) + self.y_min

    def as_dict(self):
        return {"u_min": self.u_min, "u_max": self.u_max,
                "y_min": self.y_min, "y_max": self.y_max}


@dataclass(frozen=True)
class Dataset:
    """Regressor rows ``X`` (N x n) with targets ``Y`` (N,).

    ``k`` holds the time index of each row in the source series. ``norm`` is
    None for raw (engineering-unit) data.
    """

    X: np.ndarray
    Y: np.ndarray
    cfg: RegressorConfig
    k: np.ndarray = field(default=None)
    norm: NormParams | None = None

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        Y = np.asarray(self.Y, dtype=float).ravel()
        if X.shape[0] != Y.size:
            raise DataError(f"X has {X.shape[0]} rows but Y has {Y.size}")
        if X.shape[1] != self.cfg.width:
            raise DataError(f"X width {X.shape[1]} != regressor width {self.cfg.width}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise DataError("dataset contains non-finite values")
        k = np.arange(Y.size) if self.k is None else np.asarray(self.k, dtype=int).ravel()
        if k.size != Y.size:
            raise DataError("index length mismatch")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "k", k)

    def __len__(self):
        return self.Y.size

    @property
    def n(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.Y[idx], self.cfg, self.k[idx], self.norm)


def build_regressors(ts: TimeSeries, cfg: RegressorConfig) -> Dataset:
    """Rows ``[y(k-1)..y(k-n_y), u(k), u(k-1)..u(k-n_u)]`` with target ``y(k)``."""
    T = len(ts)
    lag = cfg.lag
    if T <= lag:
        raise DataError(f"series of length {T} too short for delays n_y={cfg.n_y}, n_u={cfg.n_u}")
    k = np.arange(lag, T)
    cols = [ts.y[k - d] for d in range(1, cfg.n_y + 1)]
    cols += [ts.u[k - d] for d in range(0, cfg.n_u + 1)]
    X = np.column_stack(cols)
    return Dataset(X, ts.y[k], cfg, k)


def fit_norm(ds: Dataset) -> NormParams:
    """Per-channel min/max over every value of that channel present in ``ds``."""
    ny = ds.cfg.n_y
    yv = np.concatenate([ds.Y, ds.X[:, :ny].ravel()])
    uv = ds.X[:, ny:].ravel()
    return NormParams(float(uv.min()), float(uv.max()), float(yv.min()), float(yv.max()))


def normalize(ds: Dataset, norm: NormParams | None = None) -> tuple[Dataset, NormParams]:
    """Min-max scale ``ds``. Stats are fitted on ``ds`` unless ``norm`` is given,
    in which case values may fall outside [0, 1]."""
    if ds.norm is not None:
        raise DataError("dataset is already normalized")
    fitted = norm is None
    if fitted:
        norm = fit_norm(ds)
    ny = ds.cfg.n_y
    X = np.empty_like(ds.X)
    X[:, :ny] = norm.scale_y(ds.X[:, :ny])
    X[:, ny:] = norm.scale_u(ds.X[:, ny:])
    Y = norm.scale_y(ds.Y)
    if fitted:
        # exact endpoints despite rounding in the affine map
        X = np.clip(X, 0.0, 1.0)
        Y = np.clip(Y, 0.0, 1.0)
    return Dataset(X, Y, ds.cfg, ds.k, norm), norm


def denormalize(yhat, norm: NormParams) -> np.ndarray:
    return norm.unscale_y(yhat)


def split(ds: Dataset, n_train: int) -> tuple[Dataset, Dataset]:
    """Chronological split: first ``n_train`` rows train, the rest test."""
    N = len(ds)
    if not 0 < n_train < N:
        raise ConfigError(f"n_train must lie in (0, {N}), got {n_train}")
    return ds.subset(slice(0, n_train)), ds.subset(slice(n_train, N))


def concat(a: Dataset, b: Dataset) -> Dataset:
    if a.cfg != b.cfg or a.norm != b.norm:
        raise DataError("cannot concatenate datasets with different configs")
    return Dataset(np.vstack([a.X, b.X]), np.concatenate([a.Y, b.Y]), a.cfg,
                   np.concatenate([a.k, b.k]), a.norm)


def load_csv(path, u_column: str = "u", y_column: str = "y") -> TimeSeries:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    u, y = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: missing header row")
        names = [f.strip() for f in reader.fieldnames]
        reader.fieldnames = names
        for col in (u_column, y_column):
            if col not in names:
                raise DataError(f"{path}: missing column {col!r} (have {names})")
        # header is line 1
        for lineno, row in enumerate(reader, start=2):
            try:
                uv = float(row[u_column])
                yv = float(row[y_column])
            except (TypeError, ValueError):
                raise DataError(f"{path}: non-numeric cell on row {lineno}") from None
            if not (math.isfinite(uv) and math.isfinite(yv)):
                raise DataError(f"{path}: non-finite cell on row {lineno}")
            u.append(uv)
            y.append(yv)
    if not u:
        raise DataError(f"{path}: no data rows")
    return TimeSeries(np.array(u), np.array(y))


def save_csv(ts: TimeSeries, path, u_column: str = "u", y_column: str = "y"):
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([u_column, y_column])
        for a, b in zip(ts.u, ts.y):
            w.writerow([repr(float(a)), repr(float(b))])


def linear_validation_mse(train: Dataset, valid: Dataset) -> float:
    """Validation MSE of an affine least-squares fit; the default cheap
    evaluator for delay search."""
    A = np.column_stack([train.X, np.ones(len(train))])
    coef, *_ = np.linalg.lstsq(A, train.Y, rcond=None)
    pred = np.column_stack([valid.X, np.ones(len(valid))]) @ coef
    return float(np.mean((valid.Y - pred) ** 2))


def delay_trials(ts: TimeSeries,
                 candidate_range: tuple[int, int] = (1, 10),
                 n_trials: int = 20,
                 eval_budget: int | None = None,
                 seed: int = 0,
                 train_fraction: float = 2 / 3,
                 evaluate: Callable[[Dataset, Dataset], float] | None = None,
                 candidates: Sequence[tuple[int, int]] | None = None):
    """Evaluate ``n_trials`` delay configurations; returns ``[(cfg, mse), ...]``.

    Configs are drawn uniformly from ``candidate_range``² (or from
    ``candidates`` when given). Each trial normalizes on its training part and
    scores on the held-out tail. ``eval_budget`` caps the number of regressor
    rows used per trial.
    """
    if n_trials < 1:
        raise ConfigError("n_trials must be >= 1")
    evaluate = evaluate or linear_validation_mse
    rng = np.random.default_rng(seed)
    lo, hi = candidate_range
    if lo > hi:
        raise ConfigError(f"bad candidate range {candidate_range}")
    out = []
    for _ in range(n_trials):
        if candidates is not None:
            n_y, n_u = candidates[int(rng.integers(len(candidates)))]
        else:
            n_y, n_u = (int(v) for v in rng.integers(lo, hi + 1, size=2))
        cfg = RegressorConfig(n_y, n_u)
        ds = build_regressors(ts, cfg)
        if eval_budget is not None:
            ds = ds.subset(slice(0, min(len(ds), eval_budget)))
        n_train = int(round(train_fraction * len(ds)))
        tr, va = split(ds, n_train)
        tr, norm = normalize(tr)
        va, _ = normalize(va, norm)
        out.append((cfg, float(evaluate(tr, va))))
    return out


def random_search_delays(ts: TimeSeries, candidate_range=(1, 10), n_trials=20,
                         eval_budget=None, seed=0, **kw) -> RegressorConfig:
    trials = delay_trials(ts, candidate_range, n_trials, eval_budget, seed, **kw)
    best = min(range(len(trials)), key=lambda i: trials[i][1])
    return trials[best][0]
