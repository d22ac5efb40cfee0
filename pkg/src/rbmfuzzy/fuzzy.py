"""Gaussian-membership fuzzy rules with product inference, center-average
defuzzification, and probability-weighted consequents."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import kvfile
from .errors import ConfigError, DataError

log = logging.getLogger(__name__)

MIN_WIDTH = 0.05
FORMAT_VERSION = 1


@dataclass(frozen=True)
class FuzzyModel:
    centers: np.ndarray    # (K, m)
    widths: np.ndarray     # (K, m), > 0
    W: np.ndarray          # (K,) consequent centres
    P: np.ndarray          # (K, K) row-stochastic, P[i, j] = p(B^j | rule i)
    sigma_B: np.ndarray    # (K,) consequent widths

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        s = np.atleast_2d(np.asarray(self.widths, dtype=float))
        W = np.asarray(self.W, dtype=float).ravel()
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        sB = np.asarray(self.sigma_B, dtype=float).ravel()
        K = c.shape[0]
        if K < 1:
            raise ConfigError("a fuzzy model needs at least one rule")
        if s.shape != c.shape or W.size != K or P.shape != (K, K) or sB.size != K:
            raise ConfigError("inconsistent fuzzy model shapes")
        if np.any(s <= 0) or np.any(sB <= 0):
            raise ConfigError("membership widths must be positive")
        if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, atol=1e-9, rtol=0):
            raise ConfigError("P must be row-stochastic")
        for name, v in (("centers", c), ("widths", s), ("W", W), ("P", P), ("sigma_B", sB)):
            object.__setattr__(self, name, v)

    @property
    def K(self) -> int:
        return self.centers.shape[0]

    @property
    def m(self) -> int:
        return self.centers.shape[1]

    def replace(self, **kw) -> "FuzzyModel":
        d = dict(centers=self.centers, widths=self.widths, W=self.W, P=self.P, sigma_B=self.sigma_B)
        d.update(kw)
        return FuzzyModel(**d)


def membership(c, sigma, h):
    """Gaussian membership ``exp(-(h - c)^2 / sigma^2)``."""
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0):
        raise ConfigError("membership width must be positive")
    return np.exp(-((np.asarray(h, dtype=float) - c) ** 2) / sigma ** 2)


def log_rule_strengths(model: FuzzyModel, H) -> np.ndarray:
    """Log of the product of antecedent memberships, shape (N, K)."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    if H.shape[1] != model.m:
        raise DataError(f"feature width {H.shape[1]} != model input width {model.m}")
    d = (H[:, None, :] - model.centers[None, :, :]) / model.widths[None, :, :]
    return -np.sum(d * d, axis=2)


def firing_strengths(model: FuzzyModel, H) -> np.ndarray:
    """Normalized firing strengths; one row per input, each on the simplex.

    Rows whose products all underflow to 0 fall back to uniform weights.
    """
    single = np.ndim(H) == 1
    L = log_rule_strengths(model, H)
    raw = np.exp(L)
    denom = raw.sum(axis=1, keepdims=True)
    dead = denom[:, 0] == 0.0
    if dead.any():
        log.info("%d inputs fire no rule; using uniform firing strengths", int(dead.sum()))
    with np.errstate(invalid="ignore", divide="ignore"):
        phi = np.where(dead[:, None], 1.0 / model.K, raw / np.where(dead, 1.0, denom[:, 0])[:, None])
    return phi[0] if single else phi


def infer_standard(model: FuzzyModel, H):
    return firing_strengths(model, H) @ model.W


def rule_probabilities(model: FuzzyModel, H):
    """``p(B^j | h) = sum_i phi_i(h) P[i, j]``."""
    return firing_strengths(model, H) @ model.P


def infer_probabilistic(model: FuzzyModel, H):
    return rule_probabilities(model, H) @ model.W


def design_vectors(model: FuzzyModel, H, probabilistic: bool = True) -> np.ndarray:
    """Rows are the data vectors that multiply ``W``: ``phi`` or ``phi P``."""
    phi = np.atleast_2d(firing_strengths(model, H))
    return phi @ model.P if probabilistic else phi


def build_from_clusters(centers, seed: int = 0, sigma_B: float = 0.1) -> FuzzyModel:
    """One rule per cluster centre; widths uniform on [MIN_WIDTH, 1), P = I,
    W = 0."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    K, m = centers.shape
    if K < 1:
        raise ConfigError("need at least one cluster")
    rng = np.random.default_rng(seed)
    widths = rng.uniform(MIN_WIDTH, 1.0, size=(K, m))
    return FuzzyModel(centers, widths, np.zeros(K), np.eye(K), np.full(K, sigma_B))


def save(model: FuzzyModel, path, extra: dict | None = None):
    data = {"kind": "fuzzy", "version": FORMAT_VERSION, "K": model.K, "m": model.m,
            "centers": model.centers, "widths": model.widths, "W": model.W,
            "P": model.P, "sigma_B": model.sigma_B}
    if extra:
        data.update(extra)
    kvfile.dump(data, path)


def load(path) -> FuzzyModel:
    d = kvfile.load(path)
    if d.get("kind") != "fuzzy":
        raise DataError(f"{path} does not hold a fuzzy model")
    if d.get("version") != FORMAT_VERSION:
        raise DataError(f"unsupported fuzzy model version {d.get('version')}")
    return FuzzyModel(d["centers"], d["widths"], d["W"], d["P"], d["sigma_B"])
