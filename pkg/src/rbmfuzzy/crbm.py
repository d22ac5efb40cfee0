"""Restricted Boltzmann machine with binary hidden units and continuous
visible units on [0, 1].

Visible conditionals are truncated exponentials: given the binary hidden
vector ``hb`` the j-th visible unit has density ``a e^{a x} / (e^a - 1)`` on
[0, 1] with ``a = (V^T hb)_j + b_vis_j``. Hidden units use the usual sigmoid
conditional ``p(hb_i = 1 | x) = sigmoid((V x)_i + c_hid_i)``.

The energy is ``E(x, hb) = -hb^T V x - b_vis^T x - c_hid^T hb``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import expit

from . import kvfile
from .errors import ConfigError, DataError

# below this |a| the visible conditional is replaced by its uniform limit
SMALL_A = 1e-8


@dataclass(frozen=True)
class RbmModel:
    V: np.ndarray      # (m, n)
    b_vis: np.ndarray  # (n,)
    c_hid: np.ndarray  # (m,)

    def __post_init__(self):
        V = np.atleast_2d(np.asarray(self.V, dtype=float))
        b = np.asarray(self.b_vis, dtype=float).ravel()
        c = np.asarray(self.c_hid, dtype=float).ravel()
        m, n = V.shape
        if m < 1 or n < 1:
            raise ConfigError("RBM needs at least one visible and one hidden unit")
        if b.size != n or c.size != m:
            raise ConfigError(f"bias sizes ({b.size}, {c.size}) do not match V {V.shape}")
        if not (np.all(np.isfinite(V)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
            raise ConfigError("non-finite RBM parameters")
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "b_vis", b)
        object.__setattr__(self, "c_hid", c)

    @property
    def n_visible(self):
        return self.V.shape[1]

    @property
    def n_hidden(self):
        return self.V.shape[0]

    @classmethod
    def zeros(cls, n_visible, n_hidden):
        return cls(np.zeros((n_hidden, n_visible)), np.zeros(n_visible), np.zeros(n_hidden))


@dataclass(frozen=True)
class RbmTrainConfig:
    learning_rate: float = 0.2
    epochs: int = 10
    gibbs_steps: int = 1
    seed: int = 0
    init_scale: float = 0.01
    n_hidden: int | None = None  # None -> same as the number of visible units
    batch_size: int = 1

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.epochs < 1 or self.gibbs_steps < 1 or self.batch_size < 1:
            raise ConfigError("epochs, gibbs_steps and batch_size must be >= 1")
        if self.init_scale < 0:
            raise ConfigError("init_scale must be >= 0")
        if self.n_hidden is not None and self.n_hidden < 1:
            raise ConfigError("n_hidden must be >= 1")


def _check_x(model: RbmModel, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.n_visible:
        raise DataError(f"input width {x.shape[-1]} != visible units {model.n_visible}")
    return x


def hidden_probs(model: RbmModel, x) -> np.ndarray:
    """``sigmoid(V x + c_hid)``; ``x`` may be a single row or an (N, n) batch."""
    x = _check_x(model, x)
    return expit(x @ model.V.T + model.c_hid)


def sample_hidden(model: RbmModel, x, rng) -> np.ndarray:
    p = hidden_probs(model, x)
    return (rng.random(p.shape) < p).astype(float)


def visible_activation(model: RbmModel, hb) -> np.ndarray:
    return np.asarray(hb, dtype=float) @ model.V + model.b_vis


def visible_density(a, x):
    """Truncated-exponential density on [0, 1] with rate ``a``."""
    a, x = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(x, dtype=float))
    small = np.abs(a) < SMALL_A
    pos = a > 0
    s = np.where(small, 1.0, a)
    with np.errstate(over="ignore", invalid="ignore"):
        # rewrite for a > 0 so that nothing overflows
        dens_pos = s * np.exp(s * (x - 1.0)) / -np.expm1(-s)
        dens_neg = s * np.exp(s * x) / np.expm1(s)
    out = np.where(small, 1.0, np.where(pos, dens_pos, dens_neg))
    return out[()] if out.ndim == 0 else out


def visible_cdf(a, x):
    a, x = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(x, dtype=float))
    small = np.abs(a) < SMALL_A
    pos = a > 0
    s = np.where(small, 1.0, a)
    with np.errstate(over="ignore", invalid="ignore"):
        cdf_pos = np.exp(s * (x - 1.0)) * np.expm1(-s * x) / np.expm1(-s)
        cdf_neg = np.expm1(s * x) / np.expm1(s)
    out = np.where(small, x, np.where(pos, cdf_pos, cdf_neg))
    out = np.clip(out, 0.0, 1.0)
    return out[()] if out.ndim == 0 else out


def visible_expected(a):
    """Mean of the truncated exponential, ``1/(1 - e^{-a}) - 1/a``."""
    a = np.asarray(a, dtype=float)
    # the closed form cancels catastrophically near 0; use the Taylor series there
    series = np.abs(a) < 1e-3
    s = np.where(series, 1.0, a)
    with np.errstate(over="ignore", divide="ignore"):
        closed = 1.0 / -np.expm1(-s) - 1.0 / s
    taylor = 0.5 + a / 12.0 - a ** 3 / 720.0
    out = np.where(series, taylor, closed)
    return out[()] if out.ndim == 0 else out


def inverse_cdf(a, u):
    """Map uniform draws ``u`` to visible values by inverting the CDF."""
    a, u = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(u, dtype=float))
    small = np.abs(a) < SMALL_A
    pos = a > 0
    s = np.where(small, 1.0, a)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        x_pos = 1.0 + np.log(u + (1.0 - u) * np.exp(-s)) / s
        x_neg = np.log1p(u * np.expm1(s)) / s
    out = np.where(small, u, np.where(pos, x_pos, x_neg))
    out = np.clip(out, 0.0, 1.0)
    return out[()] if out.ndim == 0 else out


def sample_visible(model: RbmModel, hb, rng) -> np.ndarray:
    a = visible_activation(model, hb)
    return inverse_cdf(a, rng.random(a.shape))


def free_energy(model: RbmModel, x):
    """``F(x) = -b_vis.x - sum_i log(1 + exp((V x)_i + c_hid_i))``."""
    x = _check_x(model, x)
    pre = x @ model.V.T + model.c_hid
    return -(x @ model.b_vis) - np.logaddexp(0.0, pre).sum(axis=-1)


def free_energy_grad(model: RbmModel, x):
    """Gradients of F at a single row ``x`` w.r.t. (V, b_vis, c_hid)."""
    x = _check_x(model, x)
    p = hidden_probs(model, x)
    return -np.outer(p, x), -x, -p


def gibbs_reconstruct(model: RbmModel, x, rng, steps: int = 1):
    xt = x
    for _ in range(steps):
        xt = sample_visible(model, sample_hidden(model, xt, rng), rng)
    return xt


def cd1_step(model: RbmModel, batch, eta: float, rng, steps: int = 1,
             reconstruct=None) -> RbmModel:
    """One contrastive-divergence update averaged over the rows of ``batch``.

    Descends ``F(x) - F(x~)`` where ``x~`` is the Gibbs reconstruction, i.e.
    ``dV = eta * (p(h|x) x^T - p(h|x~) x~^T)``. ``reconstruct(model, X, rng)``
    replaces the Gibbs chain when given (used to pin the negative phase).
    """
    X = np.atleast_2d(_check_x(model, batch))
    if eta == 0:
        return model
    Xt = reconstruct(model, X, rng) if reconstruct else gibbs_reconstruct(model, X, rng, steps)
    P = hidden_probs(model, X)
    Pt = hidden_probs(model, Xt)
    B = X.shape[0]
    dV = (P.T @ X - Pt.T @ Xt) / B
    db = (X - Xt).mean(axis=0)
    dc = (P - Pt).mean(axis=0)
    return RbmModel(model.V + eta * dV, model.b_vis + eta * db, model.c_hid + eta * dc)


def init_model(n_visible: int, cfg: RbmTrainConfig, rng) -> RbmModel:
    m = cfg.n_hidden or n_visible
    V = rng.normal(0.0, cfg.init_scale, size=(m, n_visible))
    return RbmModel(V, np.zeros(n_visible), np.zeros(m))


def reconstruction_error(model: RbmModel, X, rng) -> float:
    """Mean ``||x - E[x | hb]||^2`` with ``hb`` sampled from ``p(h | x)``."""
    X = np.atleast_2d(_check_x(model, X))
    hb = sample_hidden(model, X, rng)
    xe = visible_expected(visible_activation(model, hb))
    return float(np.mean(np.sum((X - xe) ** 2, axis=1)))


def train(X, cfg: RbmTrainConfig, callback=None) -> RbmModel:
    """CD-k training in data order (no shuffling), ``cfg.batch_size`` rows per step.

    ``callback(epoch, model)`` is invoked before the first epoch (epoch 0) and
    after each one.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 0 or X.size == 0:
        raise DataError("cannot train an RBM on empty data")
    if np.any(X < 0) or np.any(X > 1):
        raise DataError("RBM inputs must lie in [0, 1]")
    rng = np.random.default_rng(cfg.seed)
    model = init_model(X.shape[1], cfg, rng)
    if callback:
        callback(0, model)
    bs = cfg.batch_size
    for epoch in range(1, cfg.epochs + 1):
        if bs == 1 and cfg.gibbs_steps == 1:
            model = _cd1_epoch_online(model, X, cfg.learning_rate, rng)
        else:
            for start in range(0, X.shape[0], bs):
                model = cd1_step(model, X[start:start + bs], cfg.learning_rate, rng, cfg.gibbs_steps)
        if callback:
            callback(epoch, model)
    return model


def _cd1_epoch_online(model: RbmModel, X, eta, rng) -> RbmModel:
    """One epoch of per-sample CD-1 on raw arrays.

    Same arithmetic and random stream as calling :func:`cd1_step` row by row,
    without the per-step model validation.
    """
    V, b, c = model.V.copy(), model.b_vis.copy(), model.c_hid.copy()
    m, n = V.shape
    U = rng.random((X.shape[0], m + n))
    for x, u in zip(X, U):
        p = expit(V @ x + c)
        hb = (u[:m] < p).astype(float)
        xt = inverse_cdf(hb @ V + b, u[m:])
        pt = expit(V @ xt + c)
        V += eta * (np.outer(p, x) - np.outer(pt, xt))
        b += eta * (x - xt)
        c += eta * (p - pt)
    return RbmModel(V, b, c)


def transform(model: RbmModel, X) -> np.ndarray:
    """Hidden probability features; inputs are clamped to [0, 1] first."""
    return hidden_probs(model, np.clip(np.asarray(X, dtype=float), 0.0, 1.0))


def save(model: RbmModel, path, cfg: RbmTrainConfig | None = None):
    data = {"kind": "rbm", "n_visible": model.n_visible, "n_hidden": model.n_hidden,
            "V": model.V, "b_vis": model.b_vis, "c_hid": model.c_hid}
    if cfg is not None:
        data.update({f"train.{k}": v for k, v in asdict(cfg).items() if v is not None})
    kvfile.dump(data, path)


def load(path) -> RbmModel:
    d = kvfile.load(path)
    if d.get("kind") != "rbm":
        raise DataError(f"{path} does not hold an RBM")
    return RbmModel(d["V"], d["b_vis"], d["c_hid"])
