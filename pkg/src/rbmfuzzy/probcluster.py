"""Probability-based clustering of hidden-feature vectors.

Labels are Gibbs-sampled under a Chinese-restaurant-process prior times a
correlation likelihood ``exp(h.delta_j - lam * |delta_j|^2)``; after each
assignment the cluster parameters ``delta_j`` receive a passive-aggressive
max-margin correction. Labels are 0-based.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kvfile
from .errors import ConfigError, DataError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClusterConfig:
    alpha: float = 0.8
    psi: float = 10.0
    lam: float = 5.0
    C: float = 0.001
    sweeps: int = 3
    new_cluster_threshold: float = 0.01
    t_dof: int = 3
    t_scale: float = 1.0
    feature_gain: float = 14.0
    radius_threshold: float = 0.01
    relative_scale: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if not self.psi > 0:
            raise ConfigError("psi must be > 0")
        if self.lam < 0:
            raise ConfigError("lam must be >= 0")
        if self.C < 0:
            raise ConfigError("C must be >= 0")
        if self.sweeps < 1 or self.t_dof < 1:
            raise ConfigError("sweeps and t_dof must be >= 1")
        if not 0 < self.new_cluster_threshold < 1:
            raise ConfigError("new_cluster_threshold must lie in (0, 1)")
        if not 0 <= self.radius_threshold < 1:
            raise ConfigError("radius_threshold must lie in [0, 1)")
        if not self.feature_gain > 0:
            raise ConfigError("feature_gain must be > 0")


@dataclass
class ClusterState:
    deltas: np.ndarray   # (K, m)
    labels: np.ndarray   # (N,), -1 = not yet assigned
    counts: np.ndarray   # (K,)

    @classmethod
    def empty(cls, n_samples: int, dim: int):
        return cls(np.zeros((0, dim)), np.full(n_samples, -1, dtype=int), np.zeros(0, dtype=int))

    @property
    def K(self) -> int:
        return self.deltas.shape[0]

    @property
    def dim(self) -> int:
        return self.deltas.shape[1]

    def copy(self) -> "ClusterState":
        return ClusterState(self.deltas.copy(), self.labels.copy(), self.counts.copy())

    def add_cluster(self, delta) -> int:
        self.deltas = np.vstack([self.deltas, np.asarray(delta, dtype=float)[None, :]])
        self.counts = np.append(self.counts, 0)
        return self.K - 1

    def assign(self, k: int, label: int):
        old = self.labels[k]
        if old >= 0:
            self.counts[old] -= 1
        self.labels[k] = label
        self.counts[label] += 1

    def unassign(self, k: int):
        old = self.labels[k]
        if old >= 0:
            self.counts[old] -= 1
            self.labels[k] = -1
        return old

    def check(self):
        lab = self.labels[self.labels >= 0]
        if lab.size and lab.max() >= self.K:
            raise AssertionError("label indexes a missing cluster")
        if not np.array_equal(np.bincount(lab, minlength=self.K), self.counts):
            raise AssertionError("counts disagree with labels")
        if not np.all(np.isfinite(self.deltas)):
            raise AssertionError("non-finite cluster parameters")

    def compact(self) -> np.ndarray:
        """Drop empty clusters and re-index labels; returns the old->new map."""
        keep = np.flatnonzero(self.counts > 0)
        remap = np.full(self.K, -1, dtype=int)
        remap[keep] = np.arange(keep.size)
        self.deltas = self.deltas[keep]
        self.counts = self.counts[keep]
        mask = self.labels >= 0
        self.labels[mask] = remap[self.labels[mask]]
        return remap


@dataclass(frozen=True)
class ClusterSummary:
    centers: np.ndarray  # (K, m)
    counts: np.ndarray   # (K,)
    label_changes: tuple = field(default=())

    @property
    def K(self) -> int:
        return self.centers.shape[0]


def crp_weights(state: ClusterState, k_index: int, cfg: ClusterConfig) -> np.ndarray:
    """Prior weights ``[(n_j - alpha)/(k + psi) ..., (psi + K alpha)/(k + psi)]``.

    Clusters emptied during a sweep get weight 0.
    """
    denom = k_index + cfg.psi
    n = state.counts.astype(float)
    existing = np.where(n > 0, (n - cfg.alpha) / denom, 0.0)
    new = (cfg.psi + state.K * cfg.alpha) / denom
    return np.append(existing, new)


def log_correlation(h, deltas, lam):
    deltas = np.atleast_2d(deltas)
    return deltas @ h - lam * np.einsum("ij,ij->i", deltas, deltas)


def correlation_likelihood(h, delta, lam) -> float:
    h = np.asarray(h, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if h.shape != delta.shape:
        raise DataError(f"feature shape {h.shape} != parameter shape {delta.shape}")
    return float(np.exp(h @ delta - lam * (delta @ delta)))


def relative_likelihood(h, deltas, lam):
    """Correlation likelihood divided by its supremum over the parameter,
    ``exp(-lam |delta - h/(2 lam)|^2)``; lies in (0, 1]."""
    h = np.asarray(h, dtype=float)
    if lam == 0:
        return np.ones(np.atleast_2d(deltas).shape[0])
    return np.exp(log_correlation(h, deltas, lam) - (h @ h) / (4.0 * lam))


def draw_delta(dim: int, cfg: ClusterConfig, rng) -> np.ndarray:
    return cfg.t_scale * rng.standard_t(cfg.t_dof, size=dim)


def label_probabilities(h, state: ClusterState, k_index: int, cfg: ClusterConfig, delta_new):
    """Normalized categorical probabilities over the K existing clusters plus
    the new one (last entry)."""
    prior = crp_weights(state, k_index, cfg)
    with np.errstate(divide="ignore"):
        logw = np.log(prior)
    logw[:-1] += log_correlation(h, state.deltas, cfg.lam) if state.K else 0.0
    logw[-1] += log_correlation(h, delta_new, cfg.lam)[0]
    logw -= logw.max()
    w = np.exp(logw)
    return w / w.sum()


def sample_label(h, state: ClusterState, k_index: int, cfg: ClusterConfig, rng,
                 delta_new=None, anchors=None) -> int:
    """Draw a label for feature ``h`` and return it.

    The categorical draw runs over the K existing clusters plus a new one
    whose parameters are ``delta_new`` (drawn from :func:`draw_delta` when not
    given). If every live cluster's normalized probability is below
    ``cfg.new_cluster_threshold`` the new cluster is forced, as it is when
    ``h`` lies outside every live cluster's likelihood radius, measured
    against ``anchors`` (default: the cluster parameters). A chosen new
    cluster is appended to ``state``; the assignment itself is not recorded.
    """
    h = np.asarray(h, dtype=float)
    if delta_new is None:
        delta_new = draw_delta(h.size, cfg, rng)
    live = state.counts > 0
    if not live.any():
        return state.add_cluster(delta_new)
    if cfg.radius_threshold > 0:
        ref = state.deltas if anchors is None else anchors
        rel = relative_likelihood(h, ref[live], cfg.lam)
        if rel.max() < cfg.radius_threshold:
            return state.add_cluster(delta_new)
    p = label_probabilities(h, state, k_index, cfg, delta_new)
    if np.all(p[:-1][live] < cfg.new_cluster_threshold):
        return state.add_cluster(delta_new)
    j = int(rng.choice(p.size, p=p))
    if j == state.K:
        return state.add_cluster(delta_new)
    return j


def predict_label(h, state: ClusterState) -> int:
    if state.K == 0:
        raise DataError("no clusters to predict from")
    return int(np.argmax(state.deltas @ np.asarray(h, dtype=float)))


def _check_label(state, label):
    if not 0 <= label < state.K:
        raise DataError(f"label {label} out of range for K={state.K}")


def margin(state: ClusterState, h, l_true: int) -> float:
    _check_label(state, l_true)
    h = np.asarray(h, dtype=float)
    l_hat = predict_label(h, state)
    return float(h @ state.deltas[l_true] - h @ state.deltas[l_hat])


def hinge_loss(state: ClusterState, h, l_true: int) -> float:
    m = margin(state, h, l_true)
    return 0.0 if m >= 1.0 else 1.0 - m


def pa_update(state: ClusterState, h, l_true: int, C: float) -> ClusterState:
    """Passive-aggressive step: ``delta_true += tau h``, ``delta_pred -= tau h``
    with ``tau = min(C, loss / |h|^2)``. When the prediction is already
    ``l_true`` the two moves cancel and nothing changes."""
    h = np.asarray(h, dtype=float)
    loss = hinge_loss(state, h, l_true)
    nrm2 = float(h @ h)
    if nrm2 == 0.0:
        log.warning("zero feature vector; skipping passive-aggressive update")
        return state
    l_hat = predict_label(h, state)
    if loss == 0.0 or C == 0.0 or l_hat == l_true:
        return state
    tau = min(C, loss / nrm2)
    state.deltas[l_true] += tau * h
    state.deltas[l_hat] -= tau * h
    return state


def summarize(H, state: ClusterState, label_changes=()) -> ClusterSummary:
    K = state.K
    centers = np.zeros((K, H.shape[1]))
    np.add.at(centers, state.labels, H)
    centers /= np.maximum(state.counts, 1)[:, None]
    return ClusterSummary(centers, state.counts.copy(), tuple(label_changes))


def feature_spread(H) -> float:
    """Root-mean-square distance of the rows of ``H`` to their mean (1 if 0)."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    s = float(np.sqrt(np.mean(np.sum((H - H.mean(axis=0)) ** 2, axis=1))))
    return s if s > 0 else 1.0


def fit(H, cfg: ClusterConfig, on_sweep=None) -> tuple[ClusterState, ClusterSummary]:
    """Cluster the rows of ``H``.

    Features enter the correlation likelihood scaled by ``cfg.feature_gain``
    (``g``), after division by :func:`feature_spread` when
    ``cfg.relative_scale`` is set, so the rule count does not depend on the
    units of the feature map. Each sweep visits samples in order: the sample leaves its
    cluster, a label is drawn with :func:`sample_label`, and a
    passive-aggressive step is applied with the drawn label as target.

    Cluster parameters are ``delta_j = g * mean_j / (2 lam) + pa_j``: the
    maximizer of the members' summed correlation log-likelihood, kept current
    as members move, plus the accumulated passive-aggressive corrections.
    Candidate new clusters are centred on the feature mean with Student-t
    jitter of ``cfg.t_scale`` feature units. Empty clusters are removed after
    the last sweep. ``on_sweep(sweep, state)`` is called after every sweep.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    N, m = H.shape
    if N < 1:
        raise DataError("cannot cluster an empty feature set")
    rng = np.random.default_rng(cfg.seed)
    H_in = H
    if cfg.relative_scale:
        H = H / feature_spread(H)
    scale = cfg.feature_gain / (2.0 * cfg.lam) if cfg.lam > 0 else cfg.feature_gain
    G = cfg.feature_gain * H
    origin = H.mean(axis=0)
    state = ClusterState.empty(N, m)
    sums = np.zeros((0, m))
    anchors = np.zeros((0, m))

    def refresh(j):
        if state.counts[j] > 0:
            new = scale * sums[j] / state.counts[j]
            state.deltas[j] += new - anchors[j]
            anchors[j] = new

    changes = []
    for sweep in range(cfg.sweeps):
        prev = state.labels.copy()
        for k in range(N):
            old = state.unassign(k)
            if old >= 0:
                sums[old] -= H[k]
                refresh(old)
            seated = int(state.counts.sum())
            virtual = scale * (origin + draw_delta(m, cfg, rng))
            label = sample_label(G[k], state, seated, cfg, rng, delta_new=virtual, anchors=anchors)
            if label == sums.shape[0]:
                sums = np.vstack([sums, np.zeros(m)])
                anchors = np.vstack([anchors, virtual])
            state.assign(k, label)
            sums[label] += H[k]
            refresh(label)
            pa_update(state, G[k], label, cfg.C)
        changes.append(float(np.mean(prev != state.labels)) if sweep else 1.0)
        if on_sweep:
            on_sweep(sweep, state)
    state.compact()
    return state, summarize(H_in, state, changes)


def save_summary(summary: ClusterSummary, path, cfg: ClusterConfig | None = None):
    from dataclasses import asdict

    data = {"kind": "clusters", "K": summary.K, "m": summary.centers.shape[1],
            "counts": summary.counts.astype(float), "centers": summary.centers}
    if cfg is not None:
        data.update({f"cluster.{k}": v for k, v in asdict(cfg).items()})
    kvfile.dump(data, path)


def load_summary(path) -> ClusterSummary:
    d = kvfile.load(path)
    if d.get("kind") != "clusters":
        raise DataError(f"{path} does not hold a cluster summary")
    centers = np.asarray(d["centers"]).reshape(d["K"], d["m"])
    return ClusterSummary(centers, np.asarray(d["counts"]).astype(int))
