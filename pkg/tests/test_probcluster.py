import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rbmfuzzy import probcluster as pc
from rbmfuzzy.errors import ConfigError, DataError
from rbmfuzzy.probcluster import ClusterConfig, ClusterState


def _state(deltas, counts):
    deltas = np.asarray(deltas, dtype=float)
    counts = np.asarray(counts, dtype=int)
    labels = np.repeat(np.arange(len(counts)), counts)
    return ClusterState(deltas.copy(), labels, counts.copy())


# ---------------------------------------------------------------- prior

def test_crp_first_sample_only_new():
    w = pc.crp_weights(ClusterState.empty(3, 2), 0, ClusterConfig())
    assert w.shape == (1,) and w[0] > 0


def test_crp_hand_example():
    st_ = _state(np.zeros((2, 2)), [5, 15])
    w = pc.crp_weights(st_, 20, ClusterConfig(alpha=0.8, psi=10.0))
    assert abs(w[0] - 0.14) < 1e-12
    assert abs(w[2] - 11.6 / 30) < 1e-12
    assert abs(w[2] - 0.3867) < 1e-4


def test_gas_furnace_defaults():
    cfg = ClusterConfig()
    assert (cfg.alpha, cfg.psi, cfg.lam, cfg.C) == (0.8, 10.0, 5.0, 0.001)


@given(st.lists(st.integers(1, 50), min_size=0, max_size=8), st.floats(0.01, 0.99),
       st.floats(0.1, 100), st.integers(1, 500))
def test_crp_weights_nonnegative(counts, alpha, psi, k):
    st_ = _state(np.zeros((len(counts), 2)), counts)
    w = pc.crp_weights(st_, k, ClusterConfig(alpha=alpha, psi=psi))
    assert np.all(w >= 0) and w[-1] > 0


def test_config_validation():
    for bad in (dict(alpha=1.0), dict(psi=0.0), dict(lam=-1.0), dict(sweeps=0),
                dict(new_cluster_threshold=1.0), dict(t_dof=0)):
        with pytest.raises(ConfigError):
            ClusterConfig(**bad)


# ---------------------------------------------------------------- likelihood

@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.floats(0, 10))
def test_likelihood_zero_delta(h, lam):
    assert pc.correlation_likelihood(h, np.zeros(3), lam) == 1.0


def test_likelihood_orthogonal_and_example():
    assert pc.correlation_likelihood([1.0, 0.0], [0.0, 3.0], 0.0) == 1.0
    assert abs(pc.correlation_likelihood([1.0, 0.0], [1.0, 0.0], 5.0) - np.exp(-4)) < 1e-15
    assert abs(np.exp(-4) - 0.0183) < 1e-4


def test_likelihood_shape_error():
    with pytest.raises(DataError):
        pc.correlation_likelihood([1.0, 0.0], [1.0, 0.0, 0.0], 1.0)


@given(st.lists(st.floats(-3, 3), min_size=2, max_size=2),
       st.lists(st.floats(-3, 3), min_size=2, max_size=2), st.floats(0.1, 10))
def test_relative_likelihood_bounded(h, d, lam):
    r = pc.relative_likelihood(np.array(h), np.array([d]), lam)[0]
    assert 0 <= r <= 1 + 1e-12
    peak = pc.relative_likelihood(np.array(h), np.array(h)[None] / (2 * lam), lam)[0]
    assert abs(peak - 1.0) < 1e-12


# ---------------------------------------------------------------- sampling

def test_sample_first_opens_cluster(rng):
    st_ = ClusterState.empty(4, 2)
    label = pc.sample_label(np.array([0.3, 0.1]), st_, 0, ClusterConfig(), rng)
    assert label == 0 and st_.K == 1


def test_sample_strong_existing(rng):
    cfg = ClusterConfig(alpha=0.5, psi=0.01, lam=0.0, radius_threshold=0.0)
    h = np.array([1.0, 0.0])
    hits = 0
    for _ in range(1000):
        st_ = _state([[5.0, 0.0]], [20])
        label = pc.sample_label(h, st_, 20, cfg, rng, delta_new=np.zeros(2))
        hits += label == 0
    p = pc.label_probabilities(h, _state([[5.0, 0.0]], [20]), 20, cfg, np.zeros(2))
    assert p[0] > 0.99
    assert hits / 1000 > 0.95


def test_sample_prior_limit(rng):
    # identical huge penalties: the likelihood cancels and only the prior remains
    cfg = ClusterConfig(alpha=0.8, psi=10.0, lam=1e6, radius_threshold=0.0,
                        new_cluster_threshold=1e-6)
    deltas = [[1.0, 0.0], [0.0, 1.0]]
    counts = [3, 12]
    h = np.zeros(2)
    prior = pc.crp_weights(_state(deltas, counts), 15, cfg)
    expect = prior / prior.sum()
    n = 20_000
    freq = np.zeros(3)
    for _ in range(n):
        st_ = _state(deltas, counts)
        freq[pc.sample_label(h, st_, 15, cfg, rng, delta_new=np.array([0.6, 0.8]))] += 1
    np.testing.assert_allclose(freq / n, expect, atol=0.015)


def test_threshold_forces_new(rng):
    cfg = ClusterConfig(lam=0.0, radius_threshold=0.0, new_cluster_threshold=0.5)
    st_ = _state([[-10.0, 0.0]], [5])
    label = pc.sample_label(np.array([1.0, 0.0]), st_, 5, cfg, rng, delta_new=np.array([10.0, 0.0]))
    assert label == 1 and st_.K == 2


# ---------------------------------------------------------------- prediction and margin

def test_predict_examples():
    assert pc.predict_label([0.3, 0.4], _state([[2.0, 1.0]], [1])) == 0
    two = _state([[1.0, 0.0], [0.0, 1.0]], [1, 1])
    assert pc.predict_label([0.9, 0.1], two) == 0
    assert pc.predict_label([0.5, 0.5], two) == 0  # tie -> lowest index
    with pytest.raises(DataError):
        pc.predict_label([1.0], ClusterState.empty(1, 1))


@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3), st.floats(1e-3, 1e3), st.integers(0, 10_000))
def test_predict_scale_invariant(h, c, seed):
    d = np.random.default_rng(seed).normal(size=(4, 3))
    st_ = _state(d, [1, 1, 1, 1])
    h = np.array(h)
    assert pc.predict_label(h, st_) == pc.predict_label(c * h, st_)


def test_margin_and_hinge_examples():
    st_ = _state([[1.0, 0.0], [0.0, 1.0]], [1, 1])
    assert pc.margin(st_, [0.0, 1.0], 0) == -1.0
    assert pc.margin(st_, [0.0, 1.0], 1) == 0.0
    assert pc.hinge_loss(st_, [0.0, 1.0], 0) == 2.0
    assert pc.hinge_loss(st_, [0.0, 1.0], 1) == 1.0
    with pytest.raises(DataError):
        pc.margin(st_, [0.0, 1.0], 2)


def test_hinge_boundary():
    st_ = _state([[0.0, 0.0], [0.0, 0.0]], [1, 1])
    # margin is 0 here; shifting the true vector does not change the predicted argmax tie-break
    assert pc.hinge_loss(st_, [1.0, 0.0], 0) == 1.0
    st2 = _state([[1.0, 0.0], [0.0, 0.0]], [1, 1])
    assert pc.margin(st2, [1.0, 0.0], 0) == 0.0


@given(st.integers(0, 10_000))
def test_margin_orthogonal_shift(seed):
    r = np.random.default_rng(seed)
    d = r.normal(size=(3, 3))
    h = r.normal(size=3)
    v = r.normal(size=3)
    v -= (v @ h) / (h @ h) * h
    a = pc.margin(_state(d, [1, 1, 1]), h, 1)
    b = pc.margin(_state(d + v, [1, 1, 1]), h, 1)
    assert abs(a - b) < 1e-9


@given(st.integers(0, 10_000))
def test_margin_nonpositive(seed):
    r = np.random.default_rng(seed)
    st_ = _state(r.normal(size=(4, 2)), [1] * 4)
    h = r.normal(size=2)
    for l in range(4):
        assert pc.margin(st_, h, l) <= 0.0


# ---------------------------------------------------------------- passive-aggressive

def test_pa_hand_trace():
    st_ = _state([[0.0, 0.0], [0.0, 1.0]], [1, 1])
    h = np.array([0.0, 1.0])
    pc.pa_update(st_, h, 0, 10.0)
    np.testing.assert_array_equal(st_.deltas, [[0.0, 2.0], [0.0, -1.0]])
    assert pc.predict_label(h, st_) == 0


def test_pa_passive_cases():
    base = _state([[0.0, 0.0], [0.0, 1.0]], [1, 1])
    s = base.copy()
    pc.pa_update(s, [0.0, 1.0], 0, 0.0)
    np.testing.assert_array_equal(s.deltas, base.deltas)
    s = base.copy()
    pc.pa_update(s, [0.0, 0.0], 0, 1.0)
    np.testing.assert_array_equal(s.deltas, base.deltas)
    s = _state([[3.0, 0.0], [0.0, 1.0]], [1, 1])
    before = s.deltas.copy()
    pc.pa_update(s, [1.0, 0.0], 0, 1.0)  # prediction already correct
    np.testing.assert_array_equal(s.deltas, before)


@given(st.integers(0, 10_000), st.floats(1e-3, 10))
def test_pa_properties(seed, C):
    r = np.random.default_rng(seed)
    st_ = _state(r.normal(size=(4, 3)), [1] * 4)
    h = r.normal(size=3)
    l_true = int(r.integers(4))
    before = st_.deltas.copy()
    m0 = pc.margin(st_, h, l_true)
    pc.pa_update(st_, h, l_true, C)
    changed = np.flatnonzero(np.any(st_.deltas != before, axis=1))
    assert changed.size in (0, 2)
    assert pc.margin(st_, h, l_true) >= m0 - 1e-12


# ---------------------------------------------------------------- fit

def test_fit_single_sample():
    state, summ = pc.fit(np.array([[0.2, 0.7]]), ClusterConfig())
    assert summ.K == 1
    np.testing.assert_array_equal(summ.centers[0], [0.2, 0.7])


def test_fit_empty():
    with pytest.raises(DataError):
        pc.fit(np.zeros((0, 2)), ClusterConfig())


def _blobs(seed, n=100):
    r = np.random.default_rng(seed)
    # distinct directions: the dot-product classifier cannot split points on one ray
    a = r.normal([0.8, 0.2, 0.2], 0.02, (n, 3))
    b = r.normal([0.2, 0.8, 0.2], 0.02, (n, 3))
    H = np.vstack([a, b])
    truth = np.repeat([0, 1], n)
    perm = r.permutation(2 * n)
    return np.clip(H[perm], 0, 1), truth[perm]


def _purity(labels, truth):
    return sum(np.bincount(truth[labels == j]).max() for j in np.unique(labels)) / truth.size


def test_fit_two_blobs():
    good = 0
    for seed in range(5):
        H, truth = _blobs(seed)
        state, summ = pc.fit(H, ClusterConfig(seed=seed))
        good += summ.K == 2 and _purity(state.labels, truth) >= 0.95
    assert good >= 4


def test_fit_counts_consistent_each_sweep():
    H, _ = _blobs(0)

    def check(sweep, state):
        state.check()
        assert state.counts.sum() == H.shape[0]

    state, summ = pc.fit(H, ClusterConfig(sweeps=4), on_sweep=check)
    state.check()
    assert np.all(summ.counts > 0) and summ.counts.sum() == H.shape[0]


def test_fit_centers_are_member_means():
    H, _ = _blobs(1)
    state, summ = pc.fit(H, ClusterConfig(seed=1))
    for j in range(summ.K):
        np.testing.assert_allclose(summ.centers[j], H[state.labels == j].mean(axis=0), atol=1e-12)


def test_fit_deterministic():
    H, _ = _blobs(2)
    s1, a = pc.fit(H, ClusterConfig(seed=5))
    s2, b = pc.fit(H, ClusterConfig(seed=5))
    np.testing.assert_array_equal(s1.labels, s2.labels)
    np.testing.assert_array_equal(s1.deltas, s2.deltas)
    np.testing.assert_array_equal(a.centers, b.centers)


def test_summary_roundtrip(tmp_path):
    H, _ = _blobs(3)
    _, summ = pc.fit(H, ClusterConfig())
    pc.save_summary(summ, tmp_path / "c.kv", ClusterConfig())
    back = pc.load_summary(tmp_path / "c.kv")
    np.testing.assert_array_equal(back.centers, summ.centers)
    np.testing.assert_array_equal(back.counts, summ.counts)
