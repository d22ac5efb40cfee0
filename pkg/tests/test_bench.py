import csv
import math
from dataclasses import replace

import numpy as np
import pytest

from rbmfuzzy import bench, benchdata
from rbmfuzzy.config import apply_overrides, gas_furnace_preset
from rbmfuzzy.errors import ConfigError, DataError, StageError


@pytest.fixture(scope="module")
def gas_run():
    return bench.run_pipeline(gas_furnace_preset())


def test_report_consistency(gas_run):
    r = gas_run.report
    assert abs(r.train_rms ** 2 - r.train_mse) < 1e-12
    assert abs(r.test_rms ** 2 - r.test_mse) < 1e-12
    assert r.K == gas_run.model.K
    assert r.split["train"] == 200 and r.split["test"] == 91
    assert r.loglik_optimized >= r.loglik_identity
    assert {"rbm", "cluster", "probopt"} <= set(r.timings)


def test_test_mse_matches_predictions(gas_run):
    yhat = bench.predict(gas_run.model, gas_run.features.H_test)
    assert bench.mse(gas_run.data.test.Y, yhat) == gas_run.report.test_mse


def test_report_deterministic(gas_run):
    again = bench.run_pipeline(gas_furnace_preset())
    assert again.report.to_json(timing=False) == gas_run.report.to_json(timing=False)


def test_no_rbm_clusters_regressors():
    cfg = replace(gas_furnace_preset(), use_rbm=False, use_prob_rules=False)
    res = bench.run_pipeline(cfg)
    assert res.features.rbm is None
    np.testing.assert_array_equal(res.features.H_train, res.data.train.X)
    np.testing.assert_array_equal(res.model.P, np.eye(res.model.K))


def test_split_too_large():
    cfg = apply_overrides(gas_furnace_preset(), {"dataset.n_train": "400"})
    with pytest.raises(StageError) as info:
        bench.run_pipeline(cfg)
    assert isinstance(info.value.cause, ConfigError) and info.value.exit_code == 2


def test_stage_tagging(monkeypatch):
    def boom(*a, **k):
        raise FloatingPointError("overflow")

    monkeypatch.setattr(bench.crbm, "train", boom)
    with pytest.raises(StageError) as info:
        bench.run_pipeline(gas_furnace_preset())
    assert info.value.stage == "rbm" and info.value.exit_code == 4


def test_emit_predictions(gas_run, tmp_path):
    path = bench.emit_predictions(gas_run.model, gas_run.data.test, tmp_path / "p.csv",
                                  H=gas_run.features.H_test)
    rows = list(csv.DictReader(path.open()))
    assert len(rows) == len(gas_run.data.test)
    for row in rows:
        assert abs(float(row["y_true"]) - float(row["y_pred"]) - float(row["residual"])) < 1e-12
        assert abs(float(row["y_true_denorm"]) - float(row["y_pred_denorm"])
                   - float(row["residual_denorm"])) < 1e-9
    with pytest.raises(DataError):
        bench.emit_predictions(gas_run.model, gas_run.data.test.subset(slice(0, 0)), tmp_path / "e.csv")


def test_ablation_single_seed_shares_split():
    cfg = gas_furnace_preset()
    s = bench.ablate(cfg, [0])
    row = s["reports"][0]
    assert set(row) == {"std/norbm", "std/rbm", "prob/norbm", "prob/rbm"}
    assert len({json_split(r) for r in row.values()}) == 1
    assert row["std/rbm"].K == row["prob/rbm"].K
    assert row["std/norbm"].K == row["prob/norbm"].K
    # standalone run of one cell reproduces the grid cell
    solo = bench.run_pipeline(replace(cfg, use_rbm=True, use_prob_rules=True))
    assert solo.report.test_mse == row["prob/rbm"].test_mse
    assert s["median"]["prob/rbm"]["test_mse"] == row["prob/rbm"].test_mse
    assert "median K" in bench.format_table(s)


def json_split(r):
    return tuple(sorted(r.split.items()))


def test_model_save_load(gas_run, tmp_path):
    bench.save_run_model(tmp_path / "m.kv", gas_run, gas_furnace_preset())
    model, rbm, norm, reg = bench.load_run_model(tmp_path / "m.kv")
    np.testing.assert_array_equal(model.P, gas_run.model.P)
    np.testing.assert_array_equal(rbm.V, gas_run.features.rbm.V)
    assert (reg.n_y, reg.n_u) == (4, 5)
    H = bench.crbm.transform(rbm, gas_run.data.test.X)
    np.testing.assert_array_equal(bench.predict(model, H), bench.predict(gas_run.model, gas_run.features.H_test))


def test_trace_file(gas_run, tmp_path):
    bench.write_trace(gas_run.trace, tmp_path / "t.jsonl")
    lines = (tmp_path / "t.jsonl").read_text().splitlines()
    assert len(lines) == len(gas_run.trace)


def test_surrogates_deterministic():
    a = benchdata.gas_furnace_surrogate(benchdata.GAS_FURNACE_SEED)
    b = benchdata.gas_furnace_surrogate(benchdata.GAS_FURNACE_SEED)
    np.testing.assert_array_equal(a.y, b.y)
    assert len(a) == 296
    assert math.isfinite(float(np.sum(a.u)))
