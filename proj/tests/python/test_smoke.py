import numpy as np
import pytest

import rapidmaxnull as rmn


def test_tstat_hand_example():
    data = np.array([[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]])
    assert rmn.tstat(data, n1=3)[0] == pytest.approx(-3.6742346, rel=1e-7)


def test_naive_counts_and_determinism():
    rng = np.random.default_rng(0)
    data = rng.standard_normal((200, 12))
    a = rmn.run_naive(data, permutations=100, seed=3)
    b = rmn.run_naive(data, permutations=100, seed=3, threads=2)
    assert a["evaluations"] == 200 * 100
    assert a["maxima"] == b["maxima"]
    assert a["maxima"][0] == max(a["observed"])


def test_rapid_counters_and_threshold():
    sim = rmn.gen_sim2(n=60, v=2000, effect_mu=1.0, sparsity=0.01, seed=1)
    res = rmn.run_rapid(sim["data"], permutations=300, n1=sim["n1"], seed=2, max_passes=5)
    k = int(np.ceil(res["eta"] * 2000))
    assert res["full_evaluations"] == 2000 * res["training_columns"]
    assert res["sampled_evaluations"] == k * (300 - res["training_columns"])
    assert res["eta"] == pytest.approx(2 * rmn.eta_min(2000, 60))
    assert res["basis"].shape == (2000, 60)
    tau = rmn.threshold(res["maxima"], 0.05)
    assert rmn.pvalue(res["maxima"], tau) <= 0.05


def test_metrics():
    assert rmn.resampling_risk(59, 71, 59) == pytest.approx(0.0845, abs=5e-4)
    assert rmn.resampling_risk(0, 3, 0) is None
    m = list(np.linspace(0, 1, 500))
    assert rmn.kl_divergence(m, m) == pytest.approx(0.0, abs=1e-12)


def test_errors_map_to_python():
    data = np.zeros((3, 4))
    data[0, 0] = np.nan
    with pytest.raises(rmn.DataError):
        rmn.tstat(data)
    with pytest.raises(ValueError):
        rmn.run_rapid(np.ones((10, 6)), permutations=10, eta=2.0)
    with pytest.raises(rmn.UsageError):
        rmn.threshold([1.0, 2.0], 0.01)
