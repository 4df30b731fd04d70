import math

import pytest

import cdan


def test_outer_product():
    assert cdan.multilinear_map([1.0, 2.0], [3.0, 4.0]) == [3.0, 4.0, 6.0, 8.0]


def test_randomized_map_scales_with_f():
    a = cdan.randomized_multilinear_map([0.5, -1.0], [0.3, 0.7], 16, "uniform", 3)
    b = cdan.randomized_multilinear_map([1.0, -2.0], [0.3, 0.7], 16, "uniform", 3)
    assert len(a) == 16
    assert all(math.isclose(y, 2 * x, rel_tol=1e-12, abs_tol=1e-15) for x, y in zip(a, b))


def test_schedules():
    assert cdan.lr_schedule(0.0) == 0.01
    assert cdan.lambda_schedule(0.0) == 0.0
    assert cdan.lambda_schedule(1.0) > 0.99


def test_strategy_threshold():
    assert cdan.select_strategy(64, 10) == "multilinear"
    assert cdan.select_strategy(256, 31) != "multilinear"


def test_estimator_is_unbiased():
    r = cdan.theorem1_verify([1, 0, 0], [1, 0], [0.6, 0.8, 0], [0, 1], 32, 2000)
    assert r["exact"] == 0.0
    assert r["z"] < 3


def test_bad_sampler():
    with pytest.raises(ValueError):
        cdan.randomized_multilinear_map([1.0], [1.0], 4, "cauchy")


def test_short_run():
    cfg = {
        "dataset.n_source": 120,
        "dataset.n_target": 120,
        "model.feature_hidden": 16,
        "model.feature_width": 8,
        "model.disc_hidden": 16,
        "train.batch_size": 32,
        "train.steps": 60,
        "analysis.a_distance": False,
    }
    a = cdan.run(cfg, seed=3, method="cdan+e")
    b = cdan.run(cfg, seed=3, method="cdan+e")
    assert a["metrics_csv"] == b["metrics_csv"]
    assert 0.0 <= a["acc_tgt"] <= 1.0
    assert a["metrics_csv"].startswith("epoch,step,lr,lambda_eff")


def test_unknown_key():
    with pytest.raises(cdan.ConfigError):
        cdan.run({"no.such.key": 1})
