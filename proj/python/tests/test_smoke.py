import math

import pytest

import hda_alloc as ha


def test_psi_values():
    assert ha.psi(1.0) == pytest.approx(0.5963473623231940, rel=1e-12)
    assert ha.psi_derivative(1.0) == pytest.approx(-0.19269472464638926, abs=1e-12)
    x = 1e8
    assert ha.psi(x) * x == pytest.approx(math.log(x) - 0.5772156649015329, rel=1e-6)


def test_approx_upper_bounds_exact():
    kw = dict(rate=1.0, alpha=0.6, power=480.0, channel_uses=48.0, samples=16)
    approx = ha.expected_distortion(**kw)
    exact = ha.expected_distortion(exact=True, **kw)
    assert approx["total"] >= exact["total"] > 0.0


def test_single_optimizer():
    r = ha.optimize_single(power=10.0 * 200.0, channel_uses=200.0, samples=100)
    assert r["converged"]
    assert 0.0 <= r["alpha"] <= 1.0
    assert 0.0 <= r["rate"] <= ha.DEFAULT_RATE_CEILING
    assert all(b <= a + 1e-12 for a, b in zip(r["trace"], r["trace"][1:]))


def test_multi_optimizer_spends_the_budget():
    r = ha.optimize_multi(samples=10, variances=[2.0, 1.0, 0.5], channel_uses=60, snr_db=10.0)
    assert sum(r["channel_uses"]) == 60
    assert all(k > 10 for k in r["channel_uses"])
    assert sum(r["power"]) == pytest.approx(10.0 * 60, rel=1e-9)
    assert r["expected_distortion"] == pytest.approx(sum(r["vector_distortion"]), rel=1e-12)


def test_simulation_is_seeded():
    kw = dict(rate=1.0, alpha=0.5, power=200.0, channel_uses=20.0, samples=10, n_trials=2000)
    a = ha.simulate(seed=3, **kw)
    assert a == ha.simulate(seed=3, threads=1, **kw)
    assert a != ha.simulate(seed=4, **kw)


def test_experiment_rows_and_csv():
    cfg = {
        "source": {"samples": 16, "variances": [1.0]},
        "channel": {"eta": 2, "snr_db": 10},
        "sweep": {"snr_db": [5, 15]},
        "simulation": {"n_trials": 200, "seed": 9},
        "schemes": ["hda-optimized", "opta"],
    }
    rows = ha.run_experiment(cfg)
    assert [(r["scheme"], r["snr_db"]) for r in rows] == [
        ("hda-optimized", 5.0), ("hda-optimized", 15.0), ("opta", 5.0), ("opta", 15.0)]
    assert rows[2]["ed_sim"] is None
    text = ha.run_experiment_csv(cfg)
    assert text.splitlines()[0] == ha.CSV_HEADER
    assert len(text.splitlines()) == 5


def test_validation_errors():
    with pytest.raises(ha.ValidationError, match="channel.fading"):
        ha.run_experiment({"source": {"samples": 4, "variances": [1.0]},
                           "channel": {"eta": 2, "snr_db": 10, "fading": "rician"}})
    with pytest.raises(ValueError):
        ha.quantizer_error_variance(-1.0, 1.0)
