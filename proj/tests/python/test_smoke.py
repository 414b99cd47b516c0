import json
import math
import os

import numpy as np
import pytest

import gffpin


def single_site_f(w):
    return math.log1p(math.expm1(w) * math.erf(1 / math.sqrt(2)))


def test_version():
    assert gffpin.__version__.startswith("gffpin ")


def test_annealed_strength_per_law():
    assert gffpin.annealed_strength("bernoulli", b=1.0, h=0.2) == pytest.approx(0.2 + math.log(math.cosh(1.0)))
    assert gffpin.annealed_strength("gaussian", b=0.8, h=0.1) == pytest.approx(0.1 + 0.32)
    assert gffpin.annealed_strength("constant", h=0.5) == pytest.approx(0.5)


def test_environment_is_reproducible():
    a = gffpin.sample_environment("bernoulli", 2, 4, b=1.0, h=0.0, seed=5)
    b = gffpin.sample_environment("bernoulli", 2, 4, b=1.0, h=0.0, seed=5)
    assert a.shape == (16,)
    assert np.array_equal(a, b)
    assert set(np.unique(a)) <= {-1.0, 1.0}


def test_green_function_is_symmetric_positive():
    g = gffpin.green_function(2, 3)
    assert g.shape == (9, 9)
    assert np.allclose(g, g.T)
    assert np.all(np.linalg.eigvalsh(g) > 0)


def test_rectangle_probability_factorizes():
    value, error = gffpin.rectangle_probability(np.eye(3), 1.0)
    assert value == pytest.approx(math.erf(1 / math.sqrt(2)) ** 3, abs=1e-10)
    assert error < 1e-10


def test_single_site_estimators_agree():
    w = np.array([0.5])
    exact = single_site_f(0.5)
    assert gffpin.free_energy_expansion(2, 1, w)["value"] == pytest.approx(exact, abs=1e-12)
    thermo = gffpin.free_energy_thermo(2, 1, w, sweeps=2000)
    assert abs(thermo["value"] - exact) <= max(3 * thermo["std_error"], 1e-10)
    assert len(thermo["t_nodes"]) == 16
    imp = gffpin.free_energy_importance(2, 1, w, samples=200_000, seed=3)
    assert abs(imp["value"] - exact) <= 4 * imp["std_error"]


def test_frozen_fixture():
    path = os.environ.get("GFFPIN_FIXTURES")
    if not path:
        pytest.skip("fixture path not set")
    fixtures = json.load(open(path))
    small = [f for f in fixtures if f["n"] ** f["d"] <= 4]
    assert small
    for f in small:
        w = gffpin.sample_environment(f["law"], f["d"], f["n"], a=f["a"], b=f["b"], h=f["h"], seed=f["env_seed"])
        got = gffpin.free_energy_expansion(f["d"], f["n"], w, a=f["a"])["value"]
        assert abs(got - f["f_exact"]) <= f["tol"]


def test_gap_bound_negative():
    bound, lam = gffpin.gap_bound("bernoulli", b=1.0, h=0.1)
    assert 0 < lam < 1
    assert bound < 0
    assert gffpin.gap_expectation("bernoulli", 1.0, 0.0, 0.3, 0.5) == 0.0


def test_errors_map_to_python_exceptions():
    with pytest.raises(ValueError):
        gffpin.free_energy_expansion(2, 2, np.zeros(3))
    with pytest.raises(gffpin.ConfigError):
        gffpin.gap_expectation("bernoulli", 1.0, 1.0, 0.0, 1.5)


def test_run_oracle_in_process(tmp_path):
    out = gffpin.run("oracle", {"model": {"d": 2, "n": 1, "law": "constant", "h": 0.5}},
                     env_seed=1, dyn_seed=1, run_dir=str(tmp_path / "run"))
    assert out["exit_code"] == 0
    assert out["result"]["value"] == pytest.approx(single_site_f(0.5), abs=1e-12)
    for name in ("manifest.json", "config.yaml", "estimates.csv", "result.json"):
        assert (tmp_path / "run" / name).exists()
    header = (tmp_path / "run" / "estimates.csv").read_text().splitlines()[0]
    assert header.split(",")[:3] == ["method", "d", "n"]


def test_run_rejects_bad_config(tmp_path):
    with pytest.raises(gffpin.ConfigError, match="model.a"):
        gffpin.run("oracle", None, a=0, run_dir=str(tmp_path / "bad"))
