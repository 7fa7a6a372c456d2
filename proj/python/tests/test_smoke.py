import math

import numpy as np
import pytest

import pairorbit


def test_version_string():
    assert isinstance(pairorbit.__version__, str) and pairorbit.__version__


def test_dv_rate_of_unit_gaussian():
    x = np.arange(-10.0, 10.0 + 1e-9, 0.01)
    f = np.exp(-x * x / 2) / math.sqrt(2 * math.pi)
    assert pairorbit.dv_rate_1d(f, 0.01, -10.0) == pytest.approx(0.125, rel=0.01)


def test_decompose_single_cloud():
    rng = np.random.default_rng(3)
    pts = rng.standard_normal((4000, 3))
    w = np.full(4000, 1.0 / 4000)
    d = pairorbit.decompose(pts, w, window_radius=3.0)
    assert len(d["components"]) == 1
    assert d["components"][0]["mass"] > 0.99
    assert d["dust_mass"] + d["components"][0]["mass"] == pytest.approx(1.0, abs=1e-12)


def test_pekar_solver():
    r = pairorbit.solve("pekar")
    assert r["converged"]
    assert r["residual"] <= 1e-6
    assert r["objective"] >= 1 / (3 * math.pi) - 1e-4
    assert r["objective"] == pytest.approx(0.108513, rel=2e-5)


def test_chi_scaling_displayed_case():
    v = pairorbit.chi_scaling_exact(0.5, 0.5, 1.0, 1.0)
    assert v["e12"] == 0.0
    assert v["e1"] + v["e2"] == -3.0 / 16.0
    assert v["superadditive"]


def test_pam_moment_small_run():
    a = pairorbit.pam_moment(1, 0.5, samples=50, seed=4)
    b = pairorbit.pam_moment(1, 0.5, samples=50, seed=4, threads=2)
    assert a == b
    assert a["value"] > 0.0


def test_errors_are_value_errors():
    with pytest.raises(ValueError, match="unknown experiment"):
        pairorbit.run_experiment("no-such-pipeline")
    with pytest.raises(pairorbit.PairorbitError):
        pairorbit.decompose(np.zeros((0, 3)), np.zeros(0))


def test_experiment_is_byte_stable():
    assert "footnote-convergence" in pairorbit.experiment_names()
    params = {"per_component": 200, "n": [10, 20]}
    _, t1 = pairorbit.run_experiment("footnote-convergence", params, seed=2)
    r2, t2 = pairorbit.run_experiment("footnote-convergence", params, seed=2, threads=2)
    assert t1 == t2
    assert r2["seed"] == 2
