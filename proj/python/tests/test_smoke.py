import json

import numpy as np
import pytest

import wigner2e as w


def grid1():
    return w.WignerGrid(1, 32, -8.0, 8.0, 8.0, 32)


def test_grid_geometry():
    g = grid1()
    assert g.dx == pytest.approx(0.5)
    assert g.dp == pytest.approx(np.pi / 8.0)
    x = np.array(g.x())
    assert x[0] == pytest.approx(-7.75)
    assert np.allclose(x + x[::-1], 0.0)


def test_gaussian_state_is_normalized_and_pure():
    g = grid1()
    f = w.gaussian_state(w.GaussianPacket([0.0], [0.5], [1.0]), g)
    assert f.values.shape == (32, 32)
    assert f.integral() == pytest.approx(1.0, abs=1e-12)
    assert w.purity(f) == pytest.approx(1.0, abs=1e-3)


def test_array_round_trip():
    g = grid1()
    f = w.gaussian_state(w.GaussianPacket([1.0], [0.0], [1.0]), g)
    h = w.WignerState(g, 1, f.values)
    assert np.array_equal(h.values, f.values)
    with pytest.raises(ValueError):
        w.WignerState(g, 1, np.zeros(10))


def test_product_state_is_separable():
    g = w.WignerGrid(1, 16, -8.0, 8.0, 6.0, 16)
    a = w.gaussian_state(w.GaussianPacket([-3.0], [0.0], [1.0]), g)
    b = w.gaussian_state(w.GaussianPacket([3.0], [0.0], [1.0]), g)
    f = w.tensor_product(a, b)
    assert f.values.shape == (16, 16, 16, 16)
    assert w.separability_metric(f) < 1e-12
    assert w.model_distance(w.marginal(f, 1), a) < 1e-12


def test_free_flight_moves_the_mean():
    g = grid1()
    f0 = w.gaussian_state(w.GaussianPacket([0.0], [1.0], [1.0]), g)
    f, series = w.evolve_1e(f0, 1.0, dt=0.01, output_every=10)
    assert f.time == pytest.approx(1.0)
    assert series["mean_x"][-1] == pytest.approx(1.0, abs=1e-6)
    assert abs(series["norm"][-1] - 1.0) < 1e-10


def test_closest_approach_and_certificate():
    a = w.GaussianPacket([-4.0], [0.5], [1.0])
    b = w.GaussianPacket([4.0], [-0.5], [1.0])
    t, dist = w.closest_approach(a, b, 10.0)
    assert 0.0 < t < 10.0 and dist < 8.0
    rep = w.separability_certificate(a, b, t, points_per_axis=9)
    assert rep["control_residual"] < 1e-10
    assert rep["coulomb_residual"] > rep["control_residual"]


def test_scenarios_listed_and_validated():
    names = w.list_scenarios()
    assert "free-flight" in names
    cfg = json.loads(w.validate_scenario(w.bundled_scenario("free-flight")))
    assert cfg["name"] == "free-flight"
    with pytest.raises(ValueError):
        w.validate_scenario("{}")


def test_run_schema_error_exit_code(tmp_path):
    res = w.run_scenario(str(tmp_path / "missing.json"), output_dir=str(tmp_path / "out"))
    assert res["exit_code"] == 2
    assert not (tmp_path / "out").exists()


def test_short_run_writes_manifest(tmp_path):
    cfg = json.loads(w.validate_scenario(w.bundled_scenario("free-flight")))
    cfg["model"] = "full2e"
    cfg["horizon"]["T"] = 0.2
    cfg["horizon"]["snapshot_times"] = [0.2]
    path = tmp_path / "short.json"
    path.write_text(json.dumps(cfg))
    res = w.run_scenario(str(path), output_dir=str(tmp_path / "out"))
    assert res["exit_code"] == 0, res["message"]
    assert "manifest.json" in res["artifacts"]
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["status"] == "ok"
    norm = res["series"]["full2e"]["norm"]
    assert abs(norm[-1] - 1.0) < 1e-8
