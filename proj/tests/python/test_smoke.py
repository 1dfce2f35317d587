import json
import math

import numpy as np
import pytest

import carnot


def test_builtin_frames_validate():
    assert {"heisenberg1", "rototranslation", "engel"} <= set(carnot.builtin_names())
    for name in ("heisenberg1", "rototranslation", "engel"):
        f = carnot.frame(name)
        assert f.validate(samples=10)["ok"]
    assert carnot.frame("engel").homogeneous_dim == 7


def test_heisenberg_group_law():
    h = carnot.frame("heisenberg1")
    c = carnot.build_cone(h, np.zeros(3))
    np.testing.assert_allclose(c.bch([1, 0, 0], [0, 1, 0]), [1, 1, 0.5], atol=1e-14)
    np.testing.assert_allclose(c.dilate(2.0, [1, 1, 1]), [2, 2, 4])
    a = np.array([0.3, -0.2, 0.1])
    np.testing.assert_allclose(c.bch(a, -a), np.zeros(3), atol=1e-15)


def test_flows_and_distances():
    h = carnot.frame("heisenberg1")
    u = np.array([0.1, 0.2, -0.1])
    a = np.array([0.2, -0.1, 0.05])
    v = carnot.exp_combination(h, u, a)
    np.testing.assert_allclose(carnot.normal_coords(h, u, v), a, atol=1e-9)
    assert carnot.d_inf(h, u, v) > 0
    assert abs(carnot.cc_distance_upper(h, np.zeros(3), np.array([1.0, 0, 0])) - 1.0) < 1e-6


def test_connect_contracts():
    rt = carnot.frame("rototranslation")
    r = carnot.cc_connect(rt, np.array([0.1, -0.2, 0.3]), np.array([0.15, -0.18, 0.31]), 1e-6)
    res = r["residuals"]
    assert res[-1] < 1e-6
    assert all(b <= 0.8 * a for a, b in zip(res, res[1:]))


def test_coarea_linear_map():
    r = carnot.coarea_verify(carnot.frame("heisenberg1"), "x", cells=8, levels=8)
    assert r["lhs"] == pytest.approx(math.pi / 3, rel=1e-9)
    assert r["error"] < 1e-8


def test_run_experiment(tmp_path):
    assert len(carnot.experiment_ids()) == 13
    r = carnot.run_experiment("frame = heisenberg1\nexperiment = hc-curve\n", out=str(tmp_path))
    assert r["pass"]
    assert all(a["criterion"] == 10 for a in r["assertions"])
    saved = json.loads((tmp_path / "summary.json").read_text())
    assert saved["experiment"] == "hc-curve"
    assert (tmp_path / "hc_curve.csv").read_text() == r["csv"]["hc_curve"]


def test_errors_are_typed():
    with pytest.raises(carnot.ConfigError, match="gromov"):
        carnot.run_experiment("experiment = gromof\n")
    with pytest.raises(carnot.ConfigError):
        carnot.frame("heisenberg2")
    assert issubclass(carnot.LeftDomain, carnot.CarnotError)
