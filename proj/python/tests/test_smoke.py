import json
import math
from pathlib import Path

import numpy as np
import pytest

nd = pytest.importorskip("nsdeform")

ROOT = Path(__file__).resolve().parents[2]


def test_matern_exponential_case():
    m = nd.VariogramModel(sigma2=2.0, alpha=0.5, nu=0.5)
    assert m.covariance(0.0) == pytest.approx(2.0)
    assert m.correlation(0.5) == pytest.approx(math.exp(-1.0), rel=1e-12)
    assert m.semivariance(0.5) == pytest.approx(2.0 * (1 - math.exp(-1.0)), rel=1e-12)
    with pytest.raises(ValueError):
        nd.VariogramModel(sigma2=-1.0)


def test_dp_recovers_a_known_warp():
    t = np.linspace(0.0, 1.0, 257)
    f = lambda x: 1.0 - np.exp(-3.0 * x)
    w = np.expm1(1.5 * t) / np.expm1(1.5)
    gamma, cost = nd.dp_align(f(w), f(t))
    assert cost >= 0.0
    assert np.sqrt(np.mean((np.asarray(gamma) - w) ** 2)) < 0.02


def test_identity_warps_keep_euclidean_distances():
    sites = nd.regular_grid(0, 2, 0, 2, 6, 6)
    boxes = [(0, 1, 0, 2), (1, 2, 0, 2)]
    warps = [nd.WarpingFunction.identity(1.0, 16)] * 2
    d = nd.warped_distance_matrix(sites, boxes, warps)
    euclid = np.linalg.norm(sites[:, None, :] - sites[None, :, :], axis=-1)
    assert np.max(np.abs(d - euclid)) < 1e-12
    coords, nmse = nd.cmds(d, 2)
    assert coords.shape == (36, 2)
    assert nmse == pytest.approx(1.0, abs=1e-10)
    psi, curve = nd.nmse_curve(d, 3)
    assert psi == 0 and len(curve) == 4


def test_simulate_fit_krige_score():
    sites = nd.regular_grid(0, 2, 0, 2, 12, 12)
    x = nd.simulate(sites, [(0, 2, 0, 2)], [0.1849], 0.6, 5)
    assert np.array_equal(x, nd.simulate(sites, [(0, 2, 0, 2)], [0.1849], 0.6, 5))
    fit = nd.fit_matern_mle(sites, x, fix_nu=0.6)
    assert fit.converged and fit.model.alpha > 0
    mean, sd = nd.krige(sites[:100], x[:100], sites[100:], fit.model)
    assert np.all(sd >= 0) and np.all(sd <= math.sqrt(fit.model.sigma2) + 1e-8)
    exact, zero = nd.krige(sites[:100], x[:100], sites[:3], fit.model)
    assert np.allclose(exact, x[:3]) and np.all(zero == 0)
    s = nd.score(list(mean), list(sd), list(x[100:]))
    assert s["n_test"] == 44 and s["mspe"] >= 0 and s["crps"] >= 0


def test_scores():
    assert nd.crps_gaussian(0.0, 1.0, 0.0) == pytest.approx(math.sqrt(2 / math.pi) - 1 / math.sqrt(math.pi))
    assert nd.logs_gaussian(0.0, 1.0, 0.0) == pytest.approx(0.5 * math.log(2 * math.pi))
    with pytest.raises(ValueError):
        nd.logs_gaussian(0.0, 0.0, 1.0)


def test_small_pipeline_run(tmp_path):
    cfg = json.loads((ROOT / "configs" / "two_region.json").read_text())
    cfg["scenario"]["grid"] = [12, 12]
    cfg["registration"] = {"grid_m": 64, "max_iterations": 5}
    cfg["split"] = {"n_test": 30}
    cfg["embedding"] = {"psi_max": 3}
    cfg["output_dir"] = str(tmp_path / "out")
    path = tmp_path / "small.json"
    path.write_text(json.dumps(cfg))
    result = nd.run(str(path), seed=4)
    assert result["h_t"] > 0
    assert set(result) >= {"nonstationary", "stationary", "psi"}
    assert (tmp_path / "out" / "manifest.json").exists()
    with pytest.raises(nd.ConfigError):
        bad = tmp_path / "bad.json"
        bad.write_text('{"mode": "simulate", "what": 1}')
        nd.run(str(bad))
