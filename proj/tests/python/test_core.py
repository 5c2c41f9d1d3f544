import math

import numpy as np
import pytest
from scipy.stats import qmc

import cropemu


def test_sobol_matches_scipy_unscrambled():
    ours = np.array(cropemu.sobol_points(6, 256, 0))
    ref = qmc.Sobol(d=6, scramble=False).random(256)
    np.testing.assert_array_equal(ours, ref)


def test_sobol_dimension_error():
    with pytest.raises(cropemu.ConfigError):
        cropemu.sobol_points(33, 1)


def test_metric_identities():
    assert cropemu.f1_score(0.9501, 0.9149) == pytest.approx(0.9321, abs=5e-4)
    assert cropemu.r2_from_mse(0.0839) == pytest.approx(0.9160, abs=2e-4)
    assert cropemu.format_fraction_percent(181 / 100000) == "0.18%"


def test_decode_and_simulate(corpus):
    names = cropemu.variable_names()
    assert len(names) == 22 and names[11] == "RUE"
    point = [0.5] * 21
    cfg = cropemu.decode_sample(point)
    assert 1.6 <= cfg["RUE"] <= 2.2
    a = cropemu.simulate(point, str(corpus), "Logan", 2001)
    b = cropemu.simulate(point, str(corpus), "Logan", 2001)
    assert a == b
    assert set(a) == set(cropemu.output_names())
    assert a["GrainTotalWt"] > 0
    assert a["DAPtoFlowering"] < a["DAPtoMaturity"] <= a["DAPtoHarvesting"]
    with pytest.raises(cropemu.InputError):
        cropemu.simulate(point, str(corpus), "Logan", 1700)


def test_swag_moments_match_numpy():
    rng = np.random.default_rng(3)
    snaps = rng.normal(size=(6, 4))
    post = cropemu.SwagPosterior(4, 3)
    for s in snaps:
        post.add_snapshot(s.tolist())
    np.testing.assert_allclose(post.mean, snaps.mean(axis=0), atol=1e-12)
    np.testing.assert_allclose(post.diagonal_variance(), snaps.var(axis=0), atol=1e-12)
    assert post.rank == 3 and post.snapshot_count == 6

    draws = np.array([post.sample(seed) for seed in range(20000)])
    d = np.array(post.deviations).T
    cov = 0.5 * np.diag(snaps.var(axis=0)) + d @ d.T / (2 * (d.shape[1] - 1))
    emp = np.cov(draws, rowvar=False)
    assert np.linalg.norm(emp - cov) / np.linalg.norm(cov) < 0.08
    assert math.isclose(post.sample(7)[0], post.sample(7)[0])
