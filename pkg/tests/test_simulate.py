from __future__ import annotations

import numpy as np
import pytest

from bivboost.simulate import (SCENARIO_IDS, ScenarioSpec, default_model_spec, f_spat, make_scenario,
                               spatial_map, toeplitz_cov, toeplitz_mvn, true_eta)


def test_toeplitz_is_cholesky_transform():
    z = np.random.default_rng(3).standard_normal((50, 8))
    L = np.linalg.cholesky(toeplitz_cov(8, 0.5))
    np.testing.assert_allclose(toeplitz_mvn(50, 8, 0.5, seed=3), z @ L.T, atol=1e-12)


def test_toeplitz_single_column_is_standard_normal():
    x = toeplitz_mvn(20, 1, seed=4)
    np.testing.assert_array_equal(x[:, 0], np.random.default_rng(4).standard_normal((20, 1))[:, 0])


def test_toeplitz_covariance_at_large_n():
    n = 100_000
    x = toeplitz_mvn(n, 4, 0.5, seed=5)
    emp = x.T @ x / n
    sigma = toeplitz_cov(4, 0.5)
    # Var(X_i X_j) = s_ii s_jj + s_ij^2 for centred normals
    se = np.sqrt((np.outer(np.diag(sigma), np.diag(sigma)) + sigma**2) / n)
    assert np.all(np.abs(emp - sigma) < 3 * se)
    with pytest.raises(ValueError):
        toeplitz_mvn(0, 3)


def test_grid_edge_counts():
    assert len(spatial_map(1, 2)[1]) == 1
    assert len(spatial_map(4, 4)[1]) == 24
    labels, edges, c = spatial_map(18, 18)
    assert len(labels) == 324 and len(edges) == 2 * 18 * 17
    np.testing.assert_allclose(c.mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(c.std(axis=0), 1, atol=1e-12)


def test_f_spat_direct_evaluation():
    _, _, c = spatial_map(5, 7)
    direct = [np.sin(a) * np.cos(0.5 * b) for a, b in c]
    np.testing.assert_allclose(f_spat(c), direct, rtol=1e-15)
    assert np.all(np.abs(f_spat(c)) <= 1)


def test_bernoulli_truth_at_zero():
    spec = ScenarioSpec("bern_linear_low")
    fam = spec.family
    theta = fam.inverse_link(true_eta(spec, np.zeros((1, 10))))[0]
    np.testing.assert_allclose(theta, [0.5, 0.5, np.exp(-1.5)], rtol=1e-14)


def test_gaussian_mu2_at_half():
    spec = ScenarioSpec("gauss_spatial")
    eta = true_eta(spec, np.full((1, 10), 0.5), np.zeros(1))[0]
    assert eta[1] == pytest.approx(2 + 3 * np.cos(1.0) + 0.75, abs=1e-14)


def test_poisson_lambda3_truth():
    spec = ScenarioSpec("pois_linear")
    x = np.random.default_rng(6).normal(size=(7, 10))
    eta = true_eta(spec, x)
    np.testing.assert_allclose(eta[:, 2], 0.5 * x[:, 4] + x[:, 5] - 0.5 * x[:, 6], rtol=1e-14)
    np.testing.assert_allclose(eta[:, 0], -x[:, 0] + 0.5 * x[:, 1] + 1.5 * x[:, 2], rtol=1e-14)


def test_informative_sets():
    sc = make_scenario(ScenarioSpec("pois_linear", n_train=5, n_val=5, n_test=5))
    assert sc.truth.informative("lambda1") == {"X1", "X2", "X3"}
    assert sc.truth.informative("lambda2") == {"X1", "X3", "X4", "X5"}
    assert sc.truth.informative("lambda3") == {"X5", "X6", "X7"}
    sc = make_scenario(ScenarioSpec("bern_linear_low", n_train=5, n_val=5, n_test=5))
    assert sc.truth.informative("psi") == {"X5", "X6"}
    assert sc.truth.intercepts["psi"] == -1.5
    sc = make_scenario(ScenarioSpec("gauss_spatial", n_train=5, n_val=5, n_test=5))
    assert sc.truth.informative("rho") == {"X5", "X10", "region"}


@pytest.mark.parametrize("sid", SCENARIO_IDS)
def test_scenarios_are_consistent_and_reproducible(sid):
    spec = ScenarioSpec(sid, n_train=30, n_val=20, n_test=10, p=12 if sid.endswith("high") else None, seed=7)
    a, b = make_scenario(spec), make_scenario(spec)
    fam = spec.family
    for da, db in ((a.train, b.train), (a.val, b.val), (a.test, b.test)):
        np.testing.assert_array_equal(da.responses, db.responses)
        for k in da.covariates:
            np.testing.assert_array_equal(da.covariates[k], db.covariates[k])
        np.testing.assert_allclose(da.theta, fam.inverse_link(da.eta, strict=False), rtol=1e-15)
    assert len(a.train) == 30 and len(a.val) == 20 and len(a.test) == 10
    x = np.column_stack([a.train.covariates[f"X{j}"] for j in range(1, spec.dim + 1)])
    s = a.extra["f_spat"][[a.region_labels.index(r) for r in a.train.covariates["region"]]] if spec.spatial else None
    np.testing.assert_allclose(a.train.eta, true_eta(spec, x, s), rtol=1e-15)
    if sid.startswith(("pois_nonlinear", "gauss")):
        assert x.min() >= 0 and x.max() <= 1
    layout = default_model_spec(a)
    assert set(layout.learners) == set(fam.parameter_names)


def test_high_dim_defaults_and_validation():
    assert ScenarioSpec("bern_linear_high").dim == 1000
    with pytest.raises(ValueError):
        ScenarioSpec("nope")
    with pytest.raises(ValueError):
        ScenarioSpec("pois_linear", n_train=0)


@pytest.mark.parametrize("sid", ["bern_linear_low", "pois_linear", "pois_nonlinear", "gauss_spatial"])
def test_truth_beats_perturbed_truth(sid):
    wins = 0
    for seed in range(20):
        sc = make_scenario(ScenarioSpec(sid, n_train=10, n_val=10, n_test=300, seed=seed))
        fam = sc.spec.family
        eta = sc.test.eta
        shift = np.random.default_rng(100 + seed).choice([-0.5, 0.5], size=eta.shape)
        wins += fam.negloglik(sc.test.responses, eta) < fam.negloglik(sc.test.responses, eta + shift)
    assert wins >= 19
