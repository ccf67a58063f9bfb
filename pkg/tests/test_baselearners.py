from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bivboost.baselearners import (
    BaseLearnerSpec, CalibrationError, DisconnectedGraphWarning, ExtrapolationWarning, Learner,
    LinearBank, PenaltySetup, RegionError, bspline_basis, build_bspline_basis, calibrate_lambda,
    design_matrix, difference_penalty, evaluate, fit, graph_laplacian, hat_trace, mrf_setup,
    normal_factor, read_adjacency, region_index, spline_knots,
)


def de_boor_basis(x, t, degree):
    """Cox-de Boor recursion, one basis function at a time."""
    q = len(t) - degree - 1

    def b(i, d, xv):
        if d == 0:
            if t[i] <= xv < t[i + 1]:
                return 1.0
            return 0.0
        left = 0.0 if t[i + d] == t[i] else (xv - t[i]) / (t[i + d] - t[i]) * b(i, d - 1, xv)
        right = 0.0 if t[i + d + 1] == t[i + 1] else (t[i + d + 1] - xv) / (t[i + d + 1] - t[i + 1]) * b(i + 1, d - 1, xv)
        return left + right

    return np.array([[b(i, degree, xv) for i in range(q)] for xv in x])


def direct_df(design, penalty, lam):
    """Trace of the smoother matrix built explicitly."""
    hat = design @ np.linalg.inv(design.T @ design + lam * penalty) @ design.T
    return float(np.trace(hat))


# ---------------------------------------------------------------- splines


def test_knot_layout():
    t = spline_knots(0.0, 1.0, n_knots=20, degree=3)
    assert len(t) == 26
    np.testing.assert_allclose(np.diff(t), 1 / 19)
    assert t[3] == 0.0 and t[22] == 1.0
    x = np.linspace(0, 1, 50)
    design, _ = build_bspline_basis(x)
    assert design.shape == (50, 22)


def test_basis_matches_de_boor():
    rng = np.random.default_rng(0)
    x = np.sort(rng.uniform(-2, 3, 40))
    t = spline_knots(-2.0, 3.0, n_knots=8, degree=3)
    ours = bspline_basis(x[x < 3.0], t, 3)
    np.testing.assert_allclose(ours, de_boor_basis(x[x < 3.0], t, 3), atol=1e-12)


def test_partition_of_unity_and_range_end():
    x = np.linspace(0.2, 5.0, 101)
    design, _ = build_bspline_basis(x, 20, 3)
    np.testing.assert_allclose(design.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(design >= 0)


def test_extrapolation_is_linear_and_warns():
    t = spline_knots(0.0, 1.0, 10, 3)
    coef = np.random.default_rng(1).normal(size=12)
    with pytest.warns(ExtrapolationWarning):
        out = bspline_basis(np.array([1.2, 1.4, 1.6]), t, 3) @ coef
    assert out[2] - out[1] == pytest.approx(out[1] - out[0], rel=1e-10)
    # continuous at the boundary
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        edge = bspline_basis(np.array([1.0]), t, 3) @ coef
    near = bspline_basis(np.array([1.0 + 1e-9]), t, 3, warn=False) @ coef
    assert near[0] == pytest.approx(edge[0], abs=1e-6)


def test_degenerate_range():
    with pytest.raises(ValueError):
        build_bspline_basis(np.ones(10))


def test_difference_penalty():
    k = difference_penalty(2, 6)
    d = np.diff(np.eye(6), n=2, axis=0)
    np.testing.assert_array_equal(k, d.T @ d)
    np.testing.assert_array_equal(d[0], [1, -2, 1, 0, 0, 0])
    # constants and straight lines are unpenalised
    np.testing.assert_allclose(k @ np.ones(6), 0)
    np.testing.assert_allclose(k @ np.arange(6.0), 0)
    with pytest.raises(ValueError):
        difference_penalty(2, 2)


# ---------------------------------------------------------------- df calibration


@pytest.mark.parametrize("target", [2.5, 4.0, 7.0])
def test_calibrated_lambda_reaches_target_df(target):
    x = np.random.default_rng(2).uniform(0, 1, 300)
    design, _ = build_bspline_basis(x)
    k = difference_penalty(2, design.shape[1])
    lam = calibrate_lambda(design, k, target)
    assert hat_trace(design, k, lam) == pytest.approx(target, abs=1e-6)
    assert direct_df(design, k, lam) == pytest.approx(target, abs=1e-6)


def test_df_decreases_with_lambda():
    x = np.random.default_rng(3).uniform(0, 1, 200)
    design, _ = build_bspline_basis(x)
    k = difference_penalty(2, design.shape[1])
    dfs = [hat_trace(design, k, lam) for lam in (1e-3, 1e-1, 10.0, 1e3)]
    assert all(a > b for a, b in zip(dfs, dfs[1:]))


def test_unattainable_df():
    x = np.random.default_rng(4).uniform(0, 1, 200)
    design, _ = build_bspline_basis(x)
    k = difference_penalty(2, design.shape[1])
    with pytest.raises(CalibrationError):
        calibrate_lambda(design, k, 1.5)  # below the null-space dimension 2
    with pytest.raises(CalibrationError):
        calibrate_lambda(design, k, 30.0)


# ---------------------------------------------------------------- MRF


def test_laplacian_of_path_graph():
    lap, labels = graph_laplacian([("a", "b"), ("b", "c"), ("b", "a")])
    assert labels == ["a", "b", "c"]
    np.testing.assert_array_equal(lap, [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])


def test_numeric_labels_sort_numerically():
    _, labels = graph_laplacian([("10", "2"), ("2", "1")])
    assert labels == ["1", "2", "10"]


def test_laplacian_properties():
    rng = np.random.default_rng(5)
    edges = [(str(i), str(j)) for i in range(12) for j in range(i + 1, 12) if rng.random() < 0.3]
    lap, _ = graph_laplacian(edges)
    np.testing.assert_array_equal(lap, lap.T)
    np.testing.assert_allclose(lap.sum(axis=1), 0)
    assert np.linalg.eigvalsh(lap).min() > -1e-10


def test_mrf_setup_df_and_warnings():
    edges = [(str(i), str(i + 1)) for i in range(9)]
    regions = np.repeat([str(i) for i in range(10)], 5)
    setup = mrf_setup(regions, edges, target_df=5.0)
    assert hat_trace(setup.design, setup.penalty, setup.lam) == pytest.approx(5.0, abs=1e-6)
    with pytest.warns(DisconnectedGraphWarning):
        mrf_setup(regions, edges[:4] + edges[5:], target_df=5.0)


def test_unknown_region():
    with pytest.raises(RegionError, match="'x'"):
        region_index(["1", "x"], ["1", "2"])


def test_read_adjacency(tmp_path):
    p = tmp_path / "g.csv"
    p.write_text("# comment\nA,B\n\nB, C\n")
    assert read_adjacency(p) == [("A", "B"), ("B", "C")]
    p.write_text("A,B,C\n")
    with pytest.raises(ValueError, match=":1:"):
        read_adjacency(p)


# ---------------------------------------------------------------- fitting


def test_linear_learner_is_ols():
    rng = np.random.default_rng(6)
    x, u = rng.normal(size=100), rng.normal(size=100)
    lr = Learner(BaseLearnerSpec("linear", "x"), x)
    res = lr.fit(u)
    X = np.column_stack([np.ones(100), x])
    beta = np.linalg.lstsq(X, u, rcond=None)[0]
    np.testing.assert_allclose(res.fitted, X @ beta, atol=1e-12)
    assert res.coefficients[1] == pytest.approx(beta[1], rel=1e-12)


def test_linear_bank_matches_individual_fits():
    rng = np.random.default_rng(7)
    xs = rng.normal(size=(80, 5))
    u = rng.normal(size=80)
    learners = [Learner(BaseLearnerSpec("linear", f"x{j}"), xs[:, j]) for j in range(5)]
    rss, slope, mean = LinearBank(learners).rss(u)
    for j, lr in enumerate(learners):
        res = lr.fit(u)
        assert rss[j] == pytest.approx(res.rss, rel=1e-10)
        assert slope[j] == pytest.approx(res.coefficients[1], rel=1e-10)
    assert mean == pytest.approx(u.mean())


def test_pspline_fit_matches_closed_form():
    rng = np.random.default_rng(8)
    x = rng.uniform(0, 1, 150)
    u = np.sin(6 * x) + rng.normal(0, 0.3, 150)
    spec = BaseLearnerSpec("pspline", "x")
    lr = Learner(spec, x)
    res = lr.fit(u)
    z, k, lam = lr.setup.design, lr.setup.penalty, lr.setup.lam
    coef = np.linalg.solve(z.T @ z + lam * k, z.T @ u)
    np.testing.assert_allclose(res.coefficients, coef, rtol=1e-8, atol=1e-10)
    assert hat_trace(z, k, lam) == pytest.approx(4.0, abs=1e-6)
    # generic fit agrees with the prepared learner
    np.testing.assert_allclose(fit(spec, lr.setup, u).fitted, res.fitted, atol=1e-12)


def test_mrf_fast_path_matches_dense_solve():
    edges = [(str(i), str(i + 1)) for i in range(7)]
    rng = np.random.default_rng(9)
    regions = rng.integers(0, 8, 120).astype(str)
    lr = Learner(BaseLearnerSpec("mrf", "r", adjacency=tuple(edges)), regions)
    u = rng.normal(size=120)
    res = lr.fit(u)
    dense = fit(lr.spec, lr.setup, u)
    np.testing.assert_allclose(res.fitted, dense.fitted, atol=1e-12)


def test_singular_system_uses_ridge():
    setup = PenaltySetup(np.column_stack([np.ones(5), np.zeros(5)]), np.zeros((2, 2)), 0.0)
    _, ridge = normal_factor(setup)
    assert ridge


def test_evaluate_on_new_data():
    rng = np.random.default_rng(10)
    x = rng.uniform(0, 1, 100)
    for spec in (BaseLearnerSpec("linear", "x"), BaseLearnerSpec("pspline", "x")):
        lr = Learner(spec, x)
        res = lr.fit(np.cos(3 * x))
        np.testing.assert_allclose(evaluate(spec, lr.state(), res.coefficients, x), res.fitted, atol=1e-12)
    edges = (("a", "b"), ("b", "c"))
    spec = BaseLearnerSpec("mrf", "r", df=2.0, adjacency=edges)
    lr = Learner(spec, np.array(["a", "b", "c", "a"]))
    res = lr.fit(np.array([1.0, 2.0, 3.0, 1.5]))
    got = evaluate(spec, lr.state(), res.coefficients, np.array(["c", "a"]))
    np.testing.assert_allclose(got, res.coefficients[[2, 0]])
    assert design_matrix(spec, lr.state(), np.array(["b"])).tolist() == [[0.0, 1.0, 0.0]]


@settings(max_examples=30, deadline=None)
@given(st.integers(5, 30), st.floats(1.5, 6.0))
def test_penalised_fit_never_beats_ols(n_knots, df):
    rng = np.random.default_rng(n_knots)
    x = rng.uniform(0, 1, 200)
    u = rng.normal(size=200)
    spec = BaseLearnerSpec("pspline", "x", df=max(df, 2.1), n_knots=n_knots)
    lr = Learner(spec, x)
    res = lr.fit(u)
    z = lr.setup.design
    ols = np.linalg.lstsq(z, u, rcond=None)[0]
    assert res.rss >= float(np.sum((u - z @ ols) ** 2)) - 1e-9


def test_spec_validation():
    with pytest.raises(ValueError):
        BaseLearnerSpec("tree", "x")
    with pytest.raises(ValueError):
        BaseLearnerSpec("mrf", "r")
    with pytest.raises(ValueError):
        BaseLearnerSpec("pspline", "x", df=-1)
    assert BaseLearnerSpec("pspline", "x").target_df == 4.0
    assert BaseLearnerSpec("mrf", "r", adjacency=(("a", "b"),)).target_df == 6.0
    assert BaseLearnerSpec("linear", "x").name == "linear(x)"
