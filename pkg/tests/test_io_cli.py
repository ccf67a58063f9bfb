from __future__ import annotations

import hashlib
import shutil
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
import yaml

from bivboost import engine
from bivboost.cli import main
from bivboost.io import (ConfigError, DatasetError, build_model_spec, config_from_dict, load_csv,
                         load_for_config, load_model, parse_config, save_model, write_csv)
from bivboost.simulate import ScenarioSpec, default_model_spec, make_scenario

CONFIGS = Path(__file__).resolve().parent.parent / "docs" / "configs"


# ---------------------------------------------------------------- CSV


def test_two_row_roundtrip(tmp_path):
    cols = {"y1": np.array([0.1, 1e-300]), "y2": np.array([-2.5, 1 / 3]), "r": np.array(["a", "7"])}
    write_csv(tmp_path / "d.csv", cols)
    ds = load_csv(tmp_path / "d.csv", ["y1", "y2"], "gaussian2", categorical=["r"])
    np.testing.assert_array_equal(ds["y1"], cols["y1"])
    np.testing.assert_array_equal(ds["y2"], cols["y2"])
    assert list(ds["r"]) == ["a", "7"]
    assert ds.kinds == {"y1": "numeric", "y2": "numeric", "r": "categorical"}


def test_binary_value_two_rejected(tmp_path):
    (tmp_path / "d.csv").write_text("y1,y2,x\n0,1,0.5\n2,0,0.1\n")
    with pytest.raises(DatasetError, match="row 2.*'y1'.*0 or 1"):
        load_csv(tmp_path / "d.csv", ["y1", "y2"], "bernoulli2")


def test_count_must_be_integer(tmp_path):
    (tmp_path / "d.csv").write_text("y1,y2\n0,1.5\n")
    with pytest.raises(DatasetError, match="non-negative integers"):
        load_csv(tmp_path / "d.csv", ["y1", "y2"], "poisson2")


def test_missing_values_list_rows(tmp_path):
    (tmp_path / "d.csv").write_text("y1,y2,x\n1,2,NA\n1,2,3\n1,2,\n")
    with pytest.raises(DatasetError, match=r"'x'.*rows 1, 3"):
        load_csv(tmp_path / "d.csv", ["y1", "y2"])
    # unused columns may have gaps
    ds = load_csv(tmp_path / "d.csv", ["y1", "y2"], required=[])
    assert np.isnan(ds["x"][0])


def test_unparsable_cell_reports_row_and_column(tmp_path):
    (tmp_path / "d.csv").write_text("y1,y2,x\n1,2,3\n1,oops,3\n")
    with pytest.raises(DatasetError, match=r"row 2, column 'y2'.*'oops'"):
        load_csv(tmp_path / "d.csv", ["y1", "y2"])


def test_missing_column(tmp_path):
    (tmp_path / "d.csv").write_text("y1,x\n1,2\n")
    with pytest.raises(DatasetError, match="missing column 'y2'"):
        load_csv(tmp_path / "d.csv", ["y1", "y2"])
    with pytest.raises(DatasetError, match="not found"):
        load_csv(tmp_path / "nope.csv")


def test_million_rows_match_regenerated_checksum(tmp_path):
    def regenerate():
        rng = np.random.default_rng(2024)
        return rng.poisson(3.0, size=(1_000_000, 2)), np.round(rng.normal(size=1_000_000), 6)

    y, x = regenerate()
    path = tmp_path / "big.csv"
    pd.DataFrame({"y1": y[:, 0], "y2": y[:, 1], "x": x}).to_csv(path, index=False)
    ds = load_csv(path, ["y1", "y2"], "poisson2")
    y2, x2 = regenerate()

    def digest(*arrays):
        h = hashlib.sha256()
        for a in arrays:
            h.update(np.ascontiguousarray(a, dtype=float).tobytes())
        return h.hexdigest()

    assert ds.n == 1_000_000
    assert digest(ds["y1"], ds["y2"], ds["x"]) == digest(y2[:, 0], y2[:, 1], x2)


# ---------------------------------------------------------------- configuration


def _data(tmp_path, text="y1,y2,a,b\n0,1,0.5,1\n1,0,0.2,2\n1,1,0.9,3\n"):
    (tmp_path / "d.csv").write_text(text)
    return tmp_path / "d.csv"


def test_minimal_config_gives_linear_learners_everywhere(tmp_path):
    cfg = config_from_dict({"family": "bernoulli2", "responses": ["y1", "y2"]})
    assert cfg.nu == 0.1 and cfg.parameters is None
    spec = build_model_spec(cfg, load_for_config(cfg, _data(tmp_path)))
    for name in ("p1", "p2", "psi"):
        assert [(s.kind, s.covariate) for s in spec.learners[name]] == [("linear", "a"), ("linear", "b")]


def test_pspline_default_df_is_four(tmp_path):
    cfg = config_from_dict({"family": "gaussian2", "responses": ["y1", "y2"],
                            "parameters": {"mu1": [{"covariate": "a", "learner": "pspline"}]}})
    spec = build_model_spec(cfg, load_for_config(cfg, _data(tmp_path)))
    assert spec.learners["mu1"][0].target_df == 4.0
    assert spec.learners["rho"] == []


def test_unknown_key_named(tmp_path):
    with pytest.raises(ConfigError, match="'learning_rate'"):
        config_from_dict({"family": "poisson2", "responses": ["y1", "y2"], "learning_rate": 0.1})
    with pytest.raises(ConfigError, match="'knots'"):
        config_from_dict({"family": "poisson2", "responses": ["y1", "y2"],
                          "parameters": {"lambda1": [{"covariate": "a", "learner": "pspline", "knots": 3}]}})
    with pytest.raises(ConfigError, match="unknown parameter 'mu1'"):
        config_from_dict({"family": "poisson2", "responses": ["y1", "y2"], "parameters": {"mu1": ["a"]}})


def test_absent_covariate_rejected(tmp_path):
    cfg = config_from_dict({"family": "bernoulli2", "responses": ["y1", "y2"],
                            "parameters": {"p1": ["a", "zzz"]}})
    ds = load_csv(_data(tmp_path), ["y1", "y2"], "bernoulli2")
    with pytest.raises(ConfigError, match="'zzz'"):
        build_model_spec(cfg, ds)


def test_fixed_parameter_and_minus_infinity():
    cfg = config_from_dict({"family": "poisson2", "responses": ["y1", "y2"],
                            "parameters": {"lambda1": ["a"], "lambda3": {"fixed": "-inf"}}})
    assert cfg.fixed == {"lambda3": -np.inf}


@pytest.mark.parametrize("bad", [{"nu": 0}, {"m_max": -1}, {"offsets": "median"}, {"stabilization": "x"},
                                 {"validation": {"split": 1.5}}, {"family": "gamma2"}])
def test_invalid_values(bad):
    doc = {"family": "poisson2", "responses": ["y1", "y2"], **bad}
    with pytest.raises(ConfigError):
        config_from_dict(doc)


def test_gaussian_scenario_config_reproduces_layout(tmp_path):
    assert main(["simulate", "gauss_spatial", "--seed", "3", "--out-dir", str(tmp_path)]) == 0
    sc = make_scenario(ScenarioSpec("gauss_spatial", seed=3))
    expected = default_model_spec(sc)
    for path in (tmp_path / "config.yaml", CONFIGS / "gaussian2.yaml"):
        shutil.copy(path, tmp_path / "use.yaml")
        cfg = parse_config(tmp_path / "use.yaml")
        spec = build_model_spec(cfg, load_for_config(cfg, tmp_path / "train.csv"))
        assert spec.learners == expected.learners
        assert (spec.nu, spec.m_max, spec.stabilization, spec.patience) == \
               (expected.nu, expected.m_max, expected.stabilization, expected.patience)


@pytest.mark.parametrize("family,scenario", [("bernoulli2", "bern_linear_low"), ("poisson2", "pois_linear")])
def test_documented_configs_parse(tmp_path, family, scenario):
    main(["simulate", scenario, "--seed", "1", "--out-dir", str(tmp_path)])
    shutil.copy(CONFIGS / f"{family}.yaml", tmp_path / "use.yaml")
    cfg = parse_config(tmp_path / "use.yaml")
    spec = build_model_spec(cfg, load_for_config(cfg, tmp_path / "train.csv"))
    assert spec.family.family_id == family
    assert all(spec.learners[k] for k in spec.family.parameter_names)


# ---------------------------------------------------------------- persistence


def test_save_load_is_bit_exact(tmp_path):
    sc = make_scenario(ScenarioSpec("gauss_spatial", n_train=300, n_val=200, n_test=100, seed=1))
    spec = default_model_spec(sc, m_max=60)
    m = engine.fit(spec, sc.train.responses, sc.train.covariates, sc.val.responses, sc.val.covariates)
    save_model(m, tmp_path / "m.json")
    m2 = load_model(tmp_path / "m.json")
    for a, b in zip(m.predict(sc.test.covariates, warn=False), m2.predict(sc.test.covariates, warn=False)):
        np.testing.assert_array_equal(a, b)
    (tmp_path / "bad.json").write_text('{"format": "other"}')
    with pytest.raises(ValueError):
        load_model(tmp_path / "bad.json")


# ---------------------------------------------------------------- command line


@pytest.fixture(scope="module")
def pois_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("pois")
    assert main(["simulate", "pois_linear", "--seed", "1", "--out-dir", str(d)]) == 0
    cfg = yaml.safe_load((d / "config.yaml").read_text())
    cfg["m_max"] = 300
    (d / "short.yaml").write_text(yaml.safe_dump(cfg))
    assert main(["fit", "--config", str(d / "short.yaml"), "--data", str(d / "train.csv"),
                 "--out", str(d / "model.json")]) == 0
    return d


def test_simulate_is_deterministic(tmp_path, pois_run):
    main(["simulate", "pois_linear", "--seed", "1", "--out-dir", str(tmp_path)])
    for name in ("train.csv", "val.csv", "test.csv", "truth.yaml", "config.yaml"):
        assert (tmp_path / name).read_bytes() == (pois_run / name).read_bytes()
    truth = yaml.safe_load((tmp_path / "truth.yaml").read_text())
    assert truth["effects"]["lambda3"] == {"X5": 0.5, "X6": 1.0, "X7": -0.5}


def test_seed_from_environment(tmp_path, monkeypatch, pois_run):
    monkeypatch.setenv("BIVBOOST_SEED", "1")
    main(["simulate", "pois_linear", "--out-dir", str(tmp_path)])
    assert (tmp_path / "train.csv").read_bytes() == (pois_run / "train.csv").read_bytes()


def test_fit_writes_trace(pois_run):
    trace = pd.read_csv(pois_run / "model.trace.csv")
    assert list(trace.columns) == ["iteration", "parameter", "learner", "train_risk", "val_risk"]
    assert len(trace) == 301
    m = load_model(pois_run / "model.json")
    assert m.m_star == int(trace["val_risk"].idxmin())


def test_fit_then_predict_reproduces_eta(pois_run):
    out = pois_run / "pred.csv"
    assert main(["predict", "--model", str(pois_run / "model.json"), "--data", str(pois_run / "train.csv"),
                 "--out", str(out)]) == 0
    pred = pd.read_csv(out)
    m = load_model(pois_run / "model.json")
    train = load_csv(pois_run / "train.csv", ["y1", "y2"], "poisson2")
    eta = m.predict_eta(train.covariates())
    for k, name in enumerate(m.family.parameter_names):
        np.testing.assert_allclose(pred[f"eta_{name}"], eta[:, k], atol=1e-10)
        np.testing.assert_allclose(pred[name], np.exp(eta[:, k]), rtol=1e-12)


def test_score_command(pois_run, tmp_path):
    out = tmp_path / "s.csv"
    args = ["score", "--model", str(pois_run / "model.json"), "--data", str(pois_run / "test.csv"),
            "--metrics", "nll,msep,energy", "--mc-samples", "50", "--seed", "3", "--out", str(out)]
    assert main(args) == 0
    first = out.read_bytes()
    rep = pd.read_csv(out)
    assert list(rep.columns) == ["metric", "margin", "value", "sd"]
    assert list(rep["metric"]) == ["nll", "msep", "msep", "energy"]
    assert main(args + ["--threads", "2"]) == 0
    assert out.read_bytes() == first


def test_effects_zero_for_unselected(pois_run, tmp_path):
    assert main(["effects", "--model", str(pois_run / "model.json"), "--out-dir", str(tmp_path),
                 "--grid-size", "11"]) == 0
    m = load_model(pois_run / "model.json")
    chosen = {(name, learner[len("linear("):-1]) for name, learner in m.selection_frequencies()}
    files = list(tmp_path.glob("effect_*.csv"))
    assert len(files) == 30
    zero_seen = False
    for name in m.family.parameter_names:
        for j in range(1, 11):
            tab = pd.read_csv(tmp_path / f"effect_{name}_X{j}.csv")
            assert len(tab) == 11
            if (name, f"X{j}") not in chosen:
                zero_seen = True
                assert (tab["effect"] == 0).all()
            else:
                assert (tab["effect"] != 0).any()
    assert zero_seen


def test_freqs(pois_run, capsys):
    assert main(["freqs", "--model", str(pois_run / "model.json")]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "parameter,learner,count"
    m = load_model(pois_run / "model.json")
    assert sum(int(l.rsplit(",", 1)[1]) for l in lines[1:]) == m.m_star
    assert main(["freqs", "--model", str(pois_run / "model.json"), "--all"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert sum(int(l.rsplit(",", 1)[1]) for l in lines[1:]) == 300


def test_errors_are_single_line(tmp_path, capsys):
    assert main(["predict", "--model", str(tmp_path / "none.json"), "--data", "x", "--out", "y"]) == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("ERROR: ")
    assert main(["simulate", "no_such_scenario", "--out-dir", str(tmp_path)]) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("ERROR: usage")
    (tmp_path / "c.yaml").write_text("family: poisson2\nresponses: [y1, y2]\nbogus: 1\n")
    (tmp_path / "d.csv").write_text("y1,y2\n1,2\n")
    assert main(["fit", "--config", str(tmp_path / "c.yaml"), "--data", str(tmp_path / "d.csv"),
                 "--out", str(tmp_path / "m.json")]) == 1
    assert "'bogus'" in capsys.readouterr().err
