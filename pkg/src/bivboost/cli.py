"""Command-line interface.

Subcommands: ``fit``, ``predict``, ``score``, ``simulate``, ``effects``,
``freqs`` and ``benchmark``. Failures print a single line starting with
``ERROR:`` to stderr and exit with a nonzero status.
"""

from __future__ import annotations

import argparse
import logging
import os
import re
import sys
import warnings
from pathlib import Path

import numpy as np
import yaml

from . import benchmark, engine, scoring
from .io import (ConfigError, DatasetError, build_model_spec, load_csv, load_for_config, load_model,
                 parse_config, save_model, split_validation, write_csv)
from .simulate import SCENARIO_IDS, ScenarioSpec, default_model_spec, make_scenario

ENV_SEED = "BIVBOOST_SEED"
ENV_THREADS = "BIVBOOST_THREADS"

EXIT_USAGE = 2
EXIT_FAILURE = 1


class CLIError(Exception):
    pass


def _env_int(name: str) -> int | None:
    value = os.environ.get(name)
    if value is None or value == "":
        return None
    try:
        return int(value)
    except ValueError:
        raise CLIError(f"environment variable {name} must be an integer, got {value!r}") from None


def resolve_seed(arg: int | None, default: int = 0) -> int:
    if arg is not None:
        return arg
    env = _env_int(ENV_SEED)
    return default if env is None else env


def resolve_threads(arg: int | None) -> int:
    if arg is not None:
        n = arg
    else:
        env = _env_int(ENV_THREADS)
        n = env if env is not None else (os.cpu_count() or 1)
    if n < 1:
        raise CLIError("threads must be positive")
    return n


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name)


# --------------------------------------------------------------------------- #
# Subcommands
# --------------------------------------------------------------------------- #


def write_trace(model: engine.FittedModel, path) -> None:
    """Risk trace: one row per iteration (0 is the offset model)."""
    fam = model.family
    n = len(model.train_risk)
    params = [""] + [fam.parameter_names[s.parameter] for s in model.history]
    learners = [""] + [model.spec.learners[fam.parameter_names[s.parameter]][s.learner].name
                       for s in model.history]
    cols = {
        "iteration": list(range(n)),
        "parameter": params,
        "learner": learners,
        "train_risk": [float(r) for r in model.train_risk],
    }
    if model.val_risk is not None:
        cols["val_risk"] = [float(r) for r in model.val_risk]
    write_csv(path, cols)


def cmd_fit(args) -> int:
    cfg = parse_config(args.config)
    seed = resolve_seed(args.seed, cfg.seed)
    data = load_for_config(cfg, args.data)
    val = None
    if args.validation:
        val = load_for_config(cfg, args.validation)
    elif "file" in cfg.validation:
        val = load_for_config(cfg, cfg.resolve(cfg.validation["file"]))
    elif "split" in cfg.validation:
        data, val = split_validation(data, cfg.validation["split"], seed)
    if args.m_max is not None:
        cfg.m_max = args.m_max
    spec = build_model_spec(cfg, data)
    model = engine.fit(spec, data.responses(), data.covariates(),
                       None if val is None else val.responses(),
                       None if val is None else val.covariates())
    out = Path(args.out)
    save_model(model, out)
    trace = Path(args.trace) if args.trace else out.with_name(out.stem + ".trace.csv")
    write_trace(model, trace)
    print(f"fitted {len(model.history)} iterations, m_star={model.m_star}; "
          f"model -> {out}, risk trace -> {trace}")
    return 0


def _load_newdata(model: engine.FittedModel, path, responses=None):
    covs = model.spec.covariates()
    categorical = {s.covariate for specs in model.spec.learners.values() for s in specs if s.kind == "mrf"}
    return load_csv(path, responses, model.family if responses else None,
                    categorical=categorical, required=covs)


def cmd_predict(args) -> int:
    model = load_model(args.model)
    data = _load_newdata(model, args.data)
    theta, eta = model.predict(data.columns)
    cols = {}
    for k, name in enumerate(model.family.parameter_names):
        cols[name] = theta[:, k]
    for k, name in enumerate(model.family.parameter_names):
        cols[f"eta_{name}"] = eta[:, k]
    write_csv(args.out, cols)
    print(f"predicted {len(eta)} rows -> {args.out}")
    return 0


def cmd_score(args) -> int:
    model = load_model(args.model)
    responses = args.responses.split(",")
    data = _load_newdata(model, args.data, responses)
    theta, _ = model.predict(data.columns)
    metrics = args.metrics.split(",") if args.metrics else None
    report = scoring.score_report(model.family, theta, data.responses(), metrics,
                                  mc_samples=args.mc_samples, seed=resolve_seed(args.seed),
                                  threads=resolve_threads(args.threads))
    text = report.to_csv()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def scenario_config(scenario, spec: engine.ModelSpec, adjacency_file: str | None) -> dict:
    """A configuration document equivalent to ``spec`` for simulated data."""
    params = {}
    for name, specs in spec.learners.items():
        if name in spec.fixed:
            continue
        entries = []
        for s in specs:
            entry = {"covariate": s.covariate, "learner": s.kind}
            if s.df is not None:
                entry["df"] = s.df
            entries.append(entry)
        params[name] = entries
    doc = {
        "family": spec.family.family_id,
        "responses": ["y1", "y2"],
        "nu": spec.nu,
        "m_max": spec.m_max,
        "stabilization": spec.stabilization,
        "patience": spec.patience,
        "validation": {"file": "val.csv"},
        "seed": scenario.spec.seed,
        "parameters": params,
    }
    if adjacency_file:
        doc["adjacency"] = adjacency_file
        doc["categorical"] = ["region"]
    return doc


def cmd_simulate(args) -> int:
    seed = resolve_seed(args.seed)
    sc = make_scenario(ScenarioSpec(args.scenario, p=args.p, seed=seed))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for part in ("train", "val", "test"):
        ds = getattr(sc, part)
        cols = dict(ds.covariates)
        cols["y1"] = ds.responses[:, 0]
        cols["y2"] = ds.responses[:, 1]
        write_csv(out / f"{part}.csv", cols)
    adjacency_file = None
    if sc.adjacency is not None:
        adjacency_file = "adjacency.csv"
        with open(out / adjacency_file, "w", encoding="utf-8") as fh:
            for a, b in sc.adjacency:
                fh.write(f"{a},{b}\n")
    truth = {
        "scenario": sc.spec.scenario_id,
        "seed": seed,
        "p": sc.spec.dim,
        "n_train": sc.spec.n_train,
        "n_val": sc.spec.n_val,
        "n_test": sc.spec.n_test,
        "family": sc.spec.family.family_id,
        "intercepts": sc.truth.intercepts,
        "effects": sc.truth.effects,
    }
    with open(out / "truth.yaml", "w", encoding="utf-8") as fh:
        yaml.safe_dump(truth, fh, sort_keys=False)
    with open(out / "config.yaml", "w", encoding="utf-8") as fh:
        yaml.safe_dump(scenario_config(sc, default_model_spec(sc), adjacency_file), fh, sort_keys=False)
    print(f"simulated {args.scenario} (seed {seed}) -> {out}")
    return 0


def cmd_effects(args) -> int:
    model = load_model(args.model)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    count = 0
    for name in model.family.parameter_names:
        seen = []
        for s in model.spec.learners[name]:
            if s.covariate in seen:
                continue
            seen.append(s.covariate)
            grid, effect = model.partial_effect(name, s.covariate, n_grid=args.grid_size)
            if grid.dtype == object:
                grid = [str(g) for g in grid]
            write_csv(out / f"effect_{_safe(name)}_{_safe(s.covariate)}.csv",
                      {s.covariate: grid, "effect": np.asarray(effect, dtype=float)})
            count += 1
    print(f"wrote {count} effect tables -> {out}")
    return 0


def cmd_freqs(args) -> int:
    model = load_model(args.model)
    upto = len(model.history) if args.all else None
    freqs = model.selection_frequencies(upto)
    rows = sorted(freqs.items(), key=lambda kv: (-kv[1], kv[0]))
    cols = {"parameter": [k[0] for k, _ in rows], "learner": [k[1] for k, _ in rows],
            "count": [v for _, v in rows]}
    if args.out:
        write_csv(args.out, cols)
    else:
        sys.stdout.write("parameter,learner,count\n")
        for (p, lr), c in rows:
            sys.stdout.write(f"{p},{lr},{c}\n")
    return 0


def cmd_benchmark(args) -> int:
    models = args.models.split(",")
    summary = benchmark.run_benchmark(args.scenario, args.replicates, p=args.p,
                                      seed=resolve_seed(args.seed), models=models)
    rows = summary.rows()
    cols = {key: [r[key] if r[key] is not None else float("nan") for r in rows]
            for key in ("model", "quantity", "target", "mean", "sd")}
    if args.out:
        write_csv(args.out, cols)
    else:
        sys.stdout.write("model,quantity,target,mean,sd\n")
        for r in rows:
            sd = "" if r["sd"] is None else repr(r["sd"])
            sys.stdout.write(f"{r['model']},{r['quantity']},{r['target']},{r['mean']!r},{sd}\n")
    return 0


# --------------------------------------------------------------------------- #


def _format_warning(message, category, filename, lineno, line=None):
    return f"WARNING: {category.__name__}: {message}\n"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CLIError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bivboost", description="Boosting for bivariate distributional regression.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    f = sub.add_parser("fit", help="fit a model from a configuration and a training CSV")
    f.add_argument("--config", required=True)
    f.add_argument("--data", required=True, help="training CSV")
    f.add_argument("--validation", help="validation CSV (overrides the configuration)")
    f.add_argument("--out", required=True, help="model file (JSON)")
    f.add_argument("--trace", help="risk trace CSV (default: <model stem>.trace.csv)")
    f.add_argument("--m-max", type=int, dest="m_max")
    f.add_argument("--seed", type=int, help="seed for a configured validation split")
    f.set_defaults(func=cmd_fit)

    pr = sub.add_parser("predict", help="predict distribution parameters")
    pr.add_argument("--model", required=True)
    pr.add_argument("--data", required=True)
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=cmd_predict)

    s = sub.add_parser("score", help="score predictions against observed responses")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--responses", default="y1,y2", help="response columns (default y1,y2)")
    s.add_argument("--metrics", help=f"comma separated subset of {','.join(scoring.METRICS)}")
    s.add_argument("--mc-samples", type=int, default=1000, dest="mc_samples")
    s.add_argument("--seed", type=int)
    s.add_argument("--threads", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_score)

    sim = sub.add_parser("simulate", help="draw a simulation scenario")
    sim.add_argument("scenario", choices=SCENARIO_IDS)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--p", type=int)
    sim.add_argument("--out-dir", required=True, dest="out_dir")
    sim.set_defaults(func=cmd_simulate)

    e = sub.add_parser("effects", help="export partial effects as CSV")
    e.add_argument("--model", required=True)
    e.add_argument("--out-dir", required=True, dest="out_dir")
    e.add_argument("--grid-size", type=int, default=100, dest="grid_size")
    e.set_defaults(func=cmd_effects)

    q = sub.add_parser("freqs", help="selection frequencies up to the stopping iteration")
    q.add_argument("--model", required=True)
    q.add_argument("--all", action="store_true", help="count all iterations, not just up to m_star")
    q.add_argument("--out")
    q.set_defaults(func=cmd_freqs)

    b = sub.add_parser("benchmark", help="replicate a simulation scenario")
    b.add_argument("scenario", choices=SCENARIO_IDS)
    b.add_argument("--replicates", type=int, default=20)
    b.add_argument("--p", type=int)
    b.add_argument("--seed", type=int)
    b.add_argument("--models", default="bivariate,univariate")
    b.add_argument("--out")
    b.set_defaults(func=cmd_benchmark)
    return p


def main(argv=None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        if args.verbose:
            logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
        previous = warnings.formatwarning
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("default")
                warnings.formatwarning = _format_warning
                return args.func(args)
        finally:
            warnings.formatwarning = previous
    except CLIError as err:
        print(f"ERROR: usage: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, DatasetError, engine.SchemaError, engine.BoostingError, ValueError,
            KeyError, OSError, FloatingPointError) as err:
        msg = str(err).replace("\n", " ")
        print(f"ERROR: {type(err).__name__}: {msg}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
