"""Replicate runs of the simulation scenarios.

Each replicate draws a fresh scenario from a replicate-indexed seed, fits
the bivariate model and optionally the univariate comparison (association
parameter pinned at independence), and records selections, linear slopes
and test-set scores. Summaries average these over replicates.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from . import engine, scoring
from .simulate import ScenarioSpec, SimulatedScenario, default_model_spec, make_scenario

MODELS = ("bivariate", "univariate")


@dataclass
class ReplicateResult:
    scenario_id: str
    seed: int
    model: str
    m_star: int
    iterations: int
    runtime: float
    selected: dict[str, set[str]]
    slopes: dict[str, dict[str, float]]
    test_nll: float
    scores: dict[tuple[str, str], float]
    informative: dict[str, set[str]]
    candidates: dict[str, list[str]]
    fit: engine.FittedModel | None = None


def _selected_covariates(model: engine.FittedModel) -> dict[str, set[str]]:
    out = {name: set() for name in model.family.parameter_names}
    for k, j in model.selected():
        name = model.family.parameter_names[k]
        out[name].add(model.spec.learners[name][j].covariate)
    return out


def _linear_slopes(model: engine.FittedModel) -> dict[str, dict[str, float]]:
    out = {}
    for name, entry in model.coefficients().items():
        out[name] = {c: v for c, v in entry.items() if c != "(Intercept)" and isinstance(v, float)}
    return out


def run_replicate(scenario_id: str, seed: int, model: str = "bivariate", p: int | None = None,
                  metrics: Sequence[str] | None = None, mc_samples: int = 1000,
                  keep_fit: bool = False, scenario: SimulatedScenario | None = None,
                  **spec_kwargs) -> ReplicateResult:
    """Fit one model on one simulated replicate and score it on the test set."""
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}")
    sc = scenario if scenario is not None else make_scenario(ScenarioSpec(scenario_id, p=p, seed=seed))
    spec = default_model_spec(sc, **spec_kwargs)
    if model == "univariate":
        spec = spec.independence()
    fam = spec.family
    t0 = time.perf_counter()
    fitted = engine.fit(spec, sc.train.responses, sc.train.covariates,
                        sc.val.responses, sc.val.covariates)
    runtime = time.perf_counter() - t0
    theta, eta = fitted.predict(sc.test.covariates, warn=False)
    test_nll = fam.negloglik(sc.test.responses, fam.clip(eta))
    if metrics is None:
        metrics = ["auc", "brier"] if fam.family_id == "bernoulli2" else ["msep"]
    report = scoring.score_report(fam, theta, sc.test.responses, metrics, mc_samples, seed)
    scores = {(m, g): v for m, g, v, _ in report.rows}
    scores[("nll", "joint")] = test_nll
    return ReplicateResult(
        scenario_id=sc.spec.scenario_id,
        seed=sc.spec.seed,
        model=model,
        m_star=fitted.m_star,
        iterations=len(fitted.history),
        runtime=runtime,
        selected=_selected_covariates(fitted),
        slopes=_linear_slopes(fitted),
        test_nll=test_nll,
        scores=scores,
        informative={k: sc.truth.informative(k) for k in fam.parameter_names},
        candidates={k: sorted({s.covariate for s in spec.learners[k]}) for k in fam.parameter_names},
        fit=fitted if keep_fit else None,
    )


def selection_rates(results: Iterable[ReplicateResult]) -> dict[str, tuple[float, float]]:
    """Per parameter, the share of (replicate, covariate) pairs selected up
    to ``m_star``, separately for informative and non-informative
    covariates. Parameters without candidate learners are skipped."""
    hits: dict[str, list[list[float]]] = {}
    for r in results:
        for k, cands in r.candidates.items():
            if not cands:
                continue
            inf = [c for c in cands if c in r.informative[k]]
            non = [c for c in cands if c not in r.informative[k]]
            h = hits.setdefault(k, [[], []])
            h[0].extend(float(c in r.selected[k]) for c in inf)
            h[1].extend(float(c in r.selected[k]) for c in non)
    return {k: (float(np.mean(a)) if a else float("nan"), float(np.mean(b)) if b else float("nan"))
            for k, (a, b) in hits.items()}


def mean_slopes(results: Iterable[ReplicateResult]) -> dict[str, dict[str, float]]:
    """Average linear slope per (parameter, covariate); unselected counts as 0."""
    results = list(results)
    out: dict[str, dict[str, float]] = {}
    for k in results[0].candidates:
        covs = results[0].candidates[k]
        out[k] = {c: float(np.mean([r.slopes.get(k, {}).get(c, 0.0) for r in results])) for c in covs}
    return out


def mean_scores(results: Iterable[ReplicateResult]) -> dict[tuple[str, str], tuple[float, float]]:
    """Mean and standard deviation over replicates of every recorded score."""
    results = list(results)
    keys = results[0].scores.keys()
    out = {}
    for key in keys:
        v = np.array([r.scores[key] for r in results])
        out[key] = (float(v.mean()), float(v.std(ddof=1)) if len(v) > 1 else float("nan"))
    return out


@dataclass
class BenchmarkSummary:
    scenario_id: str
    results: dict[str, list[ReplicateResult]] = field(default_factory=dict)

    def rows(self) -> list[dict[str, Any]]:
        """Flat table: one row per (model, quantity)."""
        out = []
        for model, res in self.results.items():
            if not res:
                continue
            for (metric, margin), (mean, sd) in mean_scores(res).items():
                out.append({"model": model, "quantity": metric, "target": margin, "mean": mean, "sd": sd})
            for k, (inf, non) in selection_rates(res).items():
                out.append({"model": model, "quantity": "selection_informative", "target": k, "mean": inf, "sd": None})
                out.append({"model": model, "quantity": "selection_noninformative", "target": k, "mean": non, "sd": None})
            for k, slopes in mean_slopes(res).items():
                for c, v in slopes.items():
                    out.append({"model": model, "quantity": "slope", "target": f"{k}:{c}", "mean": v, "sd": None})
        return out


def run_benchmark(scenario_id: str, replicates: int = 20, p: int | None = None, seed: int = 0,
                  models: Sequence[str] = MODELS, keep_fit: bool = False, **kwargs) -> BenchmarkSummary:
    """Run ``replicates`` replicates with seeds ``seed, seed + 1, ...``.

    Both models of a replicate share the same simulated data.
    """
    summary = BenchmarkSummary(scenario_id, {m: [] for m in models})
    for r in range(replicates):
        sc = make_scenario(ScenarioSpec(scenario_id, p=p, seed=seed + r))
        for m in models:
            summary.results[m].append(
                run_replicate(scenario_id, seed + r, m, scenario=sc, keep_fit=keep_fit, **kwargs))
    return summary
