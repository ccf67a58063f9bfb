"""Predictive scores for bivariate forecasts.

AUC and Brier score are computed per margin; MSEP compares predicted
marginal means with the observations; the energy score is estimated by
Monte Carlo draws from each row's predictive distribution.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.spatial.distance import pdist
from scipy.stats import rankdata

from .families import Family, get_family


class UndefinedAUCError(ValueError):
    """AUC needs both classes among the labels."""


def auc(scores, labels) -> float:
    """Area under the ROC curve (Mann-Whitney statistic, ties count 1/2)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("labels must be 0 or 1")
    pos = labels == 1
    n1, n0 = int(pos.sum()), int((~pos).sum())
    if n1 == 0 or n0 == 0:
        raise UndefinedAUCError("AUC is undefined when only one class is present")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def brier(probabilities, labels) -> float:
    p = np.asarray(probabilities, dtype=float)
    y = np.asarray(labels, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    return float(np.mean((p - y) ** 2))


def msep(predicted_means, responses) -> tuple[float, float]:
    """Mean squared error of the predicted marginal means, per margin."""
    d = np.asarray(predicted_means, dtype=float) - np.asarray(responses, dtype=float)
    m = np.mean(d * d, axis=0)
    return float(m[0]), float(m[1])


def sample(family, params, count: int, seed=None) -> np.ndarray:
    """``count`` draws from the family at fixed parameters (one row of
    ``params``) or one draw per row when ``params`` has ``count`` rows."""
    fam = get_family(family)
    theta = np.atleast_2d(np.asarray(params, dtype=float))
    if len(theta) == 1:
        theta = np.repeat(theta, count, axis=0)
    elif len(theta) != count:
        raise ValueError("params must have one row or `count` rows")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return fam.sample(theta, rng)


def energy_score_sample(draws, y) -> float:
    """Energy score of one observation against a predictive sample.

    ``mean ||x_s - y|| - (1 / (2 S^2)) sum_{s,t} ||x_s - x_t||``
    """
    draws = np.asarray(draws, dtype=float)
    y = np.asarray(y, dtype=float)
    s = len(draws)
    first = np.mean(np.sqrt(np.sum((draws - y) ** 2, axis=1)))
    # pdist lists each unordered pair once
    second = 2.0 * pdist(draws).sum() / (2.0 * s * s) if s > 1 else 0.0
    return float(first - second)


def energy_score_discrete(support, weights, y) -> float:
    """Exact energy score of a finite predictive distribution:
    ``E||X - y|| - E||X - X'|| / 2`` with ``X, X'`` independent."""
    support = np.asarray(support, dtype=float)
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or not np.isclose(w.sum(), 1.0):
        raise ValueError("weights must be non-negative and sum to 1")
    d_y = np.sqrt(np.sum((support - np.asarray(y, dtype=float)) ** 2, axis=1))
    d_xx = np.sqrt(np.sum((support[:, None, :] - support[None, :, :]) ** 2, axis=2))
    return float(w @ d_y - 0.5 * w @ d_xx @ w)


def row_seed(seed: int, i: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(i)])


def energy_scores(family, params, responses, mc_samples: int = 1000, seed: int = 0,
                  threads: int | None = None) -> np.ndarray:
    """Per-row Monte Carlo energy scores; row ``i`` uses its own stream
    derived from ``(seed, i)`` so results do not depend on evaluation order."""
    fam = get_family(family)
    theta = np.atleast_2d(np.asarray(params, dtype=float))
    y = np.atleast_2d(np.asarray(responses, dtype=float))
    if len(theta) != len(y):
        raise ValueError("params and responses must have the same number of rows")

    def one(i):
        draws = fam.sample(np.repeat(theta[i:i + 1], mc_samples, axis=0), row_seed(seed, i))
        return energy_score_sample(draws, y[i])

    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return np.array(list(pool.map(one, range(len(y)))))
    return np.array([one(i) for i in range(len(y))])


def energy_score(family, params, responses, mc_samples: int = 1000, seed: int = 0,
                 threads: int | None = None) -> float:
    return float(np.mean(energy_scores(family, params, responses, mc_samples, seed, threads)))


def nll_score(family, params, responses) -> float:
    """Summed negative log-likelihood at fitted parameters."""
    fam = get_family(family)
    eta = fam.link(np.atleast_2d(np.asarray(params, dtype=float)))
    return fam.negloglik(np.asarray(responses), eta)


@dataclass
class ScoreReport:
    """Scores of one forecast. ``rows`` holds ``(metric, margin, value, sd)``."""

    rows: list[tuple[str, str, float, float | None]] = field(default_factory=list)
    metadata: dict[str, Any] = field(default_factory=dict)

    def add(self, metric: str, margin: str, value: float, sd: float | None = None):
        self.rows.append((metric, margin, float(value), None if sd is None else float(sd)))

    def value(self, metric: str, margin: str = "joint") -> float:
        for m, g, v, _ in self.rows:
            if m == metric and g == margin:
                return v
        raise KeyError((metric, margin))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "margin", "value", "sd"])
        for m, g, v, sd in self.rows:
            w.writerow([m, g, repr(v), "" if sd is None else repr(sd)])
        return buf.getvalue()


def _sd(values) -> float | None:
    return float(np.std(values, ddof=1)) if len(values) > 1 else None


METRICS = ("nll", "auc", "brier", "msep", "energy")


def score_report(family, params, responses, metrics=None, mc_samples: int = 1000, seed: int = 0,
                 threads: int | None = None) -> ScoreReport:
    """Evaluate the requested metrics (default: all that apply to the family)."""
    fam: Family = get_family(family)
    theta = np.atleast_2d(np.asarray(params, dtype=float))
    y = np.atleast_2d(np.asarray(responses, dtype=float))
    binary = fam.family_id == "bernoulli2"
    if metrics is None:
        metrics = ["nll", "energy"] + (["auc", "brier"] if binary else ["msep"])
    report = ScoreReport(metadata={"n": len(y), "family": fam.family_id,
                                   "mc_samples": mc_samples, "seed": seed})
    for metric in metrics:
        if metric == "nll":
            report.add("nll", "joint", nll_score(fam, theta, y))
        elif metric in ("auc", "brier"):
            if not binary:
                raise ValueError(f"{metric} is only defined for binary responses")
            for d in range(2):
                if metric == "auc":
                    report.add("auc", f"y{d + 1}", auc(theta[:, d], y[:, d]))
                else:
                    sq = (theta[:, d] - y[:, d]) ** 2
                    report.add("brier", f"y{d + 1}", sq.mean(), _sd(sq))
        elif metric == "msep":
            sq = (fam.mean(theta) - y) ** 2
            for d in range(2):
                report.add("msep", f"y{d + 1}", sq[:, d].mean(), _sd(sq[:, d]))
        elif metric == "energy":
            es = energy_scores(fam, theta, y, mc_samples, seed, threads)
            report.add("energy", "joint", es.mean(), _sd(es))
        else:
            raise ValueError(f"unknown metric {metric!r}; choose from {METRICS}")
    return report
