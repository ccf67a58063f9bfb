"""Non-cyclic component-wise gradient boosting for bivariate families.

In every iteration the negative gradient of the risk is computed for each
distribution parameter, all base-learners of that parameter are fitted to
it and the best one (smallest rss) is kept. The parameter whose damped
candidate update yields the smallest in-sample risk is then updated; all
other predictors stay unchanged.
"""

from __future__ import annotations

import logging
import warnings
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Sequence

import numpy as np

from .baselearners import BaseLearnerSpec, Learner, LinearBank, design_matrix, evaluate, region_index
from .families import Family, get_family

logger = logging.getLogger(__name__)

FORMAT_VERSION = "1.0"
STABILIZATIONS = ("none", "mad", "l2", "fisher")


class BoostingError(RuntimeError):
    """The boosting loop cannot continue."""


class SchemaError(ValueError):
    """Training and validation data do not line up."""


@dataclass
class ModelSpec:
    """What to fit: the family, per-parameter learners and loop settings.

    Parameters listed in ``fixed`` are pinned at the given predictor value
    and never updated; parameters without learners keep their offset.
    """

    family: Family
    learners: dict[str, list[BaseLearnerSpec]]
    nu: float = 0.1
    m_max: int = 5000
    offsets_mode: str = "mle"
    fixed: dict[str, float] = field(default_factory=dict)
    stop_on_no_improvement: bool = False
    patience: int | None = None
    trace_candidates: bool = False
    stabilization: str = "none"

    def __post_init__(self):
        self.family = get_family(self.family)
        if not 0 < self.nu <= 1:
            raise ValueError("step length nu must lie in (0, 1]")
        if self.m_max < 0:
            raise ValueError("m_max must be non-negative")
        if self.stabilization not in STABILIZATIONS:
            raise ValueError(f"stabilization must be one of {STABILIZATIONS}")
        if self.offsets_mode not in ("mle", "zero"):
            raise ValueError("offsets_mode must be 'mle' or 'zero'")
        names = self.family.parameter_names
        for key in list(self.learners) + list(self.fixed):
            if key not in names:
                raise KeyError(f"{self.family.family_id} has no parameter {key!r}; expected one of {names}")
        self.learners = {k: list(self.learners.get(k, [])) for k in names}
        for k in self.fixed:
            self.learners[k] = []

    def independence(self) -> "ModelSpec":
        """The same model with the association parameter switched off.

        This is the univariate comparison: both margins are boosted jointly
        but the dependence parameter is pinned at independence.
        """
        fixed = dict(self.fixed)
        fixed.update(self.family.independence)
        learners = {k: v for k, v in self.learners.items() if k not in fixed}
        return replace(self, learners=learners, fixed=fixed)

    def covariates(self) -> list[str]:
        seen = []
        for specs in self.learners.values():
            for s in specs:
                if s.covariate not in seen:
                    seen.append(s.covariate)
        return seen


@dataclass
class Step:
    iteration: int
    parameter: int
    learner: int
    risk: float
    candidate_risks: np.ndarray | None = None
    rss: list[np.ndarray] | None = None


def stabilize(u: np.ndarray, method: str = "none", information: np.ndarray | None = None) -> np.ndarray:
    """Rescale a negative gradient vector.

    ``"mad"`` divides by the median absolute deviation, ``"l2"`` by the root
    mean square; divisors are kept within ``[1e-4, 1e4]``. ``"fisher"``
    divides by the mean expected Fisher information of the predictor
    (``information``, one value per row), a scalar Newton-type scaling whose
    step still vanishes with the gradient. Its divisor is only kept positive
    and finite: near a boundary such as ``lambda3 -> 0`` both gradient and
    information vanish at the same rate, and any fixed floor would stall
    the predictor there.
    """
    if method == "none":
        return u
    if method == "mad":
        div = float(np.median(np.abs(u - np.median(u))))
        div = max(div, 1e-4)
    elif method == "l2":
        div = float(np.sqrt(np.mean(u * u)))
        div = min(max(div, 1e-4), 1e4)
    else:
        if information is None:
            raise ValueError("fisher stabilization needs the information vector")
        div = float(np.mean(information))
        tiny, huge = np.finfo(float).tiny, np.finfo(float).max
        div = min(max(div, tiny), huge) if np.isfinite(div) else huge
    return u / div


def _has(data, name: str) -> bool:
    try:
        data[name]
    except (KeyError, IndexError):
        return False
    return True


def _column(data, name: str) -> np.ndarray:
    try:
        return np.asarray(data[name])
    except (KeyError, IndexError):
        raise SchemaError(f"covariate {name!r} is missing from the data") from None


# --------------------------------------------------------------------------- #
# Offsets
# --------------------------------------------------------------------------- #


def _newton_offsets(family, data, offsets, free, tol, max_iter):
    n = len(data)

    def score_and_ll(o):
        eta = np.broadcast_to(o, (n, family.K))
        with np.errstate(all="ignore"):
            ll = family.loglik(data, eta).sum()
            g = family.gradient(data, eta).sum(axis=0)[free]
        return g, ll

    g, ll = score_and_ll(offsets)
    for _ in range(max_iter):
        if np.linalg.norm(g) < tol:
            return offsets, True
        h = np.empty((len(free), len(free)))
        for a, k in enumerate(free):
            step = 1e-5 * max(1.0, abs(offsets[k]))
            up, down = offsets.copy(), offsets.copy()
            up[k] += step
            down[k] -= step
            h[:, a] = (score_and_ll(up)[0] - score_and_ll(down)[0]) / (2 * step)
        h = 0.5 * (h + h.T)
        try:
            direction = -np.linalg.solve(h, g)
        except np.linalg.LinAlgError:
            direction = g / n
        if not np.all(np.isfinite(direction)) or direction @ g <= 0:
            direction = g / n
        t = 1.0
        while t > 1e-10:
            trial = offsets.copy()
            trial[free] += t * direction
            g_new, ll_new = score_and_ll(trial)
            if np.isfinite(ll_new) and ll_new >= ll - 1e-12 * abs(ll):
                break
            t *= 0.5
        else:
            break
        offsets, g, ll = trial, g_new, ll_new
    return offsets, bool(np.all(np.isfinite(g)) and np.linalg.norm(g) < tol)


def init_offsets(family, responses, mode: str = "mle", fixed: Mapping[str, float] | None = None,
                 tol: float = 1e-8, max_iter: int = 500) -> np.ndarray:
    """Starting predictors of the intercept-only model.

    ``mode="mle"`` runs Newton's method on the pooled log-likelihood over
    the free intercepts (Hessian by central differences of the analytic
    score) until the score norm drops below ``tol``. A free intercept that
    ends below the family's ``offset_floor`` is pinned there and the others
    are refitted: at such boundaries (``lambda3 -> 0``) the gradient
    vanishes and boosting could never move the predictor away again.
    """
    family = get_family(family)
    responses = np.asarray(responses)
    if len(responses) < 2:
        raise ValueError("need at least two observations")
    fixed = dict(fixed or {})
    pinned = {family.index(k): v for k, v in fixed.items()}
    free = [k for k in range(family.K) if k not in pinned]
    offsets = np.zeros(family.K)
    for k, v in pinned.items():
        offsets[k] = v
    if mode == "zero" or not free:
        return offsets
    data = family.prepare(responses)
    start = family.start_eta(responses)
    floor = family.offset_floor(responses)
    offsets[free] = start[free]
    out, ok = _newton_offsets(family, data, offsets, free, tol, max_iter)
    low = [k for k in free if out[k] < floor[k]]
    if ok and low:
        offsets[low] = floor[low]
        free = [k for k in free if k not in low]
        out, ok = (_newton_offsets(family, data, offsets, free, tol, max_iter) if free
                   else (offsets, True))
    if ok:
        return out
    warnings.warn("Newton iterations for the offsets did not converge; using zero offsets",
                  RuntimeWarning, stacklevel=2)
    out = np.zeros(family.K)
    for k, v in pinned.items():
        out[k] = v
    return out


# --------------------------------------------------------------------------- #
# Boosting
# --------------------------------------------------------------------------- #


class _ParameterLearners:
    """Base-learners of one distribution parameter."""

    def __init__(self, specs: Sequence[BaseLearnerSpec], covariates):
        self.learners = [Learner(s, _column(covariates, s.covariate)) for s in specs]
        self.linear = [j for j, lr in enumerate(self.learners) if lr.spec.kind == "linear"]
        self.smooth = [j for j, lr in enumerate(self.learners) if lr.spec.kind != "linear"]
        self.bank = LinearBank([self.learners[j] for j in self.linear]) if self.linear else None

    def __len__(self):
        return len(self.learners)

    def best(self, u: np.ndarray):
        """Fit every learner to ``u``; return the winner's index, coefficients
        and fitted values together with all rss values (in learner order)."""
        rss = np.empty(len(self.learners))
        smooth_fits = {}
        if self.bank is not None:
            lin_rss, slopes, mean = self.bank.rss(u)
            rss[self.linear] = lin_rss
        for j in self.smooth:
            res = self.learners[j].fit(u)
            smooth_fits[j] = res
            rss[j] = res.rss
        j = int(np.argmin(rss))
        if j in smooth_fits:
            res = smooth_fits[j]
            return j, res.coefficients, res.fitted, rss
        a = self.linear.index(j)
        coef = np.array([mean, slopes[a]])
        fitted = mean + slopes[a] * self.bank.xc[:, a]
        return j, coef, fitted, rss


class Booster:
    """Mutable boosting state bound to one training set (and optionally a
    validation set)."""

    def __init__(self, spec: ModelSpec, responses, covariates, val_responses=None, val_covariates=None):
        self.spec = spec
        fam = self.family = spec.family
        self.responses = np.asarray(responses)
        self.data = fam.prepare(self.responses)
        self.n = len(self.data)
        self.offsets = init_offsets(fam, self.responses, spec.offsets_mode, spec.fixed)
        self.eta = np.tile(self.offsets, (self.n, 1))
        self.params = [
            _ParameterLearners(spec.learners[name], covariates) for name in fam.parameter_names
        ]
        self.coef = [[np.zeros(lr.n_coef) for lr in p.learners] for p in self.params]
        self.increments: list[np.ndarray] = []
        self.history: list[Step] = []
        self.risk = self._risk(self.eta)
        if not np.isfinite(self.risk):
            raise BoostingError("risk of the offset model is not finite")
        self.train_risk = [self.risk]
        self.val = None
        if val_responses is not None:
            self._bind_validation(val_responses, val_covariates)

    def _bind_validation(self, val_responses, val_covariates):
        fam = self.family
        val_responses = np.asarray(val_responses)
        if val_responses.ndim != 2 or val_responses.shape[1] != 2:
            raise SchemaError("validation responses must have two columns")
        designs = []
        for p in self.params:
            row = []
            for lr in p.learners:
                col = _column(val_covariates, lr.spec.covariate)
                if lr.spec.kind == "mrf":
                    row.append(("index", region_index(col, lr.labels)))
                else:
                    row.append(("design", design_matrix(lr.spec, lr.state(), col, warn=False)))
            designs.append(row)
        data = fam.prepare(val_responses)
        eta = np.tile(self.offsets, (len(data), 1))
        self.val = {"data": data, "eta": eta, "designs": designs}
        self.val_risk = [self._risk(eta, data)]

    def _risk(self, eta, data=None) -> float:
        data = self.data if data is None else data
        with np.errstate(all="ignore"):
            ll = self.family.loglik(data, eta)
        total = -float(np.sum(ll))
        return total if np.isfinite(total) else np.inf

    @property
    def iterations(self) -> int:
        return len(self.history)

    def step(self) -> bool:
        """One boosting iteration. Returns False if the loop stopped early
        because no candidate improved the risk and ``stop_on_no_improvement``
        is set."""
        spec = self.spec
        with np.errstate(all="ignore"):
            u = self.family.gradient(self.data, self.eta)
            info = self.family.information(self.eta) if spec.stabilization == "fisher" else None
        K = self.family.K
        candidate = np.full(K, np.inf)
        winners: dict[int, tuple] = {}
        rss_log = [] if spec.trace_candidates else None
        for k, p in enumerate(self.params):
            if not len(p):
                if rss_log is not None:
                    rss_log.append(np.empty(0))
                continue
            uk = stabilize(u[:, k], spec.stabilization, None if info is None else info[:, k])
            if not np.all(np.isfinite(uk)):
                if rss_log is not None:
                    rss_log.append(np.full(len(p), np.nan))
                continue
            j, coef, fitted, rss = p.best(uk)
            if rss_log is not None:
                rss_log.append(rss)
            trial = self.eta.copy()
            trial[:, k] += spec.nu * fitted
            candidate[k] = self._risk(trial)
            winners[k] = (j, coef, fitted, trial)
        if not np.any(np.isfinite(candidate)):
            raise BoostingError(
                f"iteration {self.iterations + 1}: every candidate update gives a non-finite risk "
                f"(current risk {self.risk:.6g})"
            )
        k = int(np.argmin(candidate))
        # rounding can leave a flat step a hair below the current risk
        if spec.stop_on_no_improvement and candidate[k] >= self.risk - 1e-12 * abs(self.risk):
            return False
        j, coef, fitted, trial = winners[k]
        inc = spec.nu * coef
        self.coef[k][j] = self.coef[k][j] + inc
        self.increments.append(inc)
        self.eta = trial
        self.risk = float(candidate[k])
        self.train_risk.append(self.risk)
        self.history.append(Step(
            self.iterations + 1, k, j, self.risk,
            candidate.copy() if spec.trace_candidates else None, rss_log,
        ))
        if self.val is not None:
            kind, design = self.val["designs"][k][j]
            contrib = inc[design] if kind == "index" else design @ inc
            self.val["eta"][:, k] += contrib
            self.val_risk.append(self._risk(self.val["eta"], self.val["data"]))
        return True


def boost_step(booster: Booster) -> Booster:
    """Advance ``booster`` by one iteration and return it."""
    booster.step()
    return booster


# --------------------------------------------------------------------------- #
# Fitted model
# --------------------------------------------------------------------------- #


@dataclass
class FittedModel:
    """Boosting result frozen at the stopping iteration ``m_star``."""

    spec: ModelSpec
    offsets: np.ndarray
    coefficients_: list[list[np.ndarray]]
    states: list[list[dict[str, Any]]]
    m_star: int
    history: list[Step]
    train_risk: list[float]
    val_risk: list[float] | None = None
    ranges: list[list[tuple[float, float] | None]] = field(default_factory=list)
    train_eta: np.ndarray | None = None

    @property
    def family(self) -> Family:
        return self.spec.family

    def selected(self) -> list[tuple[int, int]]:
        """(parameter, learner) pairs chosen at least once up to ``m_star``."""
        return sorted({(s.parameter, s.learner) for s in self.history[: self.m_star]})

    def predict_eta(self, newdata, warn: bool = True) -> np.ndarray:
        fam = self.family
        n = None
        contributions = []
        for k, name in enumerate(fam.parameter_names):
            for j, spec in enumerate(self.spec.learners[name]):
                coef = self.coefficients_[k][j]
                if not np.any(coef):
                    # region labels are checked even for unused MRF learners
                    if spec.kind == "mrf" and _has(newdata, spec.covariate):
                        region_index(_column(newdata, spec.covariate), self.states[k][j]["labels"])
                    continue
                contributions.append((k, evaluate(spec, self.states[k][j], coef,
                                                  _column(newdata, spec.covariate), warn)))
        if contributions:
            n = len(contributions[0][1])
        else:
            n = _nrows(newdata)
        eta = np.tile(self.offsets, (n, 1))
        for k, values in contributions:
            eta[:, k] += values
        return eta

    def predict(self, newdata, warn: bool = True) -> tuple[np.ndarray, np.ndarray]:
        """Distribution parameters and predictors for ``newdata``."""
        eta = self.predict_eta(newdata, warn)
        return self.family.inverse_link(self.family.clip(eta), strict=False), eta

    def coefficients(self) -> dict[str, dict[str, Any]]:
        """Aggregated effects per parameter.

        Linear learners are reported as total slopes with their intercept
        mass folded into ``(Intercept)``; P-splines as coefficient vector plus
        knots; MRF learners as a region -> value map. Learners never chosen
        up to ``m_star`` are absent.
        """
        fam = self.family
        out: dict[str, dict[str, Any]] = {}
        for k, name in enumerate(fam.parameter_names):
            entry: dict[str, Any] = {}
            intercept = float(self.offsets[k])
            for j, spec in enumerate(self.spec.learners[name]):
                coef = self.coefficients_[k][j]
                if not np.any(coef):
                    continue
                if spec.kind == "linear":
                    intercept += float(coef[0] - coef[1] * self.states[k][j]["center"])
                    entry[spec.covariate] = entry.get(spec.covariate, 0.0) + float(coef[1])
                elif spec.kind == "pspline":
                    entry[spec.name] = {"coefficients": coef.tolist(), "knots": list(self.states[k][j]["knots"])}
                else:
                    entry[spec.name] = dict(zip(self.states[k][j]["labels"], coef.tolist()))
            out[name] = {"(Intercept)": intercept, **entry}
        return out

    def selection_frequencies(self, upto: int | None = None) -> dict[tuple[str, str], int]:
        m = self.m_star if upto is None else upto
        return selection_frequencies(self.history[:m], self.spec)

    def partial_effect(self, parameter: str, covariate: str, grid=None, n_grid: int = 100):
        """Summed effect of ``covariate`` on one predictor.

        Returns ``(grid, effect)``; for numeric covariates the grid spans
        the training range. Linear parts are shown without their intercept.
        MRF effects are returned per region label.
        """
        fam = self.family
        k = fam.index(parameter)
        specs = self.spec.learners[parameter]
        js = [j for j, s in enumerate(specs) if s.covariate == covariate]
        if any(specs[j].kind == "mrf" for j in js):
            j = next(j for j in js if specs[j].kind == "mrf")
            labels = list(self.states[k][j]["labels"])
            coef = self.coefficients_[k][j]
            return np.array(labels, dtype=object), np.asarray(coef, dtype=float).copy()
        if grid is None:
            bounds = [self.ranges[k][j] for j in js if self.ranges and self.ranges[k][j] is not None]
            if bounds:
                lo = min(b[0] for b in bounds)
                hi = max(b[1] for b in bounds)
            else:
                lo, hi = 0.0, 1.0
            grid = np.linspace(lo, hi, n_grid)
        grid = np.asarray(grid, dtype=float)
        effect = np.zeros(len(grid))
        for j in js:
            coef = self.coefficients_[k][j]
            if not np.any(coef):
                continue
            spec = specs[j]
            if spec.kind == "linear":
                effect += coef[1] * (grid - self.states[k][j]["center"])
            else:
                effect += design_matrix(spec, self.states[k][j], grid, warn=False) @ coef
        return grid, effect

    # serialisation ---------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        fam = self.family
        params = []
        for k, name in enumerate(fam.parameter_names):
            learners = []
            for j, spec in enumerate(self.spec.learners[name]):
                learners.append({
                    "spec": _spec_to_dict(spec),
                    "state": self.states[k][j],
                    "coefficients": self.coefficients_[k][j].tolist(),
                    "range": list(self.ranges[k][j]) if self.ranges and self.ranges[k][j] else None,
                })
            params.append({"name": name, "offset": float(self.offsets[k]),
                           "fixed": self.spec.fixed.get(name), "learners": learners})
        return {
            "format": "bivboost-model",
            "format_version": FORMAT_VERSION,
            "family": fam.family_id,
            "nu": self.spec.nu,
            "m_max": self.spec.m_max,
            "offsets_mode": self.spec.offsets_mode,
            "stabilization": self.spec.stabilization,
            "patience": self.spec.patience,
            "m_star": self.m_star,
            "parameters": params,
            "history": [[s.iteration, s.parameter, s.learner, s.risk] for s in self.history],
            "train_risk": list(self.train_risk),
            "val_risk": None if self.val_risk is None else list(self.val_risk),
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "FittedModel":
        version = str(doc.get("format_version", ""))
        major = version.split(".")[0]
        if major != FORMAT_VERSION.split(".")[0]:
            raise ValueError(f"unsupported model format version {version!r}")
        fam = get_family(doc["family"])
        learners, fixed, offsets, coefs, states, ranges = {}, {}, [], [], [], []
        for p in doc["parameters"]:
            name = p["name"]
            specs = [_spec_from_dict(lr["spec"]) for lr in p["learners"]]
            learners[name] = specs
            if p.get("fixed") is not None:
                fixed[name] = float(p["fixed"])
            offsets.append(float(p["offset"]))
            coefs.append([np.asarray(lr["coefficients"], dtype=float) for lr in p["learners"]])
            states.append([lr["state"] for lr in p["learners"]])
            ranges.append([tuple(lr["range"]) if lr.get("range") else None for lr in p["learners"]])
        spec = ModelSpec(fam, learners, nu=doc["nu"], m_max=doc["m_max"],
                         offsets_mode=doc["offsets_mode"], fixed=fixed,
                         stabilization=doc.get("stabilization", "none"), patience=doc.get("patience"))
        spec.learners.update({k: v for k, v in learners.items()})
        history = [Step(int(i), int(k), int(j), float(r)) for i, k, j, r in doc["history"]]
        return cls(spec, np.asarray(offsets), coefs, states, int(doc["m_star"]), history,
                   [float(r) for r in doc["train_risk"]],
                   None if doc.get("val_risk") is None else [float(r) for r in doc["val_risk"]],
                   ranges)


def _spec_to_dict(spec: BaseLearnerSpec) -> dict[str, Any]:
    out = {"kind": spec.kind, "covariate": spec.covariate}
    if spec.df is not None:
        out["df"] = spec.df
    if spec.kind == "pspline":
        out.update(n_knots=spec.n_knots, degree=spec.degree, diff_order=spec.diff_order)
    if spec.kind == "mrf":
        out["adjacency"] = [list(e) for e in spec.adjacency]
    return out


def _spec_from_dict(doc: dict[str, Any]) -> BaseLearnerSpec:
    doc = dict(doc)
    if "adjacency" in doc:
        doc["adjacency"] = tuple(tuple(e) for e in doc["adjacency"])
    return BaseLearnerSpec(**doc)


def _nrows(data) -> int:
    if hasattr(data, "shape"):
        return int(data.shape[0])
    for v in data.values():
        return len(v)
    raise SchemaError("cannot infer the number of rows from empty data")


def selection_frequencies(history: Sequence[Step], spec: ModelSpec | None = None) -> dict:
    """Count how often each (parameter, learner) was chosen.

    Keys are name pairs when ``spec`` is given and index pairs otherwise.
    """
    counts = Counter((s.parameter, s.learner) for s in history)
    if spec is None:
        return dict(counts)
    names = spec.family.parameter_names
    return {(names[k], spec.learners[names[k]][j].name): c for (k, j), c in sorted(counts.items())}


def fit(spec: ModelSpec, responses, covariates, val_responses=None, val_covariates=None) -> FittedModel:
    """Boost for ``spec.m_max`` iterations and freeze the model at ``m_star``.

    With validation data ``m_star`` is the earliest minimiser of the
    validation risk (0 is the offset model); without, ``m_star = m_max``.
    If ``spec.patience`` is set the loop ends once the validation risk has
    not improved for that many iterations.
    """
    if (val_responses is None) != (val_covariates is None):
        raise SchemaError("validation responses and covariates must be given together")
    booster = Booster(spec, responses, covariates, val_responses, val_covariates)
    best_eta = booster.eta.copy()
    best_m, best_val = 0, booster.val_risk[0] if booster.val is not None else None
    for m in range(1, spec.m_max + 1):
        if not booster.step():
            logger.info("stopping at iteration %d: no candidate reduces the risk", m - 1)
            break
        if booster.val is not None:
            v = booster.val_risk[-1]
            if v < best_val:
                best_val, best_m = v, m
                best_eta = booster.eta.copy()
            elif spec.patience is not None and m - best_m >= spec.patience:
                break
    if booster.val is None:
        best_m = booster.iterations
        best_eta = booster.eta.copy()
    return _freeze(booster, best_m, best_eta)


def _freeze(booster: Booster, m_star: int, eta: np.ndarray) -> FittedModel:
    coefs = [[np.zeros(lr.n_coef) for lr in p.learners] for p in booster.params]
    for step, inc in zip(booster.history[:m_star], booster.increments[:m_star]):
        coefs[step.parameter][step.learner] = coefs[step.parameter][step.learner] + inc
    states = [[lr.state() for lr in p.learners] for p in booster.params]
    ranges = []
    for p in booster.params:
        row = []
        for lr in p.learners:
            if lr.spec.kind == "linear":
                x = lr.setup.design[:, 1] + lr.center
                row.append((float(x.min()), float(x.max())))
            elif lr.spec.kind == "pspline":
                d = lr.spec.degree
                row.append((float(lr.knots[d]), float(lr.knots[-d - 1])))
            else:
                row.append(None)
        ranges.append(row)
    return FittedModel(
        spec=booster.spec,
        offsets=booster.offsets.copy(),
        coefficients_=coefs,
        states=states,
        m_star=m_star,
        history=list(booster.history),
        train_risk=list(booster.train_risk),
        val_risk=list(booster.val_risk) if booster.val is not None else None,
        ranges=ranges,
        train_eta=eta,
    )


def predict(model: FittedModel, newdata) -> tuple[np.ndarray, np.ndarray]:
    return model.predict(newdata)


def coefficients(model: FittedModel) -> dict[str, dict[str, Any]]:
    return model.coefficients()
