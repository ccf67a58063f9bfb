"""Simulation scenarios with known truth.

Scenarios cover linear bivariate Bernoulli and Poisson models on Toeplitz
correlated normal covariates, a non-linear Poisson model and a Gaussian
model with linear, non-linear and spatial effects on a grid map.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .baselearners import BaseLearnerSpec
from .engine import ModelSpec
from .families import get_family


def toeplitz_mvn(n: int, p: int, rho: float = 0.5, seed=None) -> np.ndarray:
    """Draws from ``N(0, S)`` with ``S[i, j] = rho**|i - j|``.

    For this AR(1)-type covariance the Cholesky factor is known in closed
    form, so columns are generated recursively instead of factorising a
    ``p x p`` matrix.
    """
    if n < 1 or p < 1:
        raise ValueError("n and p must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    z = rng.standard_normal((n, p))
    x = np.empty_like(z)
    x[:, 0] = z[:, 0]
    scale = np.sqrt(1.0 - rho * rho)
    for j in range(1, p):
        x[:, j] = rho * x[:, j - 1] + scale * z[:, j]
    return x


def toeplitz_cov(p: int, rho: float = 0.5) -> np.ndarray:
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def spatial_map(grid_rows: int = 18, grid_cols: int = 18):
    """Rook-adjacency grid standing in for a map of regions.

    Returns region labels, the edge list and standardised centroids
    (each coordinate centred and scaled to unit variance).
    """
    if grid_rows < 1 or grid_cols < 1:
        raise ValueError("grid dimensions must be positive")
    labels = [str(r * grid_cols + c) for r in range(grid_rows) for c in range(grid_cols)]
    edges = []
    for r in range(grid_rows):
        for c in range(grid_cols):
            i = r * grid_cols + c
            if c + 1 < grid_cols:
                edges.append((str(i), str(i + 1)))
            if r + 1 < grid_rows:
                edges.append((str(i), str(i + grid_cols)))
    xy = np.array([(c, r) for r in range(grid_rows) for c in range(grid_cols)], dtype=float)
    sd = xy.std(axis=0)
    centroids = (xy - xy.mean(axis=0)) / np.where(sd > 0, sd, 1.0)
    return labels, edges, centroids


def f_spat(centroids: np.ndarray) -> np.ndarray:
    return np.sin(centroids[:, 0]) * np.cos(0.5 * centroids[:, 1])


# --------------------------------------------------------------------------- #
# True predictors
# --------------------------------------------------------------------------- #


def _lin(coefs: dict[int, float], intercept: float = 0.0) -> Callable:
    def f(x, region_effect=None):
        out = np.full(len(x), intercept)
        for j, b in coefs.items():
            out = out + b * x[:, j - 1]
        return out
    f.terms = {f"X{j}": b for j, b in coefs.items()}
    f.intercept = intercept
    return f


def _bern_truth():
    return {
        "p1": _lin({1: 1.0, 2: 1.5, 3: -1.0, 4: 1.5}),
        "p2": _lin({1: 2.0, 2: -1.0, 3: 1.5}),
        "psi": _lin({5: 1.0, 6: 1.5}, intercept=-1.5),
    }


def _pois_lin_truth():
    return {
        "lambda1": _lin({1: -1.0, 2: 0.5, 3: 1.5}),
        "lambda2": _lin({1: 2.0, 3: -1.0, 4: 1.5, 5: 1.0}),
        "lambda3": _lin({5: 0.5, 6: 1.0, 7: -0.5}),
    }


def _fn(func, terms):
    func.terms = terms
    func.intercept = 0.0
    return func


def _pois_nonlin_truth():
    return {
        "lambda1": _fn(lambda x, s=None: np.sqrt(x[:, 0]) * x[:, 0], {"X1": "sqrt(x) * x"}),
        "lambda2": _fn(lambda x, s=None: np.cos(2 * x[:, 1]), {"X2": "cos(2x)"}),
        "lambda3": _fn(lambda x, s=None: np.sin(x[:, 2]), {"X3": "sin(x)"}),
    }


def _gauss_truth():
    return {
        "mu1": _fn(lambda x, s: np.sin(2 * x[:, 0]) / 0.5 + x[:, 5] + 0.5 * x[:, 6] + s,
                   {"X1": "sin(2x) / 0.5", "X6": 1.0, "X7": 0.5, "region": "f_spat"}),
        "mu2": _fn(lambda x, s: 2 + 3 * np.cos(2 * x[:, 1]) + 0.5 * x[:, 6] + x[:, 7] + s,
                   {"X2": "3 cos(2x)", "X7": 0.5, "X8": 1.0, "region": "f_spat"}),
        "sigma1": _fn(lambda x, s: np.sqrt(x[:, 2]) * x[:, 2] - 0.5 * x[:, 7] + s,
                      {"X3": "sqrt(x) * x", "X8": -0.5, "region": "f_spat"}),
        "sigma2": _fn(lambda x, s: np.cos(x[:, 3]) * x[:, 3] + 0.25 * x[:, 8] + s,
                      {"X4": "cos(x) * x", "X9": 0.25, "region": "f_spat"}),
        "rho": _fn(lambda x, s: np.log(x[:, 4] ** 2) + x[:, 9] + s,
                   {"X5": "log(x^2)", "X10": 1.0, "region": "f_spat"}),
    }


_SCENARIOS: dict[str, dict[str, Any]] = {
    "bern_linear_low": {"family": "bernoulli2", "p": 10, "design": "toeplitz", "truth": _bern_truth},
    "bern_linear_high": {"family": "bernoulli2", "p": 1000, "design": "toeplitz", "truth": _bern_truth},
    "pois_linear": {"family": "poisson2", "p": 10, "design": "toeplitz", "truth": _pois_lin_truth},
    "pois_linear_high": {"family": "poisson2", "p": 1000, "design": "toeplitz", "truth": _pois_lin_truth},
    "pois_nonlinear": {"family": "poisson2", "p": 10, "design": "uniform", "truth": _pois_nonlin_truth},
    "pois_nonlinear_high": {"family": "poisson2", "p": 1000, "design": "uniform", "truth": _pois_nonlin_truth},
    "gauss_spatial": {"family": "gaussian2", "p": 10, "design": "uniform", "truth": _gauss_truth},
    "gauss_spatial_high": {"family": "gaussian2", "p": 1000, "design": "uniform", "truth": _gauss_truth},
}

SCENARIO_IDS = tuple(_SCENARIOS)
FAST_HIGH_P = 200


@dataclass(frozen=True)
class ScenarioSpec:
    scenario_id: str
    n_train: int = 1000
    n_val: int = 1500
    n_test: int = 1000
    p: int | None = None
    seed: int = 0
    grid: tuple[int, int] = (18, 18)
    rho_x: float = 0.5

    def __post_init__(self):
        if self.scenario_id not in _SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario_id!r}; choose from {SCENARIO_IDS}")
        if min(self.n_train, self.n_val, self.n_test) < 1:
            raise ValueError("sample sizes must be positive")
        if self.dim < 10:
            raise ValueError("scenarios use at least 10 covariates")

    @property
    def dim(self) -> int:
        return int(self.p if self.p is not None else _SCENARIOS[self.scenario_id]["p"])

    @property
    def family(self):
        return get_family(_SCENARIOS[self.scenario_id]["family"])

    @property
    def spatial(self) -> bool:
        return self.scenario_id.startswith("gauss_spatial")


@dataclass
class SimulatedDataset:
    covariates: dict[str, np.ndarray]
    responses: np.ndarray
    theta: np.ndarray
    eta: np.ndarray

    def __len__(self):
        return len(self.responses)


@dataclass
class Truth:
    """Informative covariates per parameter and their effects (a number
    for linear terms, a formula string otherwise)."""

    effects: dict[str, dict[str, Any]]
    intercepts: dict[str, float]

    def informative(self, parameter: str) -> set[str]:
        return set(self.effects[parameter])


@dataclass
class SimulatedScenario:
    spec: ScenarioSpec
    train: SimulatedDataset
    val: SimulatedDataset
    test: SimulatedDataset
    truth: Truth
    covariate_names: list[str]
    adjacency: list[tuple[str, str]] | None = None
    centroids: np.ndarray | None = None
    region_labels: list[str] | None = None
    extra: dict[str, Any] = field(default_factory=dict)


def true_eta(spec: ScenarioSpec, x: np.ndarray, spatial_effect: np.ndarray | None = None) -> np.ndarray:
    """True predictor matrix for covariate rows ``x``."""
    truth = _SCENARIOS[spec.scenario_id]["truth"]()
    fam = spec.family
    s = spatial_effect if spatial_effect is not None else np.zeros(len(x))
    return np.column_stack([truth[name](x, s) for name in fam.parameter_names])


def make_scenario(spec: ScenarioSpec) -> SimulatedScenario:
    """Draw train, validation and test sets from one seeded stream."""
    conf = _SCENARIOS[spec.scenario_id]
    fam = spec.family
    rng = np.random.default_rng(spec.seed)
    p = spec.dim
    names = [f"X{j}" for j in range(1, p + 1)]
    labels = edges = centroids = None
    if spec.spatial:
        labels, edges, centroids = spatial_map(*spec.grid)
        field_values = f_spat(centroids)

    def draw(n):
        if conf["design"] == "toeplitz":
            x = toeplitz_mvn(n, p, spec.rho_x, rng)
        else:
            x = rng.uniform(size=(n, p))
        cov = {name: x[:, j] for j, name in enumerate(names)}
        s = None
        if spec.spatial:
            region = rng.integers(0, len(labels), size=n)
            cov["region"] = np.array(labels, dtype=object)[region]
            s = field_values[region]
        eta = true_eta(spec, x, s)
        theta = fam.inverse_link(eta, strict=False)
        y = fam.sample(theta, rng)
        return SimulatedDataset(cov, y, theta, eta)

    train, val, test = draw(spec.n_train), draw(spec.n_val), draw(spec.n_test)
    truth_fns = conf["truth"]()
    truth = Truth({k: dict(f.terms) for k, f in truth_fns.items()},
                  {k: float(f.intercept) for k, f in truth_fns.items()})
    extra = {}
    if spec.spatial:
        extra["f_spat"] = field_values
    return SimulatedScenario(spec, train, val, test, truth,
                             names + (["region"] if spec.spatial else []),
                             edges, centroids, labels, extra)


def default_model_spec(scenario: SimulatedScenario, nu: float = 0.1, m_max: int = 10000,
                       stabilization: str = "fisher", patience: int | None = 1000,
                       **kwargs) -> ModelSpec:
    """Learner layout used for each scenario.

    Linear settings get one linear learner per covariate and parameter. The
    non-linear Poisson setting uses P-splines throughout. The Gaussian
    setting uses P-splines for X1-X5, linear learners for the remaining
    covariates and an MRF learner for the region, for every parameter.

    Gradients are scaled by the mean Fisher information by default: with
    raw gradients the Poisson settings overshoot on rows with large counts
    and never converge at ``nu = 0.1``.
    """
    spec = scenario.spec
    fam = spec.family
    names = [n for n in scenario.covariate_names if n != "region"]
    sid = spec.scenario_id
    if sid.startswith(("bern_linear", "pois_linear")):
        layout = [BaseLearnerSpec("linear", n) for n in names]
    elif sid.startswith("pois_nonlinear"):
        layout = [BaseLearnerSpec("pspline", n) for n in names]
    else:
        layout = [BaseLearnerSpec("pspline" if j < 5 else "linear", n) for j, n in enumerate(names)]
        layout.append(BaseLearnerSpec("mrf", "region", adjacency=tuple(scenario.adjacency)))
    return ModelSpec(fam, {k: list(layout) for k in fam.parameter_names}, nu=nu, m_max=m_max,
                     stabilization=stabilization, patience=patience, **kwargs)
