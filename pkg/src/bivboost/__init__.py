"""Boosting for bivariate distributional regression (GAMLSS).

Families: bivariate Bernoulli (Dale odds-ratio model), bivariate Poisson
(trivariate reduction) and bivariate Gaussian. Base-learners: linear,
P-spline and Markov random field.
"""

from .baselearners import BaseLearnerSpec
from .engine import FittedModel, ModelSpec, boost_step, coefficients, fit, init_offsets, predict
from .families import Bernoulli2, Gaussian2, Poisson2, get_family, inverse_link, negloglik
from .io import load_csv, load_model, parse_config, save_model
from .scoring import energy_score, score_report
from .simulate import ScenarioSpec, make_scenario

__version__ = "0.1.0"

__all__ = [
    "BaseLearnerSpec", "Bernoulli2", "FittedModel", "Gaussian2", "ModelSpec", "Poisson2",
    "ScenarioSpec", "boost_step", "coefficients", "energy_score", "fit", "get_family",
    "init_offsets", "inverse_link", "load_csv", "load_model", "make_scenario", "negloglik",
    "parse_config", "predict", "save_model", "score_report",
]
