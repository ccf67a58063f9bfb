"""Bivariate response families.

Each family maps a row of additive predictors ``eta`` (one column per
distribution parameter) to distribution parameters through its inverse
links, evaluates the joint log-density and returns the gradient of the
log-density with respect to the predictors (not the parameters).

Parameter order is fixed per family:

* ``bernoulli2``: ``(p1, p2, psi)``  logit, logit, log
* ``poisson2``:   ``(lambda1, lambda2, lambda3)``  log, log, log
* ``gaussian2``:  ``(mu1, mu2, sigma1, sigma2, rho)``  identity, identity,
  log, log and ``rho / sqrt(1 - rho**2)``
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, ClassVar

import numpy as np
from scipy.special import expit, gammaln, logit

SATURATION = 700.0
CELL_FLOOR = 1e-12
RHO_MAX = 1.0 - 1e-10
# eta_rho such that |rho| == RHO_MAX
RHO_ETA_CAP = RHO_MAX / np.sqrt((1.0 - RHO_MAX) * (1.0 + RHO_MAX))

LOG_2PI = np.log(2.0 * np.pi)


class SaturationError(ValueError):
    """A predictor left the range where the inverse link is representable."""


class ResponseError(ValueError):
    """Response values outside the support of the family."""


# --------------------------------------------------------------------------- #
# Parameter records
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class BivariateBinaryParams:
    p1: Any
    p2: Any
    psi: Any

    def __post_init__(self):
        p1, p2, psi = (np.asarray(v, dtype=float) for v in (self.p1, self.p2, self.psi))
        if np.any((p1 <= 0) | (p1 >= 1)) or np.any((p2 <= 0) | (p2 >= 1)):
            raise ValueError("marginal probabilities must lie in (0, 1)")
        if np.any(psi <= 0):
            raise ValueError("odds ratio psi must be positive")


@dataclass(frozen=True)
class CellProbabilities:
    p00: Any
    p01: Any
    p10: Any
    p11: Any
    clamped: Any = False

    def as_array(self) -> np.ndarray:
        """Cells stacked on the last axis in the order p00, p01, p10, p11."""
        return np.stack(np.broadcast_arrays(self.p00, self.p01, self.p10, self.p11), axis=-1)


@dataclass(frozen=True)
class BivariatePoissonParams:
    lambda1: Any
    lambda2: Any
    lambda3: Any

    def __post_init__(self):
        l1, l2, l3 = (np.asarray(v, dtype=float) for v in (self.lambda1, self.lambda2, self.lambda3))
        if np.any(l1 <= 0) or np.any(l2 <= 0):
            raise ValueError("lambda1 and lambda2 must be positive")
        if np.any(l3 < 0):
            raise ValueError("lambda3 must be non-negative")


@dataclass(frozen=True)
class BivariateGaussianParams:
    mu1: Any
    mu2: Any
    sigma1: Any
    sigma2: Any
    rho: Any

    def __post_init__(self):
        s1, s2, rho = (np.asarray(v, dtype=float) for v in (self.sigma1, self.sigma2, self.rho))
        if np.any(s1 <= 0) or np.any(s2 <= 0):
            raise ValueError("standard deviations must be positive")
        if np.any(np.abs(rho) >= 1):
            raise ValueError("correlation must lie in (-1, 1)")


# --------------------------------------------------------------------------- #
# Bivariate Bernoulli
# --------------------------------------------------------------------------- #


def _joint_p11(p1, p2, psi):
    # Dale's root of the odds-ratio quadratic. For a >= 0 the rationalised
    # form 2*psi*p1*p2 / (a + sqrt(a^2 + b)) is used: it has no 0/0 at
    # psi == 1 and returns p1*p2 exactly there. For a < 0 (only possible
    # when psi < 1) the textbook form has no cancellation.
    pm1 = psi - 1.0
    a = 1.0 + (p1 + p2) * pm1
    b = -4.0 * psi * pm1 * p1 * p2
    root = np.sqrt(np.maximum(a * a + b, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        rational = 2.0 * psi * p1 * p2 / (a + root)
        direct = (a - root) / (2.0 * pm1)
    return np.where(a >= 0, rational, direct)


def _raw_cells(p1, p2, psi):
    p11 = _joint_p11(p1, p2, psi)
    p10 = p1 - p11
    p01 = p2 - p11
    p00 = 1.0 - p1 - p2 + p11
    return p00, p01, p10, p11


def _clamp_cells(cells):
    stacked = np.stack(np.broadcast_arrays(*cells), axis=-1)
    low = stacked < CELL_FLOOR
    clamped = low.any(axis=-1)
    if np.any(clamped):
        stacked = np.where(low, CELL_FLOOR, stacked)
        stacked = np.where(clamped[..., None], stacked / stacked.sum(axis=-1, keepdims=True), stacked)
    return stacked, clamped


def cell_probs(params: BivariateBinaryParams) -> CellProbabilities:
    """Joint cell probabilities of a bivariate Bernoulli law.

    Cells below ``CELL_FLOOR`` are clamped and the table renormalised; the
    ``clamped`` field flags the affected entries.
    """
    p1, p2, psi = (np.asarray(v, dtype=float) for v in (params.p1, params.p2, params.psi))
    stacked, clamped = _clamp_cells(_raw_cells(p1, p2, psi))
    p00, p01, p10, p11 = np.moveaxis(stacked, -1, 0)
    if p00.ndim == 0:
        return CellProbabilities(float(p00), float(p01), float(p10), float(p11), bool(clamped))
    return CellProbabilities(p00, p01, p10, p11, clamped)


def _binary_index(y) -> np.ndarray:
    y = np.asarray(y)
    if y.shape[-1] != 2:
        raise ResponseError("bivariate responses need two columns")
    if not np.all((y == 0) | (y == 1)):
        raise ResponseError("binary responses must be 0 or 1")
    y = y.astype(np.int64)
    # column in the (p00, p01, p10, p11) layout
    return 2 * y[..., 0] + y[..., 1]


def bernoulli_logpmf(y, params: BivariateBinaryParams):
    """Log joint probability of ``y = (y1, y2)`` under ``params``."""
    idx = _binary_index(y)
    cells = cell_probs(params).as_array()
    out = np.log(np.take_along_axis(cells, np.asarray(idx)[..., None], axis=-1)[..., 0])
    return float(out) if out.ndim == 0 else out


def _bernoulli_loglik(idx, eta):
    p1 = expit(eta[:, 0])
    p2 = expit(eta[:, 1])
    psi = np.exp(eta[:, 2])
    stacked, _ = _clamp_cells(_raw_cells(p1, p2, psi))
    return np.log(stacked[np.arange(len(idx)), idx])


def _bernoulli_gradient(idx, eta):
    p1 = expit(eta[:, 0])
    p2 = expit(eta[:, 1])
    psi = np.exp(eta[:, 2])
    p00, p01, p10, p11 = _raw_cells(p1, p2, psi)
    stacked, _ = _clamp_cells((p00, p01, p10, p11))
    # implicit differentiation of p00*p11 - psi*p01*p10 = 0 in p11
    denom = p00 + p11 + psi * (p01 + p10)
    g1 = (p11 + psi * p01) / denom
    g2 = (p11 + psi * p10) / denom
    gpsi = p01 * p10 / denom
    # d cell / d (p1, p2, psi), rows in (p00, p01, p10, p11) order
    d1 = np.stack([g1 - 1.0, -g1, 1.0 - g1, g1], axis=-1)
    d2 = np.stack([g2 - 1.0, 1.0 - g2, -g2, g2], axis=-1)
    dpsi = np.stack([gpsi, -gpsi, -gpsi, gpsi], axis=-1)
    rows = np.arange(len(idx))
    cell = stacked[rows, idx]
    out = np.empty((len(idx), 3))
    out[:, 0] = d1[rows, idx] * p1 * (1.0 - p1) / cell
    out[:, 1] = d2[rows, idx] * p2 * (1.0 - p2) / cell
    out[:, 2] = dpsi[rows, idx] * psi / cell
    return out


def bernoulli_grad(y, eta) -> np.ndarray:
    """Gradient of the bivariate Bernoulli log-pmf with respect to
    ``(eta_p1, eta_p2, eta_psi)``."""
    eta = np.atleast_2d(np.asarray(eta, dtype=float))
    idx = np.atleast_1d(_binary_index(y))
    _check_saturation(eta, (0, 1, 2))
    out = _bernoulli_gradient(idx, eta)
    return out[0] if np.ndim(y) == 1 else out


# --------------------------------------------------------------------------- #
# Bivariate Poisson
# --------------------------------------------------------------------------- #


def _count_pairs(y) -> np.ndarray:
    y = np.asarray(y)
    if y.shape[-1] != 2:
        raise ResponseError("bivariate responses need two columns")
    yf = y.astype(float)
    if not np.all(np.isfinite(yf)) or np.any(yf < 0) or np.any(yf != np.floor(yf)):
        raise ResponseError("Poisson responses must be non-negative integers")
    return yf.astype(np.int64)


class _PoissonTerms:
    """Per-row sums over the shared component k = 0..min(y1, y2).

    The (row, k) pairs are stored flat so that rows with large counts do not
    inflate the work for every other row.
    """

    def __init__(self, y: np.ndarray):
        y = np.atleast_2d(_count_pairs(y))
        self.y1 = y[:, 0]
        self.y2 = y[:, 1]
        m = np.minimum(self.y1, self.y2)
        sizes = m + 1
        self.starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
        self.rows = np.repeat(np.arange(len(m)), sizes)
        self.k = np.arange(sizes.sum()) - np.repeat(self.starts, sizes)
        k = self.k.astype(float)
        y1 = self.y1[self.rows].astype(float)
        y2 = self.y2[self.rows].astype(float)
        # log C(y1,k) + log C(y2,k) + log k!
        self.const = (
            gammaln(y1 + 1) - gammaln(y1 - k + 1)
            + gammaln(y2 + 1) - gammaln(y2 - k + 1)
            - gammaln(k + 1)
        )
        self.kf = k
        self.k_positive = self.k > 0
        self.base = -gammaln(self.y1 + 1.0) - gammaln(self.y2 + 1.0)

    def __len__(self):
        return len(self.y1)

    def log_sum(self, log_ratio: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return ``log sum_k w_k`` and ``E_w[k]`` per row, where
        ``w_k = exp(const_k + k * log_ratio)``."""
        slope = log_ratio[self.rows]
        t = self.const + np.where(self.k_positive, self.kf * np.where(self.k_positive, slope, 0.0), 0.0)
        mx = np.maximum.reduceat(t, self.starts)
        e = np.exp(t - mx[self.rows])
        s = np.add.reduceat(e, self.starts)
        ek = np.add.reduceat(self.kf * e, self.starts) / s
        return mx + np.log(s), ek


def _poisson_loglik(terms: _PoissonTerms, eta):
    lam = np.exp(eta)
    lse, _ = terms.log_sum(eta[:, 2] - eta[:, 0] - eta[:, 1])
    with np.errstate(invalid="ignore"):
        lin = np.where(terms.y1 > 0, terms.y1 * eta[:, 0], 0.0) + np.where(terms.y2 > 0, terms.y2 * eta[:, 1], 0.0)
    return -lam.sum(axis=1) + lin + terms.base + lse


def _poisson_gradient(terms: _PoissonTerms, eta):
    lam = np.exp(eta)
    _, ek = terms.log_sum(eta[:, 2] - eta[:, 0] - eta[:, 1])
    out = np.empty_like(eta)
    out[:, 0] = terms.y1 - lam[:, 0] - ek
    out[:, 1] = terms.y2 - lam[:, 1] - ek
    out[:, 2] = ek - lam[:, 2]
    return out


def poisson_logpmf(y, params: BivariatePoissonParams):
    """Log joint pmf of the trivariate-reduction bivariate Poisson law."""
    y = np.asarray(y)
    terms = _PoissonTerms(y)
    l1, l2, l3 = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (params.lambda1, params.lambda2, params.lambda3))
    )
    n = len(terms)
    with np.errstate(divide="ignore"):
        eta = np.column_stack([np.broadcast_to(np.log(v), (n,)) if np.ndim(v) == 0 else np.log(v)
                               for v in (l1, l2, l3)])
    out = _poisson_loglik(terms, eta)
    return float(out[0]) if y.ndim == 1 else out


def poisson_grad(y, eta) -> np.ndarray:
    """Gradient of the bivariate Poisson log-pmf with respect to
    ``(eta_lambda1, eta_lambda2, eta_lambda3)``."""
    y = np.asarray(y)
    eta = np.atleast_2d(np.asarray(eta, dtype=float))
    _check_saturation(eta, (0, 1, 2), allow_neg_inf=(2,))
    out = _poisson_gradient(_PoissonTerms(y), eta)
    return out[0] if y.ndim == 1 else out


# --------------------------------------------------------------------------- #
# Bivariate Gaussian
# --------------------------------------------------------------------------- #


def _rho_from_eta(eta_rho):
    e = np.clip(eta_rho, -RHO_ETA_CAP, RHO_ETA_CAP)
    return e / np.sqrt(1.0 + e * e)


def _gaussian_parts(y, eta):
    s1 = np.exp(eta[:, 2])
    s2 = np.exp(eta[:, 3])
    rho = _rho_from_eta(eta[:, 4])
    z1 = (y[:, 0] - eta[:, 0]) / s1
    z2 = (y[:, 1] - eta[:, 1]) / s2
    omr = (1.0 - rho) * (1.0 + rho)
    return s1, s2, rho, z1, z2, omr


def _gaussian_loglik(y, eta):
    s1, s2, rho, z1, z2, omr = _gaussian_parts(y, eta)
    q = (z1 * z1 - 2.0 * rho * z1 * z2 + z2 * z2) / omr
    return -LOG_2PI - eta[:, 2] - eta[:, 3] - 0.5 * np.log(omr) - 0.5 * q


def _gaussian_gradient(y, eta):
    s1, s2, rho, z1, z2, omr = _gaussian_parts(y, eta)
    q = (z1 * z1 - 2.0 * rho * z1 * z2 + z2 * z2) / omr
    out = np.empty((len(y), 5))
    out[:, 0] = (z1 - rho * z2) / (s1 * omr)
    out[:, 1] = (z2 - rho * z1) / (s2 * omr)
    out[:, 2] = (z1 * z1 - rho * z1 * z2) / omr - 1.0
    out[:, 3] = (z2 * z2 - rho * z1 * z2) / omr - 1.0
    dl_drho = (rho + z1 * z2 - rho * q) / omr
    drho_deta = omr * np.sqrt(omr)
    # beyond the cap rho no longer moves with eta
    inside = np.abs(eta[:, 4]) < RHO_ETA_CAP
    out[:, 4] = np.where(inside, dl_drho * drho_deta, 0.0)
    return out


def _as_rows(y):
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != 2:
        raise ResponseError("bivariate responses need two columns")
    if not np.all(np.isfinite(y)):
        raise ResponseError("Gaussian responses must be finite")
    return np.atleast_2d(y)


def gaussian_logpdf(y, params: BivariateGaussianParams):
    """Bivariate normal log-density."""
    y_arr = np.asarray(y, dtype=float)
    rows = _as_rows(y_arr)
    mu1, mu2, s1, s2, rho = np.broadcast_arrays(
        *(np.atleast_1d(np.asarray(v, dtype=float)) for v in
          (params.mu1, params.mu2, params.sigma1, params.sigma2, params.rho))
    )
    eta = np.column_stack([mu1, mu2, np.log(s1), np.log(s2), rho / np.sqrt((1 - rho) * (1 + rho))])
    eta = np.broadcast_to(eta, (len(rows), 5))
    out = _gaussian_loglik(rows, eta)
    return float(out[0]) if y_arr.ndim == 1 else out


def gaussian_grad(y, eta) -> np.ndarray:
    """Gradient of the bivariate normal log-density with respect to
    ``(eta_mu1, eta_mu2, eta_sigma1, eta_sigma2, eta_rho)``."""
    y_arr = np.asarray(y, dtype=float)
    eta = np.atleast_2d(np.asarray(eta, dtype=float))
    _check_saturation(eta, (2, 3))
    out = _gaussian_gradient(_as_rows(y_arr), eta)
    return out[0] if y_arr.ndim == 1 else out


# --------------------------------------------------------------------------- #
# Family objects
# --------------------------------------------------------------------------- #


def _check_saturation(eta, columns, bound=SATURATION, allow_neg_inf=()):
    eta = np.asarray(eta)
    cols = eta[..., list(columns)]
    ok = np.isfinite(cols)
    for j, c in enumerate(columns):
        if c in allow_neg_inf:
            ok[..., j] |= cols[..., j] == -np.inf
    if not np.all(ok):
        raise SaturationError("predictor contains non-finite values")
    if np.any(np.abs(cols[np.isfinite(cols)]) > bound):
        raise SaturationError(f"|eta| exceeds the saturation bound {bound:g}")


@dataclass(frozen=True)
class Family:
    """A bivariate response family.

    Subclasses provide the link functions, the log-density and its
    predictor-space gradient for prepared responses.
    """

    family_id: ClassVar[str]
    parameter_names: ClassVar[tuple[str, ...]]
    links: ClassVar[tuple[str, ...]]
    # predictor value that switches the association parameter off
    independence: ClassVar[dict[str, float]]
    # columns whose parameter may sit on the boundary (eta == -inf)
    boundary_columns: ClassVar[tuple[int, ...]] = ()
    saturation: float = field(default=SATURATION)

    @property
    def K(self) -> int:
        return len(self.parameter_names)

    def index(self, name: str) -> int:
        try:
            return self.parameter_names.index(name)
        except ValueError:
            raise KeyError(f"{self.family_id} has no parameter {name!r}; "
                           f"expected one of {self.parameter_names}") from None

    def _saturating_columns(self):
        return [k for k, link in enumerate(self.links) if link in ("log", "logit")]

    def clip(self, eta: np.ndarray) -> np.ndarray:
        """Clamp predictors into the representable range of the links."""
        eta = np.array(eta, dtype=float)
        cols = self._saturating_columns()
        boundary = eta[:, list(self.boundary_columns)] == -np.inf
        eta[:, cols] = np.clip(eta[:, cols], -self.saturation, self.saturation)
        # the boundary value itself is representable and stays
        eta[:, list(self.boundary_columns)] = np.where(boundary, -np.inf, eta[:, list(self.boundary_columns)])
        return eta

    def inverse_link(self, eta, strict: bool = True) -> np.ndarray:
        eta = np.atleast_2d(np.asarray(eta, dtype=float))
        if strict:
            _check_saturation(eta, self._saturating_columns(), self.saturation, self.boundary_columns)
        out = np.empty_like(eta)
        for k, link in enumerate(self.links):
            col = eta[:, k]
            if link == "identity":
                out[:, k] = col
            elif link == "log":
                out[:, k] = np.exp(col)
            elif link == "logit":
                out[:, k] = expit(col)
            elif link == "rho":
                out[:, k] = _rho_from_eta(col)
        return out

    def link(self, theta) -> np.ndarray:
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        out = np.empty_like(theta)
        for k, link in enumerate(self.links):
            col = theta[:, k]
            with np.errstate(divide="ignore"):
                if link == "identity":
                    out[:, k] = col
                elif link == "log":
                    out[:, k] = np.log(col)
                elif link == "logit":
                    out[:, k] = logit(col)
                elif link == "rho":
                    out[:, k] = col / np.sqrt((1.0 - col) * (1.0 + col))
        return out

    # subclasses implement these four
    def prepare(self, y):
        raise NotImplementedError

    def loglik(self, data, eta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, data, eta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sample(self, theta: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def mean(self, theta: np.ndarray) -> np.ndarray:
        """Marginal means of (Y1, Y2) for each parameter row."""
        raise NotImplementedError

    def information(self, eta: np.ndarray) -> np.ndarray:
        """Per-row diagonal of the expected Fisher information with respect
        to the predictors (n x K)."""
        raise NotImplementedError

    def offset_floor(self, y: np.ndarray) -> np.ndarray:
        """Lowest admissible intercept-only predictor per parameter."""
        return np.full(self.K, -np.inf)

    def start_eta(self, y: np.ndarray) -> np.ndarray:
        """Moment-based starting predictors for the intercept-only model."""
        raise NotImplementedError

    def negloglik(self, y, eta) -> float:
        """Summed negative log-likelihood; the boosting risk."""
        data = self.prepare(y)
        eta = np.atleast_2d(np.asarray(eta, dtype=float))
        if eta.shape != (len(data), self.K):
            raise ValueError(f"eta has shape {eta.shape}, expected {(len(data), self.K)}")
        _check_saturation(eta, self._saturating_columns(), self.saturation, self.boundary_columns)
        ll = self.loglik(data, eta)
        bad = ~np.isfinite(ll)
        if np.any(bad):
            raise FloatingPointError(f"non-finite log-likelihood in row {int(np.argmax(bad))}")
        return float(-ll.sum())

    def params_record(self, theta_row):
        raise NotImplementedError


@dataclass
class _Binary:
    idx: np.ndarray
    y: np.ndarray

    def __len__(self):
        return len(self.idx)


@dataclass(frozen=True)
class Bernoulli2(Family):
    family_id: ClassVar[str] = "bernoulli2"
    parameter_names: ClassVar[tuple[str, ...]] = ("p1", "p2", "psi")
    links: ClassVar[tuple[str, ...]] = ("logit", "logit", "log")
    independence: ClassVar[dict[str, float]] = {"psi": 0.0}

    def prepare(self, y):
        if isinstance(y, _Binary):
            return y
        y = np.atleast_2d(np.asarray(y))
        return _Binary(_binary_index(y), y.astype(float))

    def loglik(self, data, eta):
        return _bernoulli_loglik(self.prepare(data).idx, eta)

    def gradient(self, data, eta):
        return _bernoulli_gradient(self.prepare(data).idx, eta)

    def mean(self, theta):
        return np.asarray(theta)[:, :2].copy()

    def information(self, eta):
        eta = np.atleast_2d(eta)
        p1, p2, psi = expit(eta[:, 0]), expit(eta[:, 1]), np.exp(eta[:, 2])
        cells, _ = _clamp_cells(_raw_cells(p1, p2, psi))
        out = np.zeros_like(eta)
        for c in range(4):
            g = _bernoulli_gradient(np.full(len(eta), c), eta)
            out += cells[:, c:c + 1] * g * g
        return out

    def sample(self, theta, rng):
        theta = np.atleast_2d(theta)
        stacked, _ = _clamp_cells(_raw_cells(theta[:, 0], theta[:, 1], theta[:, 2]))
        cum = np.cumsum(stacked, axis=1)
        u = rng.random(len(theta))[:, None]
        cell = np.minimum((u > cum[:, :3]).sum(axis=1), 3)
        return np.column_stack([cell // 2, cell % 2]).astype(float)

    def start_eta(self, y):
        y = np.asarray(y)
        counts = np.bincount(_binary_index(y), minlength=4) + 0.5
        p1 = (counts[2] + counts[3]) / counts.sum()
        p2 = (counts[1] + counts[3]) / counts.sum()
        psi = counts[0] * counts[3] / (counts[1] * counts[2])
        return np.array([logit(p1), logit(p2), np.log(psi)])

    def params_record(self, theta_row):
        return BivariateBinaryParams(*map(float, theta_row))


@dataclass(frozen=True)
class Poisson2(Family):
    family_id: ClassVar[str] = "poisson2"
    parameter_names: ClassVar[tuple[str, ...]] = ("lambda1", "lambda2", "lambda3")
    links: ClassVar[tuple[str, ...]] = ("log", "log", "log")
    # lambda3 == 0 reduces the law to two independent Poissons
    independence: ClassVar[dict[str, float]] = {"lambda3": -np.inf}
    boundary_columns: ClassVar[tuple[int, ...]] = (2,)

    def prepare(self, y):
        if isinstance(y, _PoissonTerms):
            return y
        return _PoissonTerms(y)

    def loglik(self, data, eta):
        return _poisson_loglik(self.prepare(data), eta)

    def gradient(self, data, eta):
        return _poisson_gradient(self.prepare(data), eta)

    def mean(self, theta):
        theta = np.asarray(theta)
        return np.column_stack([theta[:, 0] + theta[:, 2], theta[:, 1] + theta[:, 2]])

    def information(self, eta):
        # complete-data information of the three latent Poisson components;
        # an upper bound of the observed-data information
        return np.exp(np.atleast_2d(eta))

    def sample(self, theta, rng):
        theta = np.atleast_2d(theta)
        z = rng.poisson(theta)
        return np.column_stack([z[:, 0] + z[:, 2], z[:, 1] + z[:, 2]]).astype(float)

    def start_eta(self, y):
        y = np.asarray(y, dtype=float)
        m1, m2 = y.mean(axis=0)
        m1, m2 = max(m1, 1e-3), max(m2, 1e-3)
        cov = np.cov(y[:, 0], y[:, 1])[0, 1] if len(y) > 1 else 0.0
        lam3 = float(np.clip(cov, 0.05 * min(m1, m2), 0.5 * min(m1, m2)))
        return np.log([m1 - lam3, m2 - lam3, lam3])

    def offset_floor(self, y):
        # lambda3 at least 5% of the smaller marginal mean
        y = np.asarray(y, dtype=float)
        m = max(float(y.mean(axis=0).min()), 1e-3)
        return np.array([-np.inf, -np.inf, np.log(0.05 * m)])

    def params_record(self, theta_row):
        return BivariatePoissonParams(*map(float, theta_row))


@dataclass
class _Continuous:
    y: np.ndarray

    def __len__(self):
        return len(self.y)


@dataclass(frozen=True)
class Gaussian2(Family):
    family_id: ClassVar[str] = "gaussian2"
    parameter_names: ClassVar[tuple[str, ...]] = ("mu1", "mu2", "sigma1", "sigma2", "rho")
    links: ClassVar[tuple[str, ...]] = ("identity", "identity", "log", "log", "rho")
    independence: ClassVar[dict[str, float]] = {"rho": 0.0}

    def prepare(self, y):
        if isinstance(y, _Continuous):
            return y
        return _Continuous(_as_rows(y))

    def loglik(self, data, eta):
        return _gaussian_loglik(self.prepare(data).y, eta)

    def gradient(self, data, eta):
        return _gaussian_gradient(self.prepare(data).y, eta)

    def mean(self, theta):
        return np.asarray(theta)[:, :2].copy()

    def information(self, eta):
        eta = np.atleast_2d(eta)
        rho = _rho_from_eta(eta[:, 4])
        omr = (1.0 - rho) * (1.0 + rho)
        out = np.empty_like(eta)
        out[:, 0] = np.exp(-2.0 * eta[:, 2]) / omr
        out[:, 1] = np.exp(-2.0 * eta[:, 3]) / omr
        out[:, 2] = out[:, 3] = (2.0 - rho * rho) / omr
        inside = np.abs(eta[:, 4]) < RHO_ETA_CAP
        out[:, 4] = np.where(inside, (1.0 + rho * rho) * omr, 0.0)
        return out

    def sample(self, theta, rng):
        theta = np.atleast_2d(theta)
        z = rng.standard_normal((len(theta), 2))
        s1, s2, rho = theta[:, 2], theta[:, 3], theta[:, 4]
        # Cholesky factor of [[s1^2, rho s1 s2], [rho s1 s2, s2^2]]
        y1 = theta[:, 0] + s1 * z[:, 0]
        y2 = theta[:, 1] + s2 * (rho * z[:, 0] + np.sqrt((1 - rho) * (1 + rho)) * z[:, 1])
        return np.column_stack([y1, y2])

    def start_eta(self, y):
        y = _as_rows(y)
        mu = y.mean(axis=0)
        sd = y.std(axis=0)
        rho = np.corrcoef(y[:, 0], y[:, 1])[0, 1]
        rho = float(np.clip(rho, -0.99, 0.99))
        return np.array([mu[0], mu[1], np.log(sd[0]), np.log(sd[1]), rho / np.sqrt(1 - rho**2)])

    def params_record(self, theta_row):
        return BivariateGaussianParams(*map(float, theta_row))


FAMILIES: dict[str, type[Family]] = {
    cls.family_id: cls for cls in (Bernoulli2, Poisson2, Gaussian2)
}


def get_family(family_id: str | Family) -> Family:
    if isinstance(family_id, Family):
        return family_id
    try:
        return FAMILIES[family_id]()
    except KeyError:
        raise KeyError(f"unknown family {family_id!r}; choose from {sorted(FAMILIES)}") from None


def inverse_link(family: str | Family, eta):
    """Map a single predictor vector to the family's parameter record."""
    fam = get_family(family)
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (fam.K,):
        raise ValueError(f"{fam.family_id} needs {fam.K} predictors, got shape {eta.shape}")
    return fam.params_record(fam.inverse_link(eta[None, :])[0])


def negloglik(family: str | Family, responses, eta) -> float:
    """Summed negative log-likelihood over rows."""
    fam = get_family(family)
    responses = np.asarray(responses)
    eta = np.atleast_2d(np.asarray(eta, dtype=float))
    if len(responses) != len(eta):
        raise ValueError(f"{len(responses)} response rows but {len(eta)} predictor rows")
    return fam.negloglik(responses, eta)
