"""Base-learners: linear, P-spline and Markov random field effects.

Every base-learner is a (penalised) least-squares smoother of the form
``fitted = Z (Z'Z + lam K)^{-1} Z' u``. Linear learners use the design
``[1, x - mean(x)]`` without penalty; P-splines use a cubic B-spline basis
on equidistant knots with a difference penalty; MRF learners use region
indicators penalised by the neighbourhood-graph Laplacian. Smoothing
parameters are calibrated so that the trace of the hat matrix equals a
requested number of degrees of freedom.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.interpolate import BSpline
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

KINDS = ("linear", "pspline", "mrf")
DEFAULT_DF = {"pspline": 4.0, "mrf": 6.0}
LOG_LAMBDA_RANGE = (-20.0, 20.0)


class CalibrationError(ValueError):
    """The requested degrees of freedom cannot be reached."""


class RegionError(KeyError):
    """A region label is not part of the neighbourhood graph."""


class ExtrapolationWarning(UserWarning):
    pass


class DisconnectedGraphWarning(UserWarning):
    pass


@dataclass(frozen=True)
class BaseLearnerSpec:
    """One candidate effect for one distribution parameter."""

    kind: str
    covariate: str
    df: float | None = None
    n_knots: int = 20
    degree: int = 3
    diff_order: int = 2
    adjacency: tuple[tuple[str, str], ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown base-learner kind {self.kind!r}; choose from {KINDS}")
        if self.kind == "pspline":
            if self.degree < 1:
                raise ValueError("spline degree must be >= 1")
            if self.n_knots < self.diff_order + 1:
                raise ValueError("n_knots must be at least diff_order + 1")
        if self.df is not None and self.df <= 0:
            raise ValueError("df must be positive")
        if self.kind == "mrf" and not self.adjacency:
            raise ValueError("an mrf learner needs an adjacency edge list")

    @property
    def name(self) -> str:
        return f"{self.kind}({self.covariate})"

    @property
    def target_df(self) -> float | None:
        if self.kind == "linear":
            return None
        return float(self.df if self.df is not None else DEFAULT_DF[self.kind])


@dataclass
class FitResult:
    coefficients: np.ndarray
    fitted: np.ndarray
    rss: float
    ridge: bool = False


@dataclass
class PenaltySetup:
    design: np.ndarray
    penalty: np.ndarray
    lam: float
    meta: dict[str, Any] = field(default_factory=dict)


# --------------------------------------------------------------------------- #
# P-spline pieces
# --------------------------------------------------------------------------- #


def spline_knots(lo: float, hi: float, n_knots: int = 20, degree: int = 3) -> np.ndarray:
    """Equidistant knots over ``[lo, hi]`` extended by ``degree`` knots on
    either side."""
    if not hi > lo:
        raise ValueError("degenerate covariate range: all values are equal")
    h = (hi - lo) / (n_knots - 1)
    t = lo + h * np.arange(-degree, n_knots + degree, dtype=float)
    t[degree] = lo
    t[degree + n_knots - 1] = hi
    return t


def bspline_basis(x, knots: np.ndarray, degree: int = 3, warn: bool = True) -> np.ndarray:
    """Evaluate the B-spline basis at ``x``; values outside the knot range are
    extended linearly from the boundary."""
    x = np.asarray(x, dtype=float)
    lo, hi = knots[degree], knots[-degree - 1]
    inside = (x >= lo) & (x <= hi)
    q = len(knots) - degree - 1
    out = np.empty((len(x), q))
    if np.all(inside):
        out[:] = BSpline.design_matrix(x, knots, degree).toarray()
        return out
    if warn:
        warnings.warn(f"{int((~inside).sum())} value(s) outside the training range "
                      f"[{lo:g}, {hi:g}] are extrapolated linearly", ExtrapolationWarning, stacklevel=2)
    if np.any(inside):
        out[inside] = BSpline.design_matrix(x[inside], knots, degree).toarray()
    eye = np.eye(q)
    for edge, mask in ((lo, x < lo), (hi, x > hi)):
        if not np.any(mask):
            continue
        value = BSpline(knots, eye, degree)(edge)
        slope = BSpline(knots, eye, degree).derivative()(edge)
        out[mask] = value[None, :] + (x[mask] - edge)[:, None] * slope[None, :]
    return out


def build_bspline_basis(x, n_knots: int = 20, degree: int = 3) -> tuple[np.ndarray, np.ndarray]:
    """B-spline design over the observed range of ``x``.

    Returns the ``n x (n_knots + degree - 1)`` design and the knot vector used
    to build it.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("covariate contains non-finite values")
    knots = spline_knots(float(x.min()), float(x.max()), n_knots, degree)
    return bspline_basis(x, knots, degree), knots


def difference_penalty(order: int, q: int) -> np.ndarray:
    """``D'D`` for the ``order``-th difference operator on ``q`` coefficients."""
    if q <= order:
        raise ValueError("need more coefficients than the difference order")
    d = np.diff(np.eye(q), n=order, axis=0)
    return d.T @ d


# --------------------------------------------------------------------------- #
# Degrees of freedom
# --------------------------------------------------------------------------- #


def hat_trace(design: np.ndarray, penalty: np.ndarray, lam: float) -> float:
    """Trace of ``Z (Z'Z + lam K)^{-1} Z'`` by a direct solve."""
    gram = design.T @ design
    return float(np.trace(np.linalg.solve(gram + lam * penalty, gram)))


def _df_spectrum(gram: np.ndarray, penalty: np.ndarray) -> np.ndarray:
    # generalised eigenvalues of gram v = g (gram + K) v; then
    # tr((gram + lam K)^{-1} gram) = sum g / (g + lam (1 - g))
    scale = np.trace(gram) / max(np.trace(penalty), 1e-300)
    total = gram + scale * penalty
    total = total + 1e-12 * np.trace(total) / len(total) * np.eye(len(total))
    g = sla.eigh(gram, total, eigvals_only=True)
    g = np.clip(g, 0.0, 1.0)
    return g, scale


def _df_at(g: np.ndarray, scale: float, lam: float) -> float:
    mu = lam / scale
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(g > 0, g / (g + mu * (1.0 - g)), 0.0)
    return float(terms.sum())


def calibrate_lambda(design: np.ndarray, penalty: np.ndarray, target_df: float,
                     max_iter: int = 200, tol: float = 1e-10) -> float:
    """Smoothing parameter whose hat-matrix trace equals ``target_df``.

    Bisection on ``log(lam)`` over ``LOG_LAMBDA_RANGE``.
    """
    gram = design.T @ design
    g, scale = _df_spectrum(gram, penalty)
    lo, hi = LOG_LAMBDA_RANGE
    df_max = _df_at(g, scale, np.exp(lo))
    df_min = _df_at(g, scale, np.exp(hi))
    if not df_min - 1e-9 <= target_df <= df_max + 1e-9:
        raise CalibrationError(
            f"df={target_df:g} is not attainable; attainable range is [{df_min:.4g}, {df_max:.4g}]"
        )
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        df = _df_at(g, scale, np.exp(mid))
        if abs(df - target_df) < tol:
            break
        if df > target_df:
            lo = mid
        else:
            hi = mid
    return float(np.exp(mid))


# --------------------------------------------------------------------------- #
# Markov random field
# --------------------------------------------------------------------------- #


def read_adjacency(path) -> list[tuple[str, str]]:
    """Read an edge list with one ``regionA,regionB`` pair per line."""
    edges = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 2 or not all(parts):
                raise ValueError(f"{path}:{lineno}: expected 'regionA,regionB', got {line!r}")
            edges.append((parts[0], parts[1]))
    return edges


def graph_laplacian(adjacency: Iterable[tuple[Any, Any]]) -> tuple[np.ndarray, list[str]]:
    """Laplacian (degree minus adjacency) over the sorted node labels."""
    edges = [(str(a), str(b)) for a, b in adjacency]
    labels = sorted({v for e in edges for v in e}, key=_label_key)
    pos = {lab: i for i, lab in enumerate(labels)}
    lap = np.zeros((len(labels), len(labels)))
    for a, b in edges:
        if a == b:
            continue
        i, j = pos[a], pos[b]
        if lap[i, j] != 0:
            continue
        lap[i, j] = lap[j, i] = -1.0
    lap[np.diag_indices_from(lap)] = -lap.sum(axis=1)
    return lap, labels


def _label_key(label: str):
    # numeric labels sort numerically, everything else lexically after them
    try:
        return (0, float(label), "")
    except ValueError:
        return (1, 0.0, label)


def region_index(regions, labels: Sequence[str]) -> np.ndarray:
    pos = {lab: i for i, lab in enumerate(labels)}
    out = np.empty(len(regions), dtype=np.int64)
    for i, r in enumerate(regions):
        key = _region_str(r)
        try:
            out[i] = pos[key]
        except KeyError:
            raise RegionError(f"region label {key!r} (row {i}) is not in the neighbourhood graph") from None
    return out


def _region_str(r) -> str:
    if isinstance(r, (float, np.floating)) and float(r).is_integer():
        return str(int(r))
    return str(r)


def mrf_setup(regions, adjacency, target_df: float = DEFAULT_DF["mrf"]) -> PenaltySetup:
    """Region-indicator design penalised by the graph Laplacian."""
    lap, labels = graph_laplacian(adjacency)
    idx = region_index(regions, labels)
    n, q = len(idx), len(labels)
    design = coo_matrix((np.ones(n), (np.arange(n), idx)), shape=(n, q)).toarray()
    n_comp, _ = connected_components(-(lap - np.diag(np.diag(lap))) != 0, directed=False)
    if n_comp > 1:
        warnings.warn(f"neighbourhood graph has {n_comp} components; "
                      f"the df floor rises to {n_comp}", DisconnectedGraphWarning, stacklevel=2)
    lam = calibrate_lambda(design, lap, target_df)
    return PenaltySetup(design, lap, lam, {"labels": labels, "index": idx, "components": n_comp})


# --------------------------------------------------------------------------- #
# Fitting
# --------------------------------------------------------------------------- #


def _is_singular(factor) -> bool:
    c = np.abs(np.diag(factor[0]))
    return c.min() <= 1e-7 * c.max()


def normal_factor(setup: PenaltySetup):
    """Cholesky factor of ``Z'Z + lam K``.

    Falls back to a ridge of ``1e-8 * tr / q`` when the system is singular;
    the second return value flags the fallback.
    """
    gram = setup.design.T @ setup.design + setup.lam * setup.penalty
    try:
        factor = sla.cho_factor(gram)
        if not _is_singular(factor):
            return factor, False
    except np.linalg.LinAlgError:
        pass
    ridge = 1e-8 * np.trace(gram) / len(gram)
    ridge = ridge if ridge > 0 else 1e-8
    return sla.cho_factor(gram + ridge * np.eye(len(gram))), True


def fit(spec: BaseLearnerSpec, setup: PenaltySetup, u) -> FitResult:
    """Penalised least-squares fit of ``u`` on the learner's design."""
    u = np.asarray(u, dtype=float)
    if setup.design.shape[0] != len(u):
        raise ValueError(f"design has {setup.design.shape[0]} rows but u has {len(u)}")
    factor, ridge = normal_factor(setup)
    coef = sla.cho_solve(factor, setup.design.T @ u)
    fitted = setup.design @ coef
    resid = u - fitted
    return FitResult(coef, fitted, float(resid @ resid), ridge)


# --------------------------------------------------------------------------- #
# Prepared learners (training design frozen, reusable on new data)
# --------------------------------------------------------------------------- #


class Learner:
    """A base-learner bound to its training covariate.

    Holds the frozen design information (centre, knots or region map) so
    that fitted coefficients can be evaluated on new data.
    """

    def __init__(self, spec: BaseLearnerSpec, column):
        self.spec = spec
        column = np.asarray(column)
        if spec.kind == "linear":
            x = column.astype(float)
            self.center = float(x.mean())
            design = np.column_stack([np.ones(len(x)), x - self.center])
            self.setup = PenaltySetup(design, np.zeros((2, 2)), 0.0, {"center": self.center})
        elif spec.kind == "pspline":
            design, knots = build_bspline_basis(column, spec.n_knots, spec.degree)
            self.knots = knots
            penalty = difference_penalty(spec.diff_order, design.shape[1])
            lam = calibrate_lambda(design, penalty, spec.target_df)
            self.setup = PenaltySetup(design, penalty, lam, {"knots": knots})
        else:
            self.setup = mrf_setup(column, spec.adjacency, spec.target_df)
            self.labels = self.setup.meta["labels"]
            self.index = self.setup.meta["index"]
        self.factor, self.ridge = normal_factor(self.setup)

    @property
    def n_coef(self) -> int:
        return self.setup.design.shape[1]

    def fit(self, u: np.ndarray) -> FitResult:
        if self.spec.kind == "mrf":
            rhs = np.bincount(self.index, weights=u, minlength=self.n_coef)
            coef = sla.cho_solve(self.factor, rhs)
            fitted = coef[self.index]
        else:
            coef = sla.cho_solve(self.factor, self.setup.design.T @ u)
            fitted = self.setup.design @ coef
        resid = u - fitted
        return FitResult(coef, fitted, float(resid @ resid), self.ridge)

    def state(self) -> dict[str, Any]:
        """Frozen metadata needed to evaluate the learner on new data."""
        if self.spec.kind == "linear":
            return {"center": self.center}
        if self.spec.kind == "pspline":
            return {"knots": self.knots.tolist()}
        return {"labels": list(self.labels)}


def design_matrix(spec: BaseLearnerSpec, state: dict[str, Any], column, warn: bool = True) -> np.ndarray:
    """Design of ``spec`` on new covariate values using frozen ``state``."""
    column = np.asarray(column)
    if spec.kind == "linear":
        x = column.astype(float)
        return np.column_stack([np.ones(len(x)), x - state["center"]])
    if spec.kind == "pspline":
        return bspline_basis(column.astype(float), np.asarray(state["knots"], dtype=float), spec.degree, warn)
    idx = region_index(column, state["labels"])
    out = np.zeros((len(idx), len(state["labels"])))
    out[np.arange(len(idx)), idx] = 1.0
    return out


def evaluate(spec: BaseLearnerSpec, state: dict[str, Any], coef, column, warn: bool = True) -> np.ndarray:
    """Values of a fitted effect on new covariate values."""
    coef = np.asarray(coef, dtype=float)
    if spec.kind == "mrf":
        return coef[region_index(np.asarray(column), state["labels"])]
    return design_matrix(spec, state, column, warn) @ coef


class LinearBank:
    """All linear learners of one parameter, fitted in a single pass.

    With the centred design ``[1, x - mean(x)]`` the least-squares intercept
    is ``mean(u)`` and the slope ``<xc, u> / <xc, xc>``.
    """

    def __init__(self, learners: Sequence[Learner]):
        self.learners = list(learners)
        self.xc = np.column_stack([lr.setup.design[:, 1] for lr in self.learners])
        self.ss = np.einsum("ij,ij->j", self.xc, self.xc)
        self.safe_ss = np.where(self.ss > 0, self.ss, 1.0)

    def rss(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
        """Per-learner rss, slopes and the common intercept."""
        mean = float(u.mean())
        centred = u - mean
        tss = float(centred @ centred)
        s = self.xc.T @ u
        slope = np.where(self.ss > 0, s / self.safe_ss, 0.0)
        rss = np.maximum(tss - slope * s, 0.0)
        return rss, slope, mean
