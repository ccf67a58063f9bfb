"""Data loading, model configuration files and model persistence."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
import pandas as pd
import yaml

from .baselearners import KINDS, BaseLearnerSpec, read_adjacency
from .engine import STABILIZATIONS, FittedModel, ModelSpec
from .families import FAMILIES, get_family

MISSING = ("", "NA", "NaN", "nan")


class DatasetError(ValueError):
    """A data file does not match what the model needs."""


class ConfigError(ValueError):
    """A configuration file is malformed or inconsistent with the data."""


# --------------------------------------------------------------------------- #
# CSV data
# --------------------------------------------------------------------------- #


@dataclass
class Dataset:
    """Named columns; numeric columns are float arrays, categorical ones
    arrays of strings."""

    columns: dict[str, np.ndarray]
    kinds: dict[str, str]
    response_names: tuple[str, str] | None = None

    @property
    def n(self) -> int:
        for v in self.columns.values():
            return len(v)
        return 0

    def __len__(self):
        return self.n

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def __contains__(self, name: str) -> bool:
        return name in self.columns

    def responses(self) -> np.ndarray:
        if self.response_names is None:
            raise DatasetError("no response columns were declared")
        return np.column_stack([self.columns[c] for c in self.response_names])

    def covariates(self) -> dict[str, np.ndarray]:
        skip = set(self.response_names or ())
        return {k: v for k, v in self.columns.items() if k not in skip}

    def subset(self, rows) -> "Dataset":
        return Dataset({k: v[rows] for k, v in self.columns.items()}, dict(self.kinds), self.response_names)


def _to_float(values: np.ndarray, name: str) -> np.ndarray:
    try:
        return values.astype(float)
    except ValueError:
        pass
    for i, v in enumerate(values):
        try:
            float(v)
        except ValueError:
            raise DatasetError(f"row {i + 1}, column {name!r}: cannot parse {v!r} as a number") from None
    raise AssertionError("unreachable")


def check_responses(family, y: np.ndarray, names: Sequence[str] = ("y1", "y2")) -> None:
    """Raise ``DatasetError`` if ``y`` is not a valid response matrix for
    ``family``."""
    fam = get_family(family)
    for d, name in enumerate(names):
        col = y[:, d]
        if fam.family_id == "bernoulli2":
            bad = ~((col == 0) | (col == 1))
            what = "binary responses must be 0 or 1"
        elif fam.family_id == "poisson2":
            bad = ~((col >= 0) & (col == np.floor(col)) & np.isfinite(col))
            what = "count responses must be non-negative integers"
        else:
            bad = ~np.isfinite(col)
            what = "continuous responses must be finite"
        if np.any(bad):
            i = int(np.argmax(bad))
            raise DatasetError(f"row {i + 1}, column {name!r}: {what}, got {col[i]!r}")


def load_csv(path, responses: Sequence[str] | None = None, family=None,
             categorical: Iterable[str] = (), numeric: Iterable[str] = (),
             required: Iterable[str] | None = None) -> Dataset:
    """Read a comma separated file with a header row.

    Columns listed in ``categorical`` are kept as strings; columns listed in
    ``numeric`` or ``responses`` must parse as numbers. Other columns are
    numeric when every cell parses and categorical otherwise. Missing cells
    (empty, ``NA`` or ``NaN``) are an error in any column listed in
    ``required`` (all columns when ``required`` is None).
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"{path}: file not found")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, na_filter=False,
                            encoding="utf-8", sep=",")
    except pd.errors.EmptyDataError:
        raise DatasetError(f"{path}: file is empty") from None
    except (pd.errors.ParserError, UnicodeDecodeError) as err:
        raise DatasetError(f"{path}: {err}") from None
    names = [str(c) for c in frame.columns]
    if len(set(names)) != len(names):
        raise DatasetError(f"{path}: duplicate column names in header")
    categorical = set(categorical)
    numeric = set(numeric) | set(responses or ())
    wanted = set(names) if required is None else set(required) | set(responses or ())
    for col in sorted(wanted | categorical | numeric, key=str):
        if col not in names:
            raise DatasetError(f"{path}: missing column {col!r}; available: {', '.join(names)}")
    columns, kinds = {}, {}
    for name in names:
        raw = frame[name].to_numpy(dtype=object).astype(str)
        missing = np.isin(np.char.strip(raw), MISSING)
        if name in wanted and np.any(missing):
            rows = (np.flatnonzero(missing) + 1).tolist()
            shown = ", ".join(map(str, rows[:10])) + (" ..." if len(rows) > 10 else "")
            raise DatasetError(f"column {name!r}: missing values in rows {shown}")
        if name in categorical:
            columns[name], kinds[name] = raw, "categorical"
            continue
        if name in numeric:
            columns[name], kinds[name] = _to_float(np.where(missing, "nan", raw), name), "numeric"
            continue
        try:
            columns[name], kinds[name] = np.where(missing, "nan", raw).astype(float), "numeric"
        except ValueError:
            columns[name], kinds[name] = raw, "categorical"
    resp = None
    if responses is not None:
        if len(responses) != 2:
            raise DatasetError("exactly two response columns are needed")
        resp = (str(responses[0]), str(responses[1]))
        if family is not None:
            check_responses(family, np.column_stack([columns[c] for c in resp]), resp)
    return Dataset(columns, kinds, resp)


def write_csv(path, columns: Mapping[str, Sequence[Any]]) -> None:
    """Write named columns; floats use their shortest exact representation."""
    frame = pd.DataFrame({k: list(v) for k, v in columns.items()})
    for k in frame.columns:
        if frame[k].dtype.kind == "f":
            frame[k] = [repr(float(v)) for v in frame[k]]
    frame.to_csv(path, index=False, lineterminator="\n")


# --------------------------------------------------------------------------- #
# Model configuration
# --------------------------------------------------------------------------- #

TOP_KEYS = {"family", "responses", "parameters", "nu", "m_max", "offsets", "seed", "validation",
            "categorical", "adjacency", "stabilization", "patience"}
LEARNER_KEYS = {"covariate", "learner", "df", "n_knots", "degree", "diff_order", "adjacency"}
PARAM_KEYS = {"learners", "fixed"}
VALIDATION_KEYS = {"file", "split"}


@dataclass
class LearnerConfig:
    covariate: str
    learner: str = "linear"
    options: dict[str, Any] = field(default_factory=dict)


@dataclass
class ModelConfig:
    """Parsed configuration. ``parameters`` is None when the file lists no
    predictors: every parameter then gets a linear learner per covariate."""

    family: str
    responses: tuple[str, str]
    parameters: dict[str, list[LearnerConfig]] | None = None
    fixed: dict[str, float] = field(default_factory=dict)
    nu: float = 0.1
    m_max: int = 5000
    offsets_mode: str = "mle"
    seed: int = 0
    stabilization: str = "none"
    patience: int | None = None
    validation: dict[str, Any] = field(default_factory=dict)
    categorical: list[str] = field(default_factory=list)
    adjacency: str | None = None
    base_dir: Path = Path(".")

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def covariates(self) -> list[str] | None:
        if self.parameters is None:
            return None
        seen = []
        for specs in self.parameters.values():
            for lc in specs:
                if lc.covariate not in seen:
                    seen.append(lc.covariate)
        return seen

    def mrf_covariates(self) -> set[str]:
        return {lc.covariate for specs in (self.parameters or {}).values()
                for lc in specs if lc.learner == "mrf"}


def _unknown(keys, allowed, where):
    extra = sorted(set(keys) - allowed, key=str)
    if extra:
        raise ConfigError(f"unknown key {extra[0]!r} in {where}; allowed: {', '.join(sorted(allowed))}")


def _number(value, key, kind=float):
    if isinstance(value, str) and value.strip().lower() in ("-inf", "-infinity"):
        return -math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}")
    if kind is int:
        if float(value) != int(value):
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return int(value)
    return float(value)


def _learner(doc, where) -> LearnerConfig:
    if isinstance(doc, str):
        return LearnerConfig(doc)
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: a learner is a covariate name or a mapping, got {doc!r}")
    _unknown(doc, LEARNER_KEYS, where)
    if "covariate" not in doc:
        raise ConfigError(f"{where}: learner without 'covariate'")
    kind = doc.get("learner", "linear")
    if kind not in KINDS:
        raise ConfigError(f"{where}: unknown learner {kind!r}; choose from {', '.join(KINDS)}")
    opts = {}
    for key in ("df", "n_knots", "degree", "diff_order"):
        if key in doc:
            opts[key] = _number(doc[key], f"{where}.{key}", float if key == "df" else int)
    if "adjacency" in doc:
        opts["adjacency"] = str(doc["adjacency"])
    if kind == "linear" and opts:
        raise ConfigError(f"{where}: linear learners take no options, got {sorted(opts)}")
    if kind == "mrf" and set(opts) - {"df", "adjacency"}:
        raise ConfigError(f"{where}: mrf learners only take 'df' and 'adjacency'")
    if kind == "pspline" and "adjacency" in opts:
        raise ConfigError(f"{where}: 'adjacency' only applies to mrf learners")
    return LearnerConfig(str(doc["covariate"]), kind, opts)


def parse_config(path) -> ModelConfig:
    """Read and check a YAML model configuration (strict: unknown keys are
    errors). Relative file names inside it are resolved against its folder."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: file not found") from None
    except yaml.YAMLError as err:
        raise ConfigError(f"{path}: invalid YAML: {err}") from None
    return config_from_dict(doc, path.parent)


def config_from_dict(doc, base_dir=".") -> ModelConfig:
    if not isinstance(doc, dict):
        raise ConfigError("the configuration must be a mapping")
    _unknown(doc, TOP_KEYS, "configuration")
    for key in ("family", "responses"):
        if key not in doc:
            raise ConfigError(f"missing required key {key!r}")
    family = str(doc["family"])
    if family not in FAMILIES:
        raise ConfigError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")
    fam = get_family(family)
    responses = doc["responses"]
    if not isinstance(responses, list) or len(responses) != 2:
        raise ConfigError("responses must list exactly two column names")
    cfg = ModelConfig(family, (str(responses[0]), str(responses[1])), base_dir=Path(base_dir))
    if "nu" in doc:
        cfg.nu = _number(doc["nu"], "nu")
        if not 0 < cfg.nu <= 1:
            raise ConfigError("nu must lie in (0, 1]")
    if "m_max" in doc:
        cfg.m_max = _number(doc["m_max"], "m_max", int)
        if cfg.m_max < 0:
            raise ConfigError("m_max must be non-negative")
    if "offsets" in doc:
        if doc["offsets"] not in ("mle", "zero"):
            raise ConfigError("offsets must be 'mle' or 'zero'")
        cfg.offsets_mode = doc["offsets"]
    if "seed" in doc:
        cfg.seed = _number(doc["seed"], "seed", int)
    if "stabilization" in doc:
        if doc["stabilization"] not in STABILIZATIONS:
            raise ConfigError(f"stabilization must be one of {', '.join(STABILIZATIONS)}")
        cfg.stabilization = doc["stabilization"]
    if doc.get("patience") is not None:
        cfg.patience = _number(doc["patience"], "patience", int)
        if cfg.patience < 1:
            raise ConfigError("patience must be positive")
    if "validation" in doc:
        val = doc["validation"]
        if not isinstance(val, dict):
            raise ConfigError("validation must be a mapping with 'file' or 'split'")
        _unknown(val, VALIDATION_KEYS, "validation")
        if len(val) != 1:
            raise ConfigError("validation takes exactly one of 'file' or 'split'")
        if "split" in val:
            frac = _number(val["split"], "validation.split")
            if not 0 < frac < 1:
                raise ConfigError("validation.split must lie in (0, 1)")
            cfg.validation = {"split": frac}
        else:
            cfg.validation = {"file": str(val["file"])}
    if "categorical" in doc:
        if not isinstance(doc["categorical"], list):
            raise ConfigError("categorical must be a list of column names")
        cfg.categorical = [str(c) for c in doc["categorical"]]
    if "adjacency" in doc:
        cfg.adjacency = str(doc["adjacency"])
    params = doc.get("parameters")
    if params is not None:
        if not isinstance(params, dict):
            raise ConfigError("parameters must map parameter names to learner lists")
        cfg.parameters = {k: [] for k in fam.parameter_names}
        for name, section in params.items():
            if name not in fam.parameter_names:
                raise ConfigError(f"unknown parameter {name!r} for {family}; "
                                  f"expected one of {', '.join(fam.parameter_names)}")
            where = f"parameters.{name}"
            if section is None:
                continue
            if isinstance(section, list):
                section = {"learners": section}
            if not isinstance(section, dict):
                raise ConfigError(f"{where}: expected a learner list or a mapping")
            _unknown(section, PARAM_KEYS, where)
            if "fixed" in section:
                if section.get("learners"):
                    raise ConfigError(f"{where}: a fixed parameter cannot have learners")
                cfg.fixed[name] = _number(section["fixed"], f"{where}.fixed")
                continue
            cfg.parameters[name] = [_learner(lr, f"{where}.learners[{i}]")
                                    for i, lr in enumerate(section.get("learners") or [])]
            if cfg.adjacency is None and any(lc.learner == "mrf" and "adjacency" not in lc.options
                                             for lc in cfg.parameters[name]):
                raise ConfigError(f"{where}: mrf learner needs an adjacency file "
                                  "(top-level 'adjacency' or learner option)")
    return cfg


def build_model_spec(cfg: ModelConfig, data: Dataset) -> ModelSpec:
    """Turn a configuration into a ``ModelSpec``, checking it against the
    columns of ``data``."""
    fam = get_family(cfg.family)
    for r in cfg.responses:
        if r not in data:
            raise ConfigError(f"response column {r!r} is not in the data")
    covs = cfg.covariates()
    if covs is None:
        covs = [c for c in data.columns if c not in cfg.responses]
        for c in covs:
            if data.kinds[c] != "numeric":
                raise ConfigError(f"column {c!r} is not numeric; list predictors explicitly to use it")
        learners = {k: [BaseLearnerSpec("linear", c) for c in covs]
                    for k in fam.parameter_names if k not in cfg.fixed}
        return ModelSpec(fam, learners, nu=cfg.nu, m_max=cfg.m_max, offsets_mode=cfg.offsets_mode,
                         fixed=dict(cfg.fixed), stabilization=cfg.stabilization, patience=cfg.patience)
    for c in covs:
        if c not in data:
            raise ConfigError(f"covariate {c!r} is not in the data; available: {', '.join(data.columns)}")
    cache: dict[str, tuple] = {}

    def edges(path):
        if path not in cache:
            try:
                cache[path] = tuple(read_adjacency(cfg.resolve(path)))
            except OSError as err:
                raise ConfigError(f"cannot read adjacency file {path!r}: {err}") from None
        return cache[path]

    learners = {}
    for name, specs in cfg.parameters.items():
        out = []
        for lc in specs:
            opts = dict(lc.options)
            if lc.learner == "mrf":
                opts["adjacency"] = edges(opts.get("adjacency", cfg.adjacency))
            elif data.kinds[lc.covariate] != "numeric":
                raise ConfigError(f"{lc.learner} learner on non-numeric column {lc.covariate!r}")
            try:
                out.append(BaseLearnerSpec(lc.learner, lc.covariate, **opts))
            except ValueError as err:
                raise ConfigError(f"parameters.{name}: {err}") from None
        learners[name] = out
    return ModelSpec(fam, learners, nu=cfg.nu, m_max=cfg.m_max, offsets_mode=cfg.offsets_mode,
                     fixed=dict(cfg.fixed), stabilization=cfg.stabilization, patience=cfg.patience)


def load_for_config(cfg: ModelConfig, path, need_responses: bool = True) -> Dataset:
    """Load a CSV with the column types the configuration implies."""
    categorical = set(cfg.categorical) | cfg.mrf_covariates()
    covs = cfg.covariates()
    required = None if covs is None else set(covs)
    return load_csv(path, cfg.responses if need_responses else None,
                    cfg.family if need_responses else None,
                    categorical=categorical, required=required)


def split_validation(data: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded random split into training and validation rows."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(data.n)
    n_val = int(round(fraction * data.n))
    if n_val < 1 or n_val >= data.n:
        raise ConfigError("validation split leaves no rows for training or validation")
    val, train = np.sort(perm[:n_val]), np.sort(perm[n_val:])
    return data.subset(train), data.subset(val)


# --------------------------------------------------------------------------- #
# Model files
# --------------------------------------------------------------------------- #


def save_model(model: FittedModel, path) -> None:
    """Write a model as JSON. Floats are written with ``repr`` precision, so
    loading gives bit-identical coefficients."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, allow_nan=True)
    os.replace(tmp, path)


def load_model(path) -> FittedModel:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ValueError(f"{path}: model file not found") from None
    except json.JSONDecodeError as err:
        raise ValueError(f"{path}: not a model file ({err})") from None
    if not isinstance(doc, dict) or doc.get("format") != "bivboost-model":
        raise ValueError(f"{path}: not a bivboost model file")
    return FittedModel.from_dict(doc)
