"""Flat YAML experiment configuration.

Keys follow the hyperparameter names of the experimental setup
(``emb_dim``, ``hidden_size``, ``lambda_s``, ``G``, ``I``, ``p_m``, ...);
see ``KEYS`` for the full schema. Unknown keys are rejected.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from .datagen import ToyConfig
from .evolution import GAConfig
from .exceptions import ConfigurationError
from .rationalizer import InnerConfig, RegularizerConfig

# key -> (default, type)
KEYS: Dict[str, tuple] = {
    # dataset
    "dataset": ("toy", str),  # "toy" or a directory of JSONL splits
    "data_seed": (None, int),  # toy generation seed; defaults to each run seed
    "string_len": (20, int),
    "total": (10000, int),
    "highlights": (["aba", "baa", "abc"], list),
    # general
    "emb_dim": (25, int),
    "emb_type": ("1-hot", str),  # "1-hot" or a path to a text embedding file
    "num_classes": (None, int),  # inferred from the data when omitted
    # generator / predictor
    "hidden_size": (8, int),
    "cell_type": ("GRU", str),
    # learning
    "lambda_s": (1.0, float),
    "lambda_c": (1.0, float),
    "alpha": (0.0, float),
    "epochs": (3, int),
    "batch_size": (64, int),
    "lr": (1e-2, float),
    # search
    "G": (100, int),
    "I": (50, int),
    "p_m": (1.0, float),
    "p_c": (1.0, float),
    "p_sl": (0.5, float),
    "p_su": (0.5, float),
    "sigma": (0.05, float),
    "tau": (0.1, float),
    "eps_hat": (1e-8, float),
    "patience": (25, int),
    "tol": (1e-6, float),
    "fitness_mode": ("goodness", str),
    # skewed initialisation
    "skew_epochs": (10, int),
    "skew_mode": ("one_skewed", str),
    "skew_lr": (1e-3, float),
    "skew_batch_size": (16, int),
    # runs
    "seeds": ([0, 1, 2, 3, 4], list),
    "threads": (1, int),
}


@dataclass
class ExperimentConfig:
    values: Dict[str, Any] = field(default_factory=lambda: {k: v[0] for k, v in KEYS.items()})

    def __getattr__(self, name):
        vals = self.__dict__.get("values")
        if vals is not None and name in vals:
            return vals[name]
        raise AttributeError(name)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        vals = dict(self.values)
        for k, v in kw.items():
            if v is not None:
                vals[k] = v
        return from_mapping(vals)

    def validate(self) -> None:
        v = self.values
        if not v["seeds"]:
            raise ConfigurationError("at least one seed is required")
        if v["cell_type"] != "GRU":
            raise ConfigurationError("only cell_type: GRU is supported")
        if v["dataset"] != "toy" and not Path(v["dataset"]).is_dir():
            raise ConfigurationError(f"dataset directory {v['dataset']!r} not found")
        if v["threads"] < 1:
            raise ConfigurationError("threads must be >= 1")
        if v["skew_mode"] not in ("one_skewed", "all_noisy"):
            raise ConfigurationError("skew_mode must be one_skewed or all_noisy")
        if v["skew_epochs"] < 1:
            raise ConfigurationError("skew_epochs must be >= 1")
        self.toy_config().validate()
        self.ga_config(0).validate()

    def toy_config(self) -> ToyConfig:
        return ToyConfig(class_highlights=list(self.highlights), string_len=self.string_len, total=self.total)

    def regularizer(self) -> RegularizerConfig:
        return RegularizerConfig(self.lambda_s, self.lambda_c, self.alpha)

    def inner(self) -> InnerConfig:
        return InnerConfig(self.epochs, self.batch_size, self.lr)

    def ga_config(self, seed: int) -> GAConfig:
        return GAConfig(
            population_size=self.I, generations=self.G, p_mut=self.p_m, p_cross=self.p_c,
            p_select=self.p_sl, p_survive=self.p_su, mut_sigma=self.sigma, tau=self.tau,
            eps_hat=self.eps_hat, inner=self.inner(), regularizer=self.regularizer(),
            hidden_size=self.hidden_size, master_seed=int(seed), patience=self.patience,
            tol=self.tol, fitness_mode=self.fitness_mode,
        )

    def canonical(self) -> Dict[str, Any]:
        # threads never changes results, so it is left out of the hash
        return {k: v for k, v in sorted(self.values.items()) if k != "threads"}

    def hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _coerce(key: str, value):
    default, typ = KEYS[key]
    if value is None:
        if default is None:
            return None
        raise ConfigurationError(f"{key} may not be null")
    if typ is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if typ is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if typ is str and isinstance(value, str):
        return value
    if typ is list and isinstance(value, (list, tuple)):
        return list(value)
    raise ConfigurationError(f"{key}: expected {typ.__name__}, got {value!r}")


def from_mapping(mapping: Dict[str, Any]) -> ExperimentConfig:
    unknown = sorted(set(mapping) - set(KEYS))
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
    vals = {k: v[0] for k, v in KEYS.items()}
    for k, v in mapping.items():
        vals[k] = _coerce(k, v)
    vals["seeds"] = [int(s) for s in vals["seeds"]]
    vals["highlights"] = [str(h) for h in vals["highlights"]]
    cfg = ExperimentConfig(vals)
    cfg.validate()
    return cfg


def load_config(path: Optional[str]) -> ExperimentConfig:
    if path is None:
        return from_mapping({})
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"invalid YAML in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError("config must be a mapping of keys to values")
    return from_mapping(data)
