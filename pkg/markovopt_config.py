# -*- coding: utf-8 -*-
"""
markovopt_config.py
-------------------
Experiment configuration: presets, key=value config files and validation.

Precedence (lowest first):
  preset defaults for (experiment, scale) -> --config file -> CLI key=value
  overrides and flags -> MARKOVOPT_SEED (base seed only).

Config file format: one `key = value` per line, `#` starts a comment, blank
lines are ignored. List values are comma-separated (`methods = MAG,SGD`).

Keys (all optional except experiment):
  experiment      fig1 | fig2 | nonconvex | td | custom
  scale           desk | full
  methods         subset of MAG,AdaGrad,SGD,SGD_MLMC,SGD_DD
  seeds           number of seeds (default 5)
  base_seed       64-bit base seed
  sample_budget   samples per run
  record_every    samples between recorded metrics
  out             output CSV path
  jobs            concurrent runs
  levels          truncated | full        (MLMC level law; truncated uses K)
  K               truncation level (default 5)
  compensation    exact | power_of_two
  alpha           AdaGrad scale (default: experiment-specific)
  c               SGD constant for eta_t = c/sqrt(t)
  gap             SGD_DD gap (default: mixing time of the finite chain)
  p               two-state switching probability (fig1, custom two-state)
  p_sweep         switching probabilities for fig2
  n, d            regression rows per state / dimension
  rho             RandBiMod top eigenvalue (nonconvex); d is its dimension
  n_states, n_features, gamma   random MRP shape (td)
  chain_file      plain-text chain for the custom experiment
"""
from __future__ import annotations

import os
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional

from pydantic import (BaseModel, Field, PositiveFloat, PositiveInt, ValidationError, field_validator,
                      model_validator)

from markovopt_errors import ConfigError
from markovopt_estimators import DEFAULT_K, Compensation
from markovopt_optim import Method

SEED_ENV = "MARKOVOPT_SEED"
U64_MASK = (1 << 64) - 1
DEFAULT_METHODS = [Method.MAG, Method.ADAGRAD, Method.SGD, Method.SGD_MLMC]

PRESETS: Dict[str, Dict[str, Dict[str, Any]]] = {
    "fig1": {
        "desk": {"n": 50, "d": 20, "p": 1e-3, "sample_budget": 500_000, "record_every": 10_000},
        "full": {"n": 250, "d": 100, "p": 1e-4, "sample_budget": 5_000_000, "record_every": 50_000},
    },
    "fig2": {
        "desk": {"n": 50, "d": 20, "p_sweep": [1e-1, 1e-2, 1e-3], "sample_budget": 500_000},
        "full": {"n": 250, "d": 100, "p_sweep": [1e-1, 1e-2, 1e-3, 1e-4], "sample_budget": 5_000_000},
    },
    "nonconvex": {
        "desk": {"d": 10, "rho": 0.99, "sample_budget": 100_000, "record_every": 10_000},
        "full": {"d": 50, "rho": 0.999, "sample_budget": 5_000_000, "record_every": 50_000},
    },
    "td": {
        "desk": {"n_states": 5, "n_features": 3, "gamma": 0.9, "sample_budget": 50_000, "record_every": 1_000},
        "full": {"n_states": 50, "n_features": 10, "gamma": 0.9, "sample_budget": 1_000_000, "record_every": 10_000},
    },
    "custom": {
        "desk": {"n": 50, "d": 20, "sample_budget": 100_000, "record_every": 10_000},
        "full": {"n": 250, "d": 100, "sample_budget": 1_000_000, "record_every": 50_000},
    },
}

_INT_FIELDS = ("seeds", "base_seed", "sample_budget", "record_every", "jobs", "K", "gap",
               "n", "d", "n_states", "n_features")

OpenUnit = Annotated[float, Field(gt=0, lt=1)]


class ExperimentConfig(BaseModel):
    experiment: Literal["fig1", "fig2", "nonconvex", "td", "custom"]
    scale: Literal["desk", "full"] = "desk"
    methods: List[Method] = Field(default_factory=lambda: list(DEFAULT_METHODS))
    seeds: PositiveInt = 5
    base_seed: int = 0
    sample_budget: PositiveInt = 100_000
    record_every: Optional[int] = None
    out: Path = Path("results.csv")
    jobs: PositiveInt = 1
    levels: Literal["truncated", "full"] = "truncated"
    K: PositiveInt = DEFAULT_K
    compensation: Compensation = Compensation.EXACT
    alpha: Optional[PositiveFloat] = None
    c: PositiveFloat = 1.0
    gap: Optional[PositiveInt] = None
    p: Optional[OpenUnit] = None
    p_sweep: List[OpenUnit] = Field(default_factory=list)
    n: PositiveInt = 50
    d: PositiveInt = 20
    rho: OpenUnit = 0.99
    n_states: PositiveInt = 5
    n_features: PositiveInt = 3
    gamma: float = Field(0.9, ge=0, lt=1)
    chain_file: Optional[Path] = None

    @field_validator("methods", "p_sweep", mode="before")
    @classmethod
    def _split_list(cls, v: Any) -> Any:
        if isinstance(v, str):
            return [item.strip() for item in v.split(",") if item.strip()]
        return v

    @field_validator(*_INT_FIELDS, mode="before")
    @classmethod
    def _scientific_int(cls, v: Any) -> Any:
        # accept "5e5" for integer keys
        if isinstance(v, str) and v.strip() and any(ch in v for ch in "eE."):
            f = float(v)
            if f.is_integer():
                return int(f)
        return v

    @field_validator("base_seed")
    @classmethod
    def _mask_seed(cls, v: int) -> int:
        return v & U64_MASK

    @model_validator(mode="after")
    def _check(self) -> "ExperimentConfig":
        if not self.methods:
            raise ValueError("methods must not be empty")
        if self.record_every is not None and not 1 <= self.record_every <= self.sample_budget:
            raise ValueError(f"record_every={self.record_every} must lie in [1, sample_budget={self.sample_budget}]")
        if self.experiment == "fig1" and self.p is None:
            raise ValueError("fig1 needs a switching probability p")
        if self.experiment == "fig2" and not self.p_sweep:
            raise ValueError("fig2 needs a non-empty p_sweep")
        if self.experiment == "custom" and self.chain_file is None and self.p is None:
            raise ValueError("custom needs chain_file or p")
        if self.experiment == "nonconvex" and self.d % 2:
            raise ValueError(f"nonconvex needs an even d for RandBiMod, got {self.d}")
        if self.experiment == "td" and self.n_features > self.n_states:
            raise ValueError(f"td needs n_features <= n_states, got {self.n_features} > {self.n_states}")
        return self

    def level_label(self) -> str:
        return f"{self.levels}(K={self.K})" if self.levels == "truncated" else "full"


def parse_config_text(text: str, *, source: str = "<config>") -> Dict[str, str]:
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        values[key] = value
    return values


def load_config_file(path: Path) -> Dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), source=str(path))


def parse_overrides(items: List[str]) -> Dict[str, str]:
    return parse_config_text("\n".join(items), source="<overrides>")


def build_config(file_values: Optional[Dict[str, Any]] = None,
                 overrides: Optional[Dict[str, Any]] = None,
                 env: Optional[Dict[str, str]] = None) -> ExperimentConfig:
    """Merge preset defaults, file values, overrides and the seed env var, then validate."""
    merged: Dict[str, Any] = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    env = os.environ if env is None else env
    if env.get(SEED_ENV):
        merged["base_seed"] = env[SEED_ENV]
    experiment = merged.get("experiment")
    scale = merged.get("scale", "desk")
    preset = PRESETS.get(str(experiment), {}).get(str(scale), {})
    values = {**preset, **merged}
    if experiment == "fig2" and "record_every" not in merged:
        values["record_every"] = values.get("sample_budget")
    try:
        return ExperimentConfig(**values)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {e}") from e
