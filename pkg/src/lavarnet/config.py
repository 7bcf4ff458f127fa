"""Experiment configuration: presets, schema validation and scenario expansion."""

from __future__ import annotations

import copy
import itertools
import json
import zlib
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import yaml


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "name": "experiment",
    "seed": 0,
    "out": "runs",
    "data": {"source": "henon", "K": 5, "L": 2000, "coupling": 0.3, "P": 3, "density": 0.4,
             "burn_in": 1000, "targets": "all"},
    "preprocess": {"interpolate": True, "max_zeros": None, "drop_constant": False,
                   "moving_average": 0, "zscore": True, "fractions": [0.6, 0.2, 0.2]},
    "T": 5,
    "variants": ["lavarnet", "rlavarnet", "frlavarnet", "rnn", "lstm", "knn"],
    "train": {"epochs": 70, "batch_size": 64, "n": 20, "eta_max": 0.01, "eta_min": 0.0001,
              "lr_constant": 0.001, "knn_neighbors": 5},
    "repetitions": 5,
    "bench": {"realizations": 10, "epochs": 70},
}

PRESETS = {
    # fast acceptance-scale run
    "desk": {"name": "desk", "data": {"source": "henon", "K": 5, "L": 2000}, "T": 5, "repetitions": 5},
    # the full simulation grid, 100 neurons for every network
    "full": {
        "name": "full",
        "data": {"source": "henon", "K": [5, 10, 15],
                 "L": [200, 500, 1000, 2000, 3000, 4000, 5000, 6000, 7000, 8000, 9000, 10000]},
        "T": [3, 5, 10, 15],
        "repetitions": 5,
        "train": {"n": 100},
    },
}


def _schema() -> dict:
    text = resources.files("lavarnet").joinpath("schemas/config.schema.json").read_text()
    return json.loads(text)


def merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def validate(doc: dict) -> None:
    try:
        jsonschema.validate(doc, _schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None


def load_config(path=None, preset: str | None = None, **overrides) -> dict:
    """Defaults <- preset <- config file <- explicit overrides (None values ignored)."""
    doc = copy.deepcopy(DEFAULTS)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        doc = merge(doc, PRESETS[preset])
    if path is not None:
        try:
            user = yaml.safe_load(Path(path).read_text()) or {}
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML ({exc})") from None
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        validate(user)
        doc = merge(doc, user)
    doc = merge(doc, {k: v for k, v in overrides.items() if v is not None})
    validate(doc)
    pre = doc["preprocess"]
    if "counts" in pre and doc["data"]["source"] != "csv":
        raise ConfigError("preprocess.counts needs a fixed-length csv source")
    if abs(sum(pre["fractions"]) - 1.0) > 1e-9:
        raise ConfigError(f"preprocess.fractions {pre['fractions']} must sum to 1")
    if doc["data"]["source"] == "csv" and "path" not in doc["data"]:
        raise ConfigError("data.path is required for a csv source")
    return doc


def _as_list(v) -> list:
    return list(v) if isinstance(v, list) else [v]


@dataclass(frozen=True)
class Scenario:
    K: int | None
    L: int | None
    T: int

    @property
    def name(self) -> str:
        parts = []
        if self.K is not None:
            parts.append(f"K{self.K}")
        parts.append(f"T{self.T}")
        if self.L is not None:
            parts.append(f"L{self.L}")
        return "_".join(parts)


def scenarios(cfg: dict) -> list[Scenario]:
    if cfg["data"]["source"] == "csv":
        return [Scenario(None, None, T) for T in _as_list(cfg["T"])]
    return [Scenario(K, L, T) for K, T, L in
            itertools.product(_as_list(cfg["data"]["K"]), _as_list(cfg["T"]), _as_list(cfg["data"]["L"]))]


def derive_seed(*parts) -> int:
    """Stable 32-bit seed from ints and strings."""
    words = [zlib.crc32(p.encode()) if isinstance(p, str) else int(p) for p in parts]
    return int(np.random.SeedSequence(words).generate_state(1)[0])
