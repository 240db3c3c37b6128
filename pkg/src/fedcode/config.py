"""Experiment configuration: flat JSON files, presets, strict validation.

A config file is a flat JSON object. An empty file means all defaults, which
equal the "blobs-small" preset. Unknown keys are rejected and every range
violation names the offending key, so a bad file fails before round one.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigurationError

__all__ = ["DEFAULTS", "ExperimentConfig", "PRESETS", "load_config", "preset_config"]

METHODS = ("fedavg", "fedavg_ws", "fedcode")
SWEEP_AXES = {
    "K": "clusters",
    "F1": "f1",
    "F2": "f2",
    "E": "local_epochs",
    "beta": "beta",
    "rho": "participation",
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs, resolved and validated."""

    method: str = "fedcode"
    seed: int = 7
    rounds: int = 40
    num_clients: int = 10
    calibration_rounds: int = 2
    local_epochs: int = 4
    clusters: int = 64
    participation: float = 1.0
    f1: float = 0.33
    f2: float = 0.5
    period1: int | None = None
    period2: int | None = None
    beta: float = 10.0

    dataset: str = "blobs"
    num_classes: int = 4
    input_dim: int = 8
    n_per_class: int = 200
    spread: float = 0.25
    csv_path: str | None = None
    test_fraction: float = 0.2

    hidden_dims: tuple[int, ...] = (32,)
    batch_size: int = 32
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    optimizer: str = "adam"

    kmeans_max_iterations: int = 25
    kmeans_rel_tolerance: float = 1e-6

    wordlength: int = 32
    accounting_params: int = 262805

    workers: int = 1
    out_dir: str = "out"
    plots: bool = True
    compare_fedavg: bool = False

    def validate(self) -> "ExperimentConfig":
        checks: list[tuple[bool, str]] = [
            (self.method in METHODS, f"method must be one of {METHODS}, got {self.method!r}"),
            (self.seed >= 0, f"seed must be >= 0, got {self.seed}"),
            (self.rounds >= 1, f"rounds must be >= 1, got {self.rounds}"),
            (self.num_clients >= 1, f"num_clients must be >= 1, got {self.num_clients}"),
            (
                self.calibration_rounds >= 0,
                f"calibration_rounds must be >= 0, got {self.calibration_rounds}",
            ),
            (self.local_epochs >= 0, f"local_epochs must be >= 0, got {self.local_epochs}"),
            (self.clusters >= 1, f"clusters must be >= 1, got {self.clusters}"),
            (
                0 < self.participation <= 1,
                f"participation must lie in (0, 1], got {self.participation}",
            ),
            (0 <= self.f1 <= 1, f"f1 must lie in [0, 1], got {self.f1}"),
            (0 <= self.f2 <= 1, f"f2 must lie in [0, 1], got {self.f2}"),
            (
                self.period1 is None or self.period1 >= 1,
                f"period1 must be >= 1 when set, got {self.period1}",
            ),
            (
                self.period2 is None or self.period2 >= 1,
                f"period2 must be >= 1 when set, got {self.period2}",
            ),
            (self.beta > 0, f"beta must be > 0, got {self.beta}"),
            (
                self.dataset in ("blobs", "csv"),
                f"dataset must be 'blobs' or 'csv', got {self.dataset!r}",
            ),
            (self.num_classes >= 2, f"num_classes must be >= 2, got {self.num_classes}"),
            (self.input_dim >= 1, f"input_dim must be >= 1, got {self.input_dim}"),
            (self.n_per_class >= 5, f"n_per_class must be >= 5, got {self.n_per_class}"),
            (self.spread > 0, f"spread must be > 0, got {self.spread}"),
            (
                self.dataset != "csv" or bool(self.csv_path),
                "csv_path is required when dataset is 'csv'",
            ),
            (
                0 < self.test_fraction < 1,
                f"test_fraction must lie in (0, 1), got {self.test_fraction}",
            ),
            (
                len(self.hidden_dims) >= 1 and all(h >= 1 for h in self.hidden_dims),
                f"hidden_dims must be a non-empty list of positive ints, got {self.hidden_dims}",
            ),
            (self.batch_size >= 1, f"batch_size must be >= 1, got {self.batch_size}"),
            (self.learning_rate > 0, f"learning_rate must be > 0, got {self.learning_rate}"),
            (
                0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1,
                "adam_beta1 and adam_beta2 must lie in [0, 1)",
            ),
            (self.adam_epsilon > 0, f"adam_epsilon must be > 0, got {self.adam_epsilon}"),
            (
                self.optimizer in ("adam", "sgd"),
                f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}",
            ),
            (
                self.kmeans_max_iterations >= 1,
                f"kmeans_max_iterations must be >= 1, got {self.kmeans_max_iterations}",
            ),
            (
                self.kmeans_rel_tolerance >= 0,
                f"kmeans_rel_tolerance must be >= 0, got {self.kmeans_rel_tolerance}",
            ),
            (self.wordlength >= 1, f"wordlength must be >= 1, got {self.wordlength}"),
            (
                self.accounting_params >= 1,
                f"accounting_params must be >= 1, got {self.accounting_params}",
            ),
            (self.workers >= 1, f"workers must be >= 1, got {self.workers}"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigurationError(message)
        return self


DEFAULTS = ExperimentConfig()

# Preset contents are deltas over the defaults.
PRESETS: dict[str, dict] = {
    "blobs-small": {},
    "table7": {
        "rounds": 100,
        "num_clients": 10,
        "clusters": 64,
        "calibration_rounds": 2,
        "f1": 0.2,
        "f2": 0.5,
        "participation": 1.0,
        "wordlength": 32,
        "accounting_params": 262805,
    },
}

_INT_FIELDS = {
    "seed",
    "rounds",
    "num_clients",
    "calibration_rounds",
    "local_epochs",
    "clusters",
    "period1",
    "period2",
    "num_classes",
    "input_dim",
    "n_per_class",
    "batch_size",
    "kmeans_max_iterations",
    "wordlength",
    "accounting_params",
    "workers",
}
_FLOAT_FIELDS = {
    "participation",
    "f1",
    "f2",
    "beta",
    "spread",
    "test_fraction",
    "learning_rate",
    "adam_beta1",
    "adam_beta2",
    "adam_epsilon",
    "kmeans_rel_tolerance",
}
_BOOL_FIELDS = {"plots", "compare_fedavg"}


def _coerce(key: str, value):
    if key in _BOOL_FIELDS:
        if not isinstance(value, bool):
            raise ConfigurationError(f"{key} must be a boolean, got {value!r}")
        return value
    if key in _INT_FIELDS:
        if value is None and key in ("period1", "period2"):
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{key} must be an integer, got {value!r}")
        if float(value) != int(value):
            raise ConfigurationError(f"{key} must be an integer, got {value!r}")
        return int(value)
    if key in _FLOAT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{key} must be a number, got {value!r}")
        return float(value)
    if key == "hidden_dims":
        if not isinstance(value, (list, tuple)) or not value:
            raise ConfigurationError(f"hidden_dims must be a non-empty list, got {value!r}")
        dims = []
        for v in value:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or float(v) != int(v):
                raise ConfigurationError(f"hidden_dims entries must be integers, got {v!r}")
            dims.append(int(v))
        return tuple(dims)
    if key in ("method", "dataset", "optimizer", "out_dir"):
        if not isinstance(value, str):
            raise ConfigurationError(f"{key} must be a string, got {value!r}")
        return value
    if key == "csv_path":
        if value is not None and not isinstance(value, str):
            raise ConfigurationError(f"csv_path must be a string or null, got {value!r}")
        return value
    raise ConfigurationError(f"unknown config key: {key}")


def _build(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigurationError("config root must be a JSON object")
    raw = dict(raw)
    preset_name = raw.pop("preset", "blobs-small")
    if preset_name not in PRESETS:
        raise ConfigurationError(
            f"unknown preset {preset_name!r}; available: {sorted(PRESETS)}"
        )
    field_names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    merged = dict(PRESETS[preset_name])
    for key, value in raw.items():
        if key not in field_names:
            raise ConfigurationError(f"unknown config key: {key}")
        merged[key] = value
    coerced = {key: _coerce(key, value) for key, value in merged.items()}
    return ExperimentConfig(**coerced).validate()


def preset_config(name: str, **overrides) -> ExperimentConfig:
    """Config for a named preset with keyword overrides applied."""
    return _build({"preset": name, **overrides})


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate a flat JSON config file; empty file means defaults."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    if not text.strip():
        return _build({})
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file {path} is not valid JSON: {exc}") from exc
    return _build(raw)
