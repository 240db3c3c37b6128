"""Shared fixtures: a deterministic hypothesis profile and a fast run config."""

from __future__ import annotations

from dataclasses import replace

import pytest
from hypothesis import HealthCheck, settings

from fedcode import ExperimentConfig

settings.register_profile(
    "deterministic",
    derandomize=True,
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("deterministic")

# Small enough that a full training run finishes in well under a second.
_SMALL = ExperimentConfig(
    rounds=4,
    num_clients=4,
    calibration_rounds=1,
    local_epochs=1,
    clusters=8,
    f1=0.5,
    f2=0.5,
    beta=10.0,
    num_classes=3,
    input_dim=4,
    n_per_class=30,
    spread=0.15,
    hidden_dims=(8,),
    batch_size=16,
    seed=11,
    plots=False,
)


@pytest.fixture
def small_config():
    """Factory for fast desk-scale configs; override any field by name."""

    def make(**overrides) -> ExperimentConfig:
        return replace(_SMALL, **overrides).validate()

    return make
