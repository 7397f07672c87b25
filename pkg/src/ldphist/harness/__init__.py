"""Experiment harness: configuration, deterministic seeding, rate studies, CLI."""

from .config import DensitySpec, ExperimentConfig, build_model, load_config, parse_config
from .runner import (
    CSV_HEADER,
    RateStudyResult,
    ReplicationRow,
    empirical_bias_variance,
    fit_slope,
    rate_study,
    run_replication,
)
from .seeding import ROLE_DATA, ROLE_NOISE, ROLE_ROW, seed_derive

__all__ = [
    "CSV_HEADER",
    "DensitySpec",
    "ExperimentConfig",
    "RateStudyResult",
    "ReplicationRow",
    "ROLE_DATA",
    "ROLE_NOISE",
    "ROLE_ROW",
    "build_model",
    "empirical_bias_variance",
    "fit_slope",
    "load_config",
    "parse_config",
    "rate_study",
    "run_replication",
    "seed_derive",
]
