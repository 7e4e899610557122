"""Experiment orchestration: configs, sweeps, galleries, CLI."""

from .config import ExperimentConfig, default_config_text, load_config, validate_config
from .experiments import flow_field_gallery, run_experiment

__all__ = [
    "ExperimentConfig", "default_config_text", "load_config", "validate_config",
    "run_experiment", "flow_field_gallery",
]
