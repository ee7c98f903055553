"""Command-line orchestration: data generation, training, evaluation, control, report."""

from .config import ControlSuite, RunConfig, derive_seed, load_config, parse_config, with_seed

__all__ = ["ControlSuite", "RunConfig", "derive_seed", "load_config", "parse_config", "with_seed"]
