"""Configuration, experiment runners, CLI and the acceptance suite."""

from .config import OUTPUT_DIR_ENV, ExperimentConfig, ExperimentKind, config_from_dict, load_config
from .sweeps import run
