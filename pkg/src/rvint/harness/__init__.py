"""Configuration, experiment drivers and command line for the Monte Carlo harness."""
from .config import EXPERIMENTS, ConfigError, ExperimentConfig, load_config, parse_config
from .experiments import ExperimentReport, run_experiment
