"""Configuration, sweeps, presets and result files."""

from .config import ConfigError, ExperimentSpec, load_config, parse_text, spec_from_dict, to_text
from .presets import PRESET_TABLE, figure_preset, preset_names
from .runner import ResultRow, build_scenario, emit_results, run_experiment

__all__ = [
    "ConfigError", "ExperimentSpec", "PRESET_TABLE", "ResultRow", "build_scenario",
    "emit_results", "figure_preset", "load_config", "parse_text", "preset_names",
    "run_experiment", "spec_from_dict", "to_text",
]
