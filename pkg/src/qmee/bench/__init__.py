"""Configuration-driven experiment runner and report writer."""

from .config import ConfigError, default_config, load_config
from .experiments import (SurfaceGrid, loglog_slope, run_elm_experiment, run_esn_experiment,
                          run_experiment, run_linreg_experiment, run_surface_grid,
                          run_timing_sweep)
from .report import ExperimentReport, ReportError, from_csv, read_csv, to_csv, write_csv

__all__ = [
    "ConfigError", "default_config", "load_config", "SurfaceGrid", "loglog_slope",
    "run_elm_experiment", "run_esn_experiment", "run_experiment", "run_linreg_experiment",
    "run_surface_grid", "run_timing_sweep", "ExperimentReport", "ReportError", "from_csv",
    "read_csv", "to_csv", "write_csv",
]
