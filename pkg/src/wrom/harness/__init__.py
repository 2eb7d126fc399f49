"""Configuration-driven offline/online studies and the ``wrom`` command line."""

from .config import METHODS, StudyConfig, format_config, load_config, parse_config
from .offline import OfflineResult, get_model, run_offline, solve_all, thread_count, training_set
from .study import (
    ErrorTable,
    draw_test_set,
    emit,
    error_statistics,
    read_csv,
    run_error_study,
    write_csv,
    write_metadata,
    write_svg,
)

__all__ = [
    "METHODS", "StudyConfig", "format_config", "load_config", "parse_config",
    "OfflineResult", "get_model", "run_offline", "solve_all", "thread_count", "training_set",
    "ErrorTable", "draw_test_set", "emit", "error_statistics", "read_csv",
    "run_error_study", "write_csv", "write_metadata", "write_svg",
]
