from .config import BatteryConfig, ConfigError, battery_config_from_dict, load_config_file, parse_config_text
from .battery import run_battery
from .heatmap import export_heatmap, read_pgm
from .cli import cli_dispatch, main

__all__ = [
    "BatteryConfig",
    "ConfigError",
    "battery_config_from_dict",
    "cli_dispatch",
    "export_heatmap",
    "load_config_file",
    "main",
    "parse_config_text",
    "read_pgm",
    "run_battery",
]
