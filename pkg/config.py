"""Configuration settings for the trajectory representation toolkit."""

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, Optional, Tuple

from src.utils.errors import ArgumentError, SchemaError


class Config:
    """Configuration class with all system settings."""

    # Application settings
    APP_NAME = "Trajectory Representation Toolkit"
    LOG_LEVEL = "INFO"

    # Data paths
    OUTPUT_DIR = "./data/output"
    LOG_DIR = "./logs"
    LOG_TO_FILE = False

    # Dataset settings
    SAMPLE_RATE_HZ = 10.0
    HORIZON_S = 5.0
    DURATION_TOLERANCE = 0.05
    WINDOW_MODE = "random_one"
    FRAME = "local"

    # RTS smoother and outlier gates
    SMOOTHER_PROCESS_NOISE = 3.0
    SMOOTHER_MEASUREMENT_NOISE = 0.5
    POSITION_GATE_M = 2.0
    ACCEL_MAX = 6.0
    DECEL_MIN = -10.0
    STATIC_LENGTH_GATE_M = 0.5
    MIN_SPEED_HEADING = 0.1
    MIN_SPEED_ACCEL = 0.5

    # Model settings
    BASIS_FAMILY = "monomial"
    MAX_DEGREE = 12
    CONDITION_LIMIT = 1e12

    # Optimizer settings
    OPTIMIZER_METHOD = "ascent"
    MAX_ITERATIONS = 2000
    GRADIENT_TOLERANCE = 1e-5
    STEP_SIZE = 0.05
    BATCH_SIZE = 0
    CHUNK_SIZE = 512

    # Report settings
    CRITERION = "paper-aic"
    SIGMA_R_RANGES = (10.0, 20.0, 40.0)
    REPORT_QUANTILES = (0.25, 0.5, 0.75, 0.999)
    PERCENTILE = 0.999


def parse_degree_range(text: str) -> Tuple[int, int]:
    """
    Parse a degree range of the form ``a..b``.

    Args:
        text: Range text, e.g. "1..7"

    Returns:
        Inclusive (low, high) pair
    """
    try:
        low, high = (int(part) for part in text.split(".."))
    except ValueError:
        raise ArgumentError(f"Degree range must look like 'a..b', got '{text}'")
    if low < 0 or high < low:
        raise ArgumentError(f"Invalid degree range '{text}'")
    return low, high


@dataclass
class RunConfig:
    """Settings for one CLI run, layered as flags > JSON file > Config defaults."""

    input_path: Optional[str] = None
    output_dir: str = Config.OUTPUT_DIR
    object_class: Optional[str] = None
    horizon: float = Config.HORIZON_S
    degree: Optional[int] = None
    degree_range: Optional[Tuple[int, int]] = None
    criterion: str = Config.CRITERION
    window_mode: str = Config.WINDOW_MODE
    frame: str = Config.FRAME
    basis_family: str = Config.BASIS_FAMILY
    sample_rate: float = Config.SAMPLE_RATE_HZ
    seed: int = 0
    threads: int = 1
    optimizer: Dict = field(default_factory=dict)
    smoother: Dict = field(default_factory=dict)

    def degrees(self) -> range:
        """Return the degrees this run fits."""
        if self.degree is not None:
            return range(self.degree, self.degree + 1)
        low, high = self.degree_range
        return range(low, high + 1)

    def nominal_samples(self) -> int:
        """Samples per trajectory over the horizon at the nominal rate, e.g. 50 at 10 Hz and T=5 s."""
        return max(1, int(round(self.sample_rate * self.horizon)))

    def validate(self, needs_degree: bool = False):
        """
        Check run invariants.

        Args:
            needs_degree: Whether the command requires a degree or degree range
        """
        if needs_degree and (self.degree is None) == (self.degree_range is None):
            raise ArgumentError("Exactly one of --degree and --degree-range is required")
        if self.horizon <= 0:
            raise ArgumentError(f"Horizon must be positive, got {self.horizon}")
        if self.sample_rate <= 0:
            raise ArgumentError(f"Sample rate must be positive, got {self.sample_rate}")
        if self.threads < 1:
            raise ArgumentError(f"--threads must be >= 1, got {self.threads}")
        if self.criterion not in ("paper-aic", "aic", "bic"):
            raise ArgumentError(f"Unknown criterion '{self.criterion}'")
        if self.window_mode not in ("stride_1s", "random_one", "whole"):
            raise ArgumentError(f"Unknown window mode '{self.window_mode}'")
        if self.frame not in ("local", "world"):
            raise ArgumentError(f"Frame must be 'local' or 'world', got '{self.frame}'")
        if self.object_class not in (None, "ego", "agent"):
            raise ArgumentError(f"Class must be ego or agent, got '{self.object_class}'")

        output = Path(self.output_dir)
        try:
            output.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ArgumentError(f"Output directory not writable: {output} ({e})")
        if not os.access(output, os.W_OK):
            raise ArgumentError(f"Output directory not writable: {output}")


def load_json_config(path: str) -> Dict:
    """
    Read a JSON config file.

    Args:
        path: Path to the JSON file

    Returns:
        Parsed dictionary
    """
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except FileNotFoundError:
        raise SchemaError(f"Config file not found", path=path)
    except json.JSONDecodeError as e:
        raise SchemaError(f"Invalid JSON: {e.msg} (column {e.colno})", path=path, line=e.lineno)

    if not isinstance(data, dict):
        raise SchemaError("Config file must contain a JSON object", path=path)
    return data


def build_run_config(file_values: Dict, flag_values: Dict) -> RunConfig:
    """
    Merge JSON config file values and command-line flags into a RunConfig.

    Args:
        file_values: Values read from the JSON config file
        flag_values: Values given on the command line (None means not given)

    Returns:
        RunConfig instance
    """
    known = {f.name for f in fields(RunConfig)}
    merged = {k: v for k, v in file_values.items() if k in known}
    merged.update({k: v for k, v in flag_values.items() if k in known and v is not None})

    if isinstance(merged.get("degree_range"), str):
        merged["degree_range"] = parse_degree_range(merged["degree_range"])
    elif isinstance(merged.get("degree_range"), list):
        merged["degree_range"] = tuple(merged["degree_range"])

    return RunConfig(**merged)
