"""
Configuration module for matchfn.

Loads environment variables (optionally from a .env file) that set defaults
for the command line, and defines RunConfig, the fully resolved settings of
one CLI run. Every run echoes its RunConfig to ``resolved_config.json`` so
the run can be reproduced with ``--config``.
"""

import json
import math
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Union

from dotenv import load_dotenv

from .errors import ConfigError
from .ingest import ColumnSchema
from .kernel_cdf import CoordinateTransform
from .models import to_month
from .synth import DgpConfig

# Load environment variables from .env file
load_dotenv()

SUBCOMMANDS = ("diagnose", "estimate", "simulate", "validate")
GRID_SPANS = ("data", "full")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")

RESOLVED_CONFIG_NAME = "resolved_config.json"


def _env_number(name: str, default: str, kind=float):
    raw = os.getenv(name, default)
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"Environment variable {name}={raw!r} is not a valid {kind.__name__}")


@dataclass
class EstimatorDefaults:
    """Defaults for the estimation flags (explicit flags win)."""
    bandwidth: float = 0.01
    transform: str = CoordinateTransform.LOG_RANGE.value
    window: int = 12

    @classmethod
    def from_env(cls) -> "EstimatorDefaults":
        return cls(
            bandwidth=_env_number("MATCHFN_BANDWIDTH", "0.01"),
            transform=os.getenv("MATCHFN_TRANSFORM", CoordinateTransform.LOG_RANGE.value),
            window=_env_number("MATCHFN_WINDOW", "12", int),
        )


@dataclass
class RuntimeConfig:
    """Process-level settings."""
    threads: int = 1
    log_level: str = "INFO"

    @classmethod
    def from_env(cls) -> "RuntimeConfig":
        threads = _env_number("MATCHFN_THREADS", "1", int)
        if threads < 1:
            raise ConfigError(f"MATCHFN_THREADS must be >= 1, got {threads}")
        return cls(
            threads=threads,
            log_level=os.getenv("MATCHFN_LOG_LEVEL", "INFO").upper(),
        )


# Global configuration instances (lazy loaded)
_estimator_defaults: Optional[EstimatorDefaults] = None
_runtime_config: Optional[RuntimeConfig] = None


def get_estimator_defaults() -> EstimatorDefaults:
    """Get estimator defaults (cached)."""
    global _estimator_defaults
    if _estimator_defaults is None:
        _estimator_defaults = EstimatorDefaults.from_env()
    return _estimator_defaults


def get_runtime_config() -> RuntimeConfig:
    """Get runtime configuration (cached)."""
    global _runtime_config
    if _runtime_config is None:
        _runtime_config = RuntimeConfig.from_env()
    return _runtime_config


def reset_config_cache() -> None:
    """Forget cached environment settings (used after changing the environment)."""
    global _estimator_defaults, _runtime_config
    _estimator_defaults = None
    _runtime_config = None


# =============================================================================
# RUN CONFIG
# =============================================================================

def parse_range(text: Union[str, tuple, list], name: str) -> tuple[float, float]:
    """Parse ``low:high`` into a positive range that contains 1."""
    if isinstance(text, (tuple, list)):
        parts = list(text)
    else:
        parts = str(text).split(":")
    try:
        low, high = (float(part) for part in parts)
    except ValueError:
        raise ConfigError(f"{name} must look like LOW:HIGH, got {text!r}")
    if not (0 < low <= 1 <= high and low < high and math.isfinite(high)):
        raise ConfigError(f"{name} must satisfy 0 < low <= 1 <= high, got {low}:{high}")
    return (low, high)


@dataclass
class RunConfig:
    """
    Fully resolved settings of one CLI run.

    Usage:
        config = RunConfig(subcommand="estimate", input="panel.csv", outdir="out")
        config.validate()
    """
    subcommand: str
    input: Optional[str] = None
    outdir: str = "."
    regions: list[str] = field(default_factory=list)
    columns: dict = field(default_factory=lambda: ColumnSchema().to_dict())
    bandwidth: float = 0.01
    transform: str = CoordinateTransform.LOG_RANGE.value
    grid_psi: int = 200
    grid_lambda: int = 60
    psi_range: tuple[float, float] = (0.05, 20.0)
    lambda_range: tuple[float, float] = (0.05, 20.0)
    grid_span: str = "data"
    base_point: str = "median"
    window: int = 12
    intercept: bool = False
    baseline: Optional[str] = None
    seed: int = 1
    dgp: dict = field(default_factory=dict)
    charts: bool = True

    def validate(self) -> "RunConfig":
        """
        Check every option; raises ConfigError on the first bad value.

        Returns:
            self, with ranges normalized to tuples
        """
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"Unknown subcommand {self.subcommand!r}")
        if self.subcommand in ("diagnose", "estimate") and not self.input:
            raise ConfigError(f"{self.subcommand} needs --input")
        if not (self.bandwidth > 0 and math.isfinite(self.bandwidth)):
            raise ConfigError(f"bandwidth must be positive, got {self.bandwidth!r}")
        try:
            CoordinateTransform(self.transform)
        except ValueError:
            choices = ", ".join(t.value for t in CoordinateTransform)
            raise ConfigError(f"Unknown transform {self.transform!r} (choose from {choices})")
        if self.grid_psi < 2 or self.grid_lambda < 2:
            raise ConfigError("Grid resolution needs at least 2 points per axis")
        self.psi_range = parse_range(self.psi_range, "psi-range")
        self.lambda_range = parse_range(self.lambda_range, "lambda-range")
        if self.grid_span not in GRID_SPANS:
            raise ConfigError(f"grid-span must be one of {GRID_SPANS}, got {self.grid_span!r}")
        if self.window < 0:
            raise ConfigError(f"window must be >= 0, got {self.window}")

        for name in ("base_point", "baseline"):
            value = getattr(self, name)
            if value is None or (name == "base_point" and value == "median"):
                continue
            try:
                to_month(value)
            except ValueError:
                raise ConfigError(f"{name} must be 'median' or YYYY-MM, got {value!r}" if name == "base_point"
                                  else f"baseline must be YYYY-MM, got {value!r}")

        ColumnSchema.from_dict(self.columns)
        self.dgp_config()
        return self

    def dgp_config(self) -> DgpConfig:
        """Generator settings for simulate/validate (the run seed wins)."""
        try:
            return DgpConfig.from_dict({**self.dgp, "seed": self.seed})
        except TypeError as e:
            raise ConfigError(f"Invalid generator settings: {e}")

    def column_schema(self) -> ColumnSchema:
        return ColumnSchema.from_dict(self.columns)

    @property
    def output_dir(self) -> Path:
        return Path(self.outdir)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["psi_range"] = list(self.psi_range)
        data["lambda_range"] = list(self.lambda_range)
        data["dgp"] = self.dgp_config().to_dict() if self.subcommand in ("simulate", "validate") else dict(self.dgp)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"Unknown config keys: {', '.join(sorted(unknown))}")
        if "subcommand" not in data:
            raise ConfigError("Config is missing 'subcommand'")
        return cls(**data)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunConfig":
        """Read a resolved-config echo."""
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file {path} is not valid JSON: {e}")
        return cls.from_dict(data)
