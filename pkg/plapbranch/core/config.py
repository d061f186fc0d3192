"""Configuration management for plapbranch."""

import os
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator

from plapbranch.models.errors import ConfigurationError
from plapbranch.models.options import SolveOptions

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ENV_PREFIX = "PLAPBRANCH_"


class ToolkitConfig(BaseModel):
    """plapbranch run configuration."""

    model_config = ConfigDict(extra="ignore")

    # Problem defaults
    n: int = Field(64, description="Mesh cells per unit length")
    p: float = Field(2.0, description="Exponent")
    a: float = Field(1.0, description="Rectangle width")
    b: float = Field(1.0, description="Rectangle height")
    tol: float = Field(1e-3, description="Bisection width / quadrature error target")
    threads: int = Field(1, description="Worker threads for independent solves")

    # Output
    out_dir: Path = Field(Path.cwd() / "output", description="Output directory path")

    # Solver
    max_iters: int = Field(200_000, description="Iteration cap per solve")
    tol_lambda: float = Field(1e-10, description="Relative lambda-change threshold")
    tol_grad: float = Field(1e-8, description="Relative predicted-decrease threshold")
    armijo_c: float = Field(1e-4, description="Sufficient-decrease constant")
    armijo_shrink: float = Field(0.5, description="Backtracking factor")
    eps_factor: float = Field(0.01, description="Initial relative regularization")
    eps_decay: float = Field(0.1, description="Regularization decay per stall")
    eps_floor: float = Field(1e-12, description="Smallest relative regularization")

    # Logging Configuration
    log_level: str = Field("INFO", description="Logging level")
    log_file: Optional[Path] = Field(None, description="Log file path")

    @field_validator("out_dir", "log_file", mode="before")
    @classmethod
    def ensure_path(cls, v):
        """Convert string paths to Path objects."""
        if v is None:
            return v
        if isinstance(v, str):
            return Path(v).expanduser()
        return v

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v):
        """Validate log level."""
        valid_levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        if v.upper() not in valid_levels:
            raise ValueError(f"log_level must be one of {valid_levels}")
        return v.upper()

    @field_validator("n", "threads", "max_iters")
    @classmethod
    def validate_positive_int(cls, v):
        """Validate positive integers."""
        if v <= 0:
            raise ValueError("Value must be positive")
        return v

    @field_validator("a", "b", "tol", "tol_lambda", "tol_grad", "eps_factor", "eps_floor")
    @classmethod
    def validate_positive(cls, v):
        if not v > 0:
            raise ValueError("Value must be positive")
        return v

    @field_validator("p")
    @classmethod
    def validate_exponent(cls, v):
        if not v > 1:
            raise ValueError("p must exceed 1")
        return v

    def solve_options(self) -> SolveOptions:
        """Solver settings carried by this configuration."""
        return SolveOptions(
            max_iters=self.max_iters,
            tol_lambda=self.tol_lambda,
            tol_grad=self.tol_grad,
            armijo_c=self.armijo_c,
            armijo_shrink=self.armijo_shrink,
            eps_factor=self.eps_factor,
            eps_decay=self.eps_decay,
            eps_floor=self.eps_floor,
        )

    def merged(self, overrides: Dict[str, Any]) -> "ToolkitConfig":
        """Copy with every non-None override applied and validated."""
        data = self.model_dump()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return ToolkitConfig(**data)


def _env_values() -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    for name in ToolkitConfig.model_fields:
        raw = os.getenv(ENV_PREFIX + name.upper())
        if raw is not None:
            values[name] = raw
    return values


def get_config() -> ToolkitConfig:
    """Get configuration instance with environment variables loaded."""
    from dotenv import load_dotenv

    # Load .env file if it exists
    load_dotenv()
    try:
        return ToolkitConfig(**_env_values())
    except ValueError as exc:
        raise ConfigurationError(f"Invalid {ENV_PREFIX}* environment: {exc}") from exc


def read_config_file(config_file: Union[str, Path]) -> Dict[str, Any]:
    """Parse a TOML or YAML configuration file into a flat mapping."""
    path = Path(config_file).expanduser()
    if not path.is_file():
        raise ConfigurationError(f"Config file not found: {path}", path=str(path))
    suffix = path.suffix.lower()
    try:
        if suffix == ".toml":
            with open(path, "rb") as f:
                data = tomllib.load(f)
        elif suffix in (".yaml", ".yml"):
            with open(path, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
        else:
            raise ConfigurationError(
                f"Unsupported config format {suffix!r}; use .toml, .yaml or .yml",
                path=str(path),
            )
    except (tomllib.TOMLDecodeError, yaml.YAMLError) as exc:
        raise ConfigurationError(f"Cannot parse {path}: {exc}", path=str(path)) from exc

    if not isinstance(data, dict):
        raise ConfigurationError(f"{path} must contain a mapping", path=str(path))
    # a [plapbranch] table or top-level keys
    section = data.get("plapbranch", data)
    if not isinstance(section, dict):
        raise ConfigurationError(f"[plapbranch] in {path} must be a table", path=str(path))
    return dict(section)


def load_config(config_file: Optional[Union[str, Path]] = None) -> ToolkitConfig:
    """Environment configuration with an optional file layered on top."""
    base = get_config()
    if config_file is None:
        return base
    try:
        return base.merged(read_config_file(config_file))
    except ValueError as exc:
        raise ConfigurationError(f"Invalid configuration in {config_file}: {exc}") from exc
