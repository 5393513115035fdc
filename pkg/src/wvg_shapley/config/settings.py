"""
Application settings and configuration.

Environment-based configuration with an optional plain ``KEY=value`` file,
so long experiment batches can be pinned to a reproducible set of defaults.
"""

from pathlib import Path
from typing import Optional

from pydantic import Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from ..models.exceptions import ConfigurationError


class Settings(BaseSettings):
    """Toolkit settings with environment variable support."""

    # Application
    app_name: str = "WVG Shapley Toolkit"
    app_version: str = "1.0.0"
    debug: bool = False

    # Logging
    log_level: str = "INFO"
    log_format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    # Simulation
    default_seed: int = Field(42, ge=0, lt=2**64)
    default_reps: int = Field(1_000_000, ge=1)
    block_size: int = Field(2**14, ge=1)
    threads: Optional[int] = Field(None, ge=1)

    # Numerics
    quad_rtol: float = Field(1e-9, gt=0)
    quad_limit: int = Field(500, ge=50)
    series_tol: float = Field(1e-12, gt=0)
    series_max_terms: int = Field(10_000, ge=1)
    renewal_max_draws: int = Field(10_000_000, ge=1)
    convolution_step: float = Field(1e-4, gt=0)
    convolution_mass_floor: float = Field(1e-12, gt=0)

    # Exact enumerator guards
    exact_perm_max_n: int = Field(11, ge=1)
    exact_subset_max_n: int = Field(24, ge=1)

    # Output
    output_format: str = "csv"

    @field_validator("log_level", mode="before")
    @classmethod
    def normalize_log_level(cls, v):
        """Accept lower-case level names from config files."""
        level = str(v).strip().upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"Unknown log level '{v}'")
        return level

    @field_validator("output_format", mode="before")
    @classmethod
    def normalize_output_format(cls, v):
        fmt = str(v).strip().lower()
        if fmt not in {"csv", "json"}:
            raise ValueError(f"Unknown output format '{v}'")
        return fmt

    model_config = SettingsConfigDict(
        env_prefix="WVG_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )


def get_settings(config_file: Optional[Path] = None) -> Settings:
    """
    Build settings, layering a config file under the environment.

    Args:
        config_file: Optional ``KEY=value`` file (``WVG_`` prefixed keys)

    Raises:
        ConfigurationError: If the file is missing or a value fails validation
    """
    try:
        if config_file is None:
            return Settings()
        if not Path(config_file).is_file():
            raise ConfigurationError(f"Config file not found: {config_file}")
        return Settings(_env_file=config_file)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid configuration: {e}") from e


# Global settings instance
settings = Settings()
