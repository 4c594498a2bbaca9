"""
Centralized configuration management.
All environment variables and settings are defined here.
"""
from pathlib import Path
from typing import Optional

from pydantic import ConfigDict, Field, field_validator
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    model_config = ConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Application
    app_name: str = Field(default="Quantum Register Stabilization Simulator", alias="APP_NAME")
    log_level: str = Field(default="INFO", alias="LOG_LEVEL")

    # Runs
    output_dir: str = Field(default="results", alias="OUTPUT_DIR")
    threads: int = Field(default=1, alias="THREADS")
    master_seed: int = Field(default=12345, alias="MASTER_SEED")

    # Numerics
    prefix_cache_mb: int = Field(default=512, alias="PREFIX_CACHE_MB")
    max_qubits: int = Field(default=14, alias="MAX_QUBITS")

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Validate log level is one of the standard levels."""
        valid_levels = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}
        v_upper = v.upper()
        if v_upper not in valid_levels:
            raise ValueError(f"Log level must be one of: {sorted(valid_levels)}")
        return v_upper

    @field_validator("threads")
    @classmethod
    def validate_threads(cls, v: int) -> int:
        """Validate worker thread count."""
        if not (1 <= v <= 64):
            raise ValueError("Threads must be between 1 and 64")
        return v

    @field_validator("master_seed")
    @classmethod
    def validate_seed(cls, v: int) -> int:
        if v < 0:
            raise ValueError("Master seed must be non-negative")
        return v

    @field_validator("max_qubits")
    @classmethod
    def validate_max_qubits(cls, v: int) -> int:
        """Dense statevectors are capped at 14 qubits."""
        if not (1 <= v <= 14):
            raise ValueError("Max qubits must be between 1 and 14")
        return v

    @field_validator("prefix_cache_mb")
    @classmethod
    def validate_cache(cls, v: int) -> int:
        if v < 1:
            raise ValueError("Prefix cache budget must be at least 1 MB")
        return v

    def ensure_directories(self) -> None:
        """Ensure required directories exist."""
        Path(self.output_dir).mkdir(parents=True, exist_ok=True)


# Global settings instance
_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """
    Get application settings singleton.

    Returns:
        Settings instance
    """
    global _settings
    if _settings is None:
        _settings = Settings()
    return _settings
