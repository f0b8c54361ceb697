"""
Lab Settings.

Pydantic BaseSettings for process-level defaults. Experiment-specific
choices live in the ExperimentConfig JSON file; these only cover what a
machine or shell decides (log verbosity, where runs go, parallelism).
"""

import functools

import dotenv
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


@functools.cache
def _load_dotenv_once() -> None:
    """Load .env file once."""
    dotenv.load_dotenv(dotenv.find_dotenv(usecwd=True))


class LabSettings(BaseSettings):
    """Settings for the tsd-lab command line."""

    # Logging
    log_level: str = "INFO"

    # Default run root when neither --out nor the config names one
    output_dir: str = "runs"

    # Concurrent independent runs
    jobs: int = Field(default=1, ge=1)

    model_config = SettingsConfigDict(
        env_prefix="TSD_",
        env_file_encoding="utf-8",
        extra="ignore",
        env_file=(".env",),
    )


@functools.cache
def get_lab_settings() -> LabSettings:
    """Get cached LabSettings instance."""
    _load_dotenv_once()
    return LabSettings()
