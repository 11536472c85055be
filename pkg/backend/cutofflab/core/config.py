"""
Configuration settings for the cut-off laboratory
"""
from pathlib import Path
from typing import Optional

import psutil
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings


def _default_threads() -> int:
    return psutil.cpu_count(logical=True) or 1


class Settings(BaseSettings):
    """Application settings, read from CUTOFFLAB_* environment variables"""

    # Base paths
    PROJECT_ROOT: Path = Path(__file__).parent.parent.parent.parent
    BACKEND_ROOT: Path = Path(__file__).parent.parent.parent
    OUTPUT_DIR: Path = Path("results")

    PROJECT_NAME: str = "cutofflab"
    VERSION: str = "0.1.0"

    # Execution
    THREADS: int = Field(default_factory=_default_threads)
    CHUNK_SIZE: int = 256  # paths per engine chunk; never derived from THREADS
    PROGRESS: bool = True

    # Numerical tolerances
    QUAD_TOL: float = 1e-10
    JN_RTOL: float = 1e-10

    DEFAULT_SEED: int = 20240601

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FILE: Optional[Path] = None

    @field_validator("THREADS", "CHUNK_SIZE")
    @classmethod
    def _positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be a positive integer")
        return v

    class Config:
        env_prefix = "CUTOFFLAB_"
        env_file = ".env"
        env_file_encoding = "utf-8"
        case_sensitive = True


def get_settings() -> Settings:
    """Get application settings"""
    return Settings()


# Create singleton instance
settings = get_settings()
