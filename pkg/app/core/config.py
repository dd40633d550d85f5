"""
Configuration settings loaded from .env file
"""
import hashlib

import numpy as np
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Runtime settings shared by every command"""

    # Logging
    LOG_LEVEL: str = "INFO"

    # Worker pool used by attack batches when --workers is not given
    DEFAULT_WORKERS: int = 1

    # Output layout
    RUNS_DIR: str = "runs"
    CACHE_DIRNAME: str = "cache"

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )


# Create single instance
settings = Settings()


# Named random streams; every stochastic component draws from one of these
SEED_STREAMS = ("data", "split", "init", "train", "attack-targets", "transfer")


def derive_seed(global_seed: int, stream: str) -> int:
    """Derive a 32-bit sub-seed for a named stream from the global seed"""
    digest = hashlib.sha256(f"{global_seed}:{stream}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def make_rng(global_seed: int, stream: str) -> np.random.Generator:
    """Generator for a named stream"""
    return np.random.default_rng(derive_seed(global_seed, stream))
