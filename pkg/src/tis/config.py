from functools import lru_cache
from typing import Literal

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

LogLevel = Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]


class Settings(BaseSettings):
    """Runtime settings, read from ``TIS_*`` environment variables."""

    model_config = SettingsConfigDict(env_prefix="TIS_", extra="ignore")

    threads: int = Field(default=1, ge=1)
    log_level: LogLevel = "INFO"
    host: str = "0.0.0.0"
    port: int = 8000
    reload: bool = False


@lru_cache
def get_settings() -> Settings:
    return Settings()
