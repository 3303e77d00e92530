import logging
from enum import Enum
from typing import Optional
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

try:
    from dotenv import load_dotenv
except ImportError:
    load_dotenv = lambda **kwargs: None

logger = logging.getLogger(__name__)


class LogLevel(str, Enum):
    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"


class Settings(BaseSettings):
    # Logging
    ABNNLAB_LOG: LogLevel = Field(LogLevel.INFO, description="Logging level")
    ABNNLAB_VERBOSE_LOGGING: bool = Field(False, description="Prefix log lines with timestamp and logger name")

    # Tracing (optional)
    LOGFIRE_TOKEN: Optional[str] = Field(None, description="Logfire token; tracing is disabled when unset")

    model_config = SettingsConfigDict(
        env_file=".env",
        case_sensitive=True,
        extra="ignore",  # Allow unrelated variables in the environment
    )


def load_settings() -> Settings:
    """Load and validate settings from environment variables and .env file."""
    try:
        load_dotenv(override=False)
    except Exception as e:
        logger.warning(f"Error loading .env file: {str(e)}")

    return Settings(_env_file=".env", _env_file_encoding="utf-8")


# Create a global settings instance
settings = load_settings()
