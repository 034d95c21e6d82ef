from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Environment settings (``MSSD_*`` variables or ``.env``)."""

    # Reproducibility
    SEED: Optional[int] = None

    # Logging Settings
    LOG_LEVEL: str = "INFO"

    # Output Settings
    OUTPUT_DIR: str = "outputs"
    TRAINING_LOG_NAME: str = "training_log.jsonl"

    # Worker lanes for channel-independent training
    JOBS: int = 1

    model_config = SettingsConfigDict(
        env_prefix="MSSD_",
        env_file=".env",
        case_sensitive=True,
        extra="ignore",
    )


def get_settings() -> Settings:
    """Fresh settings read from the current environment."""
    return Settings()


# Create settings instance
settings = Settings()
