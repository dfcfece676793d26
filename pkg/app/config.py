"""Application configuration."""
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings."""

    model_config = SettingsConfigDict(
        env_file=".env",
        case_sensitive=True,
        extra="ignore"
    )

    # Application
    APP_NAME: str = "PI Lab"
    APP_VERSION: str = "1.0.0"
    ENVIRONMENT: str = "development"
    LOG_LEVEL: str = "INFO"

    # Budgets
    VERTEX_BUDGET: int = 250_000  # largest gallery space
    LABEL_BUDGET: int = 2_000_000  # bi-criteria path search labels
    QUADRATURE_MAX_NODES: int = 65_536

    # Runner
    OUTPUT_DIR: str = "out"
    DEFAULT_JOBS: int = 1
    PLOTS_ENABLED: bool = True


settings = Settings()
