"""Application configuration using pydantic-settings."""

from typing import Literal

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Run settings loaded from environment variables (prefix ``SPELLFORGE_``)."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="SPELLFORGE_",
        case_sensitive=False,
        extra="ignore",
    )

    # Application Settings
    app_name: str = Field(default="spellforge", description="Tool name in logs and manifests")
    app_version: str = Field(default="0.1.0", description="Tool version in manifests")
    log_level: str = Field(default="INFO", description="Root logging level")

    # Execution
    threads: int = Field(default=1, ge=1, description="Worker processes for parallel stages")
    seed: int = Field(default=20150101, ge=0, description="Master seed")

    # Calibration protocol
    train_ratio: float = Field(default=0.8, gt=0.0, lt=1.0)
    n_folds: int = Field(default=5, ge=2)
    n_bootstrap: int = Field(default=1000, ge=100)
    ci_level: float = Field(default=0.95, gt=0.0, lt=1.0)

    # Solvers
    lasso_tolerance: float = Field(default=1e-7, gt=0.0)
    lasso_max_sweeps: int = Field(default=10_000, ge=1)
    svr_tolerance: float = Field(default=1e-3, gt=0.0)
    svr_max_train_rows: int = Field(
        default=3000, ge=10, description="Seeded row cap for SVR training folds"
    )
    probit_max_iter: int = Field(default=100, ge=1)

    # Clustering
    at_risk_threshold: float = Field(default=0.9)
    no_receipt_threshold: float = Field(default=0.05)
    min_group_size: int = Field(default=6, ge=1)
    cluster_linkage: Literal["ward", "average", "complete"] = Field(default="ward")
    cluster_k_max: int = Field(default=10, ge=2)
    cluster_sample_limit: int = Field(default=5000, ge=2)


# Create global settings instance
settings = Settings()
