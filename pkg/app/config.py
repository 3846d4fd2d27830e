"""
Solver and sweep configuration
Loads settings from environment variables (prefix FRACWAVE_) and .env
"""
import os
from typing import Optional
from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field


class Settings(BaseSettings):
    """Fracwave settings"""

    model_config = SettingsConfigDict(
        env_file='.env',
        env_file_encoding='utf-8',
        env_prefix='FRACWAVE_',
        case_sensitive=False,
        extra='allow'
    )

    # Local parallelism for sweep cells
    threads: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)

    # Redis Configuration
    redis_url: str = Field(default="redis://localhost:6379/0")

    # Celery Configuration
    celery_broker_url: Optional[str] = None
    celery_result_backend: Optional[str] = None
    use_celery: bool = Field(default=False)

    # Numerics
    soe_epsilon: float = Field(default=1e-12, gt=0.0, lt=1.0)

    # Sweep profiles
    desk_m: int = Field(default=2000, ge=2)
    full_m: int = Field(default=5000, ge=2)
    desk_max_n: int = Field(default=640, ge=2)

    output_dir: str = Field(default="results")
    log_level: str = Field(default="INFO")

    # Environment
    environment: str = Field(default="development")

    def model_post_init(self, __context):
        """Post-initialization to set defaults"""
        if not self.celery_broker_url:
            self.celery_broker_url = self.redis_url
        if not self.celery_result_backend:
            self.celery_result_backend = self.redis_url


# Global settings instance
settings = Settings()


def get_settings() -> Settings:
    """Get settings instance"""
    return settings
