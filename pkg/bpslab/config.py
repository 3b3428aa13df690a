from typing import Literal, Optional

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Experiment configuration with environment variable support"""

    model_config = SettingsConfigDict(
        env_prefix="BPSLAB_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )

    # Logging
    log: Literal["error", "info", "debug"] = "info"

    # Reproducibility
    seed: int = 0

    # Variational / RLHF optimizer
    beta: Optional[float] = None
    lr: float = 0.5
    max_steps: int = 50_000
    tol: float = 1e-8

    # Pragmatic inference and diagnosis
    n_candidates: int = 8
    answering: Literal["exact", "best-of-n"] = "exact"
    trials: int = 2_000
    epsilon: float = 0.02

    # Reward learning
    pairs: int = 10_000
    reward_reg: float = 1e-4

    # Structured feedback
    smoothing: float = 1e-3
    feedback_lr: float = 0.1
    prior_share: float = 0.5

    # Output
    output_dir: Optional[str] = None


# Global settings instance
settings = Settings()
