from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    # Service Configuration
    SERVICE_NAME: str = "monopole-curves"
    VERSION: str = "1.0.0"
    DEBUG: bool = False

    # Numerical Tolerances
    ABS_TOL: float = 1e-12
    REL_TOL: float = 1e-12
    MAX_TERMS: int = 100000
    THETA_TOL: float = 1e-12

    # Nahm Flow Configuration
    RK4_STEP: float = 1e-3
    GRID_MARGIN: float = 0.05  # distance kept from the poles at z = +-1
    ZERO_SCAN_NODES: int = 2001
    STIFFNESS_LIMIT: float = 1e8
    NU_CROSS_CHECK_TOL: float = 1e-7

    # Batch Configuration
    MONOPOLE_THREADS: int = 4

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_CONFIG_PATH: str = "configs/logging.yaml"

    class Config:
        env_file = ".env"
        case_sensitive = True
        extra = "ignore"  # Ignore extra env vars


# Global settings instance
settings = Settings()
