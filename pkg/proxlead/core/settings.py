from pathlib import Path

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=(".env", ".env.local", ".env.development"),
        env_file_encoding="utf-8",
        extra="ignore",
        case_sensitive=True,
    )

    # Application
    ENVIRONMENT: str = "development"
    APP_NAME: str = "proxlead-sim"
    APP_VERSION: str = "0.1.0"

    # Output
    OUTPUT_DIR: Path = Path("runs")
    REFERENCE_CACHE_DIR: Path = Path(".reference-cache")

    # Execution
    MAX_WORKERS: int = 1

    # Numerics
    ASSUMPTION_TOL: float = 1e-10
    EIGEN_ZERO_TOL: float = 1e-9
    INVARIANT_TOL: float = 1e-10
    DUAL_ROW_SUM_TOL: float = 1e-8
    REFERENCE_TOL: float = 1e-12
    REFERENCE_MAX_ITER: int = 1_000_000
    DIVERGENCE_NORM: float = 1e12
    VARIANCE_ENUMERATION_LIMIT: int = 64

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    # Monitoring
    OTEL_ENABLED: bool = False
    OTEL_SERVICE_NAME: str = "proxlead-sim"
    OTEL_EXPORTER: str = "otlp"
    OTEL_EXPORTER_OTLP_ENDPOINT: str = "http://localhost:4317"
    OTEL_EXPORTER_OTLP_HEADERS: str = ""

    @property
    def parallel(self) -> bool:
        """Whether replicas are dispatched to a process pool."""
        return self.MAX_WORKERS > 1

    @property
    def worker_config(self) -> dict:
        """Environment-specific process-pool configuration."""
        if self.ENVIRONMENT == "production":
            return {"max_workers": self.MAX_WORKERS, "max_tasks_per_child": 64}
        return {"max_workers": self.MAX_WORKERS}


settings = Settings()
