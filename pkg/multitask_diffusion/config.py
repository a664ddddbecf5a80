import os
from pathlib import Path

BASE_DIR = Path(__file__).resolve().parent.parent


class Config:
    # Output locations
    OUTPUT_DIR = os.environ.get("MTD_OUTPUT_DIR", str(BASE_DIR / "results"))
    LOG_DIR = os.environ.get("MTD_LOG_DIR", str(BASE_DIR / "logs"))
    LOG_LEVEL = os.environ.get("MTD_LOG_LEVEL", "INFO").upper()
    LOG_TO_FILE = os.environ.get("MTD_LOG_TO_FILE", "true").lower() == "true"

    # Monte Carlo execution
    WORKERS = int(os.environ.get("MTD_WORKERS", "1"))
    RUN_BLOCK_SIZE = int(os.environ.get("MTD_RUN_BLOCK_SIZE", "25"))
    DEFAULT_MASTER_SEED = int(os.environ.get("MTD_SEED", "0"))

    # Numerical guards
    DIVERGENCE_THRESHOLD = 1e12
    PREDICTOR_MAX_DIM = 256


class DevelopmentConfig(Config):
    DEBUG = True

    @classmethod
    def init_app(cls, runtime):
        cpu_count = os.cpu_count() or 1
        if cls.WORKERS > cpu_count:
            runtime.logger.warning(
                "MTD_WORKERS=%s exceeds the %s available CPUs; runs will oversubscribe.", cls.WORKERS, cpu_count
            )


class ProductionConfig(Config):
    DEBUG = False

    @classmethod
    def init_app(cls, runtime):
        for name in ("MTD_WORKERS", "MTD_RUN_BLOCK_SIZE"):
            raw = os.environ.get(name)
            if raw is None:
                continue
            try:
                value = int(raw)
            except ValueError as exc:
                raise RuntimeError(f"{name} must be an integer when set.") from exc
            if value <= 0:
                raise RuntimeError(f"{name} must be at least 1 when set.")

        output_dir = Path(os.environ.get("MTD_OUTPUT_DIR", cls.OUTPUT_DIR))
        if output_dir.exists() and not output_dir.is_dir():
            raise RuntimeError(f"MTD_OUTPUT_DIR points at a file, not a directory: {output_dir}")


class TestingConfig(Config):
    TESTING = True
    DEBUG = False
    LOG_TO_FILE = False
    WORKERS = 1


config_by_name = {
    "development": DevelopmentConfig,
    "production": ProductionConfig,
    "testing": TestingConfig,
}
