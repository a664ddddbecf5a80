import logging
import os
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path

from .config import config_by_name

LOG_FORMAT = "%(asctime)s %(levelname)s [%(name)s] %(message)s"
LOG_FILE_NAME = "multitask_diffusion.log"


class Runtime:
    """Resolved configuration plus the package logger for one CLI invocation."""

    def __init__(self, config_name, config):
        self.name = config_name
        self.config = config
        self.logger = logging.getLogger(__name__)
        self.handle_error = None

    @property
    def debug(self):
        return bool(self.config.get("DEBUG", False))


def create_runtime(config_name=None):
    # Load .env before any config class attribute is read
    from dotenv import load_dotenv

    load_dotenv(Path(__file__).resolve().parent.parent / ".env")

    if config_name is None:
        config_name = os.environ.get("MTD_ENV", "development")

    config_cls = config_by_name.get(config_name, config_by_name["development"])
    config = {key: getattr(config_cls, key) for key in dir(config_cls) if key.isupper()}
    runtime = Runtime(config_name, config)

    configure_logging(runtime)
    if hasattr(config_cls, "init_app"):
        config_cls.init_app(runtime)

    from .errors import register_error_handlers

    register_error_handlers(runtime)
    return runtime


def configure_logging(runtime):
    """Console logging always; rotating file logging outside debug mode."""
    logger = runtime.logger
    level = getattr(logging, str(runtime.config.get("LOG_LEVEL", "INFO")), logging.INFO)
    logger.setLevel(level)

    for handler in list(logger.handlers):
        if getattr(handler, "_mtd_managed", False):
            logger.removeHandler(handler)
            handler.close()

    stream_handler = logging.StreamHandler(sys.stderr)
    stream_handler.setFormatter(logging.Formatter(LOG_FORMAT))
    stream_handler.setLevel(level)
    stream_handler._mtd_managed = True
    logger.addHandler(stream_handler)

    if runtime.debug or not runtime.config.get("LOG_TO_FILE", False):
        return

    log_dir = Path(runtime.config["LOG_DIR"])
    log_dir.mkdir(parents=True, exist_ok=True)

    file_handler = RotatingFileHandler(
        log_dir / LOG_FILE_NAME,
        maxBytes=5 * 1024 * 1024,  # 5 MB
        backupCount=5,
    )
    file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
    file_handler.setLevel(logging.INFO)
    file_handler._mtd_managed = True
    logger.addHandler(file_handler)
