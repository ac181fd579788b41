import logging
import logging.config
import sys
from pathlib import Path
from typing import Optional

import yaml

from src.config import settings


def setup_logger(name: str = None) -> logging.Logger:
    """
    Setup and configure logger for the application.

    Log records go to stderr so that JSON and CSV results on stdout stay
    machine readable.

    Args:
        name: Logger name (defaults to root logger if None)

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)

    log_level = getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO)
    logger.setLevel(log_level)

    # Remove existing handlers to avoid duplicates
    if logger.hasHandlers():
        logger.handlers.clear()

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(log_level)

    formatter = logging.Formatter(
        fmt='%(asctime)s - %(name)s - %(levelname)s - [%(filename)s:%(lineno)d] - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    logger.propagate = False

    return logger


def configure_logging(config_path: Optional[str] = None) -> bool:
    """
    Apply a YAML dictConfig (console, rotating file and JSON formatters).

    Loggers already created by setup_logger are re-attached to the
    configured ``src`` logger tree.

    Args:
        config_path: Path to the YAML file (defaults to settings.LOG_CONFIG_PATH)

    Returns:
        True if the configuration was applied, False if the file is missing
    """
    path = Path(config_path or settings.LOG_CONFIG_PATH)
    if not path.exists():
        logger.warning(f"Logging config not found: {path}")
        return False

    with path.open("r", encoding="utf-8") as fh:
        config = yaml.safe_load(fh)

    # File handlers need their directory before dictConfig opens them
    for handler in config.get("handlers", {}).values():
        filename = handler.get("filename")
        if filename:
            Path(filename).parent.mkdir(parents=True, exist_ok=True)

    logging.config.dictConfig(config)

    for name in list(logging.root.manager.loggerDict):
        if name.startswith("src."):
            existing = logging.getLogger(name)
            existing.handlers.clear()
            existing.propagate = True

    return True


# Create default logger
logger = setup_logger(__name__)
