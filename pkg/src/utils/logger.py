import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Dict

DEFAULT_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
DEFAULT_MAX_BYTES = 10 * 1024 * 1024
DEFAULT_BACKUPS = 5

# Held at WARNING when the lab runs at DEBUG
NOISY_LOGGERS = ('prometheus_client',)


def _resolve_level(level_name: str) -> int:
    level = logging.getLevelName(str(level_name).upper())
    if not isinstance(level, int):
        raise ValueError(f"Unknown log level: {level_name}")
    return level


def _file_handler(log_file: str, config: Dict[str, Any]) -> RotatingFileHandler:
    path = Path(log_file)
    path.parent.mkdir(parents=True, exist_ok=True)
    return RotatingFileHandler(
        path,
        maxBytes=config.get('max_size', DEFAULT_MAX_BYTES),
        backupCount=config.get('backup_count', DEFAULT_BACKUPS),
    )


def setup_logging(config: Dict[str, Any]) -> None:
    """
    Configure the root logger for a run

    Log lines go to stdout and, when ``file`` is set, to a rotating file.
    Reports are written to their own files, so logging never touches them.

    Args:
        config: level, file, max_size, backup_count, format

    Raises:
        ValueError: If the level name is unknown
    """
    level_name = config.get('level') or 'INFO'
    level = _resolve_level(level_name)
    formatter = logging.Formatter(config.get('format') or DEFAULT_FORMAT)

    handlers = [logging.StreamHandler(sys.stdout)]
    if config.get('file'):
        handlers.append(_file_handler(config['file'], config))

    root_logger = logging.getLogger()
    root_logger.setLevel(level)
    # run() may be called more than once per process (tests)
    for old in list(root_logger.handlers):
        root_logger.removeHandler(old)
    for handler in handlers:
        handler.setFormatter(formatter)
        root_logger.addHandler(handler)

    if level == logging.DEBUG:
        for name in NOISY_LOGGERS:
            logging.getLogger(name).setLevel(logging.WARNING)

    logging.debug(f"Logging initialized at level {level_name}")
