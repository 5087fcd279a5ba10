"""
CamoFlow Logging Configuration

Provides logging for long-running training and evaluation jobs:
- Rotating file handler (10MB max, 5 backups) under ~/.camoflow/logs
- Console handler for warnings and errors
- Per-run log file inside a training directory
- Operation timing through a context manager
"""

import logging
import os
import sys
from contextlib import contextmanager
from datetime import datetime
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Iterator, Optional

LOG_DIR_ENV = "CAMOFLOW_LOG_DIR"
RUN_LOG_FILE = "run.log"

FILE_FORMAT = (
    '%(asctime)s - %(name)s - %(levelname)s - '
    '[%(filename)s:%(lineno)d] - %(funcName)s() - %(message)s'
)
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'


def default_log_dir() -> Path:
    """Log directory from CAMOFLOW_LOG_DIR or ~/.camoflow/logs"""
    override = os.environ.get(LOG_DIR_ENV)
    if override:
        return Path(override).expanduser()
    return Path.home() / ".camoflow" / "logs"


def setup_logging(
    log_dir: Optional[Path] = None,
    level: str = "INFO",
    console_level: str = "WARNING"
) -> logging.Logger:
    """
    Setup logging for CamoFlow

    Args:
        log_dir: Directory for log files (default: CAMOFLOW_LOG_DIR or ~/.camoflow/logs)
        level: Logger level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        console_level: Console logging level (default: WARNING)

    Returns:
        Configured 'camoflow' logger

    Example:
        >>> logger = setup_logging(level="DEBUG")
        >>> logger.info("Training started")
    """
    log_dir = log_dir or default_log_dir()
    log_dir.mkdir(parents=True, exist_ok=True)

    logger = logging.getLogger('camoflow')
    logger.setLevel(getattr(logging, level.upper()))

    # Replace handlers from an earlier call in the same process
    for handler in list(logger.handlers):
        handler.close()
        logger.removeHandler(handler)

    log_file = log_dir / f"camoflow_{datetime.now():%Y%m%d}.log"
    file_handler = RotatingFileHandler(
        log_file,
        maxBytes=10 * 1024 * 1024,  # 10MB
        backupCount=5,
        encoding='utf-8'
    )
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(logging.Formatter(FILE_FORMAT, datefmt=DATE_FORMAT))

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(getattr(logging, console_level.upper()))
    console_handler.setFormatter(logging.Formatter('%(levelname)s: %(message)s'))

    logger.addHandler(file_handler)
    logger.addHandler(console_handler)

    logger.debug(f"Logging to {log_file} (level {level}, console {console_level})")
    return logger


def get_logger(name: str = 'camoflow') -> logging.Logger:
    """
    Get logger instance

    Args:
        name: Dotted logger name under 'camoflow' (e.g. 'camoflow.training')
    """
    return logging.getLogger(name)


@contextmanager
def run_log(directory: Path, level: int = logging.INFO) -> Iterator[Path]:
    """
    Copy every 'camoflow' record into <directory>/run.log while active

    The file is appended to, so a resumed run keeps its earlier history.

    Example:
        >>> with run_log(out_dir):
        ...     trainer.fit()
    """
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / RUN_LOG_FILE
    handler = logging.FileHandler(path, mode='a', encoding='utf-8')
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter('%(asctime)s %(levelname)s %(name)s: %(message)s', datefmt=DATE_FORMAT))
    logger = logging.getLogger('camoflow')
    previous = logger.level
    if logger.getEffectiveLevel() > level:
        logger.setLevel(level)
    logger.addHandler(handler)
    try:
        yield path
    finally:
        logger.removeHandler(handler)
        logger.setLevel(previous)
        handler.close()


@contextmanager
def log_operation(logger: logging.Logger, operation: str) -> Iterator[None]:
    """
    Log start, completion with duration, or failure with traceback

    Example:
        >>> with log_operation(logger, "evaluate"):
        ...     run_evaluation()
    """
    logger.info(f"Starting: {operation}")
    start_time = datetime.now()

    try:
        yield
        duration = (datetime.now() - start_time).total_seconds()
        logger.info(f"Completed: {operation} in {duration:.3f}s")
    except Exception as e:
        duration = (datetime.now() - start_time).total_seconds()
        logger.error(
            f"Failed: {operation} after {duration:.3f}s - {e}",
            exc_info=True
        )
        raise
