"""
Logging utilities for the Lua reduction-semantics engine.

Every engine module logs under the ``lua_semantics`` logger hierarchy. Log
records go to stderr or a rotating file, never to stdout, which belongs to
the Lua program being run.
"""

import logging
import logging.handlers
import threading
from pathlib import Path
from typing import Optional

ROOT_LOGGER_NAME = "lua_semantics"
DEFAULT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
LOG_FILE_MAX_BYTES = 10 * 1024 * 1024
LOG_FILE_BACKUPS = 5


def parse_log_level(name: str) -> int:
    """Numeric level for a level name in any case; unknown names give WARNING."""
    level = logging.getLevelName(name.upper())
    return level if isinstance(level, int) else logging.WARNING


def setup_logging(
    log_level: str = "WARNING",
    log_file: Optional[str] = None,
    console: bool = True,
    log_format: str = DEFAULT_FORMAT
) -> logging.Logger:
    """
    Configure the package logger, replacing handlers from earlier calls.

    Args:
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_file: Path to a rotating log file (if None, file logging is disabled)
        console: Whether to log to stderr
        log_format: Format string for log messages

    Returns:
        The package logger
    """
    level = parse_log_level(log_level)
    logger = logging.getLogger(ROOT_LOGGER_NAME)
    logger.setLevel(level)
    for handler in logger.handlers[:]:
        logger.removeHandler(handler)
        handler.close()

    handlers = []
    if console:
        handlers.append(logging.StreamHandler())
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.handlers.RotatingFileHandler(
            log_file, maxBytes=LOG_FILE_MAX_BYTES, backupCount=LOG_FILE_BACKUPS))

    formatter = logging.Formatter(log_format)
    for handler in handlers:
        handler.setLevel(level)
        handler.setFormatter(formatter)
        logger.addHandler(handler)
    return logger


def get_logger(name: Optional[str] = None) -> logging.Logger:
    """Logger ``lua_semantics.<name>``, or the package logger when ``name`` is empty."""
    if name:
        return logging.getLogger(f"{ROOT_LOGGER_NAME}.{name}")
    return logging.getLogger(ROOT_LOGGER_NAME)


class ProgressLogger:
    """
    Progress through a conformance corpus, logged every 5 % of the cases.

    Updates may come from several worker threads at once.
    """

    def __init__(self, logger: logging.Logger, total_cases: int):
        self.logger = logger
        self.total_cases = total_cases
        self.finished = 0
        self.failed = 0
        self.last_percentage = 0
        self._lock = threading.Lock()

    def update(self, passed: bool = True) -> None:
        """
        Record one finished case.

        Args:
            passed: Whether the case passed
        """
        with self._lock:
            self.finished += 1
            if not passed:
                self.failed += 1
            if self.total_cases <= 0:
                return
            percentage = self.finished * 100 // self.total_cases
            if percentage >= self.last_percentage + 5 or self.finished == self.total_cases:
                self.logger.info(f"Progress: {percentage}% "
                                 f"({self.finished}/{self.total_cases} cases, {self.failed} failed)")
                self.last_percentage = percentage
