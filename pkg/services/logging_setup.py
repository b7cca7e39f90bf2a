"""
Logging configuration for singlab.
Configures structlog once per process; events go to stderr so CSV rows
printed on stdout stay clean.
"""

import logging
import os
import sys
from typing import Optional

import structlog

_configured = False


def _stderr_logger(*_args) -> structlog.PrintLogger:
    # sys.stderr is looked up per logger so redirected streams are honoured
    return structlog.PrintLogger(file=sys.stderr)


def configure_logging(level: Optional[str] = None, json_logs: Optional[bool] = None) -> None:
    global _configured
    level = (level or os.getenv("SINGLAB_LOG_LEVEL", "INFO")).upper()
    if json_logs is None:
        json_logs = os.getenv("SINGLAB_LOG_JSON", "0") in ("1", "true", "yes")
    numeric = logging.getLevelName(level)
    if not isinstance(numeric, int):
        numeric = logging.INFO

    renderer = structlog.processors.JSONRenderer(sort_keys=True) if json_logs \
        else structlog.dev.ConsoleRenderer(colors=False)
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.format_exc_info,
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(numeric),
        logger_factory=_stderr_logger,
        cache_logger_on_first_use=False,
    )
    _configured = True


def ensure_logging() -> None:
    """Configure with environment defaults unless the CLI already did."""
    if not _configured:
        configure_logging()
