"""
Logging configuration for the city excellence pipeline.
Diagnostics go to stderr; data files never receive log output.
"""

import logging
import sys
import functools
from typing import Callable, Any

import structlog


_configured = False


def configure_logging(level: str = "INFO") -> None:
    """Configure structlog and the stdlib root logger to write to stderr."""
    global _configured
    numeric_level = getattr(logging, str(level).upper(), logging.INFO)

    logging.basicConfig(
        level=numeric_level,
        format="%(message)s",
        stream=sys.stderr,
        force=True,
    )
    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.format_exc_info,
            structlog.dev.ConsoleRenderer(colors=False),
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=False,
    )
    _configured = True


def get_logger(name: str) -> structlog.stdlib.BoundLogger:
    """Get a logger instance."""
    if not _configured:
        configure_logging()
    return structlog.get_logger(name)


def log_operation(operation: str):
    """Decorator to log pipeline operations."""
    def decorator(func: Callable) -> Callable:
        @functools.wraps(func)
        def wrapper(*args, **kwargs) -> Any:
            logger = get_logger("operations")
            logger.debug("operation started", operation=operation)
            try:
                result = func(*args, **kwargs)
                logger.debug("operation completed", operation=operation)
                return result
            except Exception as e:
                logger.error("operation failed", operation=operation, error=str(e))
                raise
        return wrapper
    return decorator


def log_api_call(endpoint: str, method: str):
    """Decorator to log remote geocoder calls."""
    def decorator(func: Callable) -> Callable:
        @functools.wraps(func)
        async def wrapper(*args, **kwargs) -> Any:
            logger = get_logger("geocoder_client")
            logger.debug("API call started", method=method, endpoint=endpoint)
            try:
                result = await func(*args, **kwargs)
                logger.debug("API call completed", method=method, endpoint=endpoint)
                return result
            except Exception as e:
                logger.error("API call failed", method=method, endpoint=endpoint, error=str(e))
                raise
        return wrapper
    return decorator
