# api/config_validator.py
"""
Startup configuration validator - fails fast when an engine setting is malformed.
"""

import logging
import os
import sys
from fractions import Fraction
from typing import List, Tuple

from api.logger import get_logger

logger = get_logger(__name__)


def _positive_int(name: str, errors: List[str], minimum: int = 1):
    raw = os.getenv(name)
    if raw is None:
        return
    try:
        value = int(raw)
    except ValueError:
        errors.append(f"{name}={raw!r} is not an integer")
        return
    if value < minimum:
        errors.append(f"{name}={value} must be >= {minimum}")


def validate_env_settings() -> Tuple[bool, List[str]]:
    """
    Validate the TSIRELSON_* environment variables that are set.

    Returns:
        Tuple of (is_valid, list_of_errors)
    """
    errors: List[str] = []

    raw = os.getenv("TSIRELSON_TARGET_WIDTH")
    if raw is not None:
        try:
            if "." in raw or Fraction(raw) <= 0:
                errors.append(f"TSIRELSON_TARGET_WIDTH={raw!r} must be a positive rational p/q")
        except (ValueError, ZeroDivisionError):
            errors.append(f"TSIRELSON_TARGET_WIDTH={raw!r} is not a rational")

    _positive_int("TSIRELSON_MAX_SWEEPS", errors)
    _positive_int("TSIRELSON_TAIL_TERMS", errors, minimum=0)
    _positive_int("TSIRELSON_ENUM_CAP", errors)
    _positive_int("TSIRELSON_MAX_JOBS", errors)

    level = os.getenv("TSIRELSON_LOG_LEVEL")
    if level is not None and not isinstance(logging.getLevelName(level.upper()), int):
        errors.append(f"TSIRELSON_LOG_LEVEL={level!r} is not a logging level")

    out_dir = os.getenv("TSIRELSON_OUTPUT_DIR")
    if out_dir is not None and not out_dir.strip():
        errors.append("TSIRELSON_OUTPUT_DIR is empty")

    return len(errors) == 0, errors


def validate_optional_features() -> List[str]:
    """
    Check optional settings and return warnings.
    """
    warnings = []

    if not os.getenv("FRONTEND_ORIGIN"):
        warnings.append("FRONTEND_ORIGIN not set - only localhost origins may call the API")

    try:
        import dotenv  # noqa: F401
    except ImportError:
        warnings.append("python-dotenv not installed - .env files will be ignored")

    return warnings


def validate_startup_config(exit_on_failure: bool = True, exit_code: int = 1) -> bool:
    """
    Run all startup validation checks.

    Args:
        exit_on_failure: If True, sys.exit(exit_code) on validation failure
        exit_code: 1 for the HTTP service, 2 for the CLI

    Returns:
        True if all settings are valid
    """
    logger.debug("[CONFIG] Validating startup configuration...")

    is_valid, errors = validate_env_settings()

    if not is_valid:
        for err in errors:
            logger.error(f"[CONFIG] {err}")
        if exit_on_failure:
            sys.exit(exit_code)
        return False

    for warning in validate_optional_features():
        logger.debug(f"[CONFIG] {warning}")

    logger.debug("[CONFIG] Configuration validation complete")
    return True


if __name__ == "__main__":
    # Can be run standalone to check config
    validate_startup_config(exit_on_failure=False)
