# api/logger.py
"""
Structured logging utility with run IDs and context.

One CLI command or one HTTP request is a "run"; every log line emitted while
it is active is tagged with its id. Output goes to stderr so that JSON
written to stdout by the CLI stays machine readable.
"""

import logging
import os
import sys
import uuid
from typing import Optional
from contextvars import ContextVar

# Run context for tracking run IDs across threads and async calls
run_id_var: ContextVar[Optional[str]] = ContextVar('run_id', default=None)

logging.basicConfig(
    level=getattr(logging, os.getenv("TSIRELSON_LOG_LEVEL", "INFO").upper(), logging.INFO),
    format='%(asctime)s [%(levelname)s] [%(name)s] %(message)s',
    handlers=[logging.StreamHandler(sys.stderr)]
)


def get_logger(name: str) -> logging.Logger:
    """Get a logger instance with the given name."""
    return logging.getLogger(name)


def new_run_id() -> str:
    return uuid.uuid4().hex


def set_run_id(run_id: str):
    """Set run ID for current context."""
    run_id_var.set(run_id)


def get_run_id() -> Optional[str]:
    """Get run ID from current context."""
    return run_id_var.get()


class RunLogger(logging.LoggerAdapter):
    """Logger adapter that automatically includes the run ID."""

    def process(self, msg, kwargs):
        run_id = get_run_id()
        if run_id:
            msg = f"[run:{run_id[:8]}] {msg}"
        return msg, kwargs


def get_run_logger(name: str) -> RunLogger:
    return RunLogger(get_logger(name), {})
