"""Structured logging with run/replica correlation and OpenTelemetry trace ids.

Records carry their structured fields in ``extra`` so that the OTLP log
exporter ships them as attributes; the console formatter only prints the
message.
"""

import logging
import time
import uuid
from contextlib import contextmanager
from contextvars import ContextVar
from enum import StrEnum
from typing import Any, Iterator, Mapping, Optional

import numpy as np
from opentelemetry import trace

RUN_ID: ContextVar[Optional[str]] = ContextVar("run_id", default=None)
REPLICA_ID: ContextVar[Optional[int]] = ContextVar("replica_id", default=None)


class LogCategory(StrEnum):
    TOPOLOGY = "topology"
    COMPRESSION = "compression"
    PROBLEM = "problem"
    ORACLE = "oracle"
    ALGORITHM = "algorithm"
    HARNESS = "harness"
    STORAGE = "storage"
    SYSTEM = "system"


INLINE_ARRAY_SIZE = 8


def summarize(value: Any) -> Any:
    """Log-safe form of a metadata value; arrays collapse to shape and norm."""
    if isinstance(value, np.ndarray):
        if value.size <= INLINE_ARRAY_SIZE:
            return value.tolist()
        finite = bool(np.all(np.isfinite(value)))
        return {
            "shape": list(value.shape),
            "dtype": str(value.dtype),
            "norm": float(np.linalg.norm(value)) if finite else None,
            "finite": finite,
        }
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Mapping):
        return {str(k): summarize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [summarize(v) for v in value]
    return value


def _trace_ids() -> dict[str, str]:
    span = trace.get_current_span()
    if not span.is_recording():
        return {}
    ctx = span.get_span_context()
    return {"trace_id": f"{ctx.trace_id:032x}", "span_id": f"{ctx.span_id:016x}"}


class Logger:
    """Module logger that tags every record with a category and an operation.

    Keyword arguments become the record's ``metadata``; numpy arrays in them
    are summarized rather than dumped.
    """

    def __init__(self, name: str, category: LogCategory = LogCategory.SYSTEM):
        self.name = name
        self.category = category
        self.logger = logging.getLogger(name)

    def _emit(
        self,
        level: int,
        message: str,
        operation: str,
        error: Optional[BaseException] = None,
        **metadata: Any,
    ) -> None:
        if not self.logger.isEnabledFor(level):
            return
        fields: dict[str, Any] = {
            "operation": operation,
            "category": self.category.value,
            **_trace_ids(),
        }
        run_id, replica_id = RUN_ID.get(), REPLICA_ID.get()
        if run_id is not None:
            fields["run_id"] = run_id
        if replica_id is not None:
            fields["replica_id"] = replica_id
        if error is not None:
            metadata = {
                **metadata,
                "error_type": type(error).__name__,
                "error_message": str(error),
            }
        if metadata:
            fields["metadata"] = summarize(metadata)
        self.logger.log(level, message, extra=fields, exc_info=error is not None)

    def debug(self, message: str, operation: str, **metadata: Any) -> None:
        self._emit(logging.DEBUG, message, operation, **metadata)

    def info(self, message: str, operation: str, **metadata: Any) -> None:
        self._emit(logging.INFO, message, operation, **metadata)

    def warning(self, message: str, operation: str, **metadata: Any) -> None:
        self._emit(logging.WARNING, message, operation, **metadata)

    def error(
        self,
        message: str,
        operation: str,
        error: Optional[BaseException] = None,
        **metadata: Any,
    ) -> None:
        self._emit(logging.ERROR, message, operation, error=error, **metadata)


@contextmanager
def log_context(run_id: Optional[str] = None, replica_id: Optional[int] = None) -> Iterator[str]:
    """Bind run and replica ids to every record logged inside the block."""
    run_id = run_id or uuid.uuid4().hex[:12]
    run_token = RUN_ID.set(run_id)
    replica_token = REPLICA_ID.set(replica_id) if replica_id is not None else None
    try:
        yield run_id
    finally:
        if replica_token is not None:
            REPLICA_ID.reset(replica_token)
        RUN_ID.reset(run_token)


@contextmanager
def timed_operation(logger: Logger, operation: str, **metadata: Any) -> Iterator[None]:
    """Log completion (or failure) of the block with its duration in ms."""
    start = time.perf_counter_ns()
    try:
        yield
    except Exception as e:
        duration_ms = (time.perf_counter_ns() - start) / 1e6
        logger.error(
            f"Failed {operation}", operation, error=e, duration_ms=duration_ms, **metadata
        )
        raise
    duration_ms = (time.perf_counter_ns() - start) / 1e6
    logger.info(f"Completed {operation}", operation, duration_ms=duration_ms, **metadata)


def get_logger(name: str, category: LogCategory = LogCategory.SYSTEM) -> Logger:
    return Logger(name, category)
