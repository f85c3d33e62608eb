import logging
from typing import Tuple

import orjson
from opentelemetry import _logs, trace
from opentelemetry.exporter.otlp.proto.grpc._log_exporter import OTLPLogExporter
from opentelemetry.exporter.otlp.proto.grpc.trace_exporter import OTLPSpanExporter
from opentelemetry.instrumentation.logging import LoggingInstrumentor
from opentelemetry.sdk._logs import LoggerProvider, LoggingHandler
from opentelemetry.sdk._logs.export import BatchLogRecordProcessor
from opentelemetry.sdk.resources import Resource
from opentelemetry.sdk.trace import SpanProcessor, TracerProvider
from opentelemetry.sdk.trace.export import (
    BatchSpanProcessor,
    ConsoleSpanExporter,
    SimpleSpanProcessor,
)
from opentelemetry.trace import Tracer

from proxlead.core.settings import settings

TRACER_SCOPE = "proxlead"


class StructuredFormatter(logging.Formatter):
    """Appends the category, operation, ids and metadata set by proxlead.core.logger."""

    def format(self, record: logging.LogRecord) -> str:
        line = super().format(record)
        operation = getattr(record, "operation", None)
        if operation is None:
            return line
        tags = f"[{getattr(record, 'category', '-')}:{operation}"
        if getattr(record, "run_id", None):
            tags += f" run={record.run_id}"
        if getattr(record, "replica_id", None) is not None:
            tags += f" replica={record.replica_id}"
        tags += "]"
        metadata = getattr(record, "metadata", None)
        if metadata:
            tags += " " + orjson.dumps(metadata, default=str).decode()
        return f"{line} {tags}"


def setup_logging(level: str | None = None) -> None:
    """Route every logger to one stderr handler with the structured formatter."""
    level = (level or settings.LOG_LEVEL).upper()
    handler = logging.StreamHandler()
    handler.setFormatter(StructuredFormatter(settings.LOG_FORMAT))
    logging.basicConfig(level=level, handlers=[handler], force=True)


def _span_processor(headers: Tuple[Tuple[str, str], ...]) -> SpanProcessor:
    if settings.OTEL_EXPORTER == "console":
        return SimpleSpanProcessor(ConsoleSpanExporter())
    return BatchSpanProcessor(
        OTLPSpanExporter(endpoint=settings.OTEL_EXPORTER_OTLP_ENDPOINT, headers=headers)
    )


def setup_telemetry(
    service_name: str = settings.OTEL_SERVICE_NAME,
    service_version: str = settings.APP_VERSION,
) -> Tuple[Tracer, TracerProvider]:
    """Console logging plus OpenTelemetry spans; logs also go to OTLP unless the
    exporter is ``console``."""
    setup_logging()
    resource = Resource.create({"service.name": service_name, "service.version": service_version})
    headers = _parse_headers(settings.OTEL_EXPORTER_OTLP_HEADERS)

    tracer_provider = TracerProvider(resource=resource)
    tracer_provider.add_span_processor(_span_processor(headers))
    trace.set_tracer_provider(tracer_provider)

    if settings.OTEL_EXPORTER != "console":
        logger_provider = LoggerProvider(resource=resource)
        logger_provider.add_log_record_processor(
            BatchLogRecordProcessor(
                OTLPLogExporter(endpoint=settings.OTEL_EXPORTER_OTLP_ENDPOINT, headers=headers)
            )
        )
        _logs.set_logger_provider(logger_provider)
        logging.getLogger().addHandler(
            LoggingHandler(level=logging.NOTSET, logger_provider=logger_provider)
        )

    instrumentor = LoggingInstrumentor()
    if not instrumentor.is_instrumented_by_opentelemetry:
        instrumentor.instrument(set_logging_format=False)

    return trace.get_tracer(TRACER_SCOPE), tracer_provider


def get_tracer(scope: str = TRACER_SCOPE) -> Tracer:
    return trace.get_tracer(scope)


def _parse_headers(raw: str) -> Tuple[Tuple[str, str], ...]:
    """``k=v,k2="v2"`` -> gRPC metadata pairs."""
    pairs = (item.strip().split("=", 1) for item in raw.split(",") if "=" in item)
    return tuple((key, value.strip('"')) for key, value in pairs)
