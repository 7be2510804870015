"""HTTP service: ingestion, datasource registration, and SSE query streaming."""

from .app import AppContext, create_app
from .config import AppConfig, load_config
from .events import SseEvent, check_stream, format_sse, parse_sse

__all__ = [
    "AppContext",
    "create_app",
    "AppConfig",
    "load_config",
    "SseEvent",
    "check_stream",
    "format_sse",
    "parse_sse",
]
