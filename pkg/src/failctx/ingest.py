"""Parsers for the three external telemetry sources.

HAR 1.2 archives become network-plane events, server log lines (JSON or
plain text) become server-plane events, and browser SDK documents become
browser-plane events. Malformed individual entries are rejected, never
fatal; only a structurally absent container raises.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Optional, Union
from urllib.parse import urlsplit

from .model import (
    BrowserEventKind,
    BrowserPayload,
    NetworkPayload,
    Plane,
    ServerPayload,
    Severity,
    TelemetryEvent,
    Timings,
    validate_correlation_id,
)

DEFAULT_CORRELATION_HEADER = "X-Correlation-Id"

# Per-phase timeout used for the timed_out flag when the source format does
# not carry one explicitly.
DEFAULT_PHASE_TIMEOUT_MS = 30000

BODY_DIGEST_LIMIT = 4096


class MalformedDocument(ValueError):
    """Top-level container of a source document is absent or unusable."""


@dataclass(frozen=True)
class Rejection:
    """Why one entry/line was not turned into an event."""

    reason: str


ParseOutcome = Union[TelemetryEvent, Rejection]


@dataclass
class ParseReport:
    accepted: int = 0
    rejected: int = 0
    rejections: list[tuple[int, str]] = field(default_factory=list)

    def reject(self, index: int, reason: str) -> None:
        self.rejected += 1
        self.rejections.append((index, reason))


_LEVEL_TO_SEVERITY = {
    "trace": Severity.DEBUG,
    "debug": Severity.DEBUG,
    "info": Severity.INFO,
    "notice": Severity.INFO,
    "warn": Severity.WARN,
    "warning": Severity.WARN,
    "error": Severity.ERROR,
    "err": Severity.ERROR,
    "severe": Severity.ERROR,
    "fatal": Severity.FATAL,
    "critical": Severity.FATAL,
    "crit": Severity.FATAL,
}


def severity_from_level(level: str) -> Severity:
    return _LEVEL_TO_SEVERITY.get(level.strip().lower(), Severity.INFO)


def parse_iso8601_ms(text: str) -> int:
    """Parse an ISO-8601 timestamp to integer milliseconds since epoch (UTC)."""
    value = text.strip()
    if value.endswith(("Z", "z")):
        value = value[:-1] + "+00:00"
    dt = datetime.fromisoformat(value)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(round(dt.timestamp() * 1000))


def body_document(text: Optional[str], content_type: Optional[str]) -> Optional[Any]:
    """Structured body representation bounded in size.

    JSON bodies are stored parsed; anything else as a digest of the first
    4096 characters plus the total length.
    """
    if text is None or text == "":
        return None
    if content_type and "json" in content_type.lower():
        try:
            return json.loads(text)
        except (json.JSONDecodeError, ValueError):
            pass
    return {"text_digest": text[:BODY_DIGEST_LIMIT], "total_length": len(text)}


def _header_pairs(raw: Any) -> tuple[tuple[str, str], ...]:
    pairs = []
    for item in raw or []:
        if isinstance(item, dict):
            pairs.append((str(item.get("name", "")), str(item.get("value", ""))))
    return tuple(pairs)


def header_value(headers: tuple[tuple[str, str], ...], name: str) -> Optional[str]:
    """First header value whose name matches case-insensitively."""
    wanted = name.lower()
    for header_name, value in headers:
        if header_name.lower() == wanted:
            return value
    return None


def _url_path(url: str) -> str:
    parts = urlsplit(url)
    path = parts.path or "/"
    if parts.query:
        return f"{path}?{parts.query}"
    return path


def parse_har(
    document: Any,
    session_id: Optional[str] = None,
    correlation_header: str = DEFAULT_CORRELATION_HEADER,
    phase_timeout_ms: int = DEFAULT_PHASE_TIMEOUT_MS,
) -> tuple[list[TelemetryEvent], ParseReport]:
    """Extract one network-plane event per HAR ``log.entries`` item.

    Raises MalformedDocument when ``log.entries`` is structurally absent;
    individual broken entries are rejected in the report instead.
    """
    if not isinstance(document, dict):
        raise MalformedDocument("HAR document is not a JSON object")
    log = document.get("log")
    if not isinstance(log, dict) or not isinstance(log.get("entries"), list):
        raise MalformedDocument("HAR document has no log.entries list")

    events: list[TelemetryEvent] = []
    report = ParseReport()
    for index, entry in enumerate(log["entries"]):
        outcome = _parse_har_entry(entry, session_id, correlation_header, phase_timeout_ms)
        if isinstance(outcome, Rejection):
            report.reject(index, outcome.reason)
        else:
            events.append(outcome)
            report.accepted += 1
    return events, report


def _parse_har_entry(
    entry: Any,
    session_id: Optional[str],
    correlation_header: str,
    phase_timeout_ms: int,
) -> ParseOutcome:
    if not isinstance(entry, dict):
        return Rejection("entry is not an object")
    request = entry.get("request")
    response = entry.get("response")
    if not isinstance(request, dict):
        return Rejection("missing request")
    if not isinstance(response, dict):
        return Rejection("missing response")

    started = entry.get("startedDateTime")
    if not isinstance(started, str) or not started:
        return Rejection("missing startedDateTime")
    try:
        timestamp_ms = parse_iso8601_ms(started)
    except ValueError:
        return Rejection(f"unparseable startedDateTime {started!r}")

    method = request.get("method")
    url = request.get("url")
    if not method or not isinstance(method, str):
        return Rejection("missing request.method")
    if not url or not isinstance(url, str):
        return Rejection("missing request.url")

    status_raw = response.get("status")
    if not isinstance(status_raw, int) or isinstance(status_raw, bool):
        return Rejection("missing response.status")
    if not 0 <= status_raw <= 599:
        return Rejection(f"response.status {status_raw} outside [0, 599]")

    request_headers = _header_pairs(request.get("headers"))
    response_headers = _header_pairs(response.get("headers"))

    timings_raw = entry.get("timings") or {}
    phases = {}
    for name in ("blocked", "dns", "connect", "send", "wait", "receive"):
        value = timings_raw.get(name, -1)
        if not isinstance(value, (int, float)) or isinstance(value, bool) or value < 0:
            value = -1
        phases[name] = value
    timings = Timings(**phases)

    timed_out = status_raw == 0 or any(
        value > phase_timeout_ms for value in phases.values()
    )

    post_data = request.get("postData") or {}
    request_body = body_document(post_data.get("text"), post_data.get("mimeType"))
    content = response.get("content") or {}
    response_body = body_document(content.get("text"), content.get("mimeType"))

    correlation_id = header_value(request_headers, correlation_header)
    if correlation_id is not None:
        try:
            validate_correlation_id(correlation_id)
        except ValueError:
            correlation_id = None

    severity = Severity.ERROR if (status_raw == 0 or status_raw >= 400) else Severity.INFO

    return TelemetryEvent(
        plane=Plane.NETWORK,
        timestamp_ms=timestamp_ms,
        severity=severity,
        payload=NetworkPayload(
            method=method.upper(),
            path=_url_path(url),
            status=status_raw,
            request_headers=request_headers,
            request_body=request_body,
            response_headers=response_headers,
            response_body=response_body,
            timings=timings,
            timed_out=timed_out,
        ),
        correlation_id=correlation_id,
        session_id=session_id,
    )


# Plain-text fallback: `<ISO8601> <LEVEL> [<service>] <message>`
_PLAIN_LINE = re.compile(
    r"^(?P<ts>\d{4}-\d{2}-\d{2}[T ]\d{2}:\d{2}:\d{2}(?:\.\d+)?(?:Z|[+-]\d{2}:?\d{2})?)\s+"
    r"(?P<level>[A-Za-z]+)\s+\[(?P<service>[^\]]+)\]\s+(?P<message>.+)$"
)


def parse_server_log_line(line: str, session_id: Optional[str] = None) -> ParseOutcome:
    """One server log line to one server-plane event, or a Rejection.

    JSON-object lines map {ts|timestamp, level, service, message,
    stack|stack_trace, trace_id|correlation_id, request_id}, first alias
    winning. Anything else goes through the plain-text fallback pattern.
    """
    stripped = line.strip()
    if not stripped:
        return Rejection("empty line")

    if stripped.startswith("{"):
        try:
            doc = json.loads(stripped)
        except json.JSONDecodeError:
            return Rejection("line starts like JSON but does not parse")
        if not isinstance(doc, dict):
            return Rejection("JSON line is not an object")
        return _server_event_from_json(doc, session_id)

    match = _PLAIN_LINE.match(stripped)
    if match is None:
        return Rejection("matches neither JSON nor plain-text log format")
    try:
        timestamp_ms = parse_iso8601_ms(match.group("ts"))
    except ValueError:
        return Rejection(f"unparseable timestamp {match.group('ts')!r}")
    level = match.group("level")
    return TelemetryEvent(
        plane=Plane.SERVER,
        timestamp_ms=timestamp_ms,
        severity=severity_from_level(level),
        payload=ServerPayload(
            service=match.group("service"),
            level=level,
            message=match.group("message"),
        ),
        session_id=session_id,
    )


def _first_of(doc: dict[str, Any], *names: str) -> Any:
    for name in names:
        if name in doc and doc[name] is not None:
            return doc[name]
    return None


def _server_event_from_json(doc: dict[str, Any], session_id: Optional[str]) -> ParseOutcome:
    ts_raw = _first_of(doc, "ts", "timestamp")
    if ts_raw is None:
        return Rejection("missing ts/timestamp")
    if isinstance(ts_raw, bool):
        return Rejection("ts/timestamp is not a timestamp")
    if isinstance(ts_raw, (int, float)):
        timestamp_ms = int(ts_raw)
    elif isinstance(ts_raw, str):
        try:
            timestamp_ms = parse_iso8601_ms(ts_raw)
        except ValueError:
            return Rejection(f"unparseable timestamp {ts_raw!r}")
    else:
        return Rejection("ts/timestamp is not a timestamp")
    if timestamp_ms < 0:
        return Rejection("timestamp before epoch")

    message = doc.get("message")
    if not isinstance(message, str) or not message:
        return Rejection("missing message")

    level = doc.get("level")
    level_text = str(level) if level is not None else "INFO"

    correlation_id = _first_of(doc, "trace_id", "correlation_id")
    if correlation_id is not None:
        try:
            correlation_id = validate_correlation_id(str(correlation_id))
        except ValueError:
            correlation_id = None

    stack = _first_of(doc, "stack", "stack_trace")
    request_id = doc.get("request_id")

    return TelemetryEvent(
        plane=Plane.SERVER,
        timestamp_ms=timestamp_ms,
        severity=severity_from_level(level_text),
        payload=ServerPayload(
            service=str(doc.get("service", "unknown")),
            level=level_text,
            message=message,
            stack_trace=str(stack) if stack is not None else None,
            request_id=str(request_id) if request_id is not None else None,
        ),
        correlation_id=correlation_id,
        session_id=session_id,
    )


def parse_server_log_lines(
    lines: list[str], session_id: Optional[str] = None
) -> tuple[list[TelemetryEvent], ParseReport]:
    events: list[TelemetryEvent] = []
    report = ParseReport()
    for index, line in enumerate(lines):
        outcome = parse_server_log_line(line, session_id)
        if isinstance(outcome, Rejection):
            report.reject(index, outcome.reason)
        else:
            events.append(outcome)
            report.accepted += 1
    return events, report


_BROWSER_MANDATORY = ("plane", "timestamp_ms", "payload")
_BROWSER_PAYLOAD_MANDATORY = ("kind", "message", "page_url")


def parse_browser_event(document: Any) -> ParseOutcome:
    """Validate one canonical-wire browser event document.

    Unknown extra fields are ignored; missing mandatory fields are rejected
    naming the field. Severity defaults to error when absent.
    """
    if not isinstance(document, dict):
        return Rejection("document is not an object")

    for name in _BROWSER_MANDATORY:
        if name not in document:
            return Rejection(f"missing field {name}")

    if document["plane"] != Plane.BROWSER.value:
        return Rejection("plane mismatch")

    timestamp_raw = document["timestamp_ms"]
    if not isinstance(timestamp_raw, (int, float)) or isinstance(timestamp_raw, bool):
        return Rejection("timestamp_ms is not a number")
    timestamp_ms = int(timestamp_raw)
    if timestamp_ms < 0:
        return Rejection("timestamp_ms before epoch")

    payload_doc = document["payload"]
    if not isinstance(payload_doc, dict):
        return Rejection("payload is not an object")
    for name in _BROWSER_PAYLOAD_MANDATORY:
        if name not in payload_doc:
            return Rejection(f"missing field payload.{name}")

    try:
        kind = BrowserEventKind(payload_doc["kind"])
    except ValueError:
        return Rejection(f"unknown payload.kind {payload_doc['kind']!r}")

    message = payload_doc["message"]
    if not isinstance(message, str):
        return Rejection("payload.message is not a string")
    page_url = payload_doc["page_url"]
    if not isinstance(page_url, str):
        return Rejection("payload.page_url is not a string")

    severity_raw = document.get("severity", Severity.ERROR.value)
    try:
        severity = Severity(severity_raw)
    except ValueError:
        return Rejection(f"unknown severity {severity_raw!r}")

    correlation_id = document.get("correlation_id")
    if correlation_id is not None:
        try:
            correlation_id = validate_correlation_id(str(correlation_id))
        except ValueError as exc:
            return Rejection(f"bad correlation_id: {exc}")

    stack = payload_doc.get("stack")
    clicked = payload_doc.get("clicked_element")
    try:
        payload = BrowserPayload(
            kind=kind,
            message=message,
            page_url=page_url,
            stack=str(stack) if stack is not None else None,
            clicked_element=str(clicked) if clicked is not None else None,
            state_snapshot=payload_doc.get("state_snapshot"),
        )
    except ValueError as exc:
        return Rejection(str(exc))

    session_id = document.get("session_id")
    return TelemetryEvent(
        plane=Plane.BROWSER,
        timestamp_ms=timestamp_ms,
        severity=severity,
        payload=payload,
        correlation_id=correlation_id,
        session_id=str(session_id) if session_id is not None else None,
    )


def parse_browser_events(
    documents: list[Any],
) -> tuple[list[TelemetryEvent], ParseReport]:
    events: list[TelemetryEvent] = []
    report = ParseReport()
    for index, document in enumerate(documents):
        outcome = parse_browser_event(document)
        if isinstance(outcome, Rejection):
            report.reject(index, outcome.reason)
        else:
            events.append(outcome)
            report.accepted += 1
    return events, report
