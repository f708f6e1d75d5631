"""Shared domain types, canonical event ordering, and the JSON wire format.

Every other module builds on the types defined here. Instances are immutable
after construction and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Union

WIRE_VERSION = 1

MAX_CORRELATION_ID_LEN = 128


class Plane(str, Enum):
    BROWSER = "browser"
    NETWORK = "network"
    SERVER = "server"


# Total order used only for tie-breaking simultaneous events.
PLANE_ORDER = {Plane.BROWSER: 0, Plane.NETWORK: 1, Plane.SERVER: 2}


class Severity(str, Enum):
    DEBUG = "debug"
    INFO = "info"
    WARN = "warn"
    ERROR = "error"
    FATAL = "fatal"


SEVERITY_RANK = {
    Severity.DEBUG: 0,
    Severity.INFO: 1,
    Severity.WARN: 2,
    Severity.ERROR: 3,
    Severity.FATAL: 4,
}


class BrowserEventKind(str, Enum):
    CONSOLE_ERROR = "console_error"
    UNHANDLED_REJECTION = "unhandled_rejection"
    NETWORK_STACK_TRACE = "network_stack_trace"
    MANUAL_REPORT = "manual_report"


class TriggerKind(str, Enum):
    AUTO_STATUS = "auto_status"
    MANUAL = "manual"


class FindingKind(str, Enum):
    CLIENT_SCHEMA_VIOLATION = "client_schema_violation"
    SERVER_CONTRACT_BREACH = "server_contract_breach"
    UNDOCUMENTED_ENDPOINT = "undocumented_endpoint"
    UNDOCUMENTED_STATUS = "undocumented_status"


class DefectKind(str, Enum):
    """Structured defect category carried by schema findings.

    The classifier keys on these instead of matching message strings.
    """

    MISSING_REQUIRED_FIELD = "missing_required_field"
    MISSING_QUERY_PARAM = "missing_query_param"
    TYPE_MISMATCH = "type_mismatch"
    ENUM_MISMATCH = "enum_mismatch"
    NULL_NOT_ALLOWED = "null_not_allowed"
    UNDECLARED_PROPERTY = "undeclared_property"


class RootCauseClass(str, Enum):
    FRONTEND_BUG = "frontend_bug"
    INFRASTRUCTURE_ISSUE = "infrastructure_issue"
    BACKEND_EXCEPTION = "backend_exception"
    CONTRACT_BREACH = "contract_breach"
    UNCLASSIFIED = "unclassified"


class Audience(str, Enum):
    END_USER = "end_user"
    DEVELOPER = "developer"


class Culprit(str, Enum):
    DATABASE = "database"
    NETWORK = "network"
    CLIENT_LOGIC = "client_logic"
    BACKEND = "backend"
    UNKNOWN = "unknown"


def validate_correlation_id(token: str) -> str:
    """Validate and return a correlation id token.

    Tokens are opaque: non-empty, whitespace-free, at most 128 characters.
    Comparison everywhere is exact equality.
    """
    if not isinstance(token, str) or not token:
        raise ValueError("correlation id must be a non-empty string")
    if len(token) > MAX_CORRELATION_ID_LEN:
        raise ValueError("correlation id exceeds 128 characters")
    if any(ch.isspace() for ch in token):
        raise ValueError("correlation id must not contain whitespace")
    return token


@dataclass(frozen=True)
class Timings:
    """HAR-style phase durations in milliseconds; -1 means unknown."""

    blocked: float = -1
    dns: float = -1
    connect: float = -1
    send: float = -1
    wait: float = -1
    receive: float = -1

    def __post_init__(self) -> None:
        for name, value in self.as_dict().items():
            if value != -1 and value < 0:
                raise ValueError(f"timing phase {name} must be >= 0 or exactly -1")

    def as_dict(self) -> dict[str, float]:
        return {
            "blocked": self.blocked,
            "dns": self.dns,
            "connect": self.connect,
            "send": self.send,
            "wait": self.wait,
            "receive": self.receive,
        }


@dataclass(frozen=True)
class BrowserPayload:
    kind: BrowserEventKind
    message: str
    page_url: str
    stack: Optional[str] = None
    clicked_element: Optional[str] = None
    state_snapshot: Optional[Any] = None

    def __post_init__(self) -> None:
        if self.kind is BrowserEventKind.MANUAL_REPORT and not self.message:
            raise ValueError("manual report requires a non-empty message")


@dataclass(frozen=True)
class NetworkPayload:
    method: str
    path: str
    status: int
    request_headers: tuple[tuple[str, str], ...] = ()
    request_body: Optional[Any] = None
    response_headers: tuple[tuple[str, str], ...] = ()
    response_body: Optional[Any] = None
    timings: Timings = field(default_factory=Timings)
    timed_out: bool = False

    def __post_init__(self) -> None:
        if not 0 <= self.status <= 599:
            raise ValueError(f"status {self.status} outside [0, 599]")


@dataclass(frozen=True)
class ServerPayload:
    service: str
    level: str
    message: str
    stack_trace: Optional[str] = None
    request_id: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.message:
            raise ValueError("server log message must be non-empty")


Payload = Union[BrowserPayload, NetworkPayload, ServerPayload]

_PAYLOAD_PLANE = {
    BrowserPayload: Plane.BROWSER,
    NetworkPayload: Plane.NETWORK,
    ServerPayload: Plane.SERVER,
}


@dataclass(frozen=True)
class TelemetryEvent:
    """One timestamped observation on a plane.

    event_id 0 means "not yet ingested"; the store assigns the real sequence
    number on append.
    """

    plane: Plane
    timestamp_ms: int
    severity: Severity
    payload: Payload
    event_id: int = 0
    correlation_id: Optional[str] = None
    session_id: Optional[str] = None

    def __post_init__(self) -> None:
        if self.timestamp_ms < 0:
            raise ValueError("timestamp_ms must be >= 0")
        expected = _PAYLOAD_PLANE.get(type(self.payload))
        if expected is not self.plane:
            raise ValueError(
                f"payload {type(self.payload).__name__} does not match plane {self.plane.value}"
            )
        if self.correlation_id is not None:
            validate_correlation_id(self.correlation_id)

    def sort_key(self) -> tuple[int, int, int]:
        return (self.timestamp_ms, PLANE_ORDER[self.plane], self.event_id)


@dataclass(frozen=True)
class FailureReport:
    """The trigger that starts a pipeline run: T_f plus optional C_id."""

    report_id: str
    failure_time_ms: int
    trigger: TriggerKind
    triggering_status: Optional[int] = None
    correlation_id: Optional[str] = None
    session_id: Optional[str] = None

    def __post_init__(self) -> None:
        if self.failure_time_ms < 0:
            raise ValueError("failure_time_ms must be >= 0")
        if self.trigger is TriggerKind.AUTO_STATUS:
            if self.triggering_status is None or not 400 <= self.triggering_status <= 599:
                raise ValueError("auto_status trigger requires triggering_status in [400, 599]")
        elif self.triggering_status is not None:
            raise ValueError("triggering_status only valid for auto_status trigger")
        if self.correlation_id is not None:
            validate_correlation_id(self.correlation_id)


@dataclass(frozen=True)
class ContractFinding:
    kind: FindingKind
    location: str
    expected: str
    actual: str
    message: str
    event_id: int
    defect: Optional[DefectKind] = None


@dataclass(frozen=True)
class Explanation:
    audience: Audience
    text: str
    culprit: Culprit
    summary: str
    degraded: bool = False


@dataclass(frozen=True)
class EntityCount:
    kind: str
    count: int


@dataclass(frozen=True)
class FailureContextObject:
    """The unified artifact: trigger, correlated events, findings, class,
    sanitization report, and explanations."""

    fco_id: str
    report: FailureReport
    events: tuple[TelemetryEvent, ...]
    findings: tuple[ContractFinding, ...] = ()
    root_cause: RootCauseClass = RootCauseClass.UNCLASSIFIED
    sanitization_report: tuple[EntityCount, ...] = ()
    explanations: tuple[Explanation, ...] = ()
    window_ms: int = 0
    truncated: bool = False


def canonical_order(events: list[TelemetryEvent]) -> list[TelemetryEvent]:
    """Stable sort by (timestamp, plane order browser<network<server, event_id)."""
    return sorted(events, key=TelemetryEvent.sort_key)


# --- wire format -----------------------------------------------------------
#
# One JSON document per event, snake_case names, fixed key order, None-valued
# optional fields omitted. JSONL for streams. Serializing a parsed document
# reproduces the original bytes.


def _headers_to_wire(headers: tuple[tuple[str, str], ...]) -> list[dict[str, str]]:
    return [{"name": n, "value": v} for n, v in headers]


def _headers_from_wire(raw: Any) -> tuple[tuple[str, str], ...]:
    if raw is None:
        return ()
    out = []
    for item in raw:
        if isinstance(item, dict):
            out.append((str(item.get("name", "")), str(item.get("value", ""))))
        else:
            name, value = item
            out.append((str(name), str(value)))
    return tuple(out)


def payload_to_wire(payload: Payload) -> dict[str, Any]:
    if isinstance(payload, BrowserPayload):
        doc: dict[str, Any] = {
            "kind": payload.kind.value,
            "message": payload.message,
            "page_url": payload.page_url,
        }
        if payload.stack is not None:
            doc["stack"] = payload.stack
        if payload.clicked_element is not None:
            doc["clicked_element"] = payload.clicked_element
        if payload.state_snapshot is not None:
            doc["state_snapshot"] = payload.state_snapshot
        return doc
    if isinstance(payload, NetworkPayload):
        doc = {
            "method": payload.method,
            "path": payload.path,
            "status": payload.status,
            "request_headers": _headers_to_wire(payload.request_headers),
            "response_headers": _headers_to_wire(payload.response_headers),
            "timings": payload.timings.as_dict(),
            "timed_out": payload.timed_out,
        }
        if payload.request_body is not None:
            doc["request_body"] = payload.request_body
        if payload.response_body is not None:
            doc["response_body"] = payload.response_body
        return doc
    doc = {
        "service": payload.service,
        "level": payload.level,
        "message": payload.message,
    }
    if payload.stack_trace is not None:
        doc["stack_trace"] = payload.stack_trace
    if payload.request_id is not None:
        doc["request_id"] = payload.request_id
    return doc


def payload_from_wire(plane: Plane, doc: dict[str, Any]) -> Payload:
    if plane is Plane.BROWSER:
        return BrowserPayload(
            kind=BrowserEventKind(doc["kind"]),
            message=doc["message"],
            page_url=doc["page_url"],
            stack=doc.get("stack"),
            clicked_element=doc.get("clicked_element"),
            state_snapshot=doc.get("state_snapshot"),
        )
    if plane is Plane.NETWORK:
        timings_doc = doc.get("timings") or {}
        return NetworkPayload(
            method=doc["method"],
            path=doc["path"],
            status=int(doc["status"]),
            request_headers=_headers_from_wire(doc.get("request_headers")),
            request_body=doc.get("request_body"),
            response_headers=_headers_from_wire(doc.get("response_headers")),
            response_body=doc.get("response_body"),
            timings=Timings(**{k: timings_doc.get(k, -1) for k in Timings().as_dict()}),
            timed_out=bool(doc.get("timed_out", False)),
        )
    return ServerPayload(
        service=doc["service"],
        level=doc["level"],
        message=doc["message"],
        stack_trace=doc.get("stack_trace"),
        request_id=doc.get("request_id"),
    )


def event_to_wire(event: TelemetryEvent) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "v": WIRE_VERSION,
        "event_id": event.event_id,
        "plane": event.plane.value,
        "timestamp_ms": event.timestamp_ms,
        "severity": event.severity.value,
    }
    if event.correlation_id is not None:
        doc["correlation_id"] = event.correlation_id
    if event.session_id is not None:
        doc["session_id"] = event.session_id
    doc["payload"] = payload_to_wire(event.payload)
    return doc


def event_from_wire(doc: dict[str, Any]) -> TelemetryEvent:
    plane = Plane(doc["plane"])
    return TelemetryEvent(
        plane=plane,
        timestamp_ms=int(doc["timestamp_ms"]),
        severity=Severity(doc["severity"]),
        payload=payload_from_wire(plane, doc["payload"]),
        event_id=int(doc.get("event_id", 0)),
        correlation_id=doc.get("correlation_id"),
        session_id=doc.get("session_id"),
    )


def to_json_line(doc: dict[str, Any]) -> str:
    """Canonical single-line JSON: insertion key order, compact separators."""
    return json.dumps(doc, separators=(",", ":"), ensure_ascii=False)


def event_to_json_line(event: TelemetryEvent) -> str:
    return to_json_line(event_to_wire(event))


def event_from_json_line(line: str) -> TelemetryEvent:
    return event_from_wire(json.loads(line))


def report_to_wire(report: FailureReport) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "report_id": report.report_id,
        "failure_time_ms": report.failure_time_ms,
        "trigger": report.trigger.value,
    }
    if report.triggering_status is not None:
        doc["triggering_status"] = report.triggering_status
    if report.correlation_id is not None:
        doc["correlation_id"] = report.correlation_id
    if report.session_id is not None:
        doc["session_id"] = report.session_id
    return doc


def report_from_wire(doc: dict[str, Any]) -> FailureReport:
    return FailureReport(
        report_id=str(doc["report_id"]),
        failure_time_ms=int(doc["failure_time_ms"]),
        trigger=TriggerKind(doc["trigger"]),
        triggering_status=doc.get("triggering_status"),
        correlation_id=doc.get("correlation_id"),
        session_id=doc.get("session_id"),
    )


def finding_to_wire(finding: ContractFinding) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "kind": finding.kind.value,
        "location": finding.location,
        "expected": finding.expected,
        "actual": finding.actual,
        "message": finding.message,
        "event_id": finding.event_id,
    }
    if finding.defect is not None:
        doc["defect"] = finding.defect.value
    return doc


def finding_from_wire(doc: dict[str, Any]) -> ContractFinding:
    defect = doc.get("defect")
    return ContractFinding(
        kind=FindingKind(doc["kind"]),
        location=doc["location"],
        expected=doc["expected"],
        actual=doc["actual"],
        message=doc["message"],
        event_id=int(doc["event_id"]),
        defect=DefectKind(defect) if defect is not None else None,
    )


def explanation_to_wire(explanation: Explanation) -> dict[str, Any]:
    return {
        "audience": explanation.audience.value,
        "culprit": explanation.culprit.value,
        "summary": explanation.summary,
        "text": explanation.text,
        "degraded": explanation.degraded,
    }


def explanation_from_wire(doc: dict[str, Any]) -> Explanation:
    return Explanation(
        audience=Audience(doc["audience"]),
        culprit=Culprit(doc["culprit"]),
        summary=doc["summary"],
        text=doc["text"],
        degraded=bool(doc.get("degraded", False)),
    )


def fco_to_wire(fco: FailureContextObject) -> dict[str, Any]:
    return {
        "v": WIRE_VERSION,
        "fco_id": fco.fco_id,
        "report": report_to_wire(fco.report),
        "window_ms": fco.window_ms,
        "truncated": fco.truncated,
        "root_cause": fco.root_cause.value,
        "events": [event_to_wire(e) for e in fco.events],
        "findings": [finding_to_wire(f) for f in fco.findings],
        "sanitization_report": [{"kind": c.kind, "count": c.count} for c in fco.sanitization_report],
        "explanations": [explanation_to_wire(x) for x in fco.explanations],
    }


def fco_from_wire(doc: dict[str, Any]) -> FailureContextObject:
    return FailureContextObject(
        fco_id=doc["fco_id"],
        report=report_from_wire(doc["report"]),
        events=tuple(event_from_wire(e) for e in doc["events"]),
        findings=tuple(finding_from_wire(f) for f in doc["findings"]),
        root_cause=RootCauseClass(doc["root_cause"]),
        sanitization_report=tuple(
            EntityCount(kind=c["kind"], count=int(c["count"]))
            for c in doc.get("sanitization_report", [])
        ),
        explanations=tuple(explanation_from_wire(x) for x in doc.get("explanations", [])),
        window_ms=int(doc.get("window_ms", 0)),
        truncated=bool(doc.get("truncated", False)),
    )


def fco_to_json(fco: FailureContextObject, pretty: bool = True) -> str:
    doc = fco_to_wire(fco)
    if pretty:
        return json.dumps(doc, indent=2, ensure_ascii=False)
    return to_json_line(doc)


__all__ = [
    "Audience",
    "BrowserEventKind",
    "BrowserPayload",
    "ContractFinding",
    "Culprit",
    "DefectKind",
    "EntityCount",
    "Explanation",
    "FailureContextObject",
    "FailureReport",
    "FindingKind",
    "NetworkPayload",
    "Payload",
    "Plane",
    "PLANE_ORDER",
    "RootCauseClass",
    "ServerPayload",
    "Severity",
    "SEVERITY_RANK",
    "TelemetryEvent",
    "Timings",
    "TriggerKind",
    "WIRE_VERSION",
    "canonical_order",
    "event_from_json_line",
    "event_from_wire",
    "event_to_json_line",
    "event_to_wire",
    "explanation_from_wire",
    "explanation_to_wire",
    "fco_from_wire",
    "fco_to_json",
    "fco_to_wire",
    "finding_from_wire",
    "finding_to_wire",
    "payload_from_wire",
    "payload_to_wire",
    "report_from_wire",
    "report_to_wire",
    "to_json_line",
    "validate_correlation_id",
]
