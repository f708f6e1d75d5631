"""Synthetic multi-plane failure scenarios with ground-truth labels.

Each archetype emits mutually consistent browser events, server log lines,
and a HAR capture that share one correlation id, plus decoy traffic that a
correct pipeline must exclude. Generation is a pure function of
(name, seed); every scenario also embeds deterministic PII plants so the
sanitizer can be leak-tested end to end.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Optional

from .ingest import parse_browser_events, parse_har, parse_server_log_lines
from .model import (
    FailureReport,
    RootCauseClass,
    TelemetryEvent,
    TriggerKind,
    canonical_order,
)

DEFAULT_SCENARIO_WINDOW_MS = 5000

# Fixture API contract used by every scenario and by the validation suite.
DEMO_API_SPEC: dict[str, Any] = {
    "openapi": "3.0.3",
    "info": {"title": "Dashboard Data API", "version": "1.0.0"},
    "paths": {
        "/api/v1/data": {
            "post": {
                "requestBody": {
                    "content": {
                        "application/json": {
                            "schema": {"$ref": "#/components/schemas/DataRequest"}
                        }
                    }
                },
                "responses": {
                    "200": {
                        "description": "chart data",
                        "content": {
                            "application/json": {
                                "schema": {"$ref": "#/components/schemas/DataResponse"}
                            }
                        },
                    },
                    "4XX": {
                        "description": "client error",
                        "content": {
                            "application/json": {
                                "schema": {"$ref": "#/components/schemas/Error"}
                            }
                        },
                    },
                    "5XX": {"description": "server error"},
                },
            },
            "get": {
                "parameters": [
                    {"name": "chartId", "in": "query", "required": True}
                ],
                "responses": {
                    "200": {
                        "description": "chart data",
                        "content": {
                            "application/json": {
                                "schema": {"$ref": "#/components/schemas/DataResponse"}
                            }
                        },
                    },
                    "4XX": {
                        "description": "client error",
                        "content": {
                            "application/json": {
                                "schema": {"$ref": "#/components/schemas/Error"}
                            }
                        },
                    },
                    "5XX": {"description": "server error"},
                },
            },
        },
        "/api/v1/charts/{chartId}": {
            "get": {
                "responses": {
                    "200": {
                        "description": "one chart",
                        "content": {
                            "application/json": {
                                "schema": {"$ref": "#/components/schemas/Chart"}
                            }
                        },
                    },
                    "404": {
                        "description": "unknown chart",
                        "content": {
                            "application/json": {
                                "schema": {"$ref": "#/components/schemas/Error"}
                            }
                        },
                    },
                }
            }
        },
        "/api/v1/charts/latest": {
            "get": {
                "responses": {
                    "200": {
                        "description": "most recent chart",
                        "content": {
                            "application/json": {
                                "schema": {"$ref": "#/components/schemas/Chart"}
                            }
                        },
                    }
                }
            }
        },
    },
    "components": {
        "schemas": {
            "DataRequest": {
                "type": "object",
                "required": ["chartId"],
                "additionalProperties": False,
                "properties": {
                    "chartId": {"type": "string"},
                    "range": {"type": "string", "enum": ["day", "week", "month"]},
                    "filters": {"type": "object"},
                    "limit": {"type": "integer"},
                },
            },
            "DataResponse": {
                "type": "object",
                "required": ["rows"],
                "properties": {
                    "rows": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["x", "y"],
                            "properties": {
                                "x": {"type": "number"},
                                "y": {"type": "number"},
                                "label": {"type": "string"},
                            },
                        },
                    },
                    "total": {"type": "integer"},
                    "generated_at": {"type": "string"},
                },
            },
            "Chart": {
                "type": "object",
                "required": ["id", "title"],
                "properties": {
                    "id": {"type": "string"},
                    "title": {"type": "string"},
                    "owner": {"$ref": "#/components/schemas/User"},
                },
            },
            "User": {
                "type": "object",
                "properties": {
                    "id": {"type": "string"},
                    "email": {"type": "string"},
                },
            },
            "Error": {
                "type": "object",
                "required": ["error"],
                "properties": {
                    "error": {"type": "string"},
                    "detail": {"type": "string", "nullable": True},
                },
            },
        }
    },
}


class ScenarioName(str, Enum):
    MISSING_REQUIRED_FIELD = "MissingRequiredField"
    NETWORK_TIMEOUT = "NetworkTimeout"
    BACKEND_EXCEPTION = "BackendException"
    CONTRACT_BREACH = "ContractBreach"
    HEALTHY = "Healthy"
    UNCLASSIFIABLE = "Unclassifiable"


EXPECTED_CLASS = {
    ScenarioName.MISSING_REQUIRED_FIELD: RootCauseClass.FRONTEND_BUG,
    ScenarioName.NETWORK_TIMEOUT: RootCauseClass.INFRASTRUCTURE_ISSUE,
    ScenarioName.BACKEND_EXCEPTION: RootCauseClass.BACKEND_EXCEPTION,
    ScenarioName.CONTRACT_BREACH: RootCauseClass.CONTRACT_BREACH,
    ScenarioName.HEALTHY: RootCauseClass.UNCLASSIFIED,
    ScenarioName.UNCLASSIFIABLE: RootCauseClass.UNCLASSIFIED,
}


@dataclass(frozen=True)
class ScenarioParams:
    """Optional overrides; anything left None is derived from the seed."""

    correlation_id: Optional[str] = None
    base_time_ms: Optional[int] = None


@dataclass(frozen=True)
class Scenario:
    name: ScenarioName
    seed: int
    params: ScenarioParams = field(default_factory=ScenarioParams)

    @property
    def expected_class(self) -> RootCauseClass:
        return EXPECTED_CLASS[self.name]


@dataclass
class Plant:
    kind: str
    value: str
    site: str


@dataclass
class ScenarioBundle:
    """Raw source documents plus the trigger and ground truth."""

    scenario: Scenario
    correlation_id: str
    failure_time_ms: int
    expected_class: RootCauseClass
    har: dict[str, Any]
    server_log_lines: list[str]
    browser_events: list[dict[str, Any]]
    report: FailureReport
    plants: list[Plant]
    window_ms: int = DEFAULT_SCENARIO_WINDOW_MS


def _iso(ms: int) -> str:
    return datetime.fromtimestamp(ms / 1000.0, tz=timezone.utc).isoformat(
        timespec="milliseconds"
    )


def _har_entry(
    ms: int,
    method: str,
    url: str,
    status: int,
    request_headers: list[tuple[str, str]],
    request_body: Optional[Any] = None,
    response_body: Optional[Any] = None,
    timings: Optional[dict[str, float]] = None,
) -> dict[str, Any]:
    base_timings = {"blocked": 1, "dns": 2, "connect": 5, "send": 1, "wait": 40, "receive": 3}
    if timings:
        base_timings.update(timings)
    entry: dict[str, Any] = {
        "startedDateTime": _iso(ms),
        "time": sum(v for v in base_timings.values() if v >= 0),
        "request": {
            "method": method,
            "url": url,
            "headers": [{"name": n, "value": v} for n, v in request_headers],
        },
        "response": {"status": status, "headers": []},
        "timings": base_timings,
    }
    if request_body is not None:
        entry["request"]["postData"] = {
            "mimeType": "application/json",
            "text": json.dumps(request_body),
        }
    if response_body is not None:
        entry["response"]["content"] = {
            "mimeType": "application/json",
            "text": json.dumps(response_body),
        }
    return entry


def _browser_event(
    ms: int,
    kind: str,
    message: str,
    cid: Optional[str],
    session: str,
    severity: str = "error",
    stack: Optional[str] = None,
    snapshot: Optional[Any] = None,
) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "v": 1,
        "plane": "browser",
        "timestamp_ms": ms,
        "severity": severity,
        "payload": {
            "kind": kind,
            "message": message,
            "page_url": "https://app.example.com/dashboard",
            "clicked_element": "#refresh-button",
        },
    }
    if cid is not None:
        doc["correlation_id"] = cid
    doc["session_id"] = session
    if stack is not None:
        doc["payload"]["stack"] = stack
    if snapshot is not None:
        doc["payload"]["state_snapshot"] = snapshot
    return doc


def _json_log(ms: int, level: str, service: str, message: str, cid: Optional[str] = None,
              stack: Optional[str] = None) -> str:
    doc: dict[str, Any] = {"ts": ms, "level": level, "service": service, "message": message}
    if stack is not None:
        doc["stack"] = stack
    if cid is not None:
        doc["trace_id"] = cid
    return json.dumps(doc)


def generate_bundle(scenario: Scenario) -> ScenarioBundle:
    """Deterministic raw documents for one (name, seed) pair."""
    rng = random.Random(f"{scenario.name.value}:{scenario.seed}")

    cid = scenario.params.correlation_id or f"req-{rng.getrandbits(64):016x}"
    foreign_cid = f"req-{rng.getrandbits(64):016x}"
    session = f"sess-{rng.getrandbits(40):010x}"
    t0 = scenario.params.base_time_ms or rng.randrange(
        1_600_000_000_000, 1_700_000_000_000
    )

    email = f"user.{rng.randrange(1000, 999999)}@example.com"
    email2 = f"owner.{rng.randrange(1000, 999999)}@corp.example.org"
    ipv4 = f"10.{rng.randrange(256)}.{rng.randrange(256)}.{rng.randrange(1, 255)}"
    ipv4_b = f"192.168.{rng.randrange(256)}.{rng.randrange(1, 255)}"
    ipv6 = f"2001:db8::{rng.getrandbits(16):x}"
    uid = f"u-{rng.randrange(1000, 9999999)}"
    token = f"tok{rng.getrandbits(96):024x}"

    plants = [
        Plant("email", email, "server message"),
        Plant("email", email2, "request body / state snapshot"),
        Plant("ipv4", ipv4, "server message"),
        Plant("ipv4", ipv4_b, "request header / state snapshot"),
        Plant("ipv6", ipv6, "server message"),
        Plant("user_id", uid, "server and browser messages"),
        Plant("bearer_token", token, "authorization header"),
    ]

    chart_id = f"c-{rng.randrange(10, 9999)}"
    headers = [
        ("Content-Type", "application/json"),
        ("X-Correlation-Id", cid),
        ("Authorization", f"Bearer {token}"),
        ("X-Client-Ip", ipv4_b),
    ]
    snapshot = {
        "user": {"email": email2, "ip": ipv4_b, "id": uid},
        "view": {"chart": chart_id, "filters": ["7d"]},
    }

    browser_events: list[dict[str, Any]] = []
    server_lines: list[str] = []
    har_entries: list[dict[str, Any]] = []

    # Tagged audit line: carries most PII plants into the selected set.
    server_lines.append(
        _json_log(
            t0 - 120,
            "INFO",
            "gateway",
            f"session start for {email} ({uid}) from {ipv4} via {ipv6}",
            cid=cid,
        )
    )
    # Untagged line inside the window: swept in by the time window.
    server_lines.append(
        f"{_iso(t0 - 80)} INFO [scheduler] cache refresh tick {rng.randrange(1000)}"
    )
    # Untagged decoy far outside the window.
    server_lines.append(
        f"{_iso(t0 - 600_000)} INFO [scheduler] nightly compaction finished"
    )
    # Foreign-cid decoys inside the window.
    server_lines.append(
        _json_log(t0 - 40, "INFO", "gateway", "unrelated request accepted", cid=foreign_cid)
    )
    har_entries.append(
        _har_entry(
            t0 - 60,
            "GET",
            "https://app.example.com/api/v1/charts/latest",
            200,
            [("X-Correlation-Id", foreign_cid)],
            response_body={"id": "c-1", "title": "Latest"},
        )
    )
    # Untagged conformant decoy outside the window.
    har_entries.append(
        _har_entry(
            t0 + 600_000,
            "GET",
            "https://app.example.com/api/v1/charts/latest",
            200,
            [],
            response_body={"id": "c-2", "title": "Later"},
        )
    )

    name = scenario.name
    if name is ScenarioName.MISSING_REQUIRED_FIELD:
        failure_ms = t0 + rng.randrange(40, 90)
        har_entries.append(
            _har_entry(
                failure_ms,
                "POST",
                "https://app.example.com/api/v1/data",
                400,
                headers,
                request_body={"filters": {"owner_email": email2}},
                response_body={"error": "missing chartId"},
            )
        )
        browser_events.append(
            _browser_event(
                failure_ms + rng.randrange(5, 30),
                "console_error",
                f"Request rejected with 400 for user {uid}",
                cid,
                session,
                snapshot=snapshot,
            )
        )
        server_lines.append(
            _json_log(
                failure_ms + rng.randrange(2, 20),
                "WARN",
                "data-service",
                "request validation failed: chartId missing",
                cid=cid,
            )
        )
        report = FailureReport(
            report_id=f"rep-{rng.getrandbits(48):012x}",
            failure_time_ms=failure_ms,
            trigger=TriggerKind.AUTO_STATUS,
            triggering_status=400,
            correlation_id=cid,
            session_id=session,
        )

    elif name is ScenarioName.NETWORK_TIMEOUT:
        failure_ms = t0 + rng.randrange(40, 90)
        har_entries.append(
            _har_entry(
                failure_ms,
                "GET",
                f"https://app.example.com/api/v1/data?chartId={chart_id}",
                0,
                headers,
                timings={"wait": 31000, "receive": -1},
            )
        )
        browser_events.append(
            _browser_event(
                failure_ms + 31000 + rng.randrange(5, 30),
                "network_stack_trace",
                "fetch /api/v1/data aborted: timeout",
                cid,
                session,
                stack=f"at loadChart (dashboard.js:120)\nat refresh for {uid}",
                snapshot=snapshot,
            )
        )
        report = FailureReport(
            report_id=f"rep-{rng.getrandbits(48):012x}",
            failure_time_ms=failure_ms,
            trigger=TriggerKind.MANUAL,
            correlation_id=cid,
            session_id=session,
        )

    elif name is ScenarioName.BACKEND_EXCEPTION:
        failure_ms = t0 + rng.randrange(40, 90)
        har_entries.append(
            _har_entry(
                failure_ms,
                "POST",
                "https://app.example.com/api/v1/data",
                500,
                headers,
                request_body={"chartId": chart_id, "filters": {"owner_email": email2}},
            )
        )
        server_lines.append(
            _json_log(
                failure_ms + rng.randrange(2, 20),
                "ERROR",
                "analytics",
                "NullPointerException at Controller.java:45",
                cid=cid,
                stack=(
                    "java.lang.NullPointerException\n"
                    "\tat com.example.Controller.loadChart(Controller.java:45)\n"
                    f"\tat com.example.Dispatcher.handle(Dispatcher.java:88) // user {uid}"
                ),
            )
        )
        browser_events.append(
            _browser_event(
                failure_ms + rng.randrange(20, 60),
                "console_error",
                "React Error Boundary caught error",
                cid,
                session,
                stack="at ChartWidget (ChartWidget.jsx:33)",
                snapshot=snapshot,
            )
        )
        report = FailureReport(
            report_id=f"rep-{rng.getrandbits(48):012x}",
            failure_time_ms=failure_ms,
            trigger=TriggerKind.AUTO_STATUS,
            triggering_status=500,
            correlation_id=cid,
            session_id=session,
        )

    elif name is ScenarioName.CONTRACT_BREACH:
        failure_ms = t0 + rng.randrange(40, 90)
        har_entries.append(
            _har_entry(
                failure_ms,
                "POST",
                "https://app.example.com/api/v1/data",
                200,
                headers,
                request_body={"chartId": chart_id},
                response_body={"rows": None, "total": rng.randrange(5, 500)},
            )
        )
        browser_events.append(
            _browser_event(
                failure_ms + rng.randrange(5, 40),
                "console_error",
                "TypeError: rows is null while rendering chart",
                cid,
                session,
                snapshot=snapshot,
            )
        )
        report = FailureReport(
            report_id=f"rep-{rng.getrandbits(48):012x}",
            failure_time_ms=failure_ms,
            trigger=TriggerKind.MANUAL,
            correlation_id=cid,
            session_id=session,
        )

    elif name is ScenarioName.HEALTHY:
        failure_ms = t0 + rng.randrange(40, 90)
        rows = [{"x": i, "y": rng.randrange(100)} for i in range(3)]
        har_entries.append(
            _har_entry(
                failure_ms,
                "POST",
                "https://app.example.com/api/v1/data",
                200,
                headers,
                request_body={"chartId": chart_id, "filters": {"owner_email": email2}},
                response_body={"rows": rows, "total": len(rows)},
            )
        )
        server_lines.append(
            _json_log(
                failure_ms + rng.randrange(2, 20),
                "INFO",
                "analytics",
                f"chart {chart_id} served in {rng.randrange(10, 80)}ms",
                cid=cid,
            )
        )
        report = FailureReport(
            report_id=f"rep-{rng.getrandbits(48):012x}",
            failure_time_ms=failure_ms,
            trigger=TriggerKind.MANUAL,
            correlation_id=cid,
            session_id=session,
        )

    else:  # UNCLASSIFIABLE
        failure_ms = t0 + rng.randrange(40, 90)
        har_entries.append(
            _har_entry(
                failure_ms,
                "GET",
                f"https://app.example.com/api/v1/charts/{chart_id}",
                404,
                headers,
                response_body={"error": f"chart {chart_id} not found for {email}"},
            )
        )
        server_lines.append(
            _json_log(
                failure_ms + rng.randrange(2, 20),
                "WARN",
                "catalog",
                f"lookup miss for chart {chart_id} requested by {uid}",
                cid=cid,
            )
        )
        browser_events.append(
            _browser_event(
                failure_ms + rng.randrange(5, 40),
                "console_error",
                "TypeError: cannot read properties of undefined (reading 'title')",
                cid,
                session,
                snapshot=snapshot,
            )
        )
        report = FailureReport(
            report_id=f"rep-{rng.getrandbits(48):012x}",
            failure_time_ms=failure_ms,
            trigger=TriggerKind.AUTO_STATUS,
            triggering_status=404,
            correlation_id=cid,
            session_id=session,
        )

    # Foreign-cid browser decoy inside the window.
    browser_events.append(
        _browser_event(
            t0 - 30,
            "console_error",
            "ResizeObserver loop completed with undelivered notifications",
            foreign_cid,
            f"sess-{rng.getrandbits(40):010x}",
            severity="warn",
        )
    )

    har = {
        "log": {
            "version": "1.2",
            "creator": {"name": "failctx-simulator", "version": "1"},
            "entries": har_entries,
        }
    }

    return ScenarioBundle(
        scenario=scenario,
        correlation_id=cid,
        failure_time_ms=failure_ms,
        expected_class=scenario.expected_class,
        har=har,
        server_log_lines=server_lines,
        browser_events=browser_events,
        report=report,
        plants=plants,
    )


def generate(scenario: Scenario) -> tuple[list[TelemetryEvent], FailureReport, RootCauseClass]:
    """Parsed, canonically ordered events plus trigger and ground truth."""
    bundle = generate_bundle(scenario)
    network, har_report = parse_har(bundle.har, session_id=None)
    servers, log_report = parse_server_log_lines(bundle.server_log_lines)
    browsers, browser_report = parse_browser_events(bundle.browser_events)
    if har_report.rejected or log_report.rejected or browser_report.rejected:
        raise AssertionError("scenario generator emitted unparseable documents")
    events = canonical_order(network + servers + browsers)
    return events, bundle.report, bundle.expected_class


def write_bundle(bundle: ScenarioBundle, out_dir: str | Path) -> dict[str, Path]:
    """Write the bundle files; returns the path of each artifact."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    har_path = out / "network.har"
    har_path.write_text(json.dumps(bundle.har, indent=2), encoding="utf-8")

    logs_path = out / "server_logs.jsonl"
    logs_path.write_text("\n".join(bundle.server_log_lines) + "\n", encoding="utf-8")

    browser_path = out / "browser_events.jsonl"
    browser_path.write_text(
        "\n".join(json.dumps(doc, separators=(",", ":")) for doc in bundle.browser_events) + "\n",
        encoding="utf-8",
    )

    spec_path = out / "openapi.json"
    spec_path.write_text(json.dumps(DEMO_API_SPEC, indent=2), encoding="utf-8")

    manifest = {
        "scenario": bundle.scenario.name.value,
        "seed": bundle.scenario.seed,
        "expected_class": bundle.expected_class.value,
        "correlation_id": bundle.correlation_id,
        "failure_time_ms": bundle.failure_time_ms,
        "window_ms": bundle.window_ms,
        "trigger": bundle.report.trigger.value,
        "plants": [
            {"kind": p.kind, "value": p.value, "site": p.site} for p in bundle.plants
        ],
        "files": {
            "har": har_path.name,
            "server_logs": logs_path.name,
            "browser_events": browser_path.name,
            "api_spec": spec_path.name,
        },
    }
    manifest_path = out / "ground_truth.json"
    manifest_path.write_text(json.dumps(manifest, indent=2), encoding="utf-8")

    return {
        "har": har_path,
        "server_logs": logs_path,
        "browser_events": browser_path,
        "api_spec": spec_path,
        "ground_truth": manifest_path,
    }
