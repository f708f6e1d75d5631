"""HTTP ingestion and query service wrapping the store and pipeline.

POST /api/v1/events/{browser|network|server} ingests telemetry,
POST /api/v1/report triggers the pipeline synchronously, and the FCO plus
its explanations are readable immediately afterwards. Network events with
failure statuses can auto-trigger reports, debounced per correlation id.
"""

from __future__ import annotations

import json
import logging
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .contract import ApiSpec, SpecError, load_spec_file
from .correlate import CorrelationConfig
from .explain import HttpBackend, TemplateBackend
from .ingest import (
    DEFAULT_CORRELATION_HEADER,
    MalformedDocument,
    ParseReport,
    Rejection,
    parse_browser_event,
    parse_har,
    parse_server_log_lines,
)
from .model import (
    FailureReport,
    NetworkPayload,
    Plane,
    TelemetryEvent,
    TriggerKind,
    fco_to_wire,
    explanation_to_wire,
)
from .pipeline import PipelineConfig, run_pipeline
from .sanitize import default_rules, load_rules
from .store import EventStore, StorageFailure

logger = logging.getLogger(__name__)

DEFAULT_DEBOUNCE_MS = 10000


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8321
    store_path: Optional[str] = None
    spec_path: Optional[str] = None
    rules_path: Optional[str] = None
    correlation: CorrelationConfig = field(default_factory=CorrelationConfig)
    correlation_header: str = DEFAULT_CORRELATION_HEADER
    auto_trigger: bool = True
    debounce_ms: int = DEFAULT_DEBOUNCE_MS
    backend: str = "template"
    http_endpoint: Optional[str] = None
    http_model: Optional[str] = None
    http_timeout_ms: int = 30000
    http_token_env: Optional[str] = None

    def __post_init__(self) -> None:
        if not 1 <= self.port <= 65535:
            raise ValueError(f"port {self.port} outside [1, 65535]")
        if self.debounce_ms < 0:
            raise ValueError("debounce_ms must be >= 0")
        if self.backend not in ("template", "http"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.backend == "http" and not self.http_endpoint:
            raise ValueError("backend http requires http.endpoint")


def load_service_config(path: str | Path) -> ServiceConfig:
    """Config file (YAML or JSON) to ServiceConfig; unknown keys rejected."""
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(raw, dict):
        raise ValueError("config file must hold a mapping")
    known = {
        "host",
        "port",
        "store",
        "spec",
        "rules",
        "window_ms",
        "skew_ms",
        "max_events",
        "correlation_header",
        "auto_trigger",
        "debounce_ms",
        "backend",
    }
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")

    correlation = CorrelationConfig(
        window_ms=int(raw.get("window_ms", CorrelationConfig().window_ms)),
        skew_ms=int(raw.get("skew_ms", CorrelationConfig().skew_ms)),
        max_events=int(raw.get("max_events", CorrelationConfig().max_events)),
    )
    backend_conf = raw.get("backend") or {}
    if isinstance(backend_conf, str):
        backend_conf = {"kind": backend_conf}
    return ServiceConfig(
        host=str(raw.get("host", "127.0.0.1")),
        port=int(raw.get("port", 8321)),
        store_path=raw.get("store"),
        spec_path=raw.get("spec"),
        rules_path=raw.get("rules"),
        correlation=correlation,
        correlation_header=str(raw.get("correlation_header", DEFAULT_CORRELATION_HEADER)),
        auto_trigger=bool(raw.get("auto_trigger", True)),
        debounce_ms=int(raw.get("debounce_ms", DEFAULT_DEBOUNCE_MS)),
        backend=str(backend_conf.get("kind", "template")),
        http_endpoint=backend_conf.get("endpoint"),
        http_model=backend_conf.get("model"),
        http_timeout_ms=int(backend_conf.get("timeout_ms", 30000)),
        http_token_env=backend_conf.get("token_env"),
    )


class Engine:
    """Store + pipeline + FCO registry behind the HTTP surface."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.store = EventStore(config.store_path)
        self.api_spec: Optional[ApiSpec] = None
        if config.spec_path:
            self.api_spec = load_spec_file(config.spec_path)
        rules = default_rules()
        if config.rules_path:
            rules = rules + load_rules(config.rules_path)
        backend = None
        if config.backend == "http":
            backend = HttpBackend(
                endpoint=config.http_endpoint,
                model=config.http_model or "default",
                timeout_ms=config.http_timeout_ms,
                token_env=config.http_token_env,
            )
        else:
            backend = TemplateBackend()
        self.pipeline_config = PipelineConfig(
            correlation=config.correlation,
            rules=rules,
            api_spec=self.api_spec,
            backend=backend,
        )
        self._fcos: dict[str, Any] = {}
        self._debounce: dict[str, int] = {}
        self._lock = threading.Lock()

    # -- ingestion -----------------------------------------------------------

    def ingest(self, events: list[TelemetryEvent]) -> list[TelemetryEvent]:
        stamped = []
        for event in events:
            event_id = self.store.append(event)
            stamped.append(
                TelemetryEvent(
                    plane=event.plane,
                    timestamp_ms=event.timestamp_ms,
                    severity=event.severity,
                    payload=event.payload,
                    event_id=event_id,
                    correlation_id=event.correlation_id,
                    session_id=event.session_id,
                )
            )
        return stamped

    def maybe_auto_trigger(self, events: list[TelemetryEvent]) -> list[str]:
        """Debounced automatic reports for failing network events."""
        if not self.config.auto_trigger:
            return []
        created = []
        for event in events:
            payload = event.payload
            if not isinstance(payload, NetworkPayload):
                continue
            if not 400 <= payload.status <= 599:
                continue
            key = event.correlation_id or "<untagged>"
            with self._lock:
                last = self._debounce.get(key)
                if last is not None and abs(event.timestamp_ms - last) < self.config.debounce_ms:
                    continue
                self._debounce[key] = event.timestamp_ms
            report = FailureReport(
                report_id=f"auto-{uuid.uuid4().hex[:12]}",
                failure_time_ms=event.timestamp_ms,
                trigger=TriggerKind.AUTO_STATUS,
                triggering_status=payload.status,
                correlation_id=event.correlation_id,
                session_id=event.session_id,
            )
            try:
                created.append(self.run_report(report))
            except Exception:  # auto-trigger failures are logged, never raised
                logger.exception("auto-trigger pipeline failed for %s", report.report_id)
        return created

    # -- pipeline ------------------------------------------------------------

    def run_report(self, report: FailureReport) -> str:
        result = run_pipeline(self.store, report, self.pipeline_config)
        with self._lock:
            self._fcos[result.fco.fco_id] = result.fco
        return result.fco.fco_id

    def get_fco(self, fco_id: str):
        with self._lock:
            return self._fcos.get(fco_id)


def _parse_report_body(doc: Any) -> FailureReport:
    if not isinstance(doc, dict):
        raise ValueError("report body must be a JSON object")
    if "failure_time_ms" not in doc:
        raise ValueError("missing failure_time_ms")
    trigger_raw = doc.get("trigger", TriggerKind.MANUAL.value)
    try:
        trigger = TriggerKind(trigger_raw)
    except ValueError as exc:
        raise ValueError(f"unknown trigger {trigger_raw!r}") from exc
    return FailureReport(
        report_id=str(doc.get("report_id") or f"rep-{uuid.uuid4().hex[:12]}"),
        failure_time_ms=int(doc["failure_time_ms"]),
        trigger=trigger,
        triggering_status=doc.get("triggering_status"),
        correlation_id=doc.get("correlation_id"),
        session_id=doc.get("session_id"),
    )


def _ingest_browser(text: str) -> tuple[list[TelemetryEvent], ParseReport]:
    report = ParseReport()
    events: list[TelemetryEvent] = []
    try:
        whole = json.loads(text)
        documents = whole if isinstance(whole, list) else [whole]
    except json.JSONDecodeError:
        documents = []
        decoded_any = False
        lines = [line for line in text.splitlines() if line.strip()]
        for line in lines:
            try:
                documents.append(json.loads(line))
                decoded_any = True
            except json.JSONDecodeError:
                documents.append(Rejection("line is not valid JSON"))
        if not decoded_any:
            raise MalformedDocument("body is neither JSON nor JSONL")
    for index, doc in enumerate(documents):
        outcome = doc if isinstance(doc, Rejection) else parse_browser_event(doc)
        if isinstance(outcome, Rejection):
            report.reject(index, outcome.reason)
        else:
            events.append(outcome)
            report.accepted += 1
    return events, report


def create_app(config: Optional[ServiceConfig] = None) -> FastAPI:
    engine = Engine(config or ServiceConfig())
    app = FastAPI(title="failctx", docs_url=None, redoc_url=None)
    app.state.engine = engine

    def _report_summary(report: ParseReport) -> dict[str, Any]:
        return {
            "accepted": report.accepted,
            "rejected": report.rejected,
            "rejections": [
                {"index": index, "reason": reason} for index, reason in report.rejections
            ],
        }

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/api/v1/events/{plane}")
    async def ingest_events(plane: str, request: Request):
        try:
            plane_value = Plane(plane)
        except ValueError:
            return JSONResponse({"error": f"unknown plane {plane!r}"}, status_code=404)
        raw = await request.body()
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError:
            return JSONResponse({"error": "body is not UTF-8"}, status_code=400)
        if not text.strip():
            return JSONResponse({"error": "empty body"}, status_code=400)

        try:
            if plane_value is Plane.BROWSER:
                events, parse_report = _ingest_browser(text)
            elif plane_value is Plane.NETWORK:
                try:
                    document = json.loads(text)
                except json.JSONDecodeError as exc:
                    raise MalformedDocument(f"body is not JSON: {exc}") from exc
                events, parse_report = parse_har(
                    document, correlation_header=engine.config.correlation_header
                )
            else:
                events, parse_report = parse_server_log_lines(text.splitlines())
        except MalformedDocument as exc:
            return JSONResponse({"error": str(exc)}, status_code=400)

        try:
            stamped = engine.ingest(events)
        except StorageFailure as exc:
            return JSONResponse({"error": str(exc)}, status_code=503)

        auto_fcos = engine.maybe_auto_trigger(stamped)
        body = _report_summary(parse_report)
        if auto_fcos:
            body["auto_fco_ids"] = auto_fcos
        return JSONResponse(body, status_code=202)

    @app.post("/api/v1/report")
    async def submit_report(request: Request):
        raw = await request.body()
        try:
            doc = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            return JSONResponse({"error": f"bad report body: {exc}"}, status_code=400)
        try:
            report = _parse_report_body(doc)
        except (ValueError, TypeError) as exc:
            return JSONResponse({"error": str(exc)}, status_code=422)
        fco_id = engine.run_report(report)
        return JSONResponse({"fco_id": fco_id}, status_code=201)

    @app.get("/api/v1/fco/{fco_id}")
    def get_fco(fco_id: str):
        fco = engine.get_fco(fco_id)
        if fco is None:
            return JSONResponse({"error": "unknown fco id"}, status_code=404)
        return JSONResponse(fco_to_wire(fco))

    @app.get("/api/v1/fco/{fco_id}/explanations")
    def get_explanations(fco_id: str):
        fco = engine.get_fco(fco_id)
        if fco is None:
            return JSONResponse({"error": "unknown fco id"}, status_code=404)
        return JSONResponse(
            {
                "fco_id": fco_id,
                "explanations": [explanation_to_wire(x) for x in fco.explanations],
            }
        )

    return app


def validate_startup_paths(config: ServiceConfig) -> None:
    """Fail fast (before binding) when referenced paths are unreadable."""
    if config.spec_path:
        try:
            load_spec_file(config.spec_path)
        except (OSError, SpecError, ValueError) as exc:
            raise ValueError(f"spec path {config.spec_path!r} unusable: {exc}") from exc
    if config.rules_path:
        try:
            load_rules(config.rules_path)
        except (OSError, ValueError) as exc:
            raise ValueError(f"rules path {config.rules_path!r} unusable: {exc}") from exc
