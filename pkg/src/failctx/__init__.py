"""failctx: automated multi-source debugging engine.

Collects browser, network, and server telemetry, correlates it around a
failure trigger into a Failure Context Object, validates HTTP traffic
against an OpenAPI contract, classifies root cause with deterministic
rules, and generates sanitized explanations for end users and developers.
"""

from .classify import ClassificationTrace, classify
from .contract import ApiSpec, SpecError, load_spec, load_spec_file, match_path, validate_exchange
from .correlate import CorrelationConfig, Selection, assemble_fco, select_failure_context
from .explain import (
    HttpBackend,
    ParseFailure,
    TemplateBackend,
    build_prompt,
    generate_explanations,
    parse_structured_response,
)
from .ingest import (
    MalformedDocument,
    ParseReport,
    Rejection,
    parse_browser_event,
    parse_har,
    parse_server_log_line,
)
from .metrics import MttrModel, RangeError, mttr_total, project_reduction
from .model import (
    Audience,
    BrowserEventKind,
    BrowserPayload,
    ContractFinding,
    Culprit,
    Explanation,
    FailureContextObject,
    FailureReport,
    FindingKind,
    NetworkPayload,
    Plane,
    RootCauseClass,
    ServerPayload,
    Severity,
    TelemetryEvent,
    Timings,
    TriggerKind,
    canonical_order,
)
from .pipeline import PipelineConfig, PipelineResult, run_pipeline
from .sanitize import (
    PlaceholderMap,
    SanitizationRule,
    default_rules,
    sanitize_fco,
    sanitize_text,
)
from .scenarios import DEMO_API_SPEC, Scenario, ScenarioName, generate, generate_bundle, write_bundle
from .store import EventStore, InvalidRange, StorageFailure

__version__ = "0.1.0"
