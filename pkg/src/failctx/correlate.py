"""Failure-context selection and draft FCO assembly.

Selection around a failure time T_f: events sharing the report's
correlation id are taken unconditionally (trace ids are ground truth);
the symmetric time window, widened by a clock-skew allowance, sweeps in
untagged events only. Without a correlation id the window takes everything.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass

from .model import (
    FailureContextObject,
    FailureReport,
    ContractFinding,
    TelemetryEvent,
    canonical_order,
)
from .store import EventStore

DEFAULT_WINDOW_MS = 5000
DEFAULT_SKEW_MS = 250
DEFAULT_MAX_EVENTS = 500


@dataclass(frozen=True)
class CorrelationConfig:
    window_ms: int = DEFAULT_WINDOW_MS
    skew_ms: int = DEFAULT_SKEW_MS
    max_events: int = DEFAULT_MAX_EVENTS

    def __post_init__(self) -> None:
        if self.window_ms <= 0:
            raise ValueError("window_ms must be > 0")
        if self.skew_ms < 0:
            raise ValueError("skew_ms must be >= 0")
        if self.max_events <= 0:
            raise ValueError("max_events must be > 0")


@dataclass(frozen=True)
class Selection:
    events: tuple[TelemetryEvent, ...]
    truncated: bool


def select_failure_context(
    store: EventStore, report: FailureReport, config: CorrelationConfig
) -> Selection:
    """Extract the correlated event set S for a failure report.

    Result is canonically ordered; when it exceeds max_events, the events
    closest to T_f are kept (ties broken by canonical order) and the
    truncation is marked.
    """
    t_f = report.failure_time_ms
    lo = max(0, t_f - config.window_ms - config.skew_ms)
    hi = t_f + config.window_ms + config.skew_ms

    windowed = store.query_window(lo, hi)
    if report.correlation_id is not None:
        tagged = store.query_by_cid(report.correlation_id)
        untagged = [e for e in windowed if e.correlation_id is None]
        selected = canonical_order(tagged + untagged)
    else:
        selected = windowed

    truncated = len(selected) > config.max_events
    if truncated:
        nearest = sorted(
            selected, key=lambda e: (abs(e.timestamp_ms - t_f), e.sort_key())
        )[: config.max_events]
        selected = canonical_order(nearest)

    return Selection(events=tuple(selected), truncated=truncated)


def new_fco_id() -> str:
    return uuid.uuid4().hex


def assemble_fco(
    events: list[TelemetryEvent] | tuple[TelemetryEvent, ...],
    report: FailureReport,
    findings: list[ContractFinding] | tuple[ContractFinding, ...],
    config: CorrelationConfig,
    truncated: bool = False,
) -> FailureContextObject:
    """Draft FCO: root cause unclassified, sanitization report and
    explanations empty; the pipeline fills those in later stages."""
    return FailureContextObject(
        fco_id=new_fco_id(),
        report=report,
        events=tuple(events),
        findings=tuple(findings),
        window_ms=config.window_ms,
        truncated=truncated,
    )
