"""The shared pipeline: select, assemble, validate, sanitize, classify,
explain. Both the CLI and the HTTP service run failures through here, so
their FCOs satisfy identical invariants."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from .classify import ClassificationTrace, classify
from .contract import ApiSpec, validate_exchange
from .correlate import CorrelationConfig, assemble_fco, select_failure_context
from .explain import CompletionBackend, generate_explanations
from .model import FailureContextObject, FailureReport, Plane
from .sanitize import SanitizationRule, default_rules, sanitize_fco
from .store import EventStore


@dataclass
class PipelineConfig:
    correlation: CorrelationConfig = field(default_factory=CorrelationConfig)
    rules: list[SanitizationRule] = field(default_factory=default_rules)
    api_spec: Optional[ApiSpec] = None
    backend: Optional[CompletionBackend] = None
    force_generative: bool = False


@dataclass
class PipelineResult:
    fco: FailureContextObject
    trace: ClassificationTrace


def run_pipeline(
    store: EventStore, report: FailureReport, config: Optional[PipelineConfig] = None
) -> PipelineResult:
    """Run one failure report through every stage and return the final FCO."""
    if config is None:
        config = PipelineConfig()

    selection = select_failure_context(store, report, config.correlation)

    findings = []
    if config.api_spec is not None:
        for event in selection.events:
            if event.plane is Plane.NETWORK:
                findings.extend(validate_exchange(config.api_spec, event))

    fco = assemble_fco(
        selection.events, report, findings, config.correlation, truncated=selection.truncated
    )
    fco = sanitize_fco(fco, config.rules)

    cause, trace = classify(fco)
    fco = replace(fco, root_cause=cause)

    explanations = generate_explanations(fco, config.backend, config.force_generative)
    fco = replace(fco, explanations=tuple(explanations))

    return PipelineResult(fco=fco, trace=trace)
