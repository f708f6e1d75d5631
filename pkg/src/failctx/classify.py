"""Deterministic heuristic root-cause classification.

An ordered first-match rule list runs before any generative step. Rules
inspect only structured fields and finding kinds, never free text, so the
outcome is identical before and after sanitization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .model import (
    DefectKind,
    FailureContextObject,
    FindingKind,
    NetworkPayload,
    Plane,
    RootCauseClass,
    ServerPayload,
    Severity,
    SEVERITY_RANK,
)

_MISSING_FIELD_DEFECTS = {DefectKind.MISSING_REQUIRED_FIELD, DefectKind.MISSING_QUERY_PARAM}


@dataclass(frozen=True)
class ClassificationTrace:
    fired_rule: str  # "R1".."R4" or "none"
    evidence: tuple[tuple[str, str], ...]  # (event/finding reference, reason)


RULE_DESCRIPTIONS: list[tuple[str, str]] = [
    (
        "R1",
        "Any client-side schema violation whose defect is a missing required "
        "request field -> frontend_bug",
    ),
    ("R2", "Any network event flagged as timed out -> infrastructure_issue"),
    (
        "R3",
        "Any server-side contract breach or undocumented response status "
        "-> contract_breach",
    ),
    (
        "R4",
        "Any server event at severity error or above carrying a stack trace, "
        "co-occurring with a network event of status 500-599 -> backend_exception",
    ),
    ("R5", "Otherwise -> unclassified (escalates to the generative explainer)"),
]


def _rule_missing_required_field(fco: FailureContextObject) -> list[tuple[str, str]]:
    evidence = []
    for index, finding in enumerate(fco.findings):
        if (
            finding.kind is FindingKind.CLIENT_SCHEMA_VIOLATION
            and finding.defect in _MISSING_FIELD_DEFECTS
        ):
            evidence.append((f"finding:{index}", f"missing required field: {finding.expected}"))
    return evidence


def _rule_network_timeout(fco: FailureContextObject) -> list[tuple[str, str]]:
    evidence = []
    for event in fco.events:
        if isinstance(event.payload, NetworkPayload) and event.payload.timed_out:
            evidence.append(
                (
                    f"event:{event.event_id}",
                    f"{event.payload.method} {event.payload.path} timed out",
                )
            )
    return evidence


def _rule_contract_breach(fco: FailureContextObject) -> list[tuple[str, str]]:
    evidence = []
    for index, finding in enumerate(fco.findings):
        if finding.kind in (FindingKind.SERVER_CONTRACT_BREACH, FindingKind.UNDOCUMENTED_STATUS):
            evidence.append((f"finding:{index}", finding.kind.value))
    return evidence


def _rule_backend_exception(fco: FailureContextObject) -> list[tuple[str, str]]:
    server_hits = [
        event
        for event in fco.events
        if event.plane is Plane.SERVER
        and isinstance(event.payload, ServerPayload)
        and SEVERITY_RANK[event.severity] >= SEVERITY_RANK[Severity.ERROR]
        and event.payload.stack_trace
    ]
    network_hits = [
        event
        for event in fco.events
        if isinstance(event.payload, NetworkPayload) and 500 <= event.payload.status <= 599
    ]
    if not server_hits or not network_hits:
        return []
    evidence = [
        (f"event:{e.event_id}", "server error with stack trace") for e in server_hits
    ]
    evidence.extend(
        (f"event:{e.event_id}", f"network status {e.payload.status}") for e in network_hits
    )
    return evidence


_Predicate = Callable[[FailureContextObject], list[tuple[str, str]]]

_RULES: list[tuple[str, RootCauseClass, _Predicate]] = [
    ("R1", RootCauseClass.FRONTEND_BUG, _rule_missing_required_field),
    ("R2", RootCauseClass.INFRASTRUCTURE_ISSUE, _rule_network_timeout),
    ("R3", RootCauseClass.CONTRACT_BREACH, _rule_contract_breach),
    ("R4", RootCauseClass.BACKEND_EXCEPTION, _rule_backend_exception),
]


def classify(fco: FailureContextObject) -> tuple[RootCauseClass, ClassificationTrace]:
    """First-match classification over the ordered rule list."""
    for rule_id, cause, predicate in _RULES:
        evidence = predicate(fco)
        if evidence:
            return cause, ClassificationTrace(fired_rule=rule_id, evidence=tuple(evidence))
    return RootCauseClass.UNCLASSIFIED, ClassificationTrace(fired_rule="none", evidence=())


def describe_rules() -> str:
    """Human-readable ordered rule list for the --explain-rules flag."""
    lines = ["Root-cause rules, evaluated first-match in this order:"]
    for rule_id, description in RULE_DESCRIPTIONS:
        lines.append(f"  {rule_id}: {description}")
    return "\n".join(lines)
