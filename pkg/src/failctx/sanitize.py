"""Sensitive-entity masking with stable pseudonymous placeholders.

Pattern-based detection behind a pluggable rule list (an ML NER detector
can supply the same rule interface later). One PlaceholderMap is scoped to
a single FCO pipeline run: the same original always maps to the same
placeholder within that FCO, and maps are never shared or persisted.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Optional

import yaml

from .model import (
    BrowserPayload,
    ContractFinding,
    EntityCount,
    FailureContextObject,
    NetworkPayload,
    Payload,
    ServerPayload,
)


class EntityKind:
    """Built-in entity kinds; custom rules may introduce further names."""

    IPV4 = "ipv4"
    IPV6 = "ipv6"
    EMAIL = "email"
    USER_ID = "user_id"
    BEARER_TOKEN = "bearer_token"
    URL_CREDENTIAL = "url_credential"


@dataclass(frozen=True)
class SanitizationRule:
    kind: str
    pattern: str
    placeholder_prefix: str

    def __post_init__(self) -> None:
        if not self.placeholder_prefix or not self.placeholder_prefix.isalnum():
            raise ValueError("placeholder_prefix must be non-empty alphanumeric")
        re.compile(self.pattern)

    def compiled(self) -> re.Pattern[str]:
        return re.compile(self.pattern)


@dataclass(frozen=True)
class EntityMatch:
    kind: str
    placeholder: str


_IPV4 = r"\b(?:(?:25[0-5]|2[0-4]\d|1\d\d|[1-9]?\d)\.){3}(?:25[0-5]|2[0-4]\d|1\d\d|[1-9]?\d)\b"

# Conservative RFC 4291 textual forms: the full eight-group form, middle
# compression with groups on both sides, edge compressions with at least two
# groups, and the loopback. Deliberately does not match lone "::" so that
# code-like text ("std::vector") is left alone.
_H = "[0-9A-Fa-f]{1,4}"
_IPV6 = (
    r"(?<![0-9A-Fa-f:.])(?:"
    rf"(?:{_H}:){{7}}{_H}"
    rf"|(?:{_H}:){{1,6}}(?::{_H}){{1,6}}"
    rf"|(?:{_H}:){{2,7}}:"
    rf"|::{_H}(?::{_H}){{1,6}}"
    r"|::1"
    r")(?![0-9A-Fa-f:])"
)

_EMAIL = r"\b[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}\b"

DEFAULT_USER_ID_PATTERN = r"\bu-\d+\b"

_BEARER = r"(?<=\bBearer\s)[A-Za-z0-9._~+/=-]{8,}"

_URL_CREDENTIAL = r"(?<=://)[^/\s:@]+:[^/\s@]+(?=@)"


def default_rules(user_id_pattern: str = DEFAULT_USER_ID_PATTERN) -> list[SanitizationRule]:
    """Built-in rule set; order breaks ties between same-length matches."""
    return [
        SanitizationRule(EntityKind.URL_CREDENTIAL, _URL_CREDENTIAL, "CRED"),
        SanitizationRule(EntityKind.BEARER_TOKEN, _BEARER, "TOKEN"),
        SanitizationRule(EntityKind.EMAIL, _EMAIL, "EMAIL"),
        SanitizationRule(EntityKind.IPV6, _IPV6, "IP6"),
        SanitizationRule(EntityKind.IPV4, _IPV4, "IP"),
        SanitizationRule(EntityKind.USER_ID, user_id_pattern, "USER"),
    ]


def load_rules(path: str | Path) -> list[SanitizationRule]:
    """Custom rules from a JSON/YAML file: list of {kind, pattern, placeholder_prefix}."""
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, list):
        raise ValueError("rules file must hold a list of rule objects")
    rules = []
    for index, item in enumerate(raw):
        if not isinstance(item, dict):
            raise ValueError(f"rule {index} is not an object")
        try:
            rules.append(
                SanitizationRule(
                    kind=str(item["kind"]),
                    pattern=str(item["pattern"]),
                    placeholder_prefix=str(item["placeholder_prefix"]),
                )
            )
        except KeyError as exc:
            raise ValueError(f"rule {index} missing field {exc}") from exc
    return rules


class PlaceholderMap:
    """First-seen-order placeholder assignment, injective per kind.

    Holds raw originals only in memory for the duration of one FCO run;
    de-sanitization is intentionally unsupported.
    """

    def __init__(self) -> None:
        self._assigned: dict[tuple[str, str], str] = {}
        self._counters: dict[str, int] = {}

    def placeholder_for(self, kind: str, prefix: str, original: str) -> str:
        key = (kind, original)
        existing = self._assigned.get(key)
        if existing is not None:
            return existing
        n = self._counters.get(prefix, 0) + 1
        self._counters[prefix] = n
        token = f"<{prefix}_{n}>"
        self._assigned[key] = token
        return token

    def __len__(self) -> int:
        return len(self._assigned)


def _collect_matches(
    text: str, compiled: list[tuple[int, SanitizationRule, re.Pattern[str]]]
) -> list[tuple[int, int, int, SanitizationRule]]:
    """Non-overlapping matches; leftmost-longest wins, rule order breaks ties."""
    candidates: list[tuple[int, int, int, SanitizationRule]] = []
    for order, rule, pattern in compiled:
        for m in pattern.finditer(text):
            if m.start() == m.end():
                continue
            candidates.append((m.start(), -(m.end() - m.start()), order, rule))
    candidates.sort(key=lambda c: (c[0], c[1], c[2]))
    chosen: list[tuple[int, int, int, SanitizationRule]] = []
    cursor = 0
    for start, neg_len, order, rule in candidates:
        if start < cursor:
            continue
        chosen.append((start, start - neg_len, order, rule))
        cursor = start - neg_len
    return chosen


def sanitize_text(
    text: str, rules: list[SanitizationRule], pmap: PlaceholderMap
) -> tuple[str, list[EntityMatch]]:
    """Replace every matched entity with its placeholder.

    Raw matched text never leaves this function except inside the map;
    reported matches carry only (kind, placeholder).
    """
    compiled = [(i, rule, rule.compiled()) for i, rule in enumerate(rules)]
    chosen = _collect_matches(text, compiled)
    if not chosen:
        return text, []

    pieces: list[str] = []
    matches: list[EntityMatch] = []
    cursor = 0
    for start, end, _, rule in chosen:
        original = text[start:end]
        token = pmap.placeholder_for(rule.kind, rule.placeholder_prefix, original)
        pieces.append(text[cursor:start])
        pieces.append(token)
        matches.append(EntityMatch(kind=rule.kind, placeholder=token))
        cursor = end
    pieces.append(text[cursor:])
    return "".join(pieces), matches


def find_entities(text: str, rules: list[SanitizationRule]) -> list[tuple[str, str]]:
    """(kind, matched text) pairs; used by leak checks, never by the pipeline."""
    compiled = [(i, rule, rule.compiled()) for i, rule in enumerate(rules)]
    return [(rule.kind, text[start:end]) for start, end, _, rule in _collect_matches(text, compiled)]


def _sanitize_value(
    value: Any, rules: list[SanitizationRule], pmap: PlaceholderMap, sink: list[EntityMatch]
) -> Any:
    """Sanitize string leaves of a structured document; shape and keys stay."""
    if isinstance(value, str):
        cleaned, matches = sanitize_text(value, rules, pmap)
        sink.extend(matches)
        return cleaned
    if isinstance(value, dict):
        return {k: _sanitize_value(v, rules, pmap, sink) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_sanitize_value(v, rules, pmap, sink) for v in value]
    return value


def _sanitize_optional(
    value: Optional[str], rules: list[SanitizationRule], pmap: PlaceholderMap, sink: list[EntityMatch]
) -> Optional[str]:
    if value is None:
        return None
    cleaned, matches = sanitize_text(value, rules, pmap)
    sink.extend(matches)
    return cleaned


def _sanitize_headers(
    headers: tuple[tuple[str, str], ...],
    rules: list[SanitizationRule],
    pmap: PlaceholderMap,
    sink: list[EntityMatch],
) -> tuple[tuple[str, str], ...]:
    # Header names are protocol tokens (structure); only values are data.
    out = []
    for name, value in headers:
        cleaned, matches = sanitize_text(value, rules, pmap)
        sink.extend(matches)
        out.append((name, cleaned))
    return tuple(out)


def _sanitize_payload(
    payload: Payload, rules: list[SanitizationRule], pmap: PlaceholderMap, sink: list[EntityMatch]
) -> Payload:
    if isinstance(payload, BrowserPayload):
        message, m1 = sanitize_text(payload.message, rules, pmap)
        sink.extend(m1)
        page_url, m2 = sanitize_text(payload.page_url, rules, pmap)
        sink.extend(m2)
        return replace(
            payload,
            message=message,
            page_url=page_url,
            stack=_sanitize_optional(payload.stack, rules, pmap, sink),
            clicked_element=_sanitize_optional(payload.clicked_element, rules, pmap, sink),
            state_snapshot=(
                _sanitize_value(payload.state_snapshot, rules, pmap, sink)
                if payload.state_snapshot is not None
                else None
            ),
        )
    if isinstance(payload, NetworkPayload):
        path, m1 = sanitize_text(payload.path, rules, pmap)
        sink.extend(m1)
        return replace(
            payload,
            path=path,
            request_headers=_sanitize_headers(payload.request_headers, rules, pmap, sink),
            response_headers=_sanitize_headers(payload.response_headers, rules, pmap, sink),
            request_body=(
                _sanitize_value(payload.request_body, rules, pmap, sink)
                if payload.request_body is not None
                else None
            ),
            response_body=(
                _sanitize_value(payload.response_body, rules, pmap, sink)
                if payload.response_body is not None
                else None
            ),
        )
    assert isinstance(payload, ServerPayload)
    message, m1 = sanitize_text(payload.message, rules, pmap)
    sink.extend(m1)
    service, m2 = sanitize_text(payload.service, rules, pmap)
    sink.extend(m2)
    return replace(
        payload,
        message=message,
        service=service,
        stack_trace=_sanitize_optional(payload.stack_trace, rules, pmap, sink),
    )


def _sanitize_finding(
    finding: ContractFinding, rules: list[SanitizationRule], pmap: PlaceholderMap, sink: list[EntityMatch]
) -> ContractFinding:
    # Locations are structural JSON pointers and stay untouched so they keep
    # resolving into the offending document.
    message, m1 = sanitize_text(finding.message, rules, pmap)
    sink.extend(m1)
    expected, m2 = sanitize_text(finding.expected, rules, pmap)
    sink.extend(m2)
    actual, m3 = sanitize_text(finding.actual, rules, pmap)
    sink.extend(m3)
    return replace(finding, message=message, expected=expected, actual=actual)


def sanitize_fco(
    fco: FailureContextObject, rules: Optional[list[SanitizationRule]] = None
) -> FailureContextObject:
    """Sanitize every payload string, finding text, and state snapshot.

    One shared PlaceholderMap covers the whole FCO; per-kind match counts are
    added onto any existing sanitization report, which makes the operation
    idempotent (placeholders match no rule, so a second pass adds zero).
    """
    if rules is None:
        rules = default_rules()
    pmap = PlaceholderMap()
    sink: list[EntityMatch] = []

    events = []
    for event in fco.events:
        payload = _sanitize_payload(event.payload, rules, pmap, sink)
        events.append(replace(event, payload=payload))

    findings = tuple(_sanitize_finding(f, rules, pmap, sink) for f in fco.findings)

    counts: dict[str, int] = {c.kind: c.count for c in fco.sanitization_report}
    for match in sink:
        counts[match.kind] = counts.get(match.kind, 0) + 1
    report = tuple(
        EntityCount(kind=kind, count=counts[kind]) for kind in sorted(counts)
    )

    return replace(
        fco,
        events=tuple(events),
        findings=findings,
        sanitization_report=report,
    )


def serialized_leaks(serialized: str, rules: Optional[list[SanitizationRule]] = None) -> list[tuple[str, str]]:
    """Entities still present in a serialized FCO; empty means leak-free."""
    if rules is None:
        rules = default_rules()
    return find_entities(serialized, rules)
