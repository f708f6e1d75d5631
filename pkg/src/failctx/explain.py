"""Prompt serialization and dual-audience explanation generation.

The completion backend is pluggable: a deterministic template engine is the
default (and the only one tests touch); an HTTP client for a
chat-completion-compatible endpoint is opt-in via config. Deterministically
classified failures short-circuit to the template engine; the generative
path is reserved for unclassified contexts.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass
from typing import Any, Optional, Protocol

import httpx

from .model import (
    Audience,
    Culprit,
    Explanation,
    FailureContextObject,
    FindingKind,
    NetworkPayload,
    Plane,
    RootCauseClass,
    Severity,
    SEVERITY_RANK,
    DefectKind,
)

PROMPT_CHAR_CAP = 16384
END_USER_CHAR_CAP = 300

# Kept short so elided event digests stay bounded.
_DIGEST_CAP = 200

CONTEXT_BEGIN = "### CONTEXT"
CONTEXT_END = "### END CONTEXT"

_PREAMBLE = (
    "You are a debugging assistant. One failure context with correlated "
    "browser, network, and server telemetry follows. Perform four tasks:\n"
    "1. Summarize the technical error.\n"
    "2. Identify the likely culprit (Database, Network, Client logic).\n"
    "3. Generate a user-facing explanation.\n"
    "4. Generate a developer-facing explanation.\n"
)

_OUTPUT_FORMAT = (
    "Respond with one JSON object holding exactly these fields:\n"
    '{"summary": "<one sentence>", "culprit": '
    '"database|network|client_logic|backend|unknown", '
    '"user_text": "<plain language, at most 300 characters, no stack traces, '
    'no status codes>", "developer_text": "<technical detail>"}\n'
)


class BackendFailure(RuntimeError):
    """The completion backend produced no usable text."""


class ParseFailure(ValueError):
    """The backend response is missing one of the four required fields."""


class CompletionBackend(Protocol):
    identifier: str

    def complete(self, prompt: str) -> str: ...


CULPRIT_BY_CLASS = {
    RootCauseClass.FRONTEND_BUG: Culprit.CLIENT_LOGIC,
    RootCauseClass.INFRASTRUCTURE_ISSUE: Culprit.NETWORK,
    RootCauseClass.BACKEND_EXCEPTION: Culprit.BACKEND,
    RootCauseClass.CONTRACT_BREACH: Culprit.BACKEND,
    RootCauseClass.UNCLASSIFIED: Culprit.UNKNOWN,
}

_CULPRIT_ALIASES = {
    "database": Culprit.DATABASE,
    "db": Culprit.DATABASE,
    "network": Culprit.NETWORK,
    "client logic": Culprit.CLIENT_LOGIC,
    "client_logic": Culprit.CLIENT_LOGIC,
    "clientlogic": Culprit.CLIENT_LOGIC,
    "client": Culprit.CLIENT_LOGIC,
    "frontend": Culprit.CLIENT_LOGIC,
    "backend": Culprit.BACKEND,
    "server": Culprit.BACKEND,
}


def parse_culprit(raw: str) -> Culprit:
    return _CULPRIT_ALIASES.get(raw.strip().lower(), Culprit.UNKNOWN)


# --- prompt construction ---------------------------------------------------


def _event_digest(event, cap: Optional[int] = None) -> dict[str, Any]:
    payload = event.payload
    if event.plane is Plane.BROWSER:
        summary = payload.message
    elif event.plane is Plane.NETWORK:
        summary = f"{payload.method} {payload.path} -> {payload.status}" + (
            " (timed out)" if payload.timed_out else ""
        )
    else:
        summary = f"[{payload.service}] {payload.message}"
    if cap is not None and len(summary) > cap:
        summary = summary[:cap] + "..."
    return {
        "event_id": event.event_id,
        "plane": event.plane.value,
        "timestamp_ms": event.timestamp_ms,
        "severity": event.severity.value,
        "summary": summary,
    }


def _primary_network_event(fco: FailureContextObject):
    network = [e for e in fco.events if isinstance(e.payload, NetworkPayload)]
    for event in network:
        if event.payload.timed_out or event.payload.status == 0 or event.payload.status >= 400:
            return event
    return network[0] if network else None


def _context_document(fco: FailureContextObject, elide: bool) -> dict[str, Any]:
    primary = _primary_network_event(fco)
    missing_fields = [
        f.expected
        for f in fco.findings
        if f.kind is FindingKind.CLIENT_SCHEMA_VIOLATION
        and f.defect in (DefectKind.MISSING_REQUIRED_FIELD, DefectKind.MISSING_QUERY_PARAM)
    ]
    server_errors = [
        {"message": e.payload.message, "has_stack": bool(e.payload.stack_trace)}
        for e in fco.events
        if e.plane is Plane.SERVER and SEVERITY_RANK[e.severity] >= SEVERITY_RANK[Severity.ERROR]
    ]
    browser_messages = [
        e.payload.message for e in fco.events if e.plane is Plane.BROWSER
    ]

    if elide:
        keep = set()
        if fco.events:
            keep.add(0)
            keep.add(len(fco.events) - 1)
        for index, event in enumerate(fco.events):
            if SEVERITY_RANK[event.severity] >= SEVERITY_RANK[Severity.ERROR]:
                keep.add(index)
        digests: list[Any] = []
        elided_run = 0
        for index, event in enumerate(fco.events):
            if index in keep:
                if elided_run:
                    digests.append({"elided_events": elided_run})
                    elided_run = 0
                is_error = SEVERITY_RANK[event.severity] >= SEVERITY_RANK[Severity.ERROR]
                digests.append(_event_digest(event, cap=None if is_error else _DIGEST_CAP))
            else:
                elided_run += 1
        if elided_run:
            digests.append({"elided_events": elided_run})
    else:
        digests = [_event_digest(e) for e in fco.events]

    doc: dict[str, Any] = {
        "root_cause": fco.root_cause.value,
        "trigger": fco.report.trigger.value,
        "endpoint": primary.payload.path.split("?", 1)[0] if primary else None,
        "method": primary.payload.method if primary else None,
        "status": primary.payload.status if primary else None,
        "timed_out": bool(primary and primary.payload.timed_out),
        "missing_fields": missing_fields,
        "findings": [
            {
                "kind": f.kind.value,
                "defect": f.defect.value if f.defect else None,
                "location": f.location,
                "message": f.message,
            }
            for f in fco.findings
        ],
        "server_errors": server_errors,
        "browser_messages": browser_messages,
        "event_count": len(fco.events),
        "truncated": fco.truncated,
        "events": digests,
    }
    if not fco.events:
        doc["note"] = "no correlated events"
    return doc


def _render_prompt(context: dict[str, Any]) -> str:
    context_json = json.dumps(context, indent=1, ensure_ascii=False)
    return "\n".join([_PREAMBLE, CONTEXT_BEGIN, context_json, CONTEXT_END, "", _OUTPUT_FORMAT])


def build_prompt(fco: FailureContextObject) -> str:
    """Deterministic prompt: preamble, compact FCO context, output contract.

    Capped at 16384 characters by eliding event digests (first, last, and
    every error-severity event survive with messages intact).
    """
    prompt = _render_prompt(_context_document(fco, elide=False))
    if len(prompt) <= PROMPT_CHAR_CAP:
        return prompt
    return _render_prompt(_context_document(fco, elide=True))


def extract_context(prompt: str) -> dict[str, Any]:
    """Recover the machine-readable context block from a prompt."""
    try:
        begin = prompt.index(CONTEXT_BEGIN) + len(CONTEXT_BEGIN)
        end = prompt.index(CONTEXT_END, begin)
        return json.loads(prompt[begin:end])
    except (ValueError, json.JSONDecodeError) as exc:
        raise BackendFailure(f"prompt carries no usable context block: {exc}") from exc


# --- structured response parsing -------------------------------------------

_REQUIRED_FIELDS = ("summary", "culprit", "user_text", "developer_text")

_FENCE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


@dataclass(frozen=True)
class StructuredResponse:
    summary: str
    culprit: str
    user_text: str
    developer_text: str


def parse_structured_response(text: str) -> StructuredResponse:
    """Extract the four required fields; field order never matters."""
    candidates = [text.strip()]
    fenced = _FENCE.search(text)
    if fenced:
        candidates.insert(0, fenced.group(1).strip())

    document = None
    for candidate in candidates:
        try:
            document = json.loads(candidate)
            break
        except json.JSONDecodeError:
            start = candidate.find("{")
            if start < 0:
                continue
            try:
                document, _ = json.JSONDecoder().raw_decode(candidate[start:])
                break
            except json.JSONDecodeError:
                continue
    if not isinstance(document, dict):
        raise ParseFailure("no JSON object found in backend response")

    missing = [name for name in _REQUIRED_FIELDS if not isinstance(document.get(name), str)]
    if missing:
        raise ParseFailure(f"backend response missing fields: {', '.join(missing)}")
    return StructuredResponse(
        summary=document["summary"],
        culprit=document["culprit"],
        user_text=document["user_text"],
        developer_text=document["developer_text"],
    )


# --- template backend -------------------------------------------------------


def _exchange_phrase(context: dict[str, Any]) -> str:
    method = context.get("method")
    endpoint = context.get("endpoint")
    if method and endpoint:
        return f"{method} {endpoint}"
    return "The failing exchange"


def _render_frontend_bug(context: dict[str, Any]) -> dict[str, str]:
    fields = context.get("missing_fields") or ["a required field"]
    field_list = ", ".join(fields)
    exchange = _exchange_phrase(context)
    return {
        "summary": "The request left the client without data the API contract requires.",
        "culprit": Culprit.CLIENT_LOGIC.value,
        "user_text": (
            "Something in this page sent an incomplete request, so the action "
            "could not be completed. Please refresh and try again; the defect "
            "has been reported automatically."
        ),
        "developer_text": (
            f"{exchange} violated the API contract: Required Field Missing "
            f"({field_list}). The request was built without mandatory data; "
            "fix the client-side payload construction."
        ),
    }


def _render_infrastructure(context: dict[str, Any]) -> dict[str, str]:
    exchange = _exchange_phrase(context)
    return {
        "summary": "A network exchange timed out before the backend answered.",
        "culprit": Culprit.NETWORK.value,
        "user_text": (
            "We are having trouble connecting to one of our services. Please "
            "try again in a few minutes."
        ),
        "developer_text": (
            f"{exchange} timed out with no usable response. Suspect network or "
            "upstream infrastructure: check connectivity, DNS, and the health "
            "of the target service."
        ),
    }


def _render_backend_exception(context: dict[str, Any]) -> dict[str, str]:
    exchange = _exchange_phrase(context)
    status = context.get("status")
    server_errors = context.get("server_errors") or []
    detail = server_errors[0]["message"] if server_errors else "an unlogged exception"
    return {
        "summary": "The backend raised an exception while handling the request.",
        "culprit": Culprit.BACKEND.value,
        "user_text": (
            "The dashboard failed to load because the server hit an unexpected "
            "error while preparing your data. Please try again; our engineers "
            "already have the technical details."
        ),
        "developer_text": (
            f"{exchange} failed with {status} Error: {detail}. The backend "
            "raised an exception while handling the request; correlated stack "
            "trace attached to the failure context."
        ),
    }


def _render_contract_breach(context: dict[str, Any]) -> dict[str, str]:
    exchange = _exchange_phrase(context)
    status = context.get("status")
    findings = context.get("findings") or []
    breaches = [
        f["message"]
        for f in findings
        if f.get("kind")
        in (FindingKind.SERVER_CONTRACT_BREACH.value, FindingKind.UNDOCUMENTED_STATUS.value)
    ]
    detail = breaches[0] if breaches else "response diverged from the declared schema"
    return {
        "summary": "The backend response broke the declared API contract.",
        "culprit": Culprit.BACKEND.value,
        "user_text": (
            "The service answered in an unexpected format, so this page could "
            "not display your data. Please try again shortly; the mismatch has "
            "been reported."
        ),
        "developer_text": (
            f"{exchange} returned {status} but the payload breaches the "
            f"contract: {detail}. Backend drifted from the API specification; "
            "compare the deployed handler against the published schema."
        ),
    }


def _render_unclassified(context: dict[str, Any]) -> dict[str, str]:
    exchange = _exchange_phrase(context)
    status = context.get("status")
    server_errors = context.get("server_errors") or []
    browser = context.get("browser_messages") or []
    observed = []
    if context.get("method") and context.get("endpoint"):
        observed.append(f"{exchange} -> {status}")
    if server_errors:
        observed.append(f"server: {server_errors[0]['message']}")
    if browser:
        observed.append(f"browser: {browser[0]}")
    observed_text = "; ".join(observed) if observed else "no correlated events"
    return {
        "summary": "No known failure pattern matched; full context collected for review.",
        "culprit": Culprit.UNKNOWN.value,
        "user_text": (
            "Something went wrong while loading this page. Please try again; "
            "diagnostic details were collected automatically so support can "
            "investigate."
        ),
        "developer_text": (
            f"No deterministic rule matched this failure. Observed: {observed_text}. "
            "Review the correlated events and findings in the failure context."
        ),
    }


_RENDERERS = {
    RootCauseClass.FRONTEND_BUG.value: _render_frontend_bug,
    RootCauseClass.INFRASTRUCTURE_ISSUE.value: _render_infrastructure,
    RootCauseClass.BACKEND_EXCEPTION.value: _render_backend_exception,
    RootCauseClass.CONTRACT_BREACH.value: _render_contract_breach,
    RootCauseClass.UNCLASSIFIED.value: _render_unclassified,
}


class TemplateBackend:
    """Deterministic renderer; byte-identical output for identical prompts."""

    identifier = "template"

    def complete(self, prompt: str) -> str:
        context = extract_context(prompt)
        renderer = _RENDERERS.get(context.get("root_cause"), _render_unclassified)
        return json.dumps(renderer(context), ensure_ascii=False)


class HttpBackend:
    """Chat-completion-style HTTP client; never used unless configured."""

    identifier = "http"

    def __init__(
        self,
        endpoint: str,
        model: str,
        timeout_ms: int = 30000,
        token_env: Optional[str] = None,
        transport: Optional[httpx.BaseTransport] = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.token_env = token_env
        self._client = httpx.Client(timeout=timeout_ms / 1000.0, transport=transport)

    def complete(self, prompt: str) -> str:
        headers = {}
        if self.token_env:
            token = os.environ.get(self.token_env)
            if token:
                headers["Authorization"] = f"Bearer {token}"
        try:
            response = self._client.post(
                self.endpoint,
                json={
                    "model": self.model,
                    "messages": [{"role": "user", "content": prompt}],
                },
                headers=headers,
            )
            response.raise_for_status()
            data = response.json()
            return data["choices"][0]["message"]["content"]
        except (httpx.HTTPError, KeyError, IndexError, TypeError, ValueError) as exc:
            raise BackendFailure(f"http completion failed: {exc}") from exc


# --- explanation generation --------------------------------------------------

_BARE_STATUS = re.compile(r"\b[1-5]\d\d\b")


def _end_user_text_acceptable(text: str) -> bool:
    if len(text) > END_USER_CHAR_CAP:
        return False
    if _BARE_STATUS.search(text):
        return False
    if "<TOKEN_" in text or "<CRED_" in text:
        return False
    return True


def generate_explanations(
    fco: FailureContextObject,
    backend: Optional[CompletionBackend] = None,
    force_generative: bool = False,
) -> list[Explanation]:
    """Exactly one end-user and one developer explanation, always.

    Deterministic classes use the template engine even when an HTTP backend
    is configured (override with force_generative); backend failures and
    unparseable output fall back to the template engine with explanations
    marked degraded.
    """
    template = TemplateBackend()
    prompt = build_prompt(fco)

    use_generative = (
        backend is not None
        and backend.identifier != "template"
        and (fco.root_cause is RootCauseClass.UNCLASSIFIED or force_generative)
    )

    degraded = False
    parsed: Optional[StructuredResponse] = None
    if use_generative:
        try:
            parsed = parse_structured_response(backend.complete(prompt))
            if not _end_user_text_acceptable(parsed.user_text):
                parsed = None
                degraded = True
        except (BackendFailure, ParseFailure):
            parsed = None
            degraded = True

    if parsed is None:
        parsed = parse_structured_response(template.complete(prompt))
        culprit = CULPRIT_BY_CLASS[fco.root_cause]
    else:
        culprit = parse_culprit(parsed.culprit)

    return [
        Explanation(
            audience=Audience.END_USER,
            text=parsed.user_text,
            culprit=culprit,
            summary=parsed.summary,
            degraded=degraded,
        ),
        Explanation(
            audience=Audience.DEVELOPER,
            text=parsed.developer_text,
            culprit=culprit,
            summary=parsed.summary,
            degraded=degraded,
        ),
    ]
