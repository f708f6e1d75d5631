"""OpenAPI 3.x subset loader and traffic validator.

Loads path templates, required query parameters, request/response JSON
schemas (a decidable keyword subset), and validates network-plane events
into classified contract findings: client-side schema violations,
server-side contract breaches, undocumented endpoints and statuses.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional
from urllib.parse import parse_qs

import yaml

from .model import (
    ContractFinding,
    DefectKind,
    FindingKind,
    NetworkPayload,
    TelemetryEvent,
)

SUPPORTED_TYPES = {"object", "array", "string", "number", "integer", "boolean", "null"}

# Keywords we deliberately do not enforce; their presence is recorded as a
# warning on the loaded spec.
IGNORED_KEYWORDS = (
    "allOf",
    "oneOf",
    "anyOf",
    "not",
    "format",
    "patternProperties",
    "pattern",
    "minLength",
    "maxLength",
    "minimum",
    "maximum",
    "minItems",
    "maxItems",
)

WILDCARD_STATUS = re.compile(r"^[1-5]XX$")

HTTP_METHODS = {"get", "put", "post", "delete", "options", "head", "patch", "trace"}


class SpecError(ValueError):
    """The OpenAPI document is missing or malformed beyond use."""


@dataclass(frozen=True)
class SchemaNode:
    type: Optional[str] = None
    required: tuple[str, ...] = ()
    properties: tuple[tuple[str, "SchemaNode"], ...] = ()
    items: Optional["SchemaNode"] = None
    enum: Optional[tuple[Any, ...]] = None
    nullable: bool = False
    additional_properties: bool = True

    def property_map(self) -> dict[str, "SchemaNode"]:
        return dict(self.properties)


@dataclass(frozen=True)
class OperationSpec:
    method: str
    template: str
    required_query_params: tuple[str, ...] = ()
    request_schema: Optional[SchemaNode] = None
    responses: tuple[tuple[str, Optional[SchemaNode]], ...] = ()

    def response_map(self) -> dict[str, Optional[SchemaNode]]:
        return dict(self.responses)


@dataclass(frozen=True)
class ApiSpec:
    # template -> {METHOD -> OperationSpec}
    paths: tuple[tuple[str, tuple[tuple[str, OperationSpec], ...]], ...]
    warnings: tuple[str, ...] = ()

    def operations(self) -> list[OperationSpec]:
        return [op for _, methods in self.paths for _, op in methods]


@dataclass(frozen=True)
class SchemaDefect:
    """One structural violation found by validate_document."""

    location: str
    expected: str
    actual: str
    kind: DefectKind


def _escape_pointer(token: str) -> str:
    return token.replace("~", "~0").replace("/", "~1")


def json_type_name(value: Any) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, int):
        return "integer"
    if isinstance(value, float):
        return "number"
    if isinstance(value, str):
        return "string"
    if isinstance(value, list):
        return "array"
    if isinstance(value, dict):
        return "object"
    return type(value).__name__


def _matches_type(value: Any, declared: str) -> bool:
    if declared == "object":
        return isinstance(value, dict)
    if declared == "array":
        return isinstance(value, list)
    if declared == "string":
        return isinstance(value, str)
    if declared == "boolean":
        return isinstance(value, bool)
    if declared == "integer":
        if isinstance(value, bool):
            return False
        if isinstance(value, int):
            return True
        return isinstance(value, float) and value.is_integer()
    if declared == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if declared == "null":
        return value is None
    return True


def _enum_member(value: Any, candidates: tuple[Any, ...]) -> bool:
    for candidate in candidates:
        if isinstance(candidate, bool) != isinstance(value, bool):
            continue
        if candidate == value:
            return True
    return False


# --- spec loading ----------------------------------------------------------


class _SchemaCompiler:
    def __init__(self, components: dict[str, Any]):
        self._components = components
        self.warnings: list[str] = []

    def compile(self, node: Any, context: str, resolving: frozenset[str] = frozenset()) -> SchemaNode:
        if not isinstance(node, dict):
            raise SpecError(f"schema node at {context} is not an object")

        ref = node.get("$ref")
        if ref is not None:
            if not isinstance(ref, str) or not ref.startswith("#/components/schemas/"):
                raise SpecError(f"$ref {ref!r} at {context} is outside #/components/schemas")
            name = ref.rsplit("/", 1)[-1]
            if name in resolving:
                raise SpecError(f"cyclic $ref through {name!r}")
            target = self._components.get(name)
            if target is None:
                raise SpecError(f"$ref to unknown schema {name!r} at {context}")
            return self.compile(target, f"#/components/schemas/{name}", resolving | {name})

        for keyword in IGNORED_KEYWORDS:
            if keyword in node:
                self.warnings.append(f"{context}: ignoring unsupported keyword {keyword!r}")

        declared_type = node.get("type")
        if declared_type is not None:
            if not isinstance(declared_type, str) or declared_type not in SUPPORTED_TYPES:
                raise SpecError(f"unsupported type {declared_type!r} at {context}")

        raw_required = node.get("required", [])
        if not isinstance(raw_required, list) or not all(isinstance(x, str) for x in raw_required):
            raise SpecError(f"malformed required list at {context}")

        raw_props = node.get("properties", {})
        if not isinstance(raw_props, dict):
            raise SpecError(f"malformed properties at {context}")
        properties = tuple(
            (name, self.compile(child, f"{context}/properties/{name}", resolving))
            for name, child in raw_props.items()
        )

        items = None
        if "items" in node:
            items = self.compile(node["items"], f"{context}/items", resolving)

        enum = node.get("enum")
        if enum is not None:
            if not isinstance(enum, list) or not enum:
                raise SpecError(f"malformed enum at {context}")
            enum = tuple(enum)

        additional = node.get("additionalProperties", True)
        if isinstance(additional, dict):
            # Schema-valued additionalProperties is treated as permissive.
            self.warnings.append(f"{context}: schema-valued additionalProperties treated as true")
            additional = True
        if not isinstance(additional, bool):
            raise SpecError(f"malformed additionalProperties at {context}")

        declared_names = {name for name, _ in properties}
        if additional is False:
            for name in raw_required:
                if name not in declared_names:
                    raise SpecError(
                        f"required name {name!r} not among declared properties at {context}"
                    )

        return SchemaNode(
            type=declared_type,
            required=tuple(raw_required),
            properties=properties,
            items=items,
            enum=enum,
            nullable=bool(node.get("nullable", False)),
            additional_properties=additional,
        )


def _operation_schema(compiler: _SchemaCompiler, body: Any, context: str) -> Optional[SchemaNode]:
    """Extract the application/json schema of a requestBody/response object."""
    if not isinstance(body, dict):
        return None
    content = body.get("content")
    if not isinstance(content, dict):
        return None
    for media_type, media in content.items():
        if "json" in media_type.lower() and isinstance(media, dict) and "schema" in media:
            return compiler.compile(media["schema"], f"{context}/content/{media_type}/schema")
    return None


def _required_query_params(*parameter_lists: Any) -> tuple[str, ...]:
    names: list[str] = []
    for parameters in parameter_lists:
        if not isinstance(parameters, list):
            continue
        for parameter in parameters:
            if (
                isinstance(parameter, dict)
                and parameter.get("in") == "query"
                and parameter.get("required") is True
                and isinstance(parameter.get("name"), str)
            ):
                names.append(parameter["name"])
    return tuple(dict.fromkeys(names))


def load_spec(document: Any) -> ApiSpec:
    """Build an ApiSpec from a parsed, or JSON/YAML text, OpenAPI document."""
    if isinstance(document, (str, bytes)):
        try:
            document = yaml.safe_load(document)
        except yaml.YAMLError as exc:
            raise SpecError(f"document does not parse as JSON/YAML: {exc}") from exc
    if not isinstance(document, dict):
        raise SpecError("OpenAPI document is not an object")

    raw_paths = document.get("paths")
    if not isinstance(raw_paths, dict):
        raise SpecError("OpenAPI document has no paths object")

    components = document.get("components", {}).get("schemas", {})
    if not isinstance(components, dict):
        raise SpecError("components.schemas is not an object")
    compiler = _SchemaCompiler(components)

    paths: list[tuple[str, tuple[tuple[str, OperationSpec], ...]]] = []
    seen: set[tuple[str, str]] = set()
    for template, path_item in raw_paths.items():
        if not isinstance(path_item, dict):
            raise SpecError(f"path item {template!r} is not an object")
        methods: list[tuple[str, OperationSpec]] = []
        for key, operation in path_item.items():
            if key.lower() not in HTTP_METHODS:
                continue
            if not isinstance(operation, dict):
                raise SpecError(f"operation {key.upper()} {template} is not an object")
            method = key.upper()
            if (template, method) in seen:
                raise SpecError(f"duplicate operation {method} {template}")
            seen.add((template, method))

            context = f"paths/{template}/{key}"
            responses_raw = operation.get("responses", {})
            if not isinstance(responses_raw, dict):
                raise SpecError(f"malformed responses at {context}")
            responses: list[tuple[str, Optional[SchemaNode]]] = []
            for status_key, response in responses_raw.items():
                status_key = str(status_key)
                if not (
                    status_key == "default"
                    or WILDCARD_STATUS.match(status_key)
                    or status_key.isdigit()
                ):
                    raise SpecError(f"bad response key {status_key!r} at {context}")
                responses.append(
                    (status_key, _operation_schema(compiler, response, f"{context}/responses/{status_key}"))
                )

            methods.append(
                (
                    method,
                    OperationSpec(
                        method=method,
                        template=template,
                        required_query_params=_required_query_params(
                            path_item.get("parameters"), operation.get("parameters")
                        ),
                        request_schema=_operation_schema(
                            compiler, operation.get("requestBody"), f"{context}/requestBody"
                        ),
                        responses=tuple(responses),
                    ),
                )
            )
        paths.append((template, tuple(methods)))

    return ApiSpec(paths=tuple(paths), warnings=tuple(compiler.warnings))


def load_spec_file(path: str | Path) -> ApiSpec:
    return load_spec(Path(path).read_text(encoding="utf-8"))


# --- path matching ---------------------------------------------------------


def _split_segments(path: str) -> list[str]:
    return [segment for segment in path.split("/") if segment != ""]


def _template_matches(template: str, path: str) -> Optional[int]:
    """Literal segment count when the template matches, else None."""
    t_segments = _split_segments(template)
    p_segments = _split_segments(path)
    if len(t_segments) != len(p_segments):
        return None
    literals = 0
    for t_seg, p_seg in zip(t_segments, p_segments):
        if t_seg.startswith("{") and t_seg.endswith("}") and len(t_seg) > 2:
            if not p_seg:
                return None
        elif t_seg == p_seg:
            literals += 1
        else:
            return None
    return literals


def match_path(spec: ApiSpec, method: str, path: str) -> Optional[OperationSpec]:
    """Resolve a concrete method+path to an operation; None means no match.

    Exact-literal templates win over templated ones; among templated
    candidates the one with the most literal segments (then the smallest
    template string) wins. The query string is ignored.
    """
    bare_path = path.split("?", 1)[0]
    method = method.upper()
    best: Optional[tuple[int, str, OperationSpec]] = None
    for template, methods in spec.paths:
        operation = dict(methods).get(method)
        if operation is None:
            continue
        if template == bare_path:
            return operation
        literals = _template_matches(template, bare_path)
        if literals is None:
            continue
        candidate = (-literals, template, operation)
        if best is None or candidate[:2] < best[:2]:
            best = candidate
    return best[2] if best else None


# --- document validation ---------------------------------------------------


def validate_document(schema: SchemaNode, document: Any, pointer: str = "") -> list[SchemaDefect]:
    """Recursive structural validation; reports every defect, no short-circuit.

    Keywords are independent assertions (JSON-Schema semantics): object and
    array keywords apply to matching instances regardless of a failed type
    check, so the defect list agrees with reference validators.
    """
    defects: list[SchemaDefect] = []

    if document is None:
        if schema.nullable:
            return defects
        if schema.type is not None:
            defects.append(
                SchemaDefect(
                    location=pointer,
                    expected=schema.type,
                    actual="null",
                    kind=DefectKind.NULL_NOT_ALLOWED,
                )
            )
        if schema.enum is not None and not _enum_member(None, schema.enum):
            defects.append(
                SchemaDefect(
                    location=pointer,
                    expected="one of " + ", ".join(repr(v) for v in schema.enum),
                    actual="null",
                    kind=DefectKind.ENUM_MISMATCH,
                )
            )
        return defects

    if schema.type is not None and not _matches_type(document, schema.type):
        defects.append(
            SchemaDefect(
                location=pointer,
                expected=schema.type,
                actual=json_type_name(document),
                kind=DefectKind.TYPE_MISMATCH,
            )
        )

    if schema.enum is not None and not _enum_member(document, schema.enum):
        defects.append(
            SchemaDefect(
                location=pointer,
                expected="one of " + ", ".join(repr(v) for v in schema.enum),
                actual=repr(document),
                kind=DefectKind.ENUM_MISMATCH,
            )
        )

    if isinstance(document, dict):
        declared = schema.property_map()
        for name in schema.required:
            if name not in document:
                defects.append(
                    SchemaDefect(
                        location=f"{pointer}/{_escape_pointer(name)}",
                        expected=f"required property {name!r}",
                        actual="absent",
                        kind=DefectKind.MISSING_REQUIRED_FIELD,
                    )
                )
        for name, child in schema.properties:
            if name in document:
                defects.extend(
                    validate_document(child, document[name], f"{pointer}/{_escape_pointer(name)}")
                )
        if not schema.additional_properties:
            for name in document:
                if name not in declared:
                    defects.append(
                        SchemaDefect(
                            location=f"{pointer}/{_escape_pointer(name)}",
                            expected="no undeclared properties",
                            actual=f"property {name!r}",
                            kind=DefectKind.UNDECLARED_PROPERTY,
                        )
                    )
    elif isinstance(document, list) and schema.items is not None:
        for index, element in enumerate(document):
            defects.extend(validate_document(schema.items, element, f"{pointer}/{index}"))

    return defects


# --- exchange validation ---------------------------------------------------


def _is_text_digest(body: Any) -> bool:
    return isinstance(body, dict) and set(body.keys()) == {"text_digest", "total_length"}


def _resolve_response_schema(
    operation: OperationSpec, status: int
) -> tuple[bool, Optional[SchemaNode]]:
    """(documented, schema) for a status, trying exact, NXX wildcard, default."""
    responses = operation.response_map()
    for key in (str(status), f"{status // 100}XX", "default"):
        if key in responses:
            return True, responses[key]
    return False, None


def _defect_message(defect: SchemaDefect, side: str) -> str:
    if defect.kind is DefectKind.MISSING_REQUIRED_FIELD:
        return f"Required Field Missing: {defect.expected} absent from {side} at {defect.location or '/'}"
    if defect.kind is DefectKind.NULL_NOT_ALLOWED:
        return f"Null not allowed in {side} at {defect.location or '/'}: expected {defect.expected}"
    if defect.kind is DefectKind.TYPE_MISMATCH:
        return (
            f"Type mismatch in {side} at {defect.location or '/'}: "
            f"expected {defect.expected}, got {defect.actual}"
        )
    if defect.kind is DefectKind.ENUM_MISMATCH:
        return f"Value outside declared enum in {side} at {defect.location or '/'}"
    if defect.kind is DefectKind.UNDECLARED_PROPERTY:
        return f"Undeclared {defect.actual} in {side} at {defect.location or '/'}"
    return f"Schema violation in {side} at {defect.location or '/'}"


def validate_exchange(spec: ApiSpec, event: TelemetryEvent) -> list[ContractFinding]:
    """Validate one network exchange; an empty list means fully conformant."""
    payload = event.payload
    if not isinstance(payload, NetworkPayload):
        raise ValueError("validate_exchange requires a network-plane event")

    bare_path, _, query = payload.path.partition("?")
    operation = match_path(spec, payload.method, bare_path)
    if operation is None:
        return [
            ContractFinding(
                kind=FindingKind.UNDOCUMENTED_ENDPOINT,
                location="",
                expected="an endpoint documented in the API contract",
                actual=f"{payload.method} {bare_path}",
                message=f"{payload.method} {bare_path} is not documented in the API contract",
                event_id=event.event_id,
            )
        ]

    findings: list[ContractFinding] = []

    present_params = set(parse_qs(query, keep_blank_values=True)) if query else set()
    for name in operation.required_query_params:
        if name not in present_params:
            findings.append(
                ContractFinding(
                    kind=FindingKind.CLIENT_SCHEMA_VIOLATION,
                    location="",
                    expected=f"required query parameter {name!r}",
                    actual="absent",
                    message=f"Required Field Missing: query parameter {name!r} absent from request",
                    event_id=event.event_id,
                    defect=DefectKind.MISSING_QUERY_PARAM,
                )
            )

    if operation.request_schema is not None:
        if payload.request_body is None:
            findings.append(
                ContractFinding(
                    kind=FindingKind.CLIENT_SCHEMA_VIOLATION,
                    location="",
                    expected="a request body matching the declared schema",
                    actual="absent",
                    message="Required Field Missing: request body absent",
                    event_id=event.event_id,
                    defect=DefectKind.MISSING_REQUIRED_FIELD,
                )
            )
        elif not _is_text_digest(payload.request_body):
            for defect in validate_document(operation.request_schema, payload.request_body):
                findings.append(
                    ContractFinding(
                        kind=FindingKind.CLIENT_SCHEMA_VIOLATION,
                        location=defect.location,
                        expected=defect.expected,
                        actual=defect.actual,
                        message=_defect_message(defect, "request body"),
                        event_id=event.event_id,
                        defect=defect.kind,
                    )
                )

    if payload.status == 0:
        # No response arrived; nothing on the response side to validate.
        return findings

    documented, response_schema = _resolve_response_schema(operation, payload.status)
    if not documented:
        findings.append(
            ContractFinding(
                kind=FindingKind.UNDOCUMENTED_STATUS,
                location="",
                expected="a response status documented for this operation",
                actual=str(payload.status),
                message=(
                    f"Status {payload.status} from {payload.method} {bare_path} "
                    "is not documented in the API contract"
                ),
                event_id=event.event_id,
            )
        )
        return findings

    if response_schema is not None:
        if payload.response_body is None:
            findings.append(
                ContractFinding(
                    kind=FindingKind.SERVER_CONTRACT_BREACH,
                    location="",
                    expected="a response body matching the declared schema",
                    actual="absent",
                    message="Response body absent but a schema is declared for this status",
                    event_id=event.event_id,
                )
            )
        elif not _is_text_digest(payload.response_body):
            for defect in validate_document(response_schema, payload.response_body):
                findings.append(
                    ContractFinding(
                        kind=FindingKind.SERVER_CONTRACT_BREACH,
                        location=defect.location,
                        expected=defect.expected,
                        actual=defect.actual,
                        message=_defect_message(defect, "response body"),
                        event_id=event.event_id,
                        defect=defect.kind,
                    )
                )

    return findings
