"""Batch frontend: offline analysis, scenario simulation, metrics
projection, and service launch.

Exit codes: 0 success, 2 usage or input error. An unclassified result is
still a success (absence of a diagnosis is not a tool failure).
"""

from __future__ import annotations

import argparse
import json
import sys
import uuid
from pathlib import Path
from typing import Optional

from .classify import describe_rules
from .contract import SpecError, load_spec_file
from .correlate import CorrelationConfig
from .explain import HttpBackend, TemplateBackend
from .ingest import MalformedDocument, parse_browser_events, parse_har, parse_server_log_lines
from .metrics import MttrModel, Projection, RangeError, mttr_total, project_reduction
from .model import (
    Audience,
    FailureReport,
    Plane,
    TriggerKind,
    fco_to_json,
)
from .pipeline import PipelineConfig, PipelineResult, run_pipeline
from .sanitize import default_rules, load_rules
from .scenarios import Scenario, ScenarioName, generate_bundle, write_bundle
from .store import EventStore


class InputError(Exception):
    """Unreadable or malformed input; maps to exit code 2."""


def _read_json_file(path: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc


def _read_lines(path: str) -> list[str]:
    try:
        return Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _read_jsonl_documents(path: str) -> list:
    documents = []
    for index, line in enumerate(_read_lines(path)):
        if not line.strip():
            continue
        try:
            documents.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}:{index + 1} is not valid JSON: {exc}") from exc
    return documents


def _build_backend(args) -> Optional[object]:
    if getattr(args, "backend", "template") == "http":
        if not args.http_endpoint:
            raise InputError("--backend http requires --http-endpoint")
        return HttpBackend(
            endpoint=args.http_endpoint,
            model=args.http_model or "default",
            token_env=args.http_token_env,
        )
    return TemplateBackend()


def _format_report(result: PipelineResult) -> str:
    fco = result.fco
    by_plane = {plane: 0 for plane in Plane}
    for event in fco.events:
        by_plane[event.plane] += 1
    lines = [
        "Failure Context Report",
        f"  fco_id:      {fco.fco_id}",
        f"  trigger:     {fco.report.trigger.value} at t={fco.report.failure_time_ms}",
        f"  window_ms:   {fco.window_ms}" + ("  (truncated)" if fco.truncated else ""),
        (
            f"  events:      {len(fco.events)} "
            f"(browser {by_plane[Plane.BROWSER]}, network {by_plane[Plane.NETWORK]}, "
            f"server {by_plane[Plane.SERVER]})"
        ),
        f"  findings:    {len(fco.findings)}",
    ]
    for finding in fco.findings:
        lines.append(f"    - [{finding.kind.value}] {finding.message}")
    lines.append(f"  root cause:  {fco.root_cause.value} (rule {result.trace.fired_rule})")
    for ref, reason in result.trace.evidence:
        lines.append(f"    - {ref}: {reason}")
    if fco.sanitization_report:
        masked = ", ".join(f"{c.kind}:{c.count}" for c in fco.sanitization_report)
        lines.append(f"  masked:      {masked}")
    for explanation in fco.explanations:
        title = "End-user" if explanation.audience is Audience.END_USER else "Developer"
        suffix = " (degraded)" if explanation.degraded else ""
        lines.append(f"  -- {title} explanation{suffix} --")
        lines.append(f"  {explanation.text}")
    return "\n".join(lines)


def cmd_analyze(args) -> int:
    if args.failure_time is None and args.cid is None:
        raise InputError("provide --failure-time and/or --cid")
    if args.har is None and args.server_logs is None and args.browser_events is None:
        raise InputError("provide at least one input: --har, --server-logs, --browser-events")

    file_config = None
    if args.config:
        from .service import load_service_config

        try:
            file_config = load_service_config(args.config)
        except (OSError, ValueError) as exc:
            raise InputError(f"config {args.config}: {exc}") from exc
        if args.spec is None:
            args.spec = file_config.spec_path
        if args.rules is None:
            args.rules = file_config.rules_path
        if file_config.backend == "http" and args.backend == "template":
            args.backend = "http"
            args.http_endpoint = args.http_endpoint or file_config.http_endpoint
            args.http_model = args.http_model or file_config.http_model
            args.http_token_env = args.http_token_env or file_config.http_token_env

    store = EventStore()
    totals = {"accepted": 0, "rejected": 0}

    def _track(report):
        totals["accepted"] += report.accepted
        totals["rejected"] += report.rejected

    if args.har:
        try:
            events, report = parse_har(_read_json_file(args.har))
        except MalformedDocument as exc:
            raise InputError(f"{args.har}: {exc}") from exc
        store.append_all(events)
        _track(report)
    if args.server_logs:
        events, report = parse_server_log_lines(_read_lines(args.server_logs))
        store.append_all(events)
        _track(report)
    if args.browser_events:
        events, report = parse_browser_events(_read_jsonl_documents(args.browser_events))
        store.append_all(events)
        _track(report)

    api_spec = None
    if args.spec:
        try:
            api_spec = load_spec_file(args.spec)
        except OSError as exc:
            raise InputError(f"cannot read {args.spec}: {exc}") from exc
        except SpecError as exc:
            raise InputError(f"{args.spec}: {exc}") from exc

    failure_time = args.failure_time
    if failure_time is None:
        failure_time = store.latest_timestamp(args.cid)
        if failure_time is None:
            failure_time = store.latest_timestamp()
        if failure_time is None:
            raise InputError("cannot derive failure time: no ingested events")

    report = FailureReport(
        report_id=f"cli-{uuid.uuid4().hex[:12]}",
        failure_time_ms=failure_time,
        trigger=TriggerKind.MANUAL,
        correlation_id=args.cid,
    )

    rules = default_rules()
    if args.rules:
        rules = rules + load_rules(args.rules)
    config = PipelineConfig(
        correlation=CorrelationConfig(
            window_ms=args.window, skew_ms=args.skew, max_events=args.max_events
        ),
        rules=rules,
        api_spec=api_spec,
        backend=_build_backend(args),
    )
    result = run_pipeline(store, report, config)

    if args.out:
        Path(args.out).write_text(fco_to_json(result.fco) + "\n", encoding="utf-8")
    print(f"ingested: accepted={totals['accepted']} rejected={totals['rejected']}")
    print(_format_report(result))
    return 0


def cmd_simulate(args) -> int:
    scenario = Scenario(name=ScenarioName(args.scenario), seed=args.seed)
    bundle = generate_bundle(scenario)
    paths = write_bundle(bundle, args.out_dir)
    print(f"scenario {args.scenario} seed {args.seed} -> {args.out_dir}")
    for label, path in paths.items():
        print(f"  {label}: {path}")
    print(f"expected class: {bundle.expected_class.value}")
    return 0


def cmd_metrics(args) -> int:
    try:
        model = MttrModel(t_detect=args.detect, t_diagnose=args.diagnose, t_fix=args.fix)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    total = mttr_total(model)
    try:
        projection: Projection = project_reduction(
            model, reduction=args.reduction, diagnose_fraction=args.fraction
        )
    except RangeError as exc:
        raise InputError(str(exc)) from exc

    effective = args.fraction * total if args.fraction is not None else model.t_diagnose
    print("MTTR projection (minutes), a hypothesis rather than a measurement")
    print(f"  total MTTR:        {total:.2f}")
    print(f"  diagnose share:    {effective:.2f}")
    print(f"  reduction applied: {args.reduction:.2f}")
    print(f"  projected MTTR:    {projection.projected_mttr:.2f}")
    print(f"  absolute saving:   {projection.absolute_saving:.2f}")
    print(f"  relative saving:   {projection.relative_saving * 100:.2f}%")
    return 0


def cmd_serve(args) -> int:
    from .service import (
        ServiceConfig,
        create_app,
        load_service_config,
        validate_startup_paths,
    )

    try:
        if args.config:
            config = load_service_config(args.config)
        else:
            config = ServiceConfig()
        if args.port is not None:
            config.port = args.port
        if args.store is not None:
            config.store_path = args.store
        if args.spec is not None:
            config.spec_path = args.spec
        validate_startup_paths(config)
        app = create_app(config)
    except (OSError, ValueError) as exc:
        raise InputError(str(exc)) from exc

    import uvicorn

    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="failctx",
        description="Multi-source debugging engine: correlate, validate, classify, explain.",
    )
    parser.add_argument(
        "--explain-rules",
        action="store_true",
        help="print the ordered root-cause rules and exit",
    )
    sub = parser.add_subparsers(dest="command")

    analyze = sub.add_parser("analyze", help="offline analysis of captured telemetry files")
    analyze.add_argument("--har", help="HAR 1.2 capture file")
    analyze.add_argument("--server-logs", help="server log file (JSONL or plain lines)")
    analyze.add_argument("--browser-events", help="browser events JSONL file")
    analyze.add_argument("--spec", help="OpenAPI contract (JSON or YAML)")
    analyze.add_argument("--failure-time", type=int, help="failure time T_f in epoch ms")
    analyze.add_argument("--cid", help="correlation id of the failing action")
    analyze.add_argument("--window", type=int, default=5000, help="correlation window ms")
    analyze.add_argument("--skew", type=int, default=250, help="clock skew allowance ms")
    analyze.add_argument("--max-events", type=int, default=500, help="event cap per FCO")
    analyze.add_argument("--rules", help="custom sanitizer rules file")
    analyze.add_argument("--config", help="config file supplying spec/rules/backend defaults")
    analyze.add_argument("--out", help="write the FCO JSON here")
    analyze.add_argument("--backend", choices=["template", "http"], default="template")
    analyze.add_argument("--http-endpoint", help="chat-completion endpoint URL")
    analyze.add_argument("--http-model", help="model name for the HTTP backend")
    analyze.add_argument("--http-token-env", help="env var holding the bearer token")
    analyze.set_defaults(func=cmd_analyze)

    simulate = sub.add_parser("simulate", help="emit a labeled synthetic failure bundle")
    simulate.add_argument(
        "--scenario",
        required=True,
        choices=[name.value for name in ScenarioName],
    )
    simulate.add_argument("--seed", type=int, default=1)
    simulate.add_argument("--out-dir", required=True)
    simulate.set_defaults(func=cmd_simulate)

    metrics = sub.add_parser("metrics", help="resolution-time projections")
    metrics_sub = metrics.add_subparsers(dest="metrics_command")
    project = metrics_sub.add_parser("project", help="project MTTR after diagnosis speedup")
    project.add_argument("--detect", type=float, required=True, help="detection minutes")
    project.add_argument("--diagnose", type=float, required=True, help="diagnosis minutes")
    project.add_argument("--fix", type=float, required=True, help="fix minutes")
    project.add_argument(
        "--fraction",
        type=float,
        default=None,
        help="override: diagnosis as a fraction of total",
    )
    project.add_argument("--reduction", type=float, required=True, help="diagnosis reduction ratio")
    project.set_defaults(func=cmd_metrics)

    serve = sub.add_parser("serve", help="run the HTTP ingestion/query service")
    serve.add_argument("--config", help="service config file (YAML or JSON)")
    serve.add_argument("--port", type=int)
    serve.add_argument("--store", help="JSONL store path")
    serve.add_argument("--spec", help="OpenAPI contract path")
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.explain_rules:
        print(describe_rules())
        return 0
    if not getattr(args, "command", None):
        parser.print_help()
        return 2
    if args.command == "metrics" and not getattr(args, "metrics_command", None):
        print("usage: failctx metrics project ...", file=sys.stderr)
        return 2

    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
