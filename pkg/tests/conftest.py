import json
import random
from pathlib import Path

import pytest

from failctx.contract import ApiSpec, load_spec
from failctx.model import (
    BrowserEventKind,
    BrowserPayload,
    NetworkPayload,
    Plane,
    PLANE_ORDER,
    ServerPayload,
    Severity,
    TelemetryEvent,
    Timings,
)
from failctx.scenarios import DEMO_API_SPEC

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixture_spec() -> ApiSpec:
    return load_spec(DEMO_API_SPEC)


@pytest.fixture(scope="session")
def paper_case_dir() -> Path:
    return FIXTURES / "paper_case"


def load_fixture_json(name: str):
    return json.loads((FIXTURES / name).read_text(encoding="utf-8"))


def make_browser_event(ts=1000, cid=None, event_id=0, message="boom", severity=Severity.ERROR,
                       kind=BrowserEventKind.CONSOLE_ERROR, stack=None, snapshot=None):
    return TelemetryEvent(
        plane=Plane.BROWSER,
        timestamp_ms=ts,
        severity=severity,
        event_id=event_id,
        correlation_id=cid,
        payload=BrowserPayload(
            kind=kind, message=message, page_url="https://app.example.com/x",
            stack=stack, state_snapshot=snapshot,
        ),
    )


def make_network_event(ts=1000, cid=None, event_id=0, method="GET", path="/api/v1/charts/latest",
                       status=200, timed_out=False, request_body=None, response_body=None,
                       request_headers=(), severity=None):
    if severity is None:
        severity = Severity.ERROR if (status == 0 or status >= 400) else Severity.INFO
    return TelemetryEvent(
        plane=Plane.NETWORK,
        timestamp_ms=ts,
        severity=severity,
        event_id=event_id,
        correlation_id=cid,
        payload=NetworkPayload(
            method=method, path=path, status=status, timed_out=timed_out,
            request_body=request_body, response_body=response_body,
            request_headers=tuple(request_headers), timings=Timings(wait=12),
        ),
    )


def make_server_event(ts=1000, cid=None, event_id=0, message="handled", severity=Severity.INFO,
                      level=None, stack=None, service="svc"):
    return TelemetryEvent(
        plane=Plane.SERVER,
        timestamp_ms=ts,
        severity=severity,
        event_id=event_id,
        correlation_id=cid,
        payload=ServerPayload(
            service=service, level=level or severity.value.upper(), message=message,
            stack_trace=stack,
        ),
    )


CID_POOL = [None, None, None, "cid-a", "cid-b", "cid-c", "cid-d"]


def random_event(rng: random.Random, t_lo=0, t_hi=100_000, event_id=0):
    ts = rng.randrange(t_lo, t_hi)
    cid = rng.choice(CID_POOL)
    severity = rng.choice(list(Severity))
    kind = rng.randrange(3)
    if kind == 0:
        return make_browser_event(ts=ts, cid=cid, event_id=event_id, severity=severity,
                                  message=f"msg-{rng.randrange(10**6)}")
    if kind == 1:
        return make_network_event(ts=ts, cid=cid, event_id=event_id,
                                  status=rng.choice([0, 200, 201, 400, 404, 500, 503]),
                                  timed_out=rng.random() < 0.1)
    return make_server_event(ts=ts, cid=cid, event_id=event_id, severity=severity,
                             message=f"log-{rng.randrange(10**6)}",
                             stack="at X.y(X.java:1)" if rng.random() < 0.3 else None)


def brute_force_select(events, report, config):
    """Direct evaluation of the selection predicate over a full event list."""
    t_f = report.failure_time_ms
    lo = t_f - config.window_ms - config.skew_ms
    hi = t_f + config.window_ms + config.skew_ms
    if report.correlation_id is not None:
        chosen = [
            e for e in events
            if e.correlation_id == report.correlation_id
            or (e.correlation_id is None and lo <= e.timestamp_ms <= hi)
        ]
    else:
        chosen = [e for e in events if lo <= e.timestamp_ms <= hi]
    return sorted(chosen, key=lambda e: (e.timestamp_ms, PLANE_ORDER[e.plane], e.event_id))
