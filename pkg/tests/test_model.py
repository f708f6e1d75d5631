import random

import pytest
from hypothesis import given, strategies as st

from failctx.model import (
    BrowserEventKind,
    BrowserPayload,
    FailureReport,
    NetworkPayload,
    Plane,
    PLANE_ORDER,
    ServerPayload,
    Severity,
    TelemetryEvent,
    Timings,
    TriggerKind,
    canonical_order,
    event_from_json_line,
    event_to_json_line,
    validate_correlation_id,
)

from conftest import make_browser_event, make_network_event, make_server_event, random_event


class TestCorrelationId:
    def test_valid(self):
        assert validate_correlation_id("abc-123") == "abc-123"

    @pytest.mark.parametrize("bad", ["", "has space", "tab\there", "x" * 129])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            validate_correlation_id(bad)


class TestTypeInvariants:
    def test_payload_plane_mismatch(self):
        with pytest.raises(ValueError, match="does not match plane"):
            TelemetryEvent(
                plane=Plane.BROWSER,
                timestamp_ms=1,
                severity=Severity.INFO,
                payload=ServerPayload(service="s", level="INFO", message="m"),
            )

    def test_negative_timestamp(self):
        with pytest.raises(ValueError):
            make_browser_event(ts=-1)

    def test_status_range(self):
        with pytest.raises(ValueError):
            NetworkPayload(method="GET", path="/", status=600)

    def test_timing_phases(self):
        with pytest.raises(ValueError):
            Timings(wait=-2)
        assert Timings(wait=-1).wait == -1

    def test_manual_report_needs_message(self):
        with pytest.raises(ValueError):
            BrowserPayload(kind=BrowserEventKind.MANUAL_REPORT, message="", page_url="u")

    def test_server_message_required(self):
        with pytest.raises(ValueError):
            ServerPayload(service="s", level="INFO", message="")

    def test_auto_status_report_requires_failure_status(self):
        with pytest.raises(ValueError):
            FailureReport(
                report_id="r", failure_time_ms=1, trigger=TriggerKind.AUTO_STATUS,
                triggering_status=200,
            )
        with pytest.raises(ValueError):
            FailureReport(report_id="r", failure_time_ms=1, trigger=TriggerKind.AUTO_STATUS)


class TestCanonicalOrder:
    def test_empty(self):
        assert canonical_order([]) == []

    def test_plane_tiebreak(self):
        server = make_server_event(ts=5, event_id=1)
        browser = make_browser_event(ts=5, event_id=2)
        assert canonical_order([server, browser]) == [browser, server]

    def test_matches_brute_force_sort(self):
        rng = random.Random(42)
        events = [random_event(rng, t_lo=0, t_hi=50, event_id=i + 1) for i in range(50)]
        expected = sorted(
            events, key=lambda e: (e.timestamp_ms, PLANE_ORDER[e.plane], e.event_id)
        )
        assert canonical_order(events) == expected

    def test_idempotent_and_permutation(self):
        rng = random.Random(7)
        events = [random_event(rng, event_id=i + 1) for i in range(120)]
        once = canonical_order(events)
        assert canonical_order(once) == once
        assert sorted(e.event_id for e in once) == sorted(e.event_id for e in events)


def _round_trip(event):
    line = event_to_json_line(event)
    parsed = event_from_json_line(line)
    assert parsed == event
    assert event_to_json_line(parsed) == line


class TestWireFormat:
    def test_browser_round_trip(self):
        _round_trip(
            make_browser_event(
                ts=123, cid="cid-a", event_id=9, stack="at x",
                snapshot={"view": {"tab": "a"}, "items": [1, "two", None]},
            )
        )

    def test_network_round_trip(self):
        _round_trip(
            make_network_event(
                ts=5, cid="cid-b", event_id=2, status=500,
                request_body={"chartId": "c"}, response_body={"rows": None},
                request_headers=(("X-Correlation-Id", "cid-b"),),
            )
        )

    def test_server_round_trip(self):
        _round_trip(make_server_event(ts=1, event_id=3, stack="trace", severity=Severity.FATAL))

    @given(st.integers(min_value=0, max_value=2**41), st.sampled_from(list(Severity)))
    def test_round_trip_random(self, ts, severity):
        _round_trip(make_server_event(ts=ts, severity=severity))

    def test_random_events_round_trip(self):
        rng = random.Random(3)
        for i in range(200):
            _round_trip(random_event(rng, event_id=i))
