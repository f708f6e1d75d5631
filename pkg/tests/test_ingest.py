import copy
import json

import pytest

from failctx.ingest import (
    MalformedDocument,
    Rejection,
    parse_browser_event,
    parse_har,
    parse_server_log_line,
    parse_server_log_lines,
)
from failctx.model import (
    BrowserEventKind,
    Plane,
    Severity,
    TelemetryEvent,
    event_from_json_line,
    event_to_json_line,
)

from conftest import FIXTURES, load_fixture_json


class TestParseHar:
    def test_empty_archive(self):
        events, report = parse_har({"log": {"entries": []}})
        assert events == []
        assert report.accepted == 0 and report.rejected == 0

    def test_missing_entries_is_fatal(self):
        with pytest.raises(MalformedDocument):
            parse_har({"log": {}})
        with pytest.raises(MalformedDocument):
            parse_har([])

    def test_status_500_data_endpoint(self):
        doc = {
            "log": {
                "entries": [
                    {
                        "startedDateTime": "2023-11-14T22:13:20.000Z",
                        "request": {"method": "post", "url": "https://h/api/v1/data", "headers": []},
                        "response": {"status": 500},
                        "timings": {"wait": 40},
                    }
                ]
            }
        }
        events, report = parse_har(doc)
        assert report.accepted == 1
        payload = events[0].payload
        assert payload.status == 500
        assert payload.path == "/api/v1/data"
        assert payload.method == "POST"
        assert events[0].severity is Severity.ERROR

    def test_fixture_extraction_matches_manual_walk(self):
        doc = load_fixture_json("har_sample.json")
        events, report = parse_har(doc)
        assert report.accepted == 8
        assert report.rejected == 2
        assert sorted(i for i, _ in report.rejections) == [3, 7]
        assert all("startedDateTime" in reason for _, reason in report.rejections)

        # Manual extraction of the 8 surviving entries.
        entries = [e for i, e in enumerate(doc["log"]["entries"]) if i not in (3, 7)]
        assert len(events) == len(entries)
        for event, entry in zip(events, entries):
            assert event.plane is Plane.NETWORK
            assert event.payload.status == entry["response"]["status"]
            assert event.payload.method == entry["request"]["method"].upper()
            assert event.payload.path == entry["request"]["url"].replace("https://app.example.com", "")
            header_names = [h["name"] for h in entry["request"]["headers"]]
            if "X-Correlation-Id" in header_names:
                assert event.correlation_id == entry["request"]["headers"][0]["value"]
            else:
                assert event.correlation_id is None
            assert event.payload.timings.wait == entry["timings"]["wait"]

    def test_correlation_header_case_insensitive(self):
        doc = {
            "log": {
                "entries": [
                    {
                        "startedDateTime": "2023-11-14T22:13:20Z",
                        "request": {
                            "method": "GET",
                            "url": "https://h/x",
                            "headers": [{"name": "x-CORRELATION-id", "value": "tok1"}],
                        },
                        "response": {"status": 200},
                        "timings": {},
                    }
                ]
            }
        }
        events, _ = parse_har(doc)
        assert events[0].correlation_id == "tok1"

    def test_timeout_flag_from_status_and_phase(self):
        entry = {
            "startedDateTime": "2023-11-14T22:13:20Z",
            "request": {"method": "GET", "url": "https://h/x", "headers": []},
            "response": {"status": 0},
            "timings": {"wait": 10},
        }
        events, _ = parse_har({"log": {"entries": [entry]}})
        assert events[0].payload.timed_out is True

        slow = copy.deepcopy(entry)
        slow["response"]["status"] = 200
        slow["timings"]["wait"] = 30001
        events, _ = parse_har({"log": {"entries": [slow]}})
        assert events[0].payload.timed_out is True

        ok = copy.deepcopy(entry)
        ok["response"]["status"] = 200
        events, _ = parse_har({"log": {"entries": [ok]}})
        assert events[0].payload.timed_out is False

    def test_non_json_body_becomes_digest(self):
        entry = {
            "startedDateTime": "2023-11-14T22:13:20Z",
            "request": {
                "method": "POST",
                "url": "https://h/x",
                "headers": [],
                "postData": {"mimeType": "text/plain", "text": "A" * 5000},
            },
            "response": {"status": 200},
            "timings": {},
        }
        events, _ = parse_har({"log": {"entries": [entry]}})
        body = events[0].payload.request_body
        assert body["total_length"] == 5000
        assert len(body["text_digest"]) == 4096


class TestParseServerLogLine:
    def test_json_line_with_aliases(self):
        line = (
            '{"ts":1700000000000,"level":"ERROR","service":"analytics",'
            '"message":"NullPointerException at Controller.java:45","trace_id":"abc"}'
        )
        event = parse_server_log_line(line)
        assert isinstance(event, TelemetryEvent)
        assert event.plane is Plane.SERVER
        assert event.severity is Severity.ERROR
        assert event.correlation_id == "abc"
        assert "NullPointerException at Controller.java:45" in event.payload.message
        assert event.timestamp_ms == 1700000000000

    def test_empty_line_rejected(self):
        outcome = parse_server_log_line("")
        assert isinstance(outcome, Rejection)
        assert outcome.reason == "empty line"

    def test_alias_precedence(self):
        line = json.dumps(
            {
                "ts": 5,
                "timestamp": 99,
                "level": "WARN",
                "service": "s",
                "message": "m",
                "stack": "first",
                "stack_trace": "second",
                "trace_id": "t1",
                "correlation_id": "t2",
            }
        )
        event = parse_server_log_line(line)
        assert event.timestamp_ms == 5
        assert event.payload.stack_trace == "first"
        assert event.correlation_id == "t1"

    def test_plain_text_format(self):
        event = parse_server_log_line("2023-11-14T19:00:05Z ERROR [auth] token rejected")
        assert isinstance(event, TelemetryEvent)
        assert event.payload.service == "auth"
        assert event.severity is Severity.ERROR
        assert event.payload.message == "token rejected"

    def test_garbage_rejected(self):
        assert isinstance(parse_server_log_line("!!! not a log line"), Rejection)

    def test_fixture_matches_labeled_manifest(self):
        lines = (FIXTURES / "server_logs_mixed.jsonl").read_text(encoding="utf-8").splitlines()
        manifest = load_fixture_json("server_logs_mixed.manifest.json")
        assert len(lines) == manifest["total"]

        events, report = parse_server_log_lines(lines)
        assert report.accepted == manifest["accepted"]
        assert report.rejected == manifest["rejected"]
        assert report.accepted + report.rejected == manifest["total"]

        rejected_indexes = {i for i, _ in report.rejections}
        for label in manifest["lines"]:
            assert (label["index"] not in rejected_indexes) == label["accepted"], label


VALID_BROWSER_DOC = {
    "v": 1,
    "plane": "browser",
    "timestamp_ms": 1700000000080,
    "severity": "error",
    "correlation_id": "abc",
    "payload": {
        "kind": "console_error",
        "message": "React Error Boundary caught error",
        "page_url": "https://app.example.com/dashboard",
        "stack": "at ChartWidget (ChartWidget.jsx:33)",
    },
}


class TestParseBrowserEvent:
    def test_well_formed(self):
        event = parse_browser_event(VALID_BROWSER_DOC)
        assert isinstance(event, TelemetryEvent)
        assert event.payload.message == "React Error Boundary caught error"
        assert event.payload.kind is BrowserEventKind.CONSOLE_ERROR

    def test_plane_mismatch(self):
        doc = dict(VALID_BROWSER_DOC, plane="server")
        outcome = parse_browser_event(doc)
        assert isinstance(outcome, Rejection)
        assert outcome.reason == "plane mismatch"

    def test_unknown_extra_fields_ignored(self):
        doc = copy.deepcopy(VALID_BROWSER_DOC)
        doc["zzz"] = 1
        doc["payload"]["extra"] = True
        assert isinstance(parse_browser_event(doc), TelemetryEvent)

    @pytest.mark.parametrize("dropped", ["plane", "timestamp_ms", "payload"])
    def test_mutation_drop_top_level(self, dropped):
        doc = copy.deepcopy(VALID_BROWSER_DOC)
        del doc[dropped]
        outcome = parse_browser_event(doc)
        assert isinstance(outcome, Rejection)
        assert dropped in outcome.reason

    @pytest.mark.parametrize("dropped", ["kind", "message", "page_url"])
    def test_mutation_drop_payload_field(self, dropped):
        doc = copy.deepcopy(VALID_BROWSER_DOC)
        del doc["payload"][dropped]
        outcome = parse_browser_event(doc)
        assert isinstance(outcome, Rejection)
        assert dropped in outcome.reason

    def test_severity_defaults_to_error(self):
        doc = copy.deepcopy(VALID_BROWSER_DOC)
        del doc["severity"]
        event = parse_browser_event(doc)
        assert event.severity is Severity.ERROR


class TestParserProperties:
    def test_parse_serialize_parse_fixpoint(self):
        event = parse_browser_event(VALID_BROWSER_DOC)
        line = event_to_json_line(event)
        again = event_from_json_line(line)
        assert again == event
        assert event_to_json_line(again) == line

        log_event = parse_server_log_line(
            '{"ts": 12, "level": "INFO", "service": "s", "message": "m"}'
        )
        line = event_to_json_line(log_event)
        assert event_to_json_line(event_from_json_line(line)) == line

    def test_report_arithmetic(self):
        lines = (FIXTURES / "server_logs_mixed.jsonl").read_text(encoding="utf-8").splitlines()
        _, report = parse_server_log_lines(lines)
        assert report.accepted + report.rejected == len(lines)
        assert len(report.rejections) == report.rejected
