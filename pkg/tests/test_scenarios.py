import json

import pytest

from failctx.contract import load_spec
from failctx.model import event_to_json_line
from failctx.pipeline import PipelineConfig, run_pipeline
from failctx.scenarios import (
    DEMO_API_SPEC,
    Scenario,
    ScenarioName,
    generate,
    generate_bundle,
    write_bundle,
)
from failctx.store import EventStore


class TestDeterminism:
    @pytest.mark.parametrize("name", list(ScenarioName))
    def test_byte_identical_streams(self, name):
        first_events, first_report, _ = generate(Scenario(name=name, seed=7))
        second_events, second_report, _ = generate(Scenario(name=name, seed=7))
        assert [event_to_json_line(e) for e in first_events] == [
            event_to_json_line(e) for e in second_events
        ]
        assert first_report == second_report

    def test_seeds_differ(self):
        a, _, _ = generate(Scenario(name=ScenarioName.HEALTHY, seed=1))
        b, _, _ = generate(Scenario(name=ScenarioName.HEALTHY, seed=2))
        assert [event_to_json_line(e) for e in a] != [event_to_json_line(e) for e in b]


class TestArchetypes:
    def test_missing_required_field_shape(self, fixture_spec):
        events, report, truth = generate(Scenario(name=ScenarioName.MISSING_REQUIRED_FIELD, seed=1))
        posts = [
            e for e in events
            if e.plane.value == "network" and e.payload.method == "POST"
            and e.payload.path.startswith("/api/v1/data")
        ]
        assert posts, "scenario must contain the failing POST"
        assert all("chartId" not in (e.payload.request_body or {}) for e in posts)
        assert truth.value == "frontend_bug"

    def test_network_timeout_shape(self):
        events, _, truth = generate(Scenario(name=ScenarioName.NETWORK_TIMEOUT, seed=1))
        assert any(
            e.plane.value == "network" and e.payload.timed_out for e in events
        )
        assert truth.value == "infrastructure_issue"

    def test_backend_exception_reproduces_triple(self):
        events, report, _ = generate(Scenario(name=ScenarioName.BACKEND_EXCEPTION, seed=3))
        cid = report.correlation_id
        tagged = [e for e in events if e.correlation_id == cid]
        planes = {e.plane.value for e in tagged}
        assert planes == {"browser", "network", "server"}
        assert any(
            e.plane.value == "network" and e.payload.status == 500 for e in tagged
        )
        assert any(
            e.plane.value == "server" and "NullPointerException" in e.payload.message
            for e in tagged
        )
        assert any(
            e.plane.value == "browser" and "React Error Boundary" in e.payload.message
            for e in tagged
        )


class TestLabelFaithfulness:
    @pytest.mark.parametrize("name", list(ScenarioName))
    def test_pipeline_recovers_ground_truth(self, name, fixture_spec):
        for seed in range(5):
            events, report, truth = generate(Scenario(name=name, seed=seed))
            store = EventStore()
            store.append_all(events)
            result = run_pipeline(store, report, PipelineConfig(api_spec=fixture_spec))
            assert result.fco.root_cause is truth, (name, seed)

    def test_decoy_rejection(self, fixture_spec):
        for name in ScenarioName:
            events, report, _ = generate(Scenario(name=name, seed=11))
            store = EventStore()
            store.append_all(events)
            result = run_pipeline(store, report, PipelineConfig(api_spec=fixture_spec))
            foreign = [
                e for e in result.fco.events
                if e.correlation_id is not None and e.correlation_id != report.correlation_id
            ]
            assert foreign == []


class TestWriteBundle:
    def test_files_written_and_loadable(self, tmp_path, fixture_spec):
        bundle = generate_bundle(Scenario(name=ScenarioName.CONTRACT_BREACH, seed=5))
        paths = write_bundle(bundle, tmp_path / "out")
        for path in paths.values():
            assert path.exists()

        manifest = json.loads(paths["ground_truth"].read_text())
        assert manifest["expected_class"] == "contract_breach"
        assert manifest["correlation_id"] == bundle.correlation_id
        assert len(manifest["plants"]) >= 6

        har = json.loads(paths["har"].read_text())
        assert har["log"]["entries"]
        spec_doc = json.loads(paths["api_spec"].read_text())
        assert spec_doc == DEMO_API_SPEC
        assert load_spec(spec_doc).operations()

    def test_write_twice_identical(self, tmp_path):
        scenario = Scenario(name=ScenarioName.NETWORK_TIMEOUT, seed=7)
        first = tmp_path / "a"
        second = tmp_path / "b"
        write_bundle(generate_bundle(scenario), first)
        write_bundle(generate_bundle(scenario), second)
        for name in ("network.har", "server_logs.jsonl", "browser_events.jsonl", "ground_truth.json"):
            assert (first / name).read_bytes() == (second / name).read_bytes()
