import random

import pytest

from failctx.model import canonical_order
from failctx.store import EventStore, InvalidRange, StorageFailure

from conftest import make_browser_event, make_network_event, make_server_event, random_event


class TestAppend:
    def test_first_id_is_one(self):
        store = EventStore()
        assert store.append(make_browser_event()) == 1

    def test_full_range_query_returns_canonical_order(self):
        rng = random.Random(11)
        store = EventStore()
        events = [random_event(rng, t_lo=0, t_hi=1000) for _ in range(100)]
        ids = store.append_all(events)
        assert ids == list(range(1, 101))
        stamped = store.all_events()
        assert store.query_window(0, 1000) == canonical_order(stamped)

    def test_ids_keep_increasing_after_reopen(self, tmp_path):
        path = tmp_path / "events.jsonl"
        with EventStore(path) as store:
            first = store.append(make_server_event(ts=10))
        with EventStore(path) as store:
            second = store.append(make_server_event(ts=20))
        assert second > first


class TestQueryWindow:
    def test_empty_store(self):
        assert EventStore().query_window(0, 10**15) == []

    def test_closed_interval_boundaries(self):
        store = EventStore()
        for ts in (999, 1000, 2000, 2001):
            store.append(make_server_event(ts=ts))
        hits = store.query_window(1000, 2000)
        assert [e.timestamp_ms for e in hits] == [1000, 2000]

    def test_invalid_range(self):
        with pytest.raises(InvalidRange):
            EventStore().query_window(5, 4)

    def test_point_query(self):
        store = EventStore()
        store.append(make_server_event(ts=7))
        store.append(make_server_event(ts=8))
        assert [e.timestamp_ms for e in store.query_window(7, 7)] == [7]

    def test_matches_linear_scan(self):
        rng = random.Random(23)
        store = EventStore()
        store.append_all([random_event(rng, t_lo=0, t_hi=5000) for _ in range(500)])
        everything = store.all_events()
        for _ in range(100):
            a, b = sorted((rng.randrange(0, 5000), rng.randrange(0, 5000)))
            expected = [e for e in everything if a <= e.timestamp_ms <= b]
            assert store.query_window(a, b) == canonical_order(expected)

    def test_partition_reproduces_store(self):
        rng = random.Random(5)
        store = EventStore()
        store.append_all([random_event(rng, t_lo=0, t_hi=999) for _ in range(200)])
        pieces = []
        for lo in range(0, 1000, 100):
            pieces.extend(store.query_window(lo, lo + 99))
        assert pieces == store.all_events()


class TestQueryByCid:
    def test_unknown_cid(self):
        assert EventStore().query_by_cid("nope") == []

    def test_exact_match_semantics(self):
        store = EventStore()
        for ts in (1, 2, 3):
            store.append(make_browser_event(ts=ts, cid="abc"))
        for ts in (4, 5):
            store.append(make_network_event(ts=ts, cid="xyz"))
        hits = store.query_by_cid("abc")
        assert len(hits) == 3
        assert all(e.correlation_id == "abc" for e in hits)

    def test_matches_linear_scan(self):
        rng = random.Random(31)
        store = EventStore()
        store.append_all([random_event(rng) for _ in range(300)])
        everything = store.all_events()
        for cid in ("cid-a", "cid-b", "cid-c", "cid-d", "missing"):
            expected = canonical_order([e for e in everything if e.correlation_id == cid])
            assert store.query_by_cid(cid) == expected


class TestDurability:
    def test_reopen_reproduces_queries(self, tmp_path):
        rng = random.Random(99)
        path = tmp_path / "events.jsonl"
        store = EventStore(path)
        store.append_all([random_event(rng, t_lo=0, t_hi=10_000) for _ in range(300)])

        windows = [sorted((rng.randrange(10_000), rng.randrange(10_000))) for _ in range(25)]
        before_windows = [store.query_window(a, b) for a, b in windows]
        before_cids = {cid: store.query_by_cid(cid) for cid in ("cid-a", "cid-b", "cid-c")}
        store.close()

        reopened = EventStore(path)
        for (a, b), expected in zip(windows, before_windows):
            assert reopened.query_window(a, b) == expected
        for cid, expected in before_cids.items():
            assert reopened.query_by_cid(cid) == expected
        reopened.close()

    def test_torn_final_line_dropped_with_warning(self, tmp_path, caplog):
        path = tmp_path / "events.jsonl"
        store = EventStore(path)
        store.append_all([make_server_event(ts=t) for t in (1, 2, 3)])
        store.close()

        with open(path, "a", encoding="utf-8") as f:
            f.write('{"v": 1, "plane": "server", "timest')  # torn write

        with caplog.at_level("WARNING"):
            reopened = EventStore(path)
        assert len(reopened) == 3
        assert any("torn final line" in r.message for r in caplog.records)
        # The torn tail was truncated away; appends land on a clean line.
        new_id = reopened.append(make_server_event(ts=4))
        assert new_id == 4
        reopened.close()
        final = EventStore(path)
        assert len(final) == 4
        final.close()

    def test_corrupt_middle_line_raises(self, tmp_path):
        path = tmp_path / "events.jsonl"
        store = EventStore(path)
        store.append_all([make_server_event(ts=t) for t in (1, 2)])
        store.close()

        content = path.read_text(encoding="utf-8").splitlines()
        content.insert(1, "not json at all")
        path.write_text("\n".join(content) + "\n", encoding="utf-8")
        with pytest.raises(StorageFailure):
            EventStore(path)
