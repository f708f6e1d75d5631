"""Append-only event store with time-range and correlation-id lookup.

Optionally file-backed as JSONL in the canonical wire format; the index is
rebuilt by a full scan on open. A torn final line (crash artifact) is
dropped with a warning. Appends are serialized through one lock; readers
get consistent snapshots.
"""

from __future__ import annotations

import bisect
import json
import logging
import threading
from pathlib import Path
from typing import Optional

from .model import TelemetryEvent, canonical_order, event_from_wire, event_to_json_line

logger = logging.getLogger(__name__)


class StorageFailure(RuntimeError):
    """Durable write failed; the store still reflects the last durable state."""


class InvalidRange(ValueError):
    """Query window with t0 > t1."""


class EventStore:
    """Append-only store, in-memory or JSONL file-backed."""

    def __init__(self, path: Optional[str | Path] = None):
        self._lock = threading.Lock()
        self._events: list[TelemetryEvent] = []  # canonical order
        self._keys: list[tuple[int, int, int]] = []  # sort keys, parallel list
        self._by_cid: dict[str, list[TelemetryEvent]] = {}
        self._next_id = 1
        self._path = Path(path) if path is not None else None
        self._file = None
        if self._path is not None:
            self._load()
            self._file = open(self._path, "a", encoding="utf-8")

    # -- lifecycle ----------------------------------------------------------

    def _load(self) -> None:
        if not self._path.exists():
            return
        text = self._path.read_text(encoding="utf-8")
        raw_lines = text.splitlines(keepends=True)
        offset = 0
        for index, raw_line in enumerate(raw_lines):
            line = raw_line.rstrip("\r\n")
            if not line.strip():
                offset += len(raw_line.encode("utf-8"))
                continue
            try:
                event = event_from_wire(json.loads(line))
            except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
                if index == len(raw_lines) - 1:
                    # Crash artifact: drop the torn tail and truncate it away
                    # so subsequent appends start on a clean line.
                    logger.warning(
                        "dropping torn final line in %s: %s", self._path, exc
                    )
                    with open(self._path, "r+b") as f:
                        f.truncate(offset)
                    break
                raise StorageFailure(
                    f"corrupt store line {index + 1} in {self._path}: {exc}"
                ) from exc
            self._index(event)
            self._next_id = max(self._next_id, event.event_id + 1)
            offset += len(raw_line.encode("utf-8"))

    def close(self) -> None:
        with self._lock:
            if self._file is not None:
                self._file.close()
                self._file = None

    def __enter__(self) -> "EventStore":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    @property
    def path(self) -> Optional[Path]:
        return self._path

    def __len__(self) -> int:
        with self._lock:
            return len(self._events)

    # -- writes -------------------------------------------------------------

    def _index(self, event: TelemetryEvent) -> None:
        key = event.sort_key()
        pos = bisect.bisect_right(self._keys, key)
        self._keys.insert(pos, key)
        self._events.insert(pos, event)
        if event.correlation_id is not None:
            self._by_cid.setdefault(event.correlation_id, []).append(event)

    def append(self, event: TelemetryEvent) -> int:
        """Assign the next sequence number, persist, and index the event."""
        with self._lock:
            stamped = TelemetryEvent(
                plane=event.plane,
                timestamp_ms=event.timestamp_ms,
                severity=event.severity,
                payload=event.payload,
                event_id=self._next_id,
                correlation_id=event.correlation_id,
                session_id=event.session_id,
            )
            if self._file is not None:
                try:
                    self._file.write(event_to_json_line(stamped) + "\n")
                    self._file.flush()
                except OSError as exc:
                    raise StorageFailure(f"append to {self._path} failed: {exc}") from exc
            self._next_id += 1
            self._index(stamped)
            return stamped.event_id

    def append_all(self, events: list[TelemetryEvent]) -> list[int]:
        return [self.append(event) for event in events]

    # -- queries ------------------------------------------------------------

    def query_window(self, t0_ms: int, t1_ms: int) -> list[TelemetryEvent]:
        """Events with t0 <= timestamp <= t1 (closed interval), canonical order."""
        if t0_ms > t1_ms:
            raise InvalidRange(f"t0 {t0_ms} > t1 {t1_ms}")
        with self._lock:
            lo = bisect.bisect_left(self._keys, (t0_ms,))
            hi = bisect.bisect_right(self._keys, (t1_ms + 1,))
            return self._events[lo:hi]

    def query_by_cid(self, cid: str) -> list[TelemetryEvent]:
        """All events carrying exactly this correlation id, canonical order."""
        with self._lock:
            return canonical_order(self._by_cid.get(cid, []))

    def all_events(self) -> list[TelemetryEvent]:
        with self._lock:
            return list(self._events)

    def latest_timestamp(self, cid: Optional[str] = None) -> Optional[int]:
        """Newest timestamp in the store, restricted to a cid when given."""
        with self._lock:
            if cid is not None:
                events = self._by_cid.get(cid, [])
                if not events:
                    return None
                return max(e.timestamp_ms for e in events)
            if not self._events:
                return None
            return self._events[-1].timestamp_ms
