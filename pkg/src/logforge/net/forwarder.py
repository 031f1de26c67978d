"""Forwarder: tail files, break them into events, ship frames over TCP.

Events are held back until their end is certain (a continuation line may
still arrive), so the checkpoint always points at the first byte of the
still-open event. Checkpoints are flushed only after the socket write for the
preceding events has completed; a restarted forwarder re-reads from the last
flushed checkpoint, which makes delivery exactly-once under clean shutdown
and at-least-once otherwise.
"""

from __future__ import annotations

import logging
import socket
import threading
import time

from ..ingest import BreakRule, Event, RuleSet, parse_timestamp
from .frames import encode_frame, heartbeat_frame, split_oversize
from .tailer import CheckpointStore, FileTailer

log = logging.getLogger(__name__)

DEFAULT_POLL_INTERVAL = 0.5


def ready_event_groups(buffer: bytes, rule: BreakRule, final: bool):
    """Split buffered bytes into closed event line-groups plus consumed length.

    In timestamp/regex modes the last group stays open (a continuation line
    may follow) unless ``final``. In line mode every complete line closes.
    """
    parts = buffer.split(b"\n")
    complete, partial = parts[:-1], parts[-1]

    def is_boundary(line: bytes) -> bool:
        text = line.decode("utf-8", errors="replace")
        if rule.mode == "line":
            return True
        if rule.mode == "timestamp-prefix":
            from ..ingest import TIMESTAMP_HEAD

            return TIMESTAMP_HEAD.match(text) is not None
        return rule._boundary.search(text) is not None

    groups: list[list[bytes]] = []
    for line in complete:
        if is_boundary(line) or not groups:
            groups.append([line])
        else:
            groups[-1].append(line)

    if rule.mode == "line":
        consumed = sum(len(line) + 1 for g in groups for line in g)
        if final and partial:
            groups.append([partial])
            consumed += len(partial)
        return groups, consumed
    if final:
        if partial:
            if groups and not is_boundary(partial):
                groups[-1].append(partial)
            else:
                groups.append([partial])
        return groups, len(buffer)
    if len(groups) <= 1:
        return [], 0
    ready = groups[:-1]
    consumed = sum(len(line) + 1 for g in ready for line in g)
    return ready, consumed


class _Source:
    def __init__(self, path: str, sourcetype: str, tailer: FileTailer):
        self.path = path
        self.sourcetype = sourcetype
        self.tailer = tailer
        self.buffer = b""
        self.last_timestamp = 0


class Forwarder:
    def __init__(self, paths, dest: tuple[str, int], state_dir,
                 rules: RuleSet | None = None, host: str | None = None,
                 sourcetype: str = "applog",
                 sourcetypes: dict[str, str] | None = None,
                 poll_interval: float = DEFAULT_POLL_INTERVAL):
        self.dest = dest
        self.rules = rules or RuleSet()
        self.host = host or socket.gethostname()
        self.poll_interval = poll_interval
        self.store = CheckpointStore(state_dir)
        self.sources = []
        for path in paths:
            st = (sourcetypes or {}).get(str(path), sourcetype)
            self.sources.append(_Source(str(path), st, FileTailer(path, self.store)))
        self._sock: socket.socket | None = None
        self._thread: threading.Thread | None = None
        self._stop = threading.Event()
        self.sent_events = 0

    # -- wire ------------------------------------------------------------

    def _connect(self) -> socket.socket:
        if self._sock is None:
            self._sock = socket.create_connection(self.dest, timeout=30)
        return self._sock

    def _send_events(self, events: list[Event]) -> None:
        if not events:
            return
        sock = self._connect()
        chunks = []
        for ev in events:
            for piece in split_oversize(ev):
                chunks.append(encode_frame(piece))
        sock.sendall(b"".join(chunks))
        self.sent_events += len(events)

    # -- event assembly ----------------------------------------------------

    def _events_from_groups(self, source: _Source, groups) -> list[Event]:
        events = []
        for group in groups:
            raw = b"\n".join(group).decode("utf-8", errors="replace")
            if not raw:
                continue
            ts = parse_timestamp(raw)
            if ts == 0:
                ts = source.last_timestamp
            source.last_timestamp = ts
            events.append(Event(raw=raw, timestamp=ts, host=self.host,
                                source=source.path, sourcetype=source.sourcetype))
        return events

    def poll_once(self, final: bool = False) -> int:
        """One cycle over all sources: read, break, send, checkpoint."""
        sent = 0
        for source in self.sources:
            rule = self.rules.break_rule(source.sourcetype)
            progressed = False
            for kind, data in source.tailer.read_new():
                if kind == "truncated":
                    source.buffer = b""
                    progressed = True
                elif kind == "rotated":
                    source.buffer += data
                    groups, _ = ready_event_groups(source.buffer, rule, final=True)
                    events = self._events_from_groups(source, groups)
                    self._send_events(events)
                    sent += len(events)
                    source.buffer = b""
                    progressed = True  # checkpoint moves to the new identity
                else:
                    source.buffer += data
                    progressed = True
            groups, consumed = ready_event_groups(source.buffer, rule, final=final)
            if groups:
                events = self._events_from_groups(source, groups)
                self._send_events(events)
                sent += len(events)
            if groups or progressed:
                source.buffer = source.buffer[consumed:]
                safe = source.tailer.position - len(source.buffer)
                source.tailer.commit(safe, time.time())
        if sent or final:
            self.store.flush()
        return sent

    # -- lifecycle ----------------------------------------------------------

    def run(self) -> None:
        while not self._stop.is_set():
            try:
                self.poll_once()
                self._connect().sendall(heartbeat_frame())
            except OSError as exc:
                # Unsent work stays before the checkpoint; retry next cycle.
                log.warning("forward cycle failed: %s", exc)
                if self._sock is not None:
                    self._sock.close()
                    self._sock = None
            self._stop.wait(self.poll_interval)

    def start(self) -> "Forwarder":
        self._stop.clear()
        self._thread = threading.Thread(target=self.run, daemon=True)
        self._thread.start()
        return self

    def stop(self, flush: bool = False) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=10)
            self._thread = None
        if flush:
            self.poll_once(final=True)
        for source in self.sources:
            source.tailer.close()
        if self._sock is not None:
            self._sock.close()
            self._sock = None
