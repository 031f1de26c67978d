"""TCP receiver: decodes frames, extracts fields, funnels into one index writer."""

from __future__ import annotations

import logging
import queue
import socketserver
import threading
import time

from ..index_store import IndexHandle
from ..ingest import RuleSet, extract_fields
from .frames import FRAME_HEARTBEAT, ProtocolError, read_frame

log = logging.getLogger(__name__)

DEFAULT_PORT = 9997
_STOP = object()


class Receiver:
    """Listens for forwarder connections and indexes their events.

    Any number of connections decode concurrently; indexing funnels through a
    single writer thread via a bounded queue, so connection handlers (and the
    peers behind them, via TCP backpressure) pause when the writer lags.
    A protocol error closes only the offending connection.
    """

    def __init__(self, listen: tuple[str, int], index: IndexHandle,
                 rules: RuleSet | None = None, queue_size: int = 10_000):
        self.index = index
        self.rules = rules or RuleSet()
        self.queue: queue.Queue = queue.Queue(maxsize=queue_size)
        self.received = 0
        self.indexed = 0
        self.protocol_errors = 0
        self.heartbeats: dict[str, float] = {}
        self._lock = threading.Lock()
        receiver = self

        class Handler(socketserver.StreamRequestHandler):
            def handle(self):
                peer = "%s:%s" % self.client_address[:2]
                while True:
                    try:
                        frame = read_frame(self.rfile)
                    except ProtocolError as exc:
                        log.warning("closing %s: %s", peer, exc)
                        with receiver._lock:
                            receiver.protocol_errors += 1
                        return
                    if frame is None:
                        return
                    frame_type, event = frame
                    if frame_type == FRAME_HEARTBEAT:
                        receiver.heartbeats[peer] = time.time()
                        continue
                    with receiver._lock:
                        receiver.received += 1
                    receiver.queue.put(event)

        class Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self._server = Server(listen, Handler)
        self._server_thread: threading.Thread | None = None
        self._writer_thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address[:2]

    def _writer(self) -> None:
        while True:
            item = self.queue.get()
            if item is _STOP:
                return
            extract_fields(item, self.rules.rules_for(item.sourcetype))
            self.index.index_event(item)
            with self._lock:
                self.indexed += 1

    def start(self) -> "Receiver":
        self._writer_thread = threading.Thread(target=self._writer, daemon=True)
        self._writer_thread.start()
        self._server_thread = threading.Thread(target=self._server.serve_forever,
                                               daemon=True)
        self._server_thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._server_thread is not None:
            self._server_thread.join(timeout=10)
        self.queue.put(_STOP)
        if self._writer_thread is not None:
            self._writer_thread.join(timeout=10)

    def drain(self, expected: int, timeout: float = 30.0) -> bool:
        """Wait until at least `expected` events have been indexed."""
        deadline = time.time() + timeout
        while time.time() < deadline:
            with self._lock:
                if self.indexed >= expected:
                    return True
            time.sleep(0.01)
        return False
