"""File tailing with durable checkpoints.

Checkpoints record (device, inode, offset) per monitored path and are
replaced atomically (write-temp-then-rename). The tailer detects truncation
(file shrank below the read position: reread from zero) and rotation (path
now points at a different inode: drain the old file through its still-open
descriptor, then start the new one from zero).
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

log = logging.getLogger(__name__)


@dataclass
class Checkpoint:
    path: str
    dev: int
    ino: int
    offset: int
    last_seen: float = 0.0

    def identity(self) -> tuple[int, int]:
        return (self.dev, self.ino)


class CheckpointStore:
    def __init__(self, state_dir: str | Path):
        self.state_dir = Path(state_dir)
        self.state_dir.mkdir(parents=True, exist_ok=True)
        self.path = self.state_dir / "checkpoints.json"
        self._entries: dict[str, Checkpoint] = {}
        if self.path.exists():
            for key, entry in json.loads(self.path.read_text()).items():
                self._entries[key] = Checkpoint(path=key, **entry)

    def get(self, path: str) -> Checkpoint | None:
        return self._entries.get(str(path))

    def set(self, path: str, dev: int, ino: int, offset: int, last_seen: float) -> None:
        self._entries[str(path)] = Checkpoint(str(path), dev, ino, offset, last_seen)

    def flush(self) -> None:
        payload = {
            cp.path: {"dev": cp.dev, "ino": cp.ino, "offset": cp.offset,
                      "last_seen": cp.last_seen}
            for cp in self._entries.values()
        }
        fd, tmp = tempfile.mkstemp(dir=self.state_dir, prefix=".checkpoints-")
        try:
            with os.fdopen(fd, "w") as fh:
                json.dump(payload, fh)
            os.replace(tmp, self.path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


class FileTailer:
    """Reads one file past its checkpoint, surviving truncation and rotation.

    ``read_new`` yields ("data", bytes), ("rotated", tail_bytes) or
    ("truncated", b"") messages. The caller decides when progress is durable
    and calls ``commit`` with the number of bytes it has safely handled.
    """

    def __init__(self, path: str | Path, store: CheckpointStore):
        self.path = str(path)
        self.store = store
        self._file = None
        self._identity: tuple[int, int] | None = None
        self.position = 0  # read offset in the file currently open
        self.committed = 0

    def _open(self, offset: int) -> None:
        self._file = open(self.path, "rb")
        st = os.fstat(self._file.fileno())
        self._identity = (st.st_dev, st.st_ino)
        self._file.seek(offset)
        self.position = offset

    def read_new(self):
        try:
            st = os.stat(self.path)
        except OSError as exc:
            log.warning("skipping unreadable %s: %s", self.path, exc)
            return
        identity = (st.st_dev, st.st_ino)
        if self._file is None:
            cp = self.store.get(self.path)
            if cp and cp.identity() == identity and cp.offset <= st.st_size:
                start = cp.offset
            elif cp and cp.identity() == identity:  # truncated while we were away
                start = 0
                yield ("truncated", b"")
            else:
                start = 0
            self._open(start)
            self.committed = start
        elif identity != self._identity:
            tail = self._file.read()
            self._file.close()
            self._open(0)
            self.committed = 0
            yield ("rotated", tail)
        st_open = os.fstat(self._file.fileno())
        if st_open.st_size < self.position:
            self._file.seek(0)
            self.position = 0
            self.committed = 0
            yield ("truncated", b"")
        data = self._file.read()
        if data:
            self.position += len(data)
            yield ("data", data)

    def commit(self, offset: int, last_seen: float) -> None:
        self.committed = offset
        if self._identity is not None:
            self.store.set(self.path, self._identity[0], self._identity[1],
                           offset, last_seen)

    def close(self) -> None:
        if self._file is not None:
            self._file.close()
            self._file = None


class FileMonitor:
    """Combined view over several tailers: poll() -> [(source, new bytes)]."""

    def __init__(self, paths, store: CheckpointStore):
        self.tailers = {str(p): FileTailer(p, store) for p in paths}

    def poll(self) -> list[tuple[str, bytes]]:
        out = []
        for path, tailer in self.tailers.items():
            for kind, data in tailer.read_new():
                if data:
                    out.append((path, data))
        return out

    def commit_all(self, last_seen: float) -> None:
        for tailer in self.tailers.values():
            tailer.commit(tailer.position, last_seen)
        store = next(iter(self.tailers.values())).store if self.tailers else None
        if store:
            store.flush()

    def close(self) -> None:
        for tailer in self.tailers.values():
            tailer.close()
