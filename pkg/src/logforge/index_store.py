"""Lifecycle-managed index buckets: term index, bloom filter, compressed rawdata.

An index is an ordered list of buckets. Exactly one bucket is hot (writable);
when it reaches the configured size it rolls to warm, old warm buckets roll to
cold, and old cold buckets are frozen into an archive directory where search
no longer sees them. A frozen bucket can be thawed back in.

On-disk layout per bucket: <data_dir>/<index>/<bucket_id>.meta.json,
.terms.dat (JSON term -> sorted event ids), .bloom.dat (raw bit array) and
.raw.deflate (length-prefixed zlib segments of JSON event records).
"""

from __future__ import annotations

import contextlib
import json
import re
import shutil
import threading
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .bloom import BloomFilter
from .ingest import KV_PAIR, Event

SEGMENT_LIMIT = 1024 * 1024  # uncompressed bytes per rawdata segment

HOT, WARM, COLD, FROZEN, THAWED = "hot", "warm", "cold", "frozen", "thawed"
SEARCH_ORDER = {HOT: 0, WARM: 1, COLD: 2, THAWED: 3}


class IndexStoreError(Exception):
    pass


class ThawError(IndexStoreError):
    pass


_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


def tokenize(raw: str) -> set[str]:
    """Index terms of a raw event: lowercase tokens plus key=value composites."""
    terms = {t for t in _TOKEN_SPLIT.split(raw.lower()) if t}
    for key, value in KV_PAIR.findall(raw):
        if value[:1] in "\"'" and value[-1:] == value[:1]:
            value = value[1:-1]
        terms.add(f"{key.lower()}={value.lower()}")
    return terms


@dataclass
class RollPolicy:
    max_bytes: int = 16 * 1024 * 1024  # hot bucket raw bytes before rolling
    max_warm: int = 8
    max_cold: int = 8
    bloom_fp_rate: float = 0.01
    provisional_terms: int = 200_000  # hot-bucket bloom sizing before roll


@dataclass
class ScanStats:
    scanned: int = 0
    decompressed_segments: int = 0
    bloom_skips: int = 0


class _NullTimer:
    @contextlib.contextmanager
    def time(self, component: str, calls: int = 1):
        yield


NULL_TIMER = _NullTimer()


@dataclass
class _Segment:
    """A sealed, compressed run of event records."""

    first_id: int
    count: int
    offsets: list[int]
    raw_len: int
    compressed: bytes = b""

    def decompress(self) -> bytes:
        data = zlib.decompress(self.compressed)
        if len(data) != self.raw_len:
            raise IndexStoreError("segment length mismatch after decompression")
        return data


def _encode_record(ev: Event) -> bytes:
    rec = [ev.id, ev.timestamp, ev.host, ev.source, ev.sourcetype, ev.raw]
    return json.dumps(rec, separators=(",", ":"), ensure_ascii=False).encode("utf-8") + b"\n"


def _decode_record(line: bytes) -> Event:
    ident, ts, host, source, sourcetype, raw = json.loads(line)
    return Event(raw=raw, timestamp=ts, host=host, source=source,
                 sourcetype=sourcetype, id=ident)


class Bucket:
    def __init__(self, bucket_id: int, policy: RollPolicy, state: str = HOT):
        self.id = bucket_id
        self.state = state
        self.policy = policy
        self.earliest: int | None = None
        self.latest: int | None = None
        self.event_count = 0
        self.size_bytes = 0  # sum of raw text bytes, drives rolling
        self.term_index: dict[str, list[int]] = {}
        self.bloom = BloomFilter.for_capacity(policy.provisional_terms, policy.bloom_fp_rate)
        self.segments: list[_Segment] = []
        self._open = bytearray()
        self._open_first_id: int | None = None
        self._open_offsets: list[int] = []
        # Guards the seal transition (segment append + open reset) against
        # concurrent reader snapshots; plain appends are safe without it.
        self._seal_lock = threading.Lock()

    # -- writing ---------------------------------------------------------

    def add(self, ev: Event) -> None:
        record = _encode_record(ev)
        if self._open and len(self._open) + len(record) > SEGMENT_LIMIT:
            self._seal_open()
        if self._open_first_id is None:
            self._open_first_id = ev.id
        # Bytes land before their offset becomes visible, so lock-free reader
        # snapshots never name a record whose bytes are still being written.
        offset = len(self._open)
        self._open.extend(record)
        self._open_offsets.append(offset)
        for term in tokenize(ev.raw):
            ids = self.term_index.setdefault(term, [])
            if not ids or ids[-1] != ev.id:
                ids.append(ev.id)
            self.bloom.insert(term)
        self.event_count += 1
        self.size_bytes += len(ev.raw.encode("utf-8"))
        if self.earliest is None or ev.timestamp < self.earliest:
            self.earliest = ev.timestamp
        if self.latest is None or ev.timestamp > self.latest:
            self.latest = ev.timestamp

    def _seal_open(self) -> None:
        if not self._open:
            return
        sealed = _Segment(
            first_id=self._open_first_id,
            count=len(self._open_offsets),
            offsets=list(self._open_offsets),
            raw_len=len(self._open),
            compressed=zlib.compress(bytes(self._open), 6),
        )
        with self._seal_lock:
            self.segments.append(sealed)
            self._open = bytearray()
            self._open_first_id = None
            self._open_offsets = []

    def seal(self) -> None:
        """Close the open segment and right-size the bloom filter."""
        self._seal_open()
        rebuilt = BloomFilter.for_capacity(len(self.term_index), self.policy.bloom_fp_rate)
        for term in self.term_index:
            rebuilt.insert(term)
        self.bloom = rebuilt

    # -- reading ---------------------------------------------------------

    def all_ids(self) -> list[int]:
        with self._seal_lock:
            segments = list(self.segments)
            open_first = self._open_first_id
            open_count = len(self._open_offsets)
        ids = []
        for seg in segments:
            ids.extend(range(seg.first_id, seg.first_id + seg.count))
        if open_first is not None:
            ids.extend(range(open_first, open_first + open_count))
        return ids

    def posting(self, term: str) -> list[int]:
        return self.term_index.get(term, [])

    def overlaps(self, earliest: int | None, latest: int | None) -> bool:
        if self.event_count == 0:
            return False
        if earliest is not None and self.latest is not None and self.latest < earliest:
            return False
        if latest is not None and self.earliest is not None and self.earliest > latest:
            return False
        return True

    def read_events(self, ids: Iterable[int], stats: ScanStats,
                    timer=NULL_TIMER) -> Iterator[Event]:
        """Decode the given ids in ascending order, decompressing lazily."""
        wanted = sorted(set(ids))
        if not wanted:
            return
        with self._seal_lock:  # consistent view across segments + open buffer
            segments = list(self.segments)
            open_first = self._open_first_id
            open_offsets = list(self._open_offsets)
            open_data = bytes(self._open)
        pos = 0
        for seg in segments:
            lo, hi = seg.first_id, seg.first_id + seg.count - 1
            seg_ids = []
            while pos < len(wanted) and wanted[pos] <= hi:
                if wanted[pos] >= lo:
                    seg_ids.append(wanted[pos])
                pos += 1
            if not seg_ids:
                continue
            with timer.time("command.search.rawdata"):
                data = seg.decompress()
            stats.decompressed_segments += 1
            for ident in seg_ids:
                idx = ident - lo
                start = seg.offsets[idx]
                end = seg.offsets[idx + 1] if idx + 1 < seg.count else seg.raw_len
                yield _decode_record(data[start:end])
        if open_first is not None and pos < len(wanted):
            n = len(open_offsets)
            for ident in wanted[pos:]:
                idx = ident - open_first
                if 0 <= idx < n:
                    start = open_offsets[idx]
                    end = open_offsets[idx + 1] if idx + 1 < n else len(open_data)
                    # Records are single JSON lines; the split bounds the last
                    # snapshot record against bytes appended after the copy.
                    yield _decode_record(open_data[start:end].split(b"\n", 1)[0])

    # -- persistence ------------------------------------------------------

    def files(self, directory: Path) -> dict[str, Path]:
        base = directory / str(self.id)
        return {
            "meta": base.with_name(f"{self.id}.meta.json"),
            "terms": base.with_name(f"{self.id}.terms.dat"),
            "bloom": base.with_name(f"{self.id}.bloom.dat"),
            "raw": base.with_name(f"{self.id}.raw.deflate"),
        }

    def save(self, directory: Path) -> None:
        directory.mkdir(parents=True, exist_ok=True)
        paths = self.files(directory)
        meta = {
            "format": 1,
            "id": self.id,
            "state": self.state,
            "earliest": self.earliest,
            "latest": self.latest,
            "event_count": self.event_count,
            "size_bytes": self.size_bytes,
            "bloom": {"m": self.bloom.m, "k": self.bloom.k, "inserted": self.bloom.inserted},
            "segments": [
                {"first_id": s.first_id, "count": s.count, "offsets": s.offsets,
                 "raw_len": s.raw_len}
                for s in self.segments
            ],
            "open_count": len(self._open_offsets),
        }
        paths["meta"].write_text(json.dumps(meta))
        paths["terms"].write_text(json.dumps(self.term_index))
        paths["bloom"].write_bytes(self.bloom.to_bytes())
        with paths["raw"].open("wb") as fh:
            for seg in self.segments:
                fh.write(len(seg.compressed).to_bytes(4, "big"))
                fh.write(seg.compressed)
            if self._open:
                comp = zlib.compress(bytes(self._open), 6)
                fh.write(len(comp).to_bytes(4, "big"))
                fh.write(comp)

    def save_meta(self, directory: Path) -> None:
        paths = self.files(directory)
        meta = json.loads(paths["meta"].read_text())
        meta["state"] = self.state
        paths["meta"].write_text(json.dumps(meta))

    @classmethod
    def load(cls, directory: Path, bucket_id: int, policy: RollPolicy,
             verify: bool = False) -> "Bucket":
        base = directory / f"{bucket_id}"
        meta_path = base.with_name(f"{bucket_id}.meta.json")
        try:
            meta = json.loads(meta_path.read_text())
        except OSError as exc:
            raise ThawError(f"cannot read bucket meta {meta_path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ThawError(f"corrupt bucket meta {meta_path}: {exc}") from exc
        bucket = cls(meta["id"], policy, state=meta["state"])
        bucket.earliest = meta["earliest"]
        bucket.latest = meta["latest"]
        bucket.event_count = meta["event_count"]
        bucket.size_bytes = meta["size_bytes"]
        try:
            bucket.term_index = json.loads(base.with_name(f"{bucket_id}.terms.dat").read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ThawError(f"corrupt term index for bucket {bucket_id}: {exc}") from exc
        bloom_meta = meta["bloom"]
        bucket.bloom = BloomFilter.from_bytes(
            base.with_name(f"{bucket_id}.bloom.dat").read_bytes(),
            bloom_meta["m"], bloom_meta["k"], bloom_meta["inserted"],
        )
        seg_metas = list(meta["segments"])
        if meta.get("open_count"):
            # The open segment was compressed on save; recover its geometry on load.
            seg_metas.append(None)
        raw_path = base.with_name(f"{bucket_id}.raw.deflate")
        blobs = []
        with raw_path.open("rb") as fh:
            while True:
                head = fh.read(4)
                if not head:
                    break
                if len(head) != 4:
                    raise ThawError(f"truncated rawdata header in bucket {bucket_id}")
                blobs.append(fh.read(int.from_bytes(head, "big")))
        if len(blobs) != len(seg_metas):
            raise ThawError(
                f"bucket {bucket_id}: expected {len(seg_metas)} segments, found {len(blobs)}")
        for i, (sm, blob) in enumerate(zip(seg_metas, blobs)):
            if sm is None:
                # Former open segment: rebuild offsets from the records themselves.
                data = zlib.decompress(blob)
                offsets, off = [], 0
                for line in data.splitlines(keepends=True):
                    offsets.append(off)
                    off += len(line)
                first_id = json.loads(data[: data.index(b"\n") + 1])[0]
                seg = _Segment(first_id, len(offsets), offsets, len(data), blob)
            else:
                seg = _Segment(sm["first_id"], sm["count"], sm["offsets"], sm["raw_len"], blob)
            if verify:
                try:
                    seg.decompress()
                except (zlib.error, IndexStoreError) as exc:
                    raise ThawError(f"bucket {bucket_id} segment {i} is corrupt: {exc}") from exc
            bucket.segments.append(seg)
        return bucket


class IndexHandle:
    """One named index: an ordered list of buckets plus a roll policy."""

    def __init__(self, data_dir: str | Path, name: str, policy: RollPolicy | None = None):
        self.name = name
        self.policy = policy or RollPolicy()
        self.dir = Path(data_dir) / name
        self.dir.mkdir(parents=True, exist_ok=True)
        self.buckets: list[Bucket] = []
        self._next_event_id = 1
        self._next_bucket_id = 1
        self._load_existing()

    @property
    def frozen_dir(self) -> Path:
        return self.dir / "frozen"

    def _load_existing(self) -> None:
        ids = sorted(
            int(p.name.split(".")[0]) for p in self.dir.glob("*.meta.json")
        )
        for bucket_id in ids:
            self.buckets.append(Bucket.load(self.dir, bucket_id, self.policy))
        if self.buckets:
            self._next_bucket_id = max(b.id for b in self.buckets) + 1
            last = 0
            for b in self.buckets:
                for seg in b.segments:
                    last = max(last, seg.first_id + seg.count - 1)
            self._next_event_id = last + 1

    def _hot(self) -> Bucket:
        for b in self.buckets:
            if b.state == HOT:
                return b
        bucket = Bucket(self._next_bucket_id, self.policy)
        self._next_bucket_id += 1
        self.buckets.append(bucket)
        return bucket

    @property
    def event_count(self) -> int:
        return sum(b.event_count for b in self.buckets)

    def index_event(self, ev: Event) -> int:
        """Tokenize and store one event in the hot bucket; returns its id."""
        if ev.timestamp < 0:
            raise IndexStoreError("event timestamp must be >= 0")
        if not ev.raw:
            raise IndexStoreError("event raw must be non-empty")
        hot = self._hot()
        ev = ev.copy()
        ev.id = self._next_event_id
        hot.add(ev)
        self._next_event_id += 1
        if hot.size_bytes >= self.policy.max_bytes:
            self.roll_buckets()
        return ev.id

    def index_events(self, events: Iterable[Event]) -> int:
        n = 0
        for ev in events:
            self.index_event(ev)
            n += 1
        return n

    def roll_buckets(self) -> list[tuple[int, str, str]]:
        """Apply the roll policy; returns (bucket_id, from_state, to_state) moves."""
        transitions: list[tuple[int, str, str]] = []
        for b in list(self.buckets):
            if b.state == HOT and b.size_bytes >= self.policy.max_bytes:
                b.seal()
                b.state = WARM
                b.save(self.dir)
                transitions.append((b.id, HOT, WARM))
        warm = [b for b in self.buckets if b.state == WARM]
        while len(warm) > self.policy.max_warm:
            oldest = warm.pop(0)
            oldest.state = COLD
            oldest.save_meta(self.dir)
            transitions.append((oldest.id, WARM, COLD))
        cold = [b for b in self.buckets if b.state == COLD]
        while len(cold) > self.policy.max_cold:
            oldest = cold.pop(0)
            self._freeze(oldest)
            transitions.append((oldest.id, COLD, FROZEN))
        return transitions

    def _freeze(self, bucket: Bucket) -> None:
        self.frozen_dir.mkdir(parents=True, exist_ok=True)
        bucket_files = bucket.files(self.dir)
        moved = []
        try:
            for path in bucket_files.values():
                target = self.frozen_dir / path.name
                shutil.move(str(path), str(target))
                moved.append((target, path))
        except OSError as exc:
            for target, original in moved:  # roll back, keep state unchanged
                with contextlib.suppress(OSError):
                    shutil.move(str(target), str(original))
            raise IndexStoreError(f"freeze of bucket {bucket.id} aborted: {exc}") from exc
        bucket.state = FROZEN
        bucket.save_meta(self.frozen_dir)
        self.buckets.remove(bucket)

    def thaw(self, archive_path: str | Path) -> Bucket:
        """Re-register a frozen bucket from the archive; it becomes searchable."""
        path = Path(archive_path)
        if path.name.endswith(".meta.json"):
            bucket_id = int(path.name.split(".")[0])
            directory = path.parent
        elif path.is_dir():
            raise ThawError(f"{path} is a directory; point at <bucket_id> or its meta.json")
        else:
            bucket_id = int(path.name.split(".")[0])
            directory = path.parent
        if not (directory / f"{bucket_id}.meta.json").exists():
            raise ThawError(f"no archived bucket at {path}")
        if any(b.id == bucket_id for b in self.buckets):
            raise ThawError(f"bucket {bucket_id} is already registered")
        bucket = Bucket.load(directory, bucket_id, self.policy, verify=True)
        bucket.state = THAWED
        self.buckets.append(bucket)
        return bucket

    def flush(self) -> None:
        """Persist hot buckets so the index can be reopened."""
        for b in self.buckets:
            if b.state == HOT:
                b.save(self.dir)

    # -- search -----------------------------------------------------------

    def search_buckets(self) -> list[Bucket]:
        eligible = [b for b in self.buckets if b.state in SEARCH_ORDER]
        return sorted(eligible, key=lambda b: (SEARCH_ORDER[b.state], b.id))

    def candidate_events(self, terms: Iterable[str], earliest: int | None = None,
                         latest: int | None = None, use_bloom: bool = True,
                         timer=NULL_TIMER) -> tuple[Iterator[Event], ScanStats]:
        """Events containing every term within the window, plus scan statistics.

        Buckets are visited hot -> warm -> cold -> thawed. A bucket whose bloom
        filter rules out any term, or whose time range misses the window, is
        skipped without touching rawdata. With use_bloom=False the pruning
        machinery is bypassed entirely and every eligible bucket is scanned
        and verified: the measurement baseline the bloom path is compared to.
        The stats object is complete only once the iterator is exhausted.
        """
        term_list = [t.lower() for t in terms if t and t != "*"]
        stats = ScanStats()

        def generate() -> Iterator[Event]:
            for bucket in self.search_buckets():
                if not bucket.overlaps(earliest, latest):
                    continue
                if term_list and use_bloom:
                    if any(term not in bucket.bloom for term in term_list):
                        stats.bloom_skips += 1
                        continue
                    with timer.time("command.search.index", calls=len(term_list)):
                        postings = [bucket.posting(t) for t in term_list]
                        if any(not p for p in postings):
                            continue
                        ids = set(postings[0])
                        for p in postings[1:]:
                            ids &= set(p)
                    if not ids:
                        continue
                else:
                    ids = bucket.all_ids()
                for ev in bucket.read_events(ids, stats, timer):
                    stats.scanned += 1
                    if earliest is not None and ev.timestamp < earliest:
                        continue
                    if latest is not None and ev.timestamp > latest:
                        continue
                    if term_list and not tokenize(ev.raw).issuperset(term_list):
                        continue  # guards against index corruption
                    yield ev

        return generate(), stats
