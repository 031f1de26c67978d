"""Raw byte streams -> Events: block reading, event breaking, timestamps, fields.

The ingest path is stateless per stream: every source file (or network peer)
is read in 64K blocks, broken into events at configured boundaries, stamped
with the first parseable timestamp, and annotated with host/source/sourcetype
metadata. Field extraction is separate so it can also run lazily at search
time.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, Iterable, Iterator

BLOCK_SIZE = 64 * 1024

# Timestamp sentinel: 0 means "no timestamp could be parsed".
UNPARSED = 0


class IngestError(Exception):
    """I/O or configuration failure while ingesting a source."""

    def __init__(self, message: str, source: str = ""):
        super().__init__(message)
        self.source = source


class RuleConfigError(IngestError):
    """A break/extraction rule failed to load or compile."""


@dataclass
class RawBlock:
    """A chunk of at most 64K bytes plus the stream's metadata."""

    data: bytes
    host: str
    source: str
    sourcetype: str

    def __post_init__(self):
        if len(self.data) > BLOCK_SIZE:
            raise ValueError(f"block exceeds {BLOCK_SIZE} bytes")
        if not (self.host and self.source and self.sourcetype):
            raise ValueError("host/source/sourcetype must be non-empty")


@dataclass
class Event:
    """One broken, timestamped, metadata-annotated log record."""

    raw: str
    timestamp: int = UNPARSED  # microseconds since epoch, 0 = unparsed
    host: str = ""
    source: str = ""
    sourcetype: str = ""
    fields: dict[str, str] = field(default_factory=dict)
    id: int = 0  # assigned at indexing time

    def copy(self) -> "Event":
        return replace(self, fields=dict(self.fields))


@dataclass
class BreakRule:
    """How to split a sourcetype's byte stream into events."""

    sourcetype: str
    mode: str = "timestamp-prefix"  # line | timestamp-prefix | regex-boundary
    boundary_pattern: str = ""

    _boundary: re.Pattern | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.mode not in ("line", "timestamp-prefix", "regex-boundary"):
            raise RuleConfigError(f"unknown break mode {self.mode!r}")
        if self.mode == "regex-boundary":
            try:
                self._boundary = re.compile(self.boundary_pattern)
            except re.error as exc:
                raise RuleConfigError(
                    f"boundary pattern for {self.sourcetype!r} does not compile: {exc}"
                ) from exc


@dataclass
class ExtractionRule:
    """Search-time field extraction config for one sourcetype."""

    sourcetype: str
    kind: str = "kv-auto"  # kv-auto | regex-named-groups
    pattern: str = ""
    kv_mode: str = "auto"  # auto | none

    _regex: re.Pattern | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("kv-auto", "regex-named-groups"):
            raise RuleConfigError(f"unknown extraction kind {self.kind!r}")
        if self.kv_mode not in ("auto", "none"):
            raise RuleConfigError(f"unknown kv_mode {self.kv_mode!r}")
        if self.kind == "regex-named-groups":
            try:
                self._regex = re.compile(self.pattern)
            except re.error as exc:
                raise RuleConfigError(
                    f"extraction pattern for {self.sourcetype!r} does not compile: {exc}"
                ) from exc
            for name in self._regex.groupindex:
                if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name):
                    raise RuleConfigError(f"invalid field name {name!r} in pattern")


# A new event starts at a line whose head (after an optional integer token,
# e.g. an editor line number) is a bracketed timestamp.
TIMESTAMP_HEAD = re.compile(r"^\s*(?:\d+\s+)?\[\d{4}-\d{2}-\d{2} \d{2}:\d{2}:\d{2},\d{3,6}\]")

# Primary timestamp shape: [YYYY-MM-DD HH:MM:SS,fraction]
_TS_BRACKET = re.compile(
    r"\[(\d{4})-(\d{2})-(\d{2}) (\d{2}):(\d{2}):(\d{2}),(\d{3,6})\]"
)
# Secondary shape for web access logs: [17/Jan/2018:15:30:39 +0000]
_TS_CLF = re.compile(
    r"\[(\d{2})/([A-Z][a-z]{2})/(\d{4}):(\d{2}):(\d{2}):(\d{2}) ([+-]\d{4})\]"
)
_MONTHS = {
    m: i + 1
    for i, m in enumerate(
        ["Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"]
    )
}

KV_PAIR = re.compile(
    r"(?<![A-Za-z0-9_])([A-Za-z_][A-Za-z0-9_]*)=(\"[^\"]*\"|'[^']*'|\S+)"
)

METADATA_KEYS = ("host", "source", "sourcetype")


def read_blocks(stream: IO[bytes], host: str, source: str, sourcetype: str) -> Iterator[RawBlock]:
    """Read a byte stream into <=64K blocks that never split a UTF-8 code point."""
    carry = b""
    while True:
        try:
            chunk = stream.read(BLOCK_SIZE - len(carry))
        except OSError as exc:
            raise IngestError(f"read failed: {exc}", source=source) from exc
        if not chunk:
            if carry:
                yield RawBlock(carry, host, source, sourcetype)
            return
        data = carry + chunk
        cut = len(data)
        if len(data) == BLOCK_SIZE:
            cut = _utf8_safe_cut(data)
        carry = data[cut:]
        if cut:
            yield RawBlock(data[:cut], host, source, sourcetype)


def _utf8_safe_cut(data: bytes) -> int:
    """Largest prefix length that does not end mid code point."""
    cut = len(data)
    # At most 3 continuation bytes can trail an incomplete sequence.
    back = 0
    while back < 3 and cut - 1 - back >= 0 and (data[cut - 1 - back] & 0xC0) == 0x80:
        back += 1
    lead_pos = cut - 1 - back
    if lead_pos < 0:
        return cut
    lead = data[lead_pos]
    if lead < 0x80:
        return cut  # ASCII tail, nothing straddles
    if lead >= 0xF0:
        need = 4
    elif lead >= 0xE0:
        need = 3
    elif lead >= 0xC0:
        need = 2
    else:
        return cut  # invalid byte, let lossy decode deal with it
    have = cut - lead_pos
    if have < need:
        return lead_pos
    return cut


def break_events(blocks: Iterable[RawBlock], rule: BreakRule) -> Iterator[Event]:
    """Split blocks into events per the rule; timestamps/fields are left unset."""
    meta: tuple[str, str, str] | None = None
    pending = ""  # text not yet emitted, ends mid-line or mid-event
    current: list[str] | None = None

    def is_boundary(line: str) -> bool:
        if rule.mode == "line":
            return True
        if rule.mode == "timestamp-prefix":
            return TIMESTAMP_HEAD.match(line) is not None
        return rule._boundary.search(line) is not None

    def finish(lines: list[str]) -> Event:
        host, source, sourcetype = meta
        return Event(raw="\n".join(lines), host=host, source=source, sourcetype=sourcetype)

    for block in blocks:
        if meta is None:
            meta = (block.host, block.source, block.sourcetype)
        pending += block.data.decode("utf-8", errors="replace")
        *complete, pending = pending.split("\n")
        for line in complete:
            if is_boundary(line) or current is None:
                if current is not None and (current != [""]):
                    yield finish(current)
                current = [line]
            else:
                current.append(line)
        # In line mode each complete line is its own event.
        if rule.mode == "line" and current is not None:
            if current != [""]:
                yield finish(current)
            current = None

    if pending:
        if current is None or is_boundary(pending):
            if current is not None and current != [""]:
                yield finish(current)
            current = [pending]
        else:
            current.append(pending)
    if current is not None and current != [""]:
        yield finish(current)


def parse_timestamp(raw: str) -> int:
    """First bracketed timestamp as epoch microseconds, or UNPARSED (0).

    Naive timestamps are treated as UTC. An exact epoch timestamp maps to 1 so
    that 0 stays reserved for "unparsed".
    """
    m = _TS_BRACKET.search(raw)
    if m:
        year, month, day, hour, minute, sec = (int(g) for g in m.groups()[:6])
        frac = m.group(7)
        micros = int(frac) * 10 ** (6 - len(frac))
        try:
            dt = datetime(year, month, day, hour, minute, sec, tzinfo=timezone.utc)
        except ValueError:
            return UNPARSED
        ts = int(dt.timestamp()) * 1_000_000 + micros
        return max(ts, 1)
    m = _TS_CLF.search(raw)
    if m:
        day, mon, year, hour, minute, sec, zone = m.groups()
        month = _MONTHS.get(mon)
        if month is None:
            return UNPARSED
        try:
            dt = datetime(int(year), month, int(day), int(hour), int(minute), int(sec),
                          tzinfo=timezone.utc)
        except ValueError:
            return UNPARSED
        offset = (int(zone[1:3]) * 60 + int(zone[3:5])) * 60
        if zone[0] == "+":
            offset = -offset
        ts = (int(dt.timestamp()) + offset) * 1_000_000
        return max(ts, 1)
    return UNPARSED


def apply_timestamps(events: Iterable[Event], counters: dict[str, int] | None = None) -> Iterator[Event]:
    """Stamp each event; unparsed events inherit the previous timestamp."""
    last = UNPARSED
    for ev in events:
        ts = parse_timestamp(ev.raw)
        if ts == UNPARSED:
            if counters is not None:
                counters[ev.source] = counters.get(ev.source, 0) + 1
            ts = last
        ev.timestamp = ts
        last = ts
        yield ev


def extract_regex(event: Event, rules: Iterable[ExtractionRule]) -> None:
    """Apply regex-named-groups rules (for the event's sourcetype) in order."""
    for rule in rules:
        if rule.sourcetype != event.sourcetype or rule.kind != "regex-named-groups":
            continue
        m = rule._regex.search(event.raw)
        if m:
            for name, value in m.groupdict().items():
                if value is not None:
                    _put_field(event.fields, name, value)


def extract_kv(event: Event) -> None:
    """Scan the raw text for key=value tokens (unquoted or quoted values)."""
    for key, value in KV_PAIR.findall(event.raw):
        if value[:1] in "\"'" and value[-1:] == value[:1]:
            value = value[1:-1]
        _put_field(event.fields, key, value)


def extract_fields(event: Event, rules: Iterable[ExtractionRule]) -> Event:
    """Populate event.fields from the sourcetype's extraction rules.

    Regex rules run first in config order, then kv-auto unless the sourcetype
    sets kv_mode=none. Earlier writers win on name collisions, and extracted
    names never shadow metadata (an extracted "host" lands in "host_1").
    """
    extract_regex(event, rules)
    if kv_mode_for(rules, event.sourcetype) != "none":
        extract_kv(event)
    return event


def _put_field(fields: dict[str, str], name: str, value: str) -> None:
    if name in METADATA_KEYS:
        name = name + "_1"
    if name not in fields:
        fields[name] = value


def kv_mode_for(rules: Iterable[ExtractionRule], sourcetype: str) -> str:
    for r in rules:
        if r.sourcetype == sourcetype and r.kv_mode == "none":
            return "none"
    return "auto"


class RuleSet:
    """Break and extraction rules keyed by sourcetype."""

    def __init__(self, break_rules: Iterable[BreakRule] = (), extraction_rules: Iterable[ExtractionRule] = ()):
        self.break_rules = {r.sourcetype: r for r in break_rules}
        self.extraction_rules = list(extraction_rules)

    def break_rule(self, sourcetype: str) -> BreakRule:
        # Fallback mirrors the most common app-log shape.
        return self.break_rules.get(sourcetype) or BreakRule(sourcetype, "timestamp-prefix")

    def rules_for(self, sourcetype: str) -> list[ExtractionRule]:
        return [r for r in self.extraction_rules if r.sourcetype == sourcetype]

    def kv_mode(self, sourcetype: str) -> str:
        return kv_mode_for(self.extraction_rules, sourcetype)

    def set_kv_mode(self, sourcetype: str, mode: str) -> None:
        """Flip kv-auto on/off for a sourcetype in place."""
        self.extraction_rules = [
            r for r in self.extraction_rules
            if not (r.sourcetype == sourcetype and r.kind == "kv-auto")
        ]
        self.extraction_rules.append(ExtractionRule(sourcetype, "kv-auto", kv_mode=mode))

    @classmethod
    def from_dict(cls, cfg: dict) -> "RuleSet":
        breaks = []
        extracts = []
        for sourcetype, section in cfg.get("sourcetypes", cfg).items():
            if not isinstance(section, dict):
                continue
            br = section.get("break", {})
            if br:
                breaks.append(BreakRule(sourcetype, br.get("mode", "timestamp-prefix"),
                                        br.get("pattern", "")))
            for ext in section.get("extract", []):
                extracts.append(ExtractionRule(
                    sourcetype,
                    ext.get("kind", "kv-auto"),
                    ext.get("pattern", ""),
                    ext.get("kv_mode", "auto"),
                ))
        return cls(breaks, extracts)

    @classmethod
    def load(cls, path: str | Path) -> "RuleSet":
        """Load rules from a JSON or TOML file."""
        path = Path(path)
        try:
            data = path.read_bytes()
        except OSError as exc:
            raise RuleConfigError(f"cannot read rules file: {exc}") from exc
        if path.suffix == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # Python 3.10
                import tomli as tomllib
            return cls.from_dict(tomllib.loads(data.decode("utf-8")))
        try:
            return cls.from_dict(json.loads(data))
        except json.JSONDecodeError as exc:
            raise RuleConfigError(f"rules file is not valid JSON: {exc}") from exc


def stream_events(stream: IO[bytes], meta: tuple[str, str, str], rules: RuleSet,
                  counters: dict[str, int] | None = None) -> Iterator[Event]:
    """Full pipeline for one stream: blocks -> events -> timestamps."""
    host, source, sourcetype = meta
    blocks = read_blocks(stream, host, source, sourcetype)
    events = break_events(blocks, rules.break_rule(sourcetype))
    return apply_timestamps(events, counters)


def ingest_file(path: str | Path, rules: RuleSet, host: str, sourcetype: str,
                counters: dict[str, int] | None = None) -> Iterator[Event]:
    path = Path(path)
    try:
        fh = path.open("rb")
    except OSError as exc:
        raise IngestError(f"cannot open {path}: {exc}", source=str(path)) from exc
    with fh:
        yield from stream_events(fh, (host, str(path), sourcetype), rules, counters)
