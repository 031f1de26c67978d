"""Wire format between forwarder and receiver.

Frame: 4-byte magic "LFWD", version byte (1), frame-type byte (0 = event,
1 = heartbeat), 4-byte big-endian payload length, payload. Event payloads
carry u16-length-prefixed host/source/sourcetype strings, a u64 big-endian
timestamp in microseconds, and the u32-length-prefixed raw bytes. Everything
is bounds-checked: a decoder never reads past the declared lengths.
"""

from __future__ import annotations

import struct

from ..ingest import Event

MAGIC = b"LFWD"
VERSION = 1
FRAME_EVENT = 0
FRAME_HEARTBEAT = 1
MAX_PAYLOAD = 1024 * 1024
HEADER_LEN = 10

# Continuation marker for raws that exceed one frame's payload budget.
CONTINUATION_SUFFIX = " (cont.)"


class ProtocolError(Exception):
    pass


def encode_event_payload(ev: Event) -> bytes:
    parts = []
    for text in (ev.host, ev.source, ev.sourcetype):
        data = text.encode("utf-8")
        if len(data) > 0xFFFF:
            raise ProtocolError("metadata field exceeds 64K")
        parts.append(struct.pack(">H", len(data)))
        parts.append(data)
    parts.append(struct.pack(">Q", ev.timestamp))
    raw = ev.raw.encode("utf-8")
    parts.append(struct.pack(">I", len(raw)))
    parts.append(raw)
    return b"".join(parts)


def decode_event_payload(payload: bytes) -> Event:
    pos = 0

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(payload):
            raise ProtocolError("event payload truncated")
        chunk = payload[pos:pos + n]
        pos += n
        return chunk

    texts = []
    for _ in range(3):
        (length,) = struct.unpack(">H", take(2))
        texts.append(take(length).decode("utf-8", errors="replace"))
    (timestamp,) = struct.unpack(">Q", take(8))
    (raw_len,) = struct.unpack(">I", take(4))
    raw = take(raw_len).decode("utf-8", errors="replace")
    if pos != len(payload):
        raise ProtocolError("trailing bytes after event payload")
    return Event(raw=raw, timestamp=timestamp, host=texts[0], source=texts[1],
                 sourcetype=texts[2])


def encode_frame(ev: Event) -> bytes:
    payload = encode_event_payload(ev)
    if len(payload) > MAX_PAYLOAD:
        raise ProtocolError(f"payload of {len(payload)} bytes exceeds 1 MiB")
    return MAGIC + bytes([VERSION, FRAME_EVENT]) + struct.pack(">I", len(payload)) + payload


def heartbeat_frame() -> bytes:
    return MAGIC + bytes([VERSION, FRAME_HEARTBEAT]) + struct.pack(">I", 0)


def split_oversize(ev: Event, budget: int = MAX_PAYLOAD - 4096) -> list[Event]:
    """Split an event whose raw is too large for one frame.

    Continuation parts carry a marker suffix so downstream consumers can see
    the raw was split.
    """
    raw = ev.raw.encode("utf-8")
    if len(raw) <= budget:
        return [ev]
    parts = []
    pos = 0
    while pos < len(raw):
        chunk = raw[pos:pos + budget]
        # Do not split inside a multi-byte character.
        while chunk and (raw[pos + len(chunk):pos + len(chunk) + 1] or b"\x00")[0] & 0xC0 == 0x80:
            chunk = chunk[:-1]
        piece = ev.copy()
        piece.raw = chunk.decode("utf-8", errors="replace")
        if pos > 0:
            piece.raw += CONTINUATION_SUFFIX
        parts.append(piece)
        pos += len(chunk)
    return parts


def decode_frame(data: bytes, offset: int = 0) -> tuple[int, int, Event | None]:
    """Decode one frame at offset; returns (bytes consumed, type, event or None)."""
    if len(data) - offset < HEADER_LEN:
        raise ProtocolError("truncated frame header")
    if data[offset:offset + 4] != MAGIC:
        raise ProtocolError("bad magic")
    if data[offset + 4] != VERSION:
        raise ProtocolError(f"unsupported version {data[offset + 4]}")
    frame_type = data[offset + 5]
    (payload_len,) = struct.unpack(">I", data[offset + 6:offset + 10])
    if payload_len > MAX_PAYLOAD:
        raise ProtocolError("payload length exceeds 1 MiB")
    end = offset + HEADER_LEN + payload_len
    if end > len(data):
        raise ProtocolError("truncated payload")
    payload = data[offset + HEADER_LEN:end]
    if frame_type == FRAME_HEARTBEAT:
        if payload:
            raise ProtocolError("heartbeat with payload")
        return HEADER_LEN, FRAME_HEARTBEAT, None
    if frame_type == FRAME_EVENT:
        return HEADER_LEN + payload_len, FRAME_EVENT, decode_event_payload(payload)
    raise ProtocolError(f"unknown frame type {frame_type}")


def read_frame(stream) -> tuple[int, Event | None] | None:
    """Read one frame from a blocking byte stream; None on clean EOF."""
    header = stream.read(HEADER_LEN)
    if not header:
        return None
    if len(header) < HEADER_LEN:
        raise ProtocolError("connection closed mid-header")
    if header[:4] != MAGIC:
        raise ProtocolError("bad magic")
    if header[4] != VERSION:
        raise ProtocolError(f"unsupported version {header[4]}")
    frame_type = header[5]
    (payload_len,) = struct.unpack(">I", header[6:10])
    if payload_len > MAX_PAYLOAD:
        raise ProtocolError("payload length exceeds 1 MiB")
    payload = b""
    while len(payload) < payload_len:
        chunk = stream.read(payload_len - len(payload))
        if not chunk:
            raise ProtocolError("connection closed mid-payload")
        payload += chunk
    if frame_type == FRAME_HEARTBEAT:
        if payload:
            raise ProtocolError("heartbeat with payload")
        return FRAME_HEARTBEAT, None
    if frame_type == FRAME_EVENT:
        return FRAME_EVENT, decode_event_payload(payload)
    raise ProtocolError(f"unknown frame type {frame_type}")
