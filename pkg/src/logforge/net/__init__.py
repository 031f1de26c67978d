from .forwarder import Forwarder, ready_event_groups
from .frames import (
    FRAME_EVENT,
    FRAME_HEARTBEAT,
    MAX_PAYLOAD,
    ProtocolError,
    decode_event_payload,
    decode_frame,
    encode_event_payload,
    encode_frame,
    heartbeat_frame,
    read_frame,
    split_oversize,
)
from .receiver import DEFAULT_PORT, Receiver
from .tailer import Checkpoint, CheckpointStore, FileMonitor, FileTailer

__all__ = [
    "Checkpoint", "CheckpointStore", "DEFAULT_PORT", "FileMonitor",
    "FileTailer", "Forwarder", "FRAME_EVENT", "FRAME_HEARTBEAT",
    "MAX_PAYLOAD", "ProtocolError", "Receiver", "decode_event_payload",
    "decode_frame", "encode_event_payload", "encode_frame", "heartbeat_frame",
    "read_frame", "ready_event_groups", "split_oversize",
]
