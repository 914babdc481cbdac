"""
Wire format.

Every frame is a 10-byte header followed by at most 280 payload bytes:

    type(1) | seq(1) | src(3) | dst(3) | payload_len(2) | payload

Multi-byte integers are big-endian. FLAT uses type codes 0x01-0x0A; the
baseline protocol shares the header but uses its own namespace 0x81-0x89 so
frames of the two protocols never decode as each other.
"""

import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import Tuple, Type

from app.core.exceptions import (
    OversizeError,
    TruncatedHeaderError,
    TruncatedPayloadError,
    UnknownTypeError,
)

HEADER_SIZE = 10
MAX_PAYLOAD = 280
MAX_FRAME = HEADER_SIZE + MAX_PAYLOAD
MAX_ENTITY_ID = (1 << 24) - 1
ENTITY_ID_SIZE = 3

_TYPE_SEQ = struct.Struct(">BB")
_LENGTH = struct.Struct(">H")


class MessageType(IntEnum):
    """FLAT message types, in message-flow order."""
    KEY_REQUEST = 0x01
    CLIENT_KEY = 0x02
    CERTIFICATE_CHALLENGE = 0x03
    CERTIFICATE_RESPONSE = 0x04
    SP_KEY = 0x05
    KEY_ACKNOWLEDGMENT = 0x06
    ASSERTION_REQUEST = 0x07
    ASSERTION = 0x08
    SERVICE_REQUEST = 0x09
    SERVICE = 0x0A


class BaselineMessageType(IntEnum):
    """Reserved namespace for the traditional-FIdM baseline."""
    SERVICE_INIT = 0x81
    REDIRECT = 0x82
    ASSERTION_REQUEST = 0x83
    CHALLENGE = 0x84
    CREDENTIALS = 0x85
    ASSERTION = 0x86
    SP_KEY = 0x87
    SERVICE_REQUEST = 0x88
    SERVICE = 0x89


Namespace = Type[IntEnum]


@dataclass(frozen=True)
class Message:
    """One wire unit."""
    msg_type: IntEnum
    seq: int
    src: int
    dst: int
    payload: bytes = b""

    @property
    def size(self) -> int:
        return HEADER_SIZE + len(self.payload)


def entity_bytes(entity_id: int) -> bytes:
    if not 0 <= entity_id <= MAX_ENTITY_ID:
        raise ValueError(f"entity id out of range: {entity_id}")
    return entity_id.to_bytes(ENTITY_ID_SIZE, "big")


def parse_entity(data: bytes) -> int:
    if len(data) != ENTITY_ID_SIZE:
        raise ValueError("entity id must be 3 bytes")
    return int.from_bytes(data, "big")


def encode_message(m: Message) -> bytes:
    """Encode a message; output length is always 10 + len(payload)."""
    if len(m.payload) > MAX_PAYLOAD:
        raise OversizeError(f"payload of {len(m.payload)} bytes exceeds {MAX_PAYLOAD}")
    if not 0 <= m.seq <= 0xFF:
        raise ValueError(f"seq out of range: {m.seq}")
    return b"".join(
        (
            _TYPE_SEQ.pack(int(m.msg_type), m.seq),
            entity_bytes(m.src),
            entity_bytes(m.dst),
            _LENGTH.pack(len(m.payload)),
            bytes(m.payload),
        )
    )


def decode_prefix(data: bytes, namespace: Namespace = MessageType) -> Tuple[Message, int]:
    """Decode one message from the front of `data`; returns it with the bytes consumed."""
    if len(data) < HEADER_SIZE:
        raise TruncatedHeaderError(f"need {HEADER_SIZE} header bytes, got {len(data)}")

    code, seq = _TYPE_SEQ.unpack_from(data, 0)
    try:
        msg_type = namespace(code)
    except ValueError:
        raise UnknownTypeError(f"unknown type code 0x{code:02x}") from None

    (length,) = _LENGTH.unpack_from(data, 8)
    if length > MAX_PAYLOAD:
        raise OversizeError(f"declared payload length {length} exceeds {MAX_PAYLOAD}")

    end = HEADER_SIZE + length
    if len(data) < end:
        present = len(data) - HEADER_SIZE
        raise TruncatedPayloadError(f"declared {length} payload bytes, {present} present")

    message = Message(
        msg_type=msg_type,
        seq=seq,
        src=int.from_bytes(data[2:5], "big"),
        dst=int.from_bytes(data[5:8], "big"),
        payload=bytes(data[HEADER_SIZE:end]),
    )
    return message, end


def decode_message(data: bytes, namespace: Namespace = MessageType) -> Message:
    """Decode a message, ignoring any bytes after the declared payload."""
    message, _ = decode_prefix(data, namespace)
    return message


def peek_type_code(data: bytes) -> int:
    """Type code of a frame without validating the rest; -1 for an empty buffer."""
    return data[0] if data else -1
