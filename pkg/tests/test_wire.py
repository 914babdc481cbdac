"""
Wire codec tests: golden frames, header layout, rejection of malformed input.
"""

import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.core.exceptions import (
    OversizeError,
    TruncatedHeaderError,
    TruncatedPayloadError,
    UnknownTypeError,
    WireError,
)
from app.core.wire import (
    HEADER_SIZE,
    MAX_ENTITY_ID,
    MAX_FRAME,
    MAX_PAYLOAD,
    BaselineMessageType,
    Message,
    MessageType,
    decode_message,
    decode_prefix,
    encode_message,
    peek_type_code,
)

NAMESPACES = {"flat": MessageType, "baseline": BaselineMessageType}

entity_ids = st.integers(min_value=0, max_value=MAX_ENTITY_ID)
messages = st.builds(
    Message,
    msg_type=st.sampled_from(list(MessageType)),
    seq=st.integers(min_value=0, max_value=255),
    src=entity_ids,
    dst=entity_ids,
    payload=st.binary(max_size=MAX_PAYLOAD),
)


# =============================================================================
# Fixtures
# =============================================================================

@pytest.fixture(scope="module")
def golden(fixtures_dir) -> list:
    return json.loads((fixtures_dir / "wire_golden.json").read_text())


# =============================================================================
# Golden frames
# =============================================================================

class TestGoldenFrames:
    def test_encode_matches_golden(self, golden):
        for vector in golden:
            namespace = NAMESPACES[vector["namespace"]]
            message = Message(
                msg_type=namespace[vector["type"]],
                seq=vector["seq"],
                src=vector["src"],
                dst=vector["dst"],
                payload=bytes.fromhex(vector["payload"]),
            )
            assert encode_message(message).hex() == vector["frame"]

    def test_decode_matches_golden(self, golden):
        for vector in golden:
            namespace = NAMESPACES[vector["namespace"]]
            message = decode_message(bytes.fromhex(vector["frame"]), namespace)
            assert message.msg_type.name == vector["type"]
            assert (message.seq, message.src, message.dst) == (
                vector["seq"],
                vector["src"],
                vector["dst"],
            )
            assert message.payload.hex() == vector["payload"]


# =============================================================================
# Layout
# =============================================================================

class TestHeaderLayout:
    def test_type_codes(self):
        assert [int(t) for t in MessageType] == list(range(0x01, 0x0B))
        assert [int(t) for t in BaselineMessageType] == list(range(0x81, 0x8A))

    def test_size_is_header_plus_payload(self):
        message = Message(MessageType.ASSERTION, 1, 0x100, 0x1000, bytes(153))
        assert len(encode_message(message)) == HEADER_SIZE + 153 == message.size

    def test_length_is_big_endian_at_offset_8(self):
        frame = encode_message(Message(MessageType.SP_KEY, 0, 1, 2, bytes(0x0102)))
        assert frame[8:10] == b"\x01\x02"

    def test_max_frame(self):
        frame = encode_message(Message(MessageType.SERVICE, 0, 1, 2, bytes(MAX_PAYLOAD)))
        assert len(frame) == MAX_FRAME == 290

    @settings(max_examples=10_000, deadline=None)
    @given(messages)
    def test_encoding_is_stable(self, message):
        frame = encode_message(message)
        assert len(frame) == HEADER_SIZE + len(message.payload)
        assert decode_message(frame) == message
        assert peek_type_code(frame) == int(message.msg_type)

    def test_trailing_bytes_ignored(self):
        frame = encode_message(Message(MessageType.CLIENT_KEY, 2, 3, 4, b"abc"))
        message, consumed = decode_prefix(frame + b"junk")
        assert consumed == len(frame)
        assert message.payload == b"abc"


# =============================================================================
# Rejection
# =============================================================================

class TestRejection:
    def test_truncated_header(self):
        with pytest.raises(TruncatedHeaderError):
            decode_message(b"\x01\x00\x00")

    def test_truncated_payload(self):
        frame = encode_message(Message(MessageType.CLIENT_KEY, 0, 1, 2, bytes(20)))
        with pytest.raises(TruncatedPayloadError):
            decode_message(frame[:-1])

    def test_unknown_type(self):
        frame = bytearray(encode_message(Message(MessageType.SERVICE, 0, 1, 2)))
        frame[0] = 0x0B
        with pytest.raises(UnknownTypeError):
            decode_message(bytes(frame))

    def test_namespaces_do_not_overlap(self):
        frame = encode_message(Message(BaselineMessageType.SERVICE_INIT, 0, 1, 2))
        with pytest.raises(UnknownTypeError):
            decode_message(frame, MessageType)

    def test_declared_length_over_limit(self):
        frame = bytearray(encode_message(Message(MessageType.SERVICE, 0, 1, 2)))
        frame[8:10] = (MAX_PAYLOAD + 1).to_bytes(2, "big")
        with pytest.raises(OversizeError):
            decode_message(bytes(frame) + bytes(MAX_PAYLOAD + 1))

    def test_oversize_encode(self):
        with pytest.raises(OversizeError):
            encode_message(Message(MessageType.SERVICE, 0, 1, 2, bytes(MAX_PAYLOAD + 1)))

    @pytest.mark.parametrize("seq", [-1, 256])
    def test_seq_out_of_range(self, seq):
        with pytest.raises(ValueError):
            encode_message(Message(MessageType.SERVICE, seq, 1, 2))

    def test_entity_out_of_range(self):
        with pytest.raises(ValueError):
            encode_message(Message(MessageType.SERVICE, 0, MAX_ENTITY_ID + 1, 2))

    def test_peek_empty(self):
        assert peek_type_code(b"") == -1

    @settings(max_examples=10_000, deadline=None)
    @given(st.binary(max_size=MAX_FRAME + 16))
    def test_arbitrary_bytes_decode_or_raise_wire_error(self, data):
        try:
            message = decode_message(data)
        except WireError:
            return
        assert encode_message(message) == data[: message.size]

    @pytest.mark.slow
    def test_seeded_fuzz(self):
        rng = random.Random(20240601)
        seeds = [
            encode_message(Message(t, 7, 0x001000, 0x000100, bytes(range(n))))
            for t in MessageType
            for n in (0, 16, 95)
        ]
        for _ in range(100_000):
            if rng.random() < 0.5:
                data = rng.randbytes(rng.randrange(MAX_FRAME + 16))
            else:
                data = bytearray(rng.choice(seeds))
                for _ in range(rng.randrange(1, 4)):
                    data[rng.randrange(len(data))] = rng.randrange(256)
                data = bytes(data[: rng.randrange(len(data) + 1)])
            try:
                message = decode_message(data)
            except WireError:
                continue
            assert encode_message(message) == data[: message.size]
