"""
FLAT protocol tests: honest flow, byte layout, per-role work, assertion format
and client state machine edge cases.
"""

import pytest

from app.config.settings import settings
from app.core.crypto import GENERATOR, gen_keypair
from app.core.exceptions import AssertionFormatError, ProtocolAbort, ProtocolOrderError
from app.core.flat.assertion import (
    ASSERTION_SIZE,
    Assertion,
    issue_assertion,
    parse_assertion,
    serialize_assertion,
    verify_assertion,
)
from app.core.flat.client import ClientState, FlatClient
from app.core.flat.idp import FlatIdentityProvider
from app.core.flat.layout import DERIVED_CLIENT_BYTES, FLAT_LAYOUT
from app.core.layout import role_message_counts, role_totals
from app.core.pki import ecqv_extract
from app.core.roles import SequenceState
from app.core.wire import Message, MessageType, decode_message, encode_message
from app.models.schemas import AbortReason, Outcome, ProtocolKind, RoleName
from app.repositories.registry import ClientRegistry
from app.services.material import IDP_ID, SP_ID

FLOW = [
    MessageType.KEY_REQUEST,
    MessageType.CERTIFICATE_CHALLENGE,
    MessageType.CERTIFICATE_RESPONSE,
    MessageType.SP_KEY,
    MessageType.KEY_ACKNOWLEDGMENT,
    MessageType.CLIENT_KEY,
    MessageType.ASSERTION_REQUEST,
    MessageType.ASSERTION,
    MessageType.SERVICE_REQUEST,
    MessageType.SERVICE,
]
WIRE_SIZES = [61, 96, 161, 175, 91, 90, 61, 153, 153, 59]


@pytest.fixture
def honest(drive_session):
    return drive_session(ProtocolKind.FLAT)


# =============================================================================
# Layout
# =============================================================================

class TestLayout:
    def test_table_follows_message_flow(self):
        assert [entry.msg_type for entry in FLAT_LAYOUT] == FLOW
        assert [entry.wire_size for entry in FLAT_LAYOUT] == WIRE_SIZES

    def test_role_totals(self):
        totals = role_totals(FLAT_LAYOUT)
        assert sum(totals[RoleName.CLIENT]) == DERIVED_CLIENT_BYTES == 577
        assert sum(tx for tx, _ in totals.values()) == 1100
        assert sum(totals[RoleName.SP]) == 735
        assert sum(totals[RoleName.IDP]) == 888

    def test_message_counts(self):
        counts = role_message_counts(FLAT_LAYOUT)
        assert counts[RoleName.CLIENT] == (3, 3)
        assert counts[RoleName.SP] == (3, 3)
        assert counts[RoleName.IDP] == (4, 4)


# =============================================================================
# Honest run
# =============================================================================

class TestHonestRun:
    def test_granted(self, honest):
        session, _, metrics = honest
        assert metrics.outcome == Outcome.GRANTED
        assert session.client.state == ClientState.DONE
        assert session.sp.granted == 1
        assert metrics.abort_role is None and metrics.aborts == []
        assert metrics.restarts == 0

    def test_transcript_matches_layout(self, honest):
        _, result, metrics = honest
        frames = [bytes.fromhex(entry["frame"]) for entry in result.transcript]
        assert [decode_message(f).msg_type for f in frames] == FLOW
        assert [len(f) for f in frames] == WIRE_SIZES
        assert metrics.frames == 10

    def test_measured_traffic(self, honest):
        _, _, metrics = honest
        client = metrics.roles[RoleName.CLIENT]
        assert client.total_bytes == 577
        assert (client.tx_msgs, client.rx_msgs) == (3, 3)
        assert (metrics.roles[RoleName.SP].tx_msgs, metrics.roles[RoleName.SP].rx_msgs) == (3, 3)
        assert (metrics.roles[RoleName.IDP].tx_msgs, metrics.roles[RoleName.IDP].rx_msgs) == (4, 4)
        assert sum(role.tx_bytes for role in metrics.roles.values()) == 1100

    def test_client_is_symmetric_only(self, honest):
        ops = honest[2].roles[RoleName.CLIENT].ops
        assert ops.asymmetric == 0
        assert ops.sym_ops == 6

    def test_server_work(self, honest):
        sp = honest[2].roles[RoleName.SP].ops
        idp = honest[2].roles[RoleName.IDP].ops
        assert sp.profile() == (0, 1, 2, 2)
        assert (sp.ecqv_extract, sp.sym_ops) == (1, 2)
        assert idp.profile() == (1, 0, 2, 2)
        assert (idp.ecqv_extract, idp.sym_ops) == (1, 4)

    def test_keys_agree(self, honest):
        session, _, _ = honest
        assert session.client.k_cs == session.sp.k_cs
        assert session.sp.client_id == session.client.entity_id

    def test_session_key_never_on_the_wire(self, honest):
        session, result, _ = honest
        wire = b"".join(bytes.fromhex(entry["frame"]) for entry in result.transcript)
        k_cs = session.client.k_cs
        assert len(result.transcript) == 10
        for secret in (k_cs.enc_key, k_cs.mac_key, k_cs.to_bytes()):
            assert secret not in wire

    def test_each_client_in_turn(self, drive_session, federation):
        for index in range(len(federation.clients)):
            session, _, metrics = drive_session(ProtocolKind.FLAT, run_index=index)
            assert metrics.outcome == Outcome.GRANTED
            assert metrics.client_id == federation.clients[index].entity_id

    def test_idp_session_done(self, honest):
        session, _, _ = honest
        (record,) = session.idp.sessions.find(client_id=session.client.entity_id)
        assert record.phase.value == "done"
        assert record.sp_id == SP_ID


# =============================================================================
# Assertion
# =============================================================================

class TestAssertion:
    def test_format(self, rng):
        sk, pk = gen_keypair(rng)
        assertion = issue_assertion(sk, 0x1000, SP_ID, bytes(16), 1000, rng)
        raw = serialize_assertion(assertion)
        assert len(raw) == ASSERTION_SIZE == 95
        assert raw[:6] == b"\x00\x10\x00\x00\x02\x00"
        assert parse_assertion(raw) == assertion
        assert verify_assertion(pk, assertion)

    def test_any_body_change_breaks_signature(self, rng):
        sk, pk = gen_keypair(rng)
        raw = bytearray(serialize_assertion(issue_assertion(sk, 1, 2, bytes(16), 5, rng)))
        raw[10] ^= 0x01
        assert not verify_assertion(pk, parse_assertion(bytes(raw)))

    def test_expiry(self):
        assertion = Assertion(1, 2, bytes(16), expiry=100, idp_signature=bytes(65))
        assert not assertion.is_expired(100)
        assert assertion.is_expired(101)

    def test_bad_lengths(self):
        with pytest.raises(AssertionFormatError):
            parse_assertion(bytes(ASSERTION_SIZE - 1))
        with pytest.raises(AssertionFormatError):
            issue_assertion(1, 1, 2, bytes(15), 5)


# =============================================================================
# Sequence numbers
# =============================================================================

class TestSequenceState:
    def test_in_order(self):
        seqs = SequenceState()
        assert [seqs.next_tx(1) for _ in range(3)] == [0, 1, 2]
        seqs.accept(1, 0)
        seqs.accept(1, 1)
        assert seqs.expected_rx(1) == 2

    def test_stale_is_replay(self):
        seqs = SequenceState()
        seqs.accept(1, 0)
        with pytest.raises(ProtocolAbort) as exc:
            seqs.accept(1, 0)
        assert exc.value.reason == AbortReason.REPLAY

    def test_gap_is_sequence_error(self):
        with pytest.raises(ProtocolAbort) as exc:
            SequenceState().accept(1, 2)
        assert exc.value.reason == AbortReason.SEQUENCE

    def test_wraps_at_256(self):
        seqs = SequenceState()
        for expected in range(256):
            assert seqs.next_tx(9) == expected
        assert seqs.next_tx(9) == 0


# =============================================================================
# Client state machine
# =============================================================================

def make_client(federation, clock, rng) -> FlatClient:
    material = federation.clients[0]
    return FlatClient(material.entity_id, IDP_ID, material.k_ci, clock, rng)


class TestClientMachine:
    def test_start_emits_key_request(self, federation, clock, rng):
        client = make_client(federation, clock, rng)
        (request,) = client.start(SP_ID)
        assert request.msg_type == MessageType.KEY_REQUEST
        assert (request.seq, request.dst, len(encode_message(request))) == (0, IDP_ID, 61)
        assert client.state == ClientState.AWAIT_KEY
        assert client.deadline_ms == clock.now_ms() + settings.await_timeout_ms

    def test_cannot_start_twice(self, federation, clock, rng):
        client = make_client(federation, clock, rng)
        client.start(SP_ID)
        with pytest.raises(ProtocolOrderError):
            client.start(SP_ID)

    def test_idle_client_rejects_messages(self, federation, clock, rng):
        client = make_client(federation, clock, rng)
        with pytest.raises(ProtocolOrderError):
            client.on_message(Message(MessageType.CLIENT_KEY, 0, IDP_ID, client.entity_id))

    def test_unexpected_type_aborts(self, federation, clock, rng):
        client = make_client(federation, clock, rng)
        client.start(SP_ID)
        client.on_message(Message(MessageType.SERVICE, 0, SP_ID, client.entity_id, bytes(49)))
        assert client.state == ClientState.ABORTED
        assert client.first_abort.reason == AbortReason.UNEXPECTED

    def test_bad_mac_aborts(self, federation, clock, rng):
        client = make_client(federation, clock, rng)
        client.start(SP_ID)
        client.on_message(Message(MessageType.CLIENT_KEY, 0, IDP_ID, client.entity_id, bytes(80)))
        assert client.first_abort.reason == AbortReason.MAC

    def test_misrouted_frame_dropped(self, federation, clock, rng):
        client = make_client(federation, clock, rng)
        client.start(SP_ID)
        frame = encode_message(Message(MessageType.CLIENT_KEY, 0, IDP_ID, 0x00BEEF, bytes(80)))
        assert client.receive(frame) == []
        assert client.state == ClientState.AWAIT_KEY

    def test_timeouts_restart_then_abort(self, federation, clock, rng):
        client = make_client(federation, clock, rng)
        client.start(SP_ID)
        for attempt in range(1, settings.max_restarts + 1):
            clock.advance(settings.await_timeout_ms)
            (request,) = client.on_timeout()
            assert request.msg_type == MessageType.KEY_REQUEST and request.seq == 0
            assert client.restarts == attempt
        clock.advance(settings.await_timeout_ms)
        assert client.on_timeout() == []
        assert client.state == ClientState.ABORTED
        assert client.first_abort.reason == AbortReason.TIMEOUT
        assert client.deadline_ms is None


# =============================================================================
# IdP
# =============================================================================

class TestIdentityProvider:
    def test_unknown_client(self, federation, clock, rng):
        idp = FlatIdentityProvider(
            IDP_ID,
            federation.idp.ecqv_sk,
            federation.idp.implicit_cert,
            federation.q_ca,
            ClientRegistry(),
            clock,
            rng,
        )
        client = make_client(federation, clock, rng)
        (request,) = client.start(SP_ID)
        assert idp.on_message(request) == []
        assert idp.first_abort.reason == AbortReason.UNKNOWN_SENDER

    def test_restart_supersedes_open_session(self, federation, clock, rng):
        idp = FlatIdentityProvider(
            IDP_ID,
            federation.idp.ecqv_sk,
            federation.idp.implicit_cert,
            federation.q_ca,
            federation.client_registry(),
            clock,
            rng,
        )
        client = make_client(federation, clock, rng)
        (first,) = client.start(SP_ID)
        (challenge,) = idp.on_message(first)
        assert challenge.msg_type == MessageType.CERTIFICATE_CHALLENGE and challenge.dst == SP_ID
        clock.advance(settings.await_timeout_ms)
        (second,) = client.on_timeout()
        idp.on_message(second)
        phases = [s.phase.value for s in idp.sessions.find(client_id=client.entity_id)]
        assert phases == ["await_cert_response", "superseded"]

    def test_signing_key_matches_certificate(self, federation):
        assert ecqv_extract(federation.q_ca, federation.idp.implicit_cert) == (
            GENERATOR * federation.idp.ecqv_sk
        )
