"""
Adversary scenarios on the memory network: every tampered FLAT message is
caught by the first party that checks it, replayed service requests are
refused, dropped keys end in a timeout and an SP with rogue certificates never
receives K_CS.
"""

import pytest

from app.core.exceptions import ConfigError
from app.core.wire import BaselineMessageType, MessageType, peek_type_code
from app.models.schemas import AbortReason, AttackKind, Outcome, ProtocolKind, RoleName
from app.services.attacks import AttackRegistry, DropAttack, TamperAttack
from app.services.attacks.base import resolve_type

# first abort for a one-bit flip in the last byte of each FLAT message
TAMPER_EXPECTATIONS = [
    ("KEY_REQUEST", RoleName.IDP, AbortReason.MAC),
    ("CERTIFICATE_CHALLENGE", RoleName.IDP, AbortReason.SIGNATURE),
    ("CERTIFICATE_RESPONSE", RoleName.IDP, AbortReason.SIGNATURE),
    ("SP_KEY", RoleName.SP, AbortReason.SIGNATURE),
    ("KEY_ACKNOWLEDGMENT", RoleName.IDP, AbortReason.SIGNATURE),
    ("CLIENT_KEY", RoleName.CLIENT, AbortReason.MAC),
    ("ASSERTION_REQUEST", RoleName.IDP, AbortReason.MAC),
    ("ASSERTION", RoleName.CLIENT, AbortReason.MAC),
    ("SERVICE_REQUEST", RoleName.SP, AbortReason.MAC),
    ("SERVICE", RoleName.CLIENT, AbortReason.MAC),
]


def frame_types(result) -> list:
    return [peek_type_code(bytes.fromhex(entry["frame"])) for entry in result.transcript]


# =============================================================================
# Registry
# =============================================================================

class TestRegistry:
    def test_every_attack_kind_registered(self):
        assert sorted(AttackRegistry.get_attack_names()) == sorted(k.value for k in AttackKind)

    def test_unknown_attack(self):
        with pytest.raises(ConfigError):
            AttackRegistry.get_attack("mitm", ProtocolKind.FLAT)

    def test_target_names_resolve_per_protocol(self):
        assert resolve_type(ProtocolKind.FLAT, "sp_key") == MessageType.SP_KEY
        assert resolve_type(ProtocolKind.BASELINE, "SP_KEY") == BaselineMessageType.SP_KEY
        with pytest.raises(ConfigError):
            resolve_type(ProtocolKind.BASELINE, "KEY_REQUEST")

    def test_defaults(self):
        assert TamperAttack(ProtocolKind.FLAT).target == "CLIENT_KEY"
        assert TamperAttack(ProtocolKind.BASELINE).target == "SERVICE"
        assert DropAttack(ProtocolKind.BASELINE).target == "ASSERTION"


# =============================================================================
# Tamper
# =============================================================================

class TestTamper:
    @pytest.mark.parametrize("target,role,reason", TAMPER_EXPECTATIONS)
    def test_first_abort(self, drive_session, target, role, reason):
        session, _, metrics = drive_session(ProtocolKind.FLAT, AttackKind.TAMPER, target)
        assert metrics.outcome != Outcome.GRANTED
        assert not session.client.granted
        assert (metrics.abort_role, metrics.abort_reason) == (role, reason)

    def test_challenge_tamper_caught_on_signed_response(self, drive_session):
        _, _, metrics = drive_session(ProtocolKind.FLAT, AttackKind.TAMPER, "CERTIFICATE_CHALLENGE")
        assert metrics.aborts[0].msg_type == "CERTIFICATE_RESPONSE"
        assert metrics.restarts == 3

    def test_baseline_default(self, drive_session):
        _, _, metrics = drive_session(ProtocolKind.BASELINE, AttackKind.TAMPER)
        assert metrics.outcome == Outcome.ABORTED
        assert metrics.abort_role == RoleName.CLIENT
        assert metrics.abort_reason == AbortReason.SIGNATURE

    def test_baseline_service_request(self, drive_session):
        _, _, metrics = drive_session(ProtocolKind.BASELINE, AttackKind.TAMPER, "SERVICE_REQUEST")
        assert (metrics.abort_role, metrics.abort_reason) == (RoleName.SP, AbortReason.SIGNATURE)


# =============================================================================
# Replay
# =============================================================================

class TestReplay:
    @pytest.mark.parametrize("protocol", list(ProtocolKind))
    def test_replayed_service_request_denied(self, drive_session, protocol):
        session, _, metrics = drive_session(protocol, AttackKind.REPLAY)
        assert metrics.outcome == Outcome.GRANTED
        assert metrics.attack_outcome == Outcome.DENIED
        assert (session.sp.granted, session.sp.denied) == (1, 1)
        replay = [a for a in metrics.aborts if a.role == RoleName.SP]
        assert replay[0].reason == AbortReason.REPLAY

    def test_request_appears_once_in_transcript(self, drive_session):
        _, result, _ = drive_session(ProtocolKind.FLAT, AttackKind.REPLAY)
        # replayed copies are queued directly, never recorded as sent
        assert frame_types(result).count(MessageType.SERVICE_REQUEST) == 1


# =============================================================================
# Drop
# =============================================================================

class TestDrop:
    def test_dropped_client_key_times_out(self, drive_session):
        _, result, metrics = drive_session(ProtocolKind.FLAT, AttackKind.DROP)
        assert metrics.outcome == Outcome.ABORTED
        assert (metrics.abort_role, metrics.abort_reason) == (RoleName.CLIENT, AbortReason.TIMEOUT)
        assert metrics.restarts == 3
        assert frame_types(result).count(MessageType.KEY_REQUEST) == 4

    def test_dropped_baseline_assertion_times_out(self, drive_session):
        _, _, metrics = drive_session(ProtocolKind.BASELINE, AttackKind.DROP)
        assert metrics.abort_reason == AbortReason.TIMEOUT
        assert metrics.restarts == 3


# =============================================================================
# Fake SP
# =============================================================================

class TestFakeSp:
    def test_flat_idp_refuses_rogue_certificate(self, drive_session):
        session, result, metrics = drive_session(ProtocolKind.FLAT, AttackKind.FAKE_SP)
        assert metrics.outcome == Outcome.ABORTED
        assert (metrics.abort_role, metrics.abort_reason) == (RoleName.IDP, AbortReason.SIGNATURE)
        types = frame_types(result)
        assert MessageType.SP_KEY not in types
        assert MessageType.CLIENT_KEY not in types
        assert session.sp.k_cs is None

    def test_baseline_client_refuses_rogue_certificate(self, drive_session):
        _, result, metrics = drive_session(ProtocolKind.BASELINE, AttackKind.FAKE_SP)
        assert (metrics.abort_role, metrics.abort_reason) == (
            RoleName.CLIENT,
            AbortReason.CERTIFICATE,
        )
        assert BaselineMessageType.ASSERTION_REQUEST not in frame_types(result)
