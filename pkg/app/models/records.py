"""
In-memory records held by the IdP repositories.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

from app.core.crypto import CurvePoint, SymmetricKey
from app.core.roles import SequenceState


class SessionPhase(str, Enum):
    """IdP-side progress of one session."""
    AWAIT_CERT_RESPONSE = "await_cert_response"
    AWAIT_KEY_ACK = "await_key_ack"
    AWAIT_ASSERTION_REQUEST = "await_assertion_request"
    AWAIT_CREDENTIALS = "await_credentials"
    DONE = "done"
    ABORTED = "aborted"
    SUPERSEDED = "superseded"
    EXPIRED = "expired"


TERMINAL_PHASES = frozenset(
    {SessionPhase.DONE, SessionPhase.ABORTED, SessionPhase.SUPERSEDED, SessionPhase.EXPIRED}
)


@dataclass
class IdpSession:
    """One (client, SP, client nonce) session at the IdP."""
    id: int
    client_id: int
    sp_id: int
    n_c: bytes
    phase: SessionPhase
    created_ms: int
    updated_ms: int
    seqs: SequenceState = field(default_factory=SequenceState)
    n_idp: bytes = b""
    n_sp: bytes = b""
    q_sp: Optional[CurvePoint] = field(default=None, repr=False)
    k_cs: bytes = field(default=b"", repr=False)
    abort_reason: Optional[Any] = None

    @property
    def is_open(self) -> bool:
        return self.phase not in TERMINAL_PHASES


@dataclass
class ClientRecord:
    """Registry entry for a client provisioned at its home IdP."""
    id: int
    k_ci: Optional[SymmetricKey] = field(default=None, repr=False)
    certificate: Optional[Any] = None
    credential: bytes = field(default=b"", repr=False)
