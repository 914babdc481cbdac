from typing import List

from app.core.crypto import (
    ECIES_OVERHEAD,
    NONCE_SIZE,
    PROTECT_OVERHEAD,
    SIGNATURE_SIZE,
)
from app.core.flat.assertion import ASSERTION_SIZE
from app.core.layout import LayoutEntry, total_bytes
from app.core.pki import IMPLICIT_CERT_SIZE
from app.core.wire import ENTITY_ID_SIZE, MessageType
from app.models.schemas import RoleName

K_CS_SIZE = 32
STATUS_SIZE = 1
STATUS_GRANTED = 0x01
STATUS_DENIED = 0x00

C, SP, IDP = RoleName.CLIENT, RoleName.SP, RoleName.IDP

KEY_REQUEST_PLAINTEXT = ENTITY_ID_SIZE + NONCE_SIZE
CLIENT_KEY_PLAINTEXT = K_CS_SIZE + NONCE_SIZE
ASSERTION_REQUEST_PLAINTEXT = NONCE_SIZE + ENTITY_ID_SIZE
ASSERTION_PLAINTEXT = ASSERTION_SIZE + NONCE_SIZE
SERVICE_REQUEST_PLAINTEXT = ASSERTION_SIZE + NONCE_SIZE
SERVICE_PLAINTEXT = STATUS_SIZE + NONCE_SIZE
SP_KEY_PLAINTEXT = K_CS_SIZE + ENTITY_ID_SIZE
SP_KEY_CIPHERTEXT = ECIES_OVERHEAD + SP_KEY_PLAINTEXT

CERT_CHALLENGE_SIZE = IMPLICIT_CERT_SIZE + NONCE_SIZE
CERT_RESPONSE_SIZE = IMPLICIT_CERT_SIZE + NONCE_SIZE + SIGNATURE_SIZE
SP_KEY_SIZE = SP_KEY_CIPHERTEXT + SIGNATURE_SIZE
KEY_ACK_SIZE = NONCE_SIZE + SIGNATURE_SIZE

FLAT_LAYOUT: List[LayoutEntry] = [
    LayoutEntry(MessageType.KEY_REQUEST, C, IDP, PROTECT_OVERHEAD + KEY_REQUEST_PLAINTEXT,
                "protect(K_CI, sp_id | n_C)"),
    LayoutEntry(MessageType.CERTIFICATE_CHALLENGE, IDP, SP, CERT_CHALLENGE_SIZE,
                "Cert_IdP | n_IdP"),
    LayoutEntry(MessageType.CERTIFICATE_RESPONSE, SP, IDP, CERT_RESPONSE_SIZE,
                "Cert_SP | n_SP | sig_SP(n_IdP | n_SP | Cert_SP)"),
    LayoutEntry(MessageType.SP_KEY, IDP, SP, SP_KEY_SIZE,
                "ecies(Q_SP, K_CS | client_id) | sig_IdP(ct | n_SP)"),
    LayoutEntry(MessageType.KEY_ACKNOWLEDGMENT, SP, IDP, KEY_ACK_SIZE,
                "ack | sig_SP(ack | n_IdP)"),
    LayoutEntry(MessageType.CLIENT_KEY, IDP, C, PROTECT_OVERHEAD + CLIENT_KEY_PLAINTEXT,
                "protect(K_CI, K_CS | n_C)"),
    LayoutEntry(MessageType.ASSERTION_REQUEST, C, IDP,
                PROTECT_OVERHEAD + ASSERTION_REQUEST_PLAINTEXT,
                "protect(K_CI, n_C2 | sp_id)"),
    LayoutEntry(MessageType.ASSERTION, IDP, C, PROTECT_OVERHEAD + ASSERTION_PLAINTEXT,
                "protect(K_CI, assertion | n_C2)"),
    LayoutEntry(MessageType.SERVICE_REQUEST, C, SP, PROTECT_OVERHEAD + SERVICE_REQUEST_PLAINTEXT,
                "protect(K_CS, assertion | n_C3)"),
    LayoutEntry(MessageType.SERVICE, SP, C, PROTECT_OVERHEAD + SERVICE_PLAINTEXT,
                "protect(K_CS, status | n_C3)"),
]

DERIVED_CLIENT_BYTES = total_bytes(FLAT_LAYOUT, C)
