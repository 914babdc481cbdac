"""
Baseline byte layout. Same header, curve, assertion and channel construction
as FLAT; every party authenticates with a 134-byte explicit certificate and
the client does its own public-key work.

Certificates not carried in a message travel as federation metadata: the
IdP knows registered clients' and SPs' certificates, the SP knows the IdP's.
"""

from typing import List

from app.core.crypto import ECIES_OVERHEAD, NONCE_SIZE, PROTECT_OVERHEAD, SIGNATURE_SIZE
from app.core.flat.assertion import ASSERTION_SIZE
from app.core.flat.layout import K_CS_SIZE, SP_KEY_SIZE, STATUS_SIZE
from app.core.layout import LayoutEntry, total_bytes
from app.core.pki import EXPLICIT_CERT_SIZE
from app.core.wire import ENTITY_ID_SIZE, BaselineMessageType
from app.models.schemas import RoleName

CREDENTIAL_SIZE = 32

C, SP, IDP = RoleName.CLIENT, RoleName.SP, RoleName.IDP

SERVICE_INIT_SIZE = EXPLICIT_CERT_SIZE + NONCE_SIZE
REDIRECT_SIZE = EXPLICIT_CERT_SIZE + ENTITY_ID_SIZE + NONCE_SIZE
ASSERTION_REQUEST_SIZE = ENTITY_ID_SIZE + NONCE_SIZE + NONCE_SIZE
CHALLENGE_SIZE = EXPLICIT_CERT_SIZE + NONCE_SIZE + SIGNATURE_SIZE
CREDENTIALS_PLAINTEXT = CREDENTIAL_SIZE + NONCE_SIZE
CREDENTIALS_CIPHERTEXT = ECIES_OVERHEAD + CREDENTIALS_PLAINTEXT
CREDENTIALS_SIZE = CREDENTIALS_CIPHERTEXT + SIGNATURE_SIZE
SESSION_KEY_PLAINTEXT = K_CS_SIZE + NONCE_SIZE
ASSERTION_MESSAGE_SIZE = ASSERTION_SIZE + ECIES_OVERHEAD + SESSION_KEY_PLAINTEXT
SERVICE_REQUEST_PLAINTEXT = ASSERTION_SIZE + NONCE_SIZE
SERVICE_REQUEST_PROTECTED = PROTECT_OVERHEAD + SERVICE_REQUEST_PLAINTEXT
SERVICE_REQUEST_SIZE = SERVICE_REQUEST_PROTECTED + SIGNATURE_SIZE
SERVICE_PLAINTEXT = STATUS_SIZE + NONCE_SIZE
SERVICE_PROTECTED = PROTECT_OVERHEAD + SERVICE_PLAINTEXT
SERVICE_SIZE = SERVICE_PROTECTED + SIGNATURE_SIZE

BASELINE_LAYOUT: List[LayoutEntry] = [
    LayoutEntry(BaselineMessageType.SERVICE_INIT, C, SP, SERVICE_INIT_SIZE,
                "Cert_C | n_C1"),
    LayoutEntry(BaselineMessageType.REDIRECT, SP, C, REDIRECT_SIZE,
                "Cert_SP | idp_id | n_SP"),
    LayoutEntry(BaselineMessageType.ASSERTION_REQUEST, C, IDP, ASSERTION_REQUEST_SIZE,
                "sp_id | n_SP | n_C2"),
    LayoutEntry(BaselineMessageType.CHALLENGE, IDP, C, CHALLENGE_SIZE,
                "Cert_IdP | n_IdP | sig_IdP(n_IdP | n_C2 | client_id)"),
    LayoutEntry(BaselineMessageType.CREDENTIALS, C, IDP, CREDENTIALS_SIZE,
                "ecies(Q_IdP, credential | n_IdP) | sig_C(ct | n_IdP)"),
    LayoutEntry(BaselineMessageType.SP_KEY, IDP, SP, SP_KEY_SIZE,
                "ecies(Q_SP, K_CS | client_id) | sig_IdP(ct | n_SP)"),
    LayoutEntry(BaselineMessageType.ASSERTION, IDP, C, ASSERTION_MESSAGE_SIZE,
                "assertion | ecies(Q_C, K_CS | n_C2)"),
    LayoutEntry(BaselineMessageType.SERVICE_REQUEST, C, SP, SERVICE_REQUEST_SIZE,
                "protect(K_CS, assertion | n_SP) | sig_C(protected)"),
    LayoutEntry(BaselineMessageType.SERVICE, SP, C, SERVICE_SIZE,
                "protect(K_CS, status | n_C1) | sig_SP(protected)"),
]

DERIVED_CLIENT_BYTES = total_bytes(BASELINE_LAYOUT, C)
