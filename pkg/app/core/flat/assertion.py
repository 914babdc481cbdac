"""
IdP assertion: client_id(3) | sp_id(3) | n_sp(16) | expiry(8) | idp_signature(65).

The signature covers the first 30 bytes. The baseline protocol uses the same
format.
"""

import struct
from dataclasses import dataclass

from app.core.crypto import NONCE_SIZE, SIGNATURE_SIZE, CurvePoint, Scalar, ecdsa_sign, ecdsa_verify
from app.core.exceptions import AssertionFormatError
from app.core.wire import entity_bytes
from app.utils.rng import RandomSource, system_random

_BODY = struct.Struct(">3s3s16sQ")
ASSERTION_BODY_SIZE = _BODY.size
ASSERTION_SIZE = ASSERTION_BODY_SIZE + SIGNATURE_SIZE


@dataclass(frozen=True)
class Assertion:
    client_id: int
    sp_id: int
    n_sp: bytes
    expiry: int
    idp_signature: bytes

    @property
    def body(self) -> bytes:
        return assertion_body(self.client_id, self.sp_id, self.n_sp, self.expiry)

    def is_expired(self, now_s: int) -> bool:
        return now_s > self.expiry


def assertion_body(client_id: int, sp_id: int, n_sp: bytes, expiry: int) -> bytes:
    if len(n_sp) != NONCE_SIZE:
        raise AssertionFormatError("n_sp must be 16 bytes")
    return _BODY.pack(entity_bytes(client_id), entity_bytes(sp_id), n_sp, expiry)


def serialize_assertion(a: Assertion) -> bytes:
    if len(a.idp_signature) != SIGNATURE_SIZE:
        raise AssertionFormatError("idp signature must be 65 bytes")
    return a.body + a.idp_signature


def parse_assertion(b: bytes) -> Assertion:
    if len(b) != ASSERTION_SIZE:
        raise AssertionFormatError(f"assertion must be {ASSERTION_SIZE} bytes, got {len(b)}")
    client, sp, n_sp, expiry = _BODY.unpack_from(b, 0)
    return Assertion(
        client_id=int.from_bytes(client, "big"),
        sp_id=int.from_bytes(sp, "big"),
        n_sp=n_sp,
        expiry=expiry,
        idp_signature=bytes(b[ASSERTION_BODY_SIZE:]),
    )


def issue_assertion(
    sk: Scalar,
    client_id: int,
    sp_id: int,
    n_sp: bytes,
    expiry: int,
    rng: RandomSource = system_random,
) -> Assertion:
    body = assertion_body(client_id, sp_id, n_sp, expiry)
    signature = ecdsa_sign(sk, body, rng)
    return Assertion(client_id, sp_id, n_sp, expiry, signature.to_bytes())


def verify_assertion(q_idp: CurvePoint, a: Assertion) -> bool:
    return ecdsa_verify(q_idp, a.body, a.idp_signature)
