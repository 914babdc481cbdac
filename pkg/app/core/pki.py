"""
Certificate authority and the two credential formats.

ImplicitCertificate (ECQV, 70 bytes) is what FLAT's IdP and SP exchange.
ExplicitCertificate (identity + x-only public key + CA signature, 134 bytes)
is what every party presents in the baseline protocol.
"""

import logging
import struct
import threading
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional, Set, Tuple, Union

from app.core.crypto import (
    GENERATOR,
    ORDER,
    POINT_SIZE,
    SCALAR_SIZE,
    SIGNATURE_SIZE,
    CurvePoint,
    Scalar,
    decode_point,
    decode_x_only,
    ecdsa_sign,
    ecdsa_verify,
    encode_point,
    gen_keypair,
    hash_to_scalar,
    is_identity,
    is_on_curve,
)
from app.core.exceptions import (
    CertificateError,
    CertificateFormatError,
    CertificateValidationError,
    CryptoError,
    PointDecodeError,
    SerialReuseError,
)
from app.core.metering import count
from app.core.wire import MAX_ENTITY_ID
from app.utils.rng import RandomSource, system_random

logger = logging.getLogger(__name__)

IDENTITY_SIZE = 37
IMPLICIT_CERT_SIZE = IDENTITY_SIZE + POINT_SIZE
EXPLICIT_CERT_SIZE = IDENTITY_SIZE + SCALAR_SIZE + SIGNATURE_SIZE

_IDENTITY = struct.Struct(">3s3sBIQQ10s")
_RESERVED = bytes(10)


class EntityRole(IntEnum):
    CLIENT = 1
    SP = 2
    IDP = 3
    CA = 4


# =============================================================================
# Identity
# =============================================================================

@dataclass(frozen=True)
class IdentityInfo:
    """entity(3) | domain(3) | role(1) | serial(4) | not_before(8) | not_after(8) | reserved(10)."""
    entity_id: int
    domain_id: int
    role: EntityRole
    serial: int
    not_before: int
    not_after: int

    def __post_init__(self) -> None:
        if not (0 <= self.entity_id <= MAX_ENTITY_ID and 0 <= self.domain_id <= MAX_ENTITY_ID):
            raise CertificateFormatError("entity/domain id out of 24-bit range")
        if not 0 <= self.serial <= 0xFFFFFFFF:
            raise CertificateFormatError("serial out of range")
        if not 0 <= self.not_before < self.not_after:
            raise CertificateFormatError("not_before must precede not_after")

    def to_bytes(self) -> bytes:
        return _IDENTITY.pack(
            self.entity_id.to_bytes(3, "big"),
            self.domain_id.to_bytes(3, "big"),
            int(self.role),
            self.serial,
            self.not_before,
            self.not_after,
            _RESERVED,
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "IdentityInfo":
        if len(data) != IDENTITY_SIZE:
            raise CertificateFormatError(f"identity must be {IDENTITY_SIZE} bytes")
        entity, domain, role, serial, not_before, not_after, reserved = _IDENTITY.unpack(data)
        if reserved != _RESERVED:
            raise CertificateFormatError("reserved identity bytes must be zero")
        try:
            role = EntityRole(role)
        except ValueError:
            raise CertificateFormatError(f"unknown role code {role}") from None
        return cls(
            entity_id=int.from_bytes(entity, "big"),
            domain_id=int.from_bytes(domain, "big"),
            role=role,
            serial=serial,
            not_before=not_before,
            not_after=not_after,
        )

    def valid_at(self, now: int) -> bool:
        return self.not_before <= now <= self.not_after


# =============================================================================
# Certificates
# =============================================================================

@dataclass(frozen=True)
class ImplicitCertificate:
    """Identity plus the compressed public key reconstruction point P_U."""
    identity: IdentityInfo
    reconstruction_point: bytes

    def to_bytes(self) -> bytes:
        return self.identity.to_bytes() + self.reconstruction_point

    @classmethod
    def from_bytes(cls, data: bytes) -> "ImplicitCertificate":
        if len(data) != IMPLICIT_CERT_SIZE:
            raise CertificateFormatError(f"implicit certificate must be {IMPLICIT_CERT_SIZE} bytes")
        return cls(
            identity=IdentityInfo.from_bytes(data[:IDENTITY_SIZE]),
            reconstruction_point=bytes(data[IDENTITY_SIZE:]),
        )


@dataclass(frozen=True)
class ExplicitCertificate:
    identity: IdentityInfo
    public_key_x: bytes
    ca_signature: bytes

    @property
    def signed_bytes(self) -> bytes:
        return self.identity.to_bytes() + self.public_key_x

    def to_bytes(self) -> bytes:
        return self.signed_bytes + self.ca_signature

    def public_key(self) -> CurvePoint:
        return decode_x_only(self.public_key_x)

    @classmethod
    def from_bytes(cls, data: bytes) -> "ExplicitCertificate":
        if len(data) != EXPLICIT_CERT_SIZE:
            raise CertificateFormatError(f"explicit certificate must be {EXPLICIT_CERT_SIZE} bytes")
        key_end = IDENTITY_SIZE + SCALAR_SIZE
        return cls(
            identity=IdentityInfo.from_bytes(data[:IDENTITY_SIZE]),
            public_key_x=bytes(data[IDENTITY_SIZE:key_end]),
            ca_signature=bytes(data[key_end:]),
        )


@dataclass(frozen=True)
class CertificateRequest:
    """The pair (U, R_U); the requester keeps k_U."""
    identity: IdentityInfo
    r_u: CurvePoint


class CertificateAuthority:
    """Holds d_CA and the set of serials already issued. Issuance is thread-safe."""

    def __init__(self, sk: Scalar, domain_id: int = 0):
        self.sk = sk
        self.pk = GENERATOR * sk
        self.domain_id = domain_id
        self._issued_serials: Set[int] = set()
        self._lock = threading.Lock()

    @classmethod
    def generate(
        cls, rng: RandomSource = system_random, domain_id: int = 0
    ) -> "CertificateAuthority":
        sk, _ = gen_keypair(rng)
        return cls(sk, domain_id)

    @property
    def issued_serials(self) -> Set[int]:
        return set(self._issued_serials)

    def reserve_serial(self, serial: int) -> None:
        with self._lock:
            if serial in self._issued_serials:
                raise SerialReuseError(f"serial {serial} already issued")
            self._issued_serials.add(serial)


# =============================================================================
# ECQV
# =============================================================================

def ecqv_request(
    identity: IdentityInfo, rng: RandomSource = system_random
) -> Tuple[CertificateRequest, Scalar]:
    k_u, r_u = gen_keypair(rng)
    return CertificateRequest(identity=identity, r_u=r_u), k_u


def ecqv_generate(
    ca: CertificateAuthority,
    request: CertificateRequest,
    rng: RandomSource = system_random,
    k_override: Optional[int] = None,
) -> Tuple[ImplicitCertificate, Scalar]:
    """P_U = R_U + k*G, e = H(cert) mod n, r = e*k + d_CA.

    k_override fixes the CA-side ephemeral (0 included) for algebraic tests.
    """
    if not is_on_curve(request.r_u):
        raise CertificateValidationError("request point is not a valid curve point")

    while True:
        k = rng.scalar(ORDER) if k_override is None else k_override % ORDER
        p_u = request.r_u if k == 0 else request.r_u + GENERATOR * k
        if not is_identity(p_u):
            break
        if k_override is not None:
            raise CertificateValidationError("reconstruction point is the identity")

    ca.reserve_serial(request.identity.serial)
    cert = ImplicitCertificate(identity=request.identity, reconstruction_point=encode_point(p_u))
    e = hash_to_scalar(cert.to_bytes())
    r = (e * k + ca.sk) % ORDER
    logger.debug(
        "ecqv issued entity=%06x serial=%d", request.identity.entity_id, request.identity.serial
    )
    return cert, r


def ecqv_extract(q_ca: CurvePoint, cert: ImplicitCertificate) -> CurvePoint:
    """Q_U = e*P_U + Q_CA."""
    count("ecqv_extract")
    p_u = decode_point(cert.reconstruction_point)
    q_u = p_u * hash_to_scalar(cert.to_bytes()) + q_ca
    if is_identity(q_u):
        raise CertificateValidationError("extracted public key is the identity")
    return q_u


def ecqv_receive(
    cert: ImplicitCertificate, r: Scalar, k_u: Scalar, q_ca: CurvePoint
) -> Tuple[Scalar, CurvePoint]:
    """d_U = r + e*k_U; accepted only if d_U*G equals the extracted Q_U."""
    d_u = (r + hash_to_scalar(cert.to_bytes()) * k_u) % ORDER
    try:
        q_u = ecqv_extract(q_ca, cert)
    except PointDecodeError as exc:
        raise CertificateValidationError(f"reconstruction point invalid: {exc}") from None
    if d_u == 0 or GENERATOR * d_u != q_u:
        raise CertificateValidationError("reconstructed key does not match certificate")
    return d_u, q_u


# =============================================================================
# Explicit certificates
# =============================================================================

def explicit_issue(
    ca: CertificateAuthority,
    identity: IdentityInfo,
    pk: CurvePoint,
    rng: RandomSource = system_random,
) -> ExplicitCertificate:
    if not is_on_curve(pk) or pk.y() & 1:
        raise CertificateFormatError("explicit certificates carry even-y public keys only")
    ca.reserve_serial(identity.serial)
    public_key_x = pk.x().to_bytes(SCALAR_SIZE, "big")
    signature = ecdsa_sign(ca.sk, identity.to_bytes() + public_key_x, rng)
    return ExplicitCertificate(
        identity=identity, public_key_x=public_key_x, ca_signature=signature.to_bytes()
    )


def explicit_verify(
    q_ca: CurvePoint, cert: Union[ExplicitCertificate, bytes], now: int
) -> bool:
    """CA signature valid and `now` (unix seconds) inside the validity window."""
    try:
        if isinstance(cert, (bytes, bytearray)):
            cert = ExplicitCertificate.from_bytes(bytes(cert))
        if not cert.identity.valid_at(now):
            return False
        cert.public_key()
    except (CertificateError, CryptoError):
        return False
    return ecdsa_verify(q_ca, cert.signed_bytes, cert.ca_signature)
