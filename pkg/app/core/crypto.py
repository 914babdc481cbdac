"""
Cryptographic primitives shared by FLAT and the baseline.

Symmetric side: AES-128-CTR + HMAC-SHA256 (encrypt-then-MAC), HKDF-SHA256.
Asymmetric side: ECDSA and ECIES over a 256-bit prime-order short-Weierstrass
curve (P-256 by default) with 33-byte compressed points and 32-byte scalars.

Every randomized operation takes a RandomSource so simulated runs can be
replayed bit for bit. Operations report themselves to the active RoleMeter.
"""

import hashlib
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NewType, Optional, Tuple, Union

from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives import hmac as crypto_hmac
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from cryptography.hazmat.primitives.constant_time import bytes_eq
from cryptography.hazmat.primitives.kdf.hkdf import HKDF
from ecdsa import BadSignatureError, NIST256p, SECP256k1, SigningKey, VerifyingKey
from ecdsa.ecdsa import RSZeroError
from ecdsa.ellipticcurve import INFINITY, PointJacobi
from ecdsa.errors import MalformedPointError
from ecdsa.numbertheory import SquareRootError, inverse_mod, square_root_mod_prime
from ecdsa.rfc6979 import generate_k
from ecdsa.util import sigdecode_string, sigencode_string

from app.config.settings import settings
from app.core.exceptions import (
    AuthenticationError,
    OversizePlaintextError,
    PointDecodeError,
    SignatureFormatError,
)
from app.core.metering import count
from app.core.wire import entity_bytes
from app.utils.rng import RandomSource, system_random

CURVES = {"NIST256p": NIST256p, "SECP256k1": SECP256k1}
CURVE = CURVES[settings.curve]
GENERATOR = CURVE.generator
ORDER = CURVE.order
FIELD_PRIME = CURVE.curve.p()

SCALAR_SIZE = 32
POINT_SIZE = 33
SIGNATURE_SIZE = 65
NONCE_SIZE = 16
KEY_SIZE = 16
IV_SIZE = 16
TAG_SIZE = 16
ECIES_TAG_SIZE = 32
ECIES_OVERHEAD = POINT_SIZE + ECIES_TAG_SIZE
PROTECT_OVERHEAD = IV_SIZE + TAG_SIZE
MAX_PROTECTED_PLAINTEXT = 248
KDF_LABEL = b"FLAT-KDF-v1"

_ZERO_IV = bytes(IV_SIZE)

Scalar = int
CurvePoint = PointJacobi
Nonce = NewType("Nonce", bytes)


# =============================================================================
# Types
# =============================================================================

@dataclass(frozen=True)
class SymmetricKey:
    """32 bytes of key material: first half AES-128, second half HMAC."""
    enc_key: bytes = field(repr=False)
    mac_key: bytes = field(repr=False)

    def __post_init__(self) -> None:
        if len(self.enc_key) != KEY_SIZE or len(self.mac_key) != KEY_SIZE:
            raise ValueError("symmetric key halves must be 16 bytes each")

    @classmethod
    def from_bytes(cls, material: bytes) -> "SymmetricKey":
        if len(material) != 2 * KEY_SIZE:
            raise ValueError("symmetric key material must be 32 bytes")
        return cls(enc_key=bytes(material[:KEY_SIZE]), mac_key=bytes(material[KEY_SIZE:]))

    def to_bytes(self) -> bytes:
        return self.enc_key + self.mac_key


@dataclass(frozen=True)
class Signature:
    """ECDSA signature serialized as r(32) | s(32) | format(1).

    The format byte carries the parity of R.y in bit 0 and an x-overflow flag
    (R.x >= n) in bit 1; the remaining bits are zero.
    """
    r: int
    s: int
    v: int

    def to_bytes(self) -> bytes:
        return (
            self.r.to_bytes(SCALAR_SIZE, "big")
            + self.s.to_bytes(SCALAR_SIZE, "big")
            + bytes([self.v])
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "Signature":
        if len(data) != SIGNATURE_SIZE:
            raise SignatureFormatError(f"signature must be {SIGNATURE_SIZE} bytes, got {len(data)}")
        r = int.from_bytes(data[:SCALAR_SIZE], "big")
        s = int.from_bytes(data[SCALAR_SIZE : 2 * SCALAR_SIZE], "big")
        v = data[-1]
        if not (1 <= r < ORDER and 1 <= s < ORDER) or v > 3:
            raise SignatureFormatError("signature component out of range")
        return cls(r=r, s=s, v=v)


@dataclass(frozen=True)
class EciesCiphertext:
    """R(33, compressed) | EM | D(32)."""
    r: bytes
    em: bytes
    d: bytes

    def to_bytes(self) -> bytes:
        return self.r + self.em + self.d

    @classmethod
    def from_bytes(cls, data: bytes) -> "EciesCiphertext":
        if len(data) < ECIES_OVERHEAD:
            raise AuthenticationError("ECIES ciphertext shorter than its fixed overhead")
        return cls(
            r=bytes(data[:POINT_SIZE]),
            em=bytes(data[POINT_SIZE:-ECIES_TAG_SIZE]),
            d=bytes(data[-ECIES_TAG_SIZE:]),
        )


@dataclass(frozen=True)
class ProtectedPayload:
    """iv(16) | ct | tag(16)."""
    iv: bytes
    ct: bytes
    tag: bytes

    def to_bytes(self) -> bytes:
        return self.iv + self.ct + self.tag

    @classmethod
    def from_bytes(cls, data: bytes) -> "ProtectedPayload":
        if len(data) < PROTECT_OVERHEAD:
            raise AuthenticationError("protected payload shorter than iv + tag")
        return cls(
            iv=bytes(data[:IV_SIZE]),
            ct=bytes(data[IV_SIZE:-TAG_SIZE]),
            tag=bytes(data[-TAG_SIZE:]),
        )


# =============================================================================
# Points and scalars
# =============================================================================

def is_identity(point: Optional[CurvePoint]) -> bool:
    return point is None or point == INFINITY


def encode_point(point: CurvePoint) -> bytes:
    """SEC1 compressed encoding: 0x02/0x03 parity byte + 32-byte x."""
    if is_identity(point):
        raise PointDecodeError("the identity has no compressed encoding")
    x, y = point.x(), point.y()
    return bytes([2 | (y & 1)]) + x.to_bytes(SCALAR_SIZE, "big")


def decode_point(data: bytes) -> CurvePoint:
    if len(data) != POINT_SIZE or data[0] not in (2, 3):
        raise PointDecodeError("expected a 33-byte compressed point")
    x = int.from_bytes(data[1:], "big")
    if x >= FIELD_PRIME:
        raise PointDecodeError("x-coordinate not reduced")
    curve = CURVE.curve
    alpha = (pow(x, 3, FIELD_PRIME) + curve.a() * x + curve.b()) % FIELD_PRIME
    try:
        beta = square_root_mod_prime(alpha, FIELD_PRIME)
    except SquareRootError:
        raise PointDecodeError("x-coordinate is not on the curve") from None
    y = beta if (beta & 1) == (data[0] & 1) else FIELD_PRIME - beta
    return PointJacobi(curve, x, y, 1, ORDER)


def decode_x_only(x_bytes: bytes) -> CurvePoint:
    """Point with the given x-coordinate and even y."""
    return decode_point(b"\x02" + x_bytes)


def is_on_curve(point: CurvePoint) -> bool:
    if is_identity(point):
        return False
    return CURVE.curve.contains_point(point.x(), point.y())


def scalar_bytes(value: Scalar) -> bytes:
    return value.to_bytes(SCALAR_SIZE, "big")


def parse_scalar(data: bytes) -> Scalar:
    value = int.from_bytes(data, "big")
    if len(data) != SCALAR_SIZE or not 1 <= value < ORDER:
        raise ValueError("invalid scalar")
    return value


def hash_to_scalar(data: bytes) -> Scalar:
    return int.from_bytes(hashlib.sha256(data).digest(), "big") % ORDER


def public_key(sk: Scalar) -> CurvePoint:
    return GENERATOR * sk


def gen_keypair(rng: RandomSource = system_random) -> Tuple[Scalar, CurvePoint]:
    sk = rng.scalar(ORDER)
    return sk, public_key(sk)


def gen_keypair_even_y(rng: RandomSource = system_random) -> Tuple[Scalar, CurvePoint]:
    """Keypair whose public point has even y (x-only public keys)."""
    sk, pk = gen_keypair(rng)
    if pk.y() & 1:
        sk = ORDER - sk
        pk = public_key(sk)
    return sk, pk


# =============================================================================
# ECDSA
# =============================================================================

def _format_byte(point: CurvePoint) -> int:
    x = point.x()
    return (point.y() & 1) | (2 if x >= ORDER else 0)


@lru_cache(maxsize=256)
def _signing_key(sk: Scalar) -> SigningKey:
    return SigningKey.from_secret_exponent(sk, curve=CURVE, hashfunc=hashlib.sha256)


def _sign_with_k(sk: Scalar, digest: bytes, k: Scalar) -> Optional[Signature]:
    try:
        rs = _signing_key(sk).sign_digest(digest, k=k, sigencode=sigencode_string)
    except RSZeroError:
        return None
    return Signature(
        r=int.from_bytes(rs[:SCALAR_SIZE], "big"),
        s=int.from_bytes(rs[SCALAR_SIZE:], "big"),
        v=_format_byte(GENERATOR * k),
    )


def ecdsa_sign(sk: Scalar, msg: bytes, rng: RandomSource = system_random) -> Signature:
    count("ecdsa_sign")
    digest = hashlib.sha256(msg).digest()
    while True:
        signature = _sign_with_k(sk, digest, rng.scalar(ORDER))
        if signature is not None:
            return signature


def ecdsa_sign_deterministic(sk: Scalar, msg: bytes) -> Signature:
    """ECDSA with the RFC 6979 nonce; used for known-answer checks."""
    count("ecdsa_sign")
    digest = hashlib.sha256(msg).digest()
    retry = 0
    while True:
        k = generate_k(ORDER, sk, hashlib.sha256, digest, retry_gen=retry)
        signature = _sign_with_k(sk, digest, k)
        if signature is not None:
            return signature
        retry += 1


def _nonce_point(sig: Signature) -> CurvePoint:
    """R as named by (r, v): x = r (+ n on overflow), y parity from bit 0."""
    x = sig.r + (ORDER if sig.v & 2 else 0)
    if x >= FIELD_PRIME:
        raise PointDecodeError("x-overflow beyond the field")
    return decode_point(bytes([0x02 | (sig.v & 1)]) + scalar_bytes(x))


def ecdsa_verify(
    pk: Optional[CurvePoint], msg: bytes, sig: Union[Signature, bytes]
) -> bool:
    """
    Library ECDSA verification of (r, s), then the format byte: the key
    recovered from the R it names, r^-1 * (s*R - e*G), must be pk.
    """
    count("ecdsa_verify")
    try:
        if isinstance(sig, (bytes, bytearray)):
            sig = Signature.from_bytes(bytes(sig))
        if not is_on_curve(pk):
            return False
        digest = hashlib.sha256(msg).digest()
        verifying_key = VerifyingKey.from_public_point(
            pk, curve=CURVE, hashfunc=hashlib.sha256, validate_point=False
        )
        verifying_key.verify_digest(sig.to_bytes()[:-1], digest, sigdecode=sigdecode_string)
        e = int.from_bytes(digest, "big") % ORDER
        point = _nonce_point(sig)
        recovered = (point * sig.s + GENERATOR * (ORDER - e)) * inverse_mod(sig.r, ORDER)
        return recovered == pk
    except (
        BadSignatureError,
        MalformedPointError,
        PointDecodeError,
        SignatureFormatError,
        ValueError,
        ArithmeticError,
    ):
        return False


# =============================================================================
# Symmetric building blocks
# =============================================================================

def kdf(z: bytes) -> SymmetricKey:
    """HKDF-SHA256 extract-then-expand of a shared secret into 32 bytes."""
    hkdf = HKDF(algorithm=hashes.SHA256(), length=2 * KEY_SIZE, salt=None, info=KDF_LABEL)
    material = hkdf.derive(z)
    return SymmetricKey.from_bytes(material)


def _aes_ctr(key: bytes, iv: bytes, data: bytes) -> bytes:
    cipher = Cipher(algorithms.AES(key), modes.CTR(iv)).encryptor()
    return cipher.update(data) + cipher.finalize()


def _hmac(key: bytes, *parts: bytes) -> bytes:
    mac = crypto_hmac.HMAC(key, hashes.SHA256())
    for part in parts:
        mac.update(part)
    return mac.finalize()


def direction_label(src: int, dst: int) -> bytes:
    """Channel direction bound into every symmetric tag."""
    return entity_bytes(src) + entity_bytes(dst)


def _channel_tag(key: SymmetricKey, direction: bytes, seq: int, iv: bytes, ct: bytes) -> bytes:
    header = bytes([len(direction)]) + direction + bytes([seq & 0xFF])
    return _hmac(key.mac_key, header, iv, ct)[:TAG_SIZE]


def sym_protect(
    key: SymmetricKey,
    pt: bytes,
    seq: int,
    direction: bytes,
    rng: RandomSource = system_random,
) -> ProtectedPayload:
    count("sym_ops")
    if len(pt) > MAX_PROTECTED_PLAINTEXT:
        raise OversizePlaintextError(f"{len(pt)} bytes exceeds {MAX_PROTECTED_PLAINTEXT}")
    iv = rng.token_bytes(IV_SIZE)
    ct = _aes_ctr(key.enc_key, iv, pt)
    return ProtectedPayload(iv=iv, ct=ct, tag=_channel_tag(key, direction, seq, iv, ct))


def sym_unprotect(
    key: SymmetricKey,
    payload: Union[ProtectedPayload, bytes],
    seq: int,
    direction: bytes,
) -> bytes:
    count("sym_ops")
    if isinstance(payload, (bytes, bytearray)):
        payload = ProtectedPayload.from_bytes(bytes(payload))
    expected = _channel_tag(key, direction, seq, payload.iv, payload.ct)
    if not bytes_eq(expected, payload.tag):
        raise AuthenticationError("channel tag mismatch")
    return _aes_ctr(key.enc_key, payload.iv, payload.ct)


def gen_nonce(rng: RandomSource = system_random) -> Nonce:
    return Nonce(rng.token_bytes(NONCE_SIZE))


# =============================================================================
# ECIES
# =============================================================================

def _shared_key(point: CurvePoint) -> SymmetricKey:
    return kdf(point.x().to_bytes(SCALAR_SIZE, "big"))


def ecies_encrypt(pk: CurvePoint, pt: bytes, rng: RandomSource = system_random) -> EciesCiphertext:
    count("ecies_enc")
    while True:
        k = rng.scalar(ORDER)
        shared = pk * k
        if not is_identity(shared):
            break
    key = _shared_key(shared)
    em = _aes_ctr(key.enc_key, _ZERO_IV, pt)
    return EciesCiphertext(r=encode_point(GENERATOR * k), em=em, d=_hmac(key.mac_key, em))


def ecies_decrypt(sk: Scalar, c: Union[EciesCiphertext, bytes]) -> bytes:
    """Tag-first decryption; raises AuthenticationError without releasing plaintext."""
    count("ecies_dec")
    if isinstance(c, (bytes, bytearray)):
        c = EciesCiphertext.from_bytes(bytes(c))
    shared = decode_point(c.r) * sk
    if is_identity(shared):
        raise AuthenticationError("degenerate shared point")
    key = _shared_key(shared)
    if not bytes_eq(_hmac(key.mac_key, c.em), c.d):
        raise AuthenticationError("ECIES tag mismatch")
    return _aes_ctr(key.enc_key, _ZERO_IV, c.em)
