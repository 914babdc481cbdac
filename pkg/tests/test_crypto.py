"""
Primitive tests: ECDSA known answers, ECIES and channel protection integrity,
point encoding, per-role op counting.
"""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.core import crypto
from app.core.crypto import (
    CURVE,
    ECIES_OVERHEAD,
    ORDER,
    GENERATOR,
    MAX_PROTECTED_PLAINTEXT,
    NONCE_SIZE,
    PROTECT_OVERHEAD,
    SIGNATURE_SIZE,
    EciesCiphertext,
    Signature,
    SymmetricKey,
    decode_point,
    direction_label,
    ecdsa_sign,
    ecdsa_sign_deterministic,
    ecdsa_verify,
    ecies_decrypt,
    ecies_encrypt,
    encode_point,
    gen_keypair,
    gen_keypair_even_y,
    gen_nonce,
    kdf,
    sym_protect,
    sym_unprotect,
)
from app.core.exceptions import (
    AuthenticationError,
    OversizePlaintextError,
    PointDecodeError,
    SignatureFormatError,
)
from app.core.metering import RoleMeter
from app.utils.rng import SeededRandomSource

# ECDSA P-256 / SHA-256 known answers with RFC 6979 nonces
P256_SK = int("C9AFA9D845BA75166B5C215767B1D6934E50C3DB36E89B127B8A622B120F6721", 16)
P256_VECTORS = [
    (
        b"sample",
        "EFD48B2AACB6A8FD1140DD9CD45E81D69D2C877B56AAF991C34D0EA84EAF3716",
        "F7CB1C942D657C41D436C7A1B6E29F65F3E900DBB9AFF4064DC4AB2F843ACDA8",
    ),
    (
        b"test",
        "F1ABB023518351CD71D881567B1EA663ED3EFCF6C5132B354F28D3B0B7D38367",
        "019F4113742A2B14BD25926B49C649155F267E60D3814B4C0CC84250E46F0083",
    ),
]

DIRECTION = direction_label(0x001000, 0x000100)

_lengths = SeededRandomSource("ecies-lengths")
ECIES_LENGTHS = [0, 280] + sorted(_lengths.below(281) for _ in range(98))


@pytest.fixture
def key() -> SymmetricKey:
    return kdf(b"shared secret")


# =============================================================================
# ECDSA
# =============================================================================

class TestEcdsa:
    @pytest.mark.skipif(CURVE.name != "NIST256p", reason="vectors are for P-256")
    @pytest.mark.parametrize("msg,r,s", P256_VECTORS)
    def test_rfc6979_known_answer(self, msg, r, s):
        signature = ecdsa_sign_deterministic(P256_SK, msg)
        assert signature.r == int(r, 16)
        assert signature.s == int(s, 16)
        assert ecdsa_verify(GENERATOR * P256_SK, msg, signature)

    def test_signature_is_65_bytes(self, rng):
        sk, _ = gen_keypair(rng)
        raw = ecdsa_sign(sk, b"m", rng).to_bytes()
        assert len(raw) == SIGNATURE_SIZE
        assert raw[-1] in (0, 1, 2, 3)
        assert Signature.from_bytes(raw).to_bytes() == raw

    def test_cross_verification(self, rng):
        sk_a, pk_a = gen_keypair(rng)
        _, pk_b = gen_keypair(rng)
        signature = ecdsa_sign(sk_a, b"message", rng)
        assert ecdsa_verify(pk_a, b"message", signature)
        assert not ecdsa_verify(pk_b, b"message", signature)
        assert not ecdsa_verify(pk_a, b"messagf", signature)

    def test_every_signature_bit_flip_rejected(self, rng):
        sk, pk = gen_keypair(rng)
        msg = bytes(range(32))
        raw = ecdsa_sign(sk, msg, rng).to_bytes()
        assert ecdsa_verify(pk, msg, raw)
        for bit in range(8 * SIGNATURE_SIZE):
            mutated = bytearray(raw)
            mutated[bit // 8] ^= 1 << (bit % 8)
            assert not ecdsa_verify(pk, msg, bytes(mutated)), bit

    def test_every_message_bit_flip_rejected(self, rng):
        sk, pk = gen_keypair(rng)
        msg = bytes(range(32))
        signature = ecdsa_sign(sk, msg, rng)
        for bit in range(8 * len(msg)):
            mutated = bytearray(msg)
            mutated[bit // 8] ^= 1 << (bit % 8)
            assert not ecdsa_verify(pk, bytes(mutated), signature), bit

    def test_format_byte_is_bound(self, rng):
        sk, pk = gen_keypair(rng)
        signature = ecdsa_sign(sk, b"parity", rng)
        flipped = Signature(r=signature.r, s=signature.s, v=signature.v ^ 1)
        assert not ecdsa_verify(pk, b"parity", flipped)

    def test_missing_key_rejected(self, rng):
        sk, _ = gen_keypair(rng)
        assert not ecdsa_verify(None, b"m", ecdsa_sign(sk, b"m", rng))

    @pytest.mark.parametrize(
        "raw", [bytes(64), bytes(65), b"\xff" * 65, bytes(32) + b"\x01" * 32 + b"\x04"]
    )
    def test_malformed_signature(self, raw):
        with pytest.raises(SignatureFormatError):
            Signature.from_bytes(raw)

    def test_seeded_signatures_repeat(self):
        sk = 12345
        a = ecdsa_sign(sk, b"m", SeededRandomSource(1))
        b = ecdsa_sign(sk, b"m", SeededRandomSource(1))
        assert a == b


# =============================================================================
# Points
# =============================================================================

class TestPoints:
    def test_compressed_round_trip(self, rng):
        _, pk = gen_keypair(rng)
        encoded = encode_point(pk)
        assert len(encoded) == 33 and encoded[0] in (2, 3)
        assert decode_point(encoded) == pk

    def test_even_y_keypair(self, rng):
        for _ in range(8):
            sk, pk = gen_keypair_even_y(rng)
            assert pk.y() % 2 == 0
            assert GENERATOR * sk == pk

    @pytest.mark.parametrize("prefix", [0x00, 0x04, 0x05])
    def test_bad_prefix(self, prefix):
        with pytest.raises(PointDecodeError):
            decode_point(bytes([prefix]) + bytes(32))

    def test_unreduced_x(self):
        with pytest.raises(PointDecodeError):
            decode_point(b"\x02" + b"\xff" * 32)


# =============================================================================
# ECIES
# =============================================================================

class TestEcies:
    def test_round_trip(self, rng):
        sk, pk = gen_keypair(rng)
        ct = ecies_encrypt(pk, b"K_CS material and id", rng)
        assert len(ct.to_bytes()) == ECIES_OVERHEAD + 20
        assert ecies_decrypt(sk, ct.to_bytes()) == b"K_CS material and id"

    @pytest.mark.parametrize("length", ECIES_LENGTHS)
    def test_round_trip_lengths(self, length):
        rng = SeededRandomSource(f"ecies-{length}")
        sk, pk = gen_keypair(rng)
        pt = rng.token_bytes(length)
        raw = ecies_encrypt(pk, pt, rng).to_bytes()
        assert len(raw) == ECIES_OVERHEAD + length
        assert ecies_decrypt(sk, raw) == pt

    def test_encryptions_differ(self, rng):
        _, pk = gen_keypair(rng)
        a = ecies_encrypt(pk, b"same plaintext", rng)
        b = ecies_encrypt(pk, b"same plaintext", rng)
        assert a.r != b.r and a.em != b.em and a.d != b.d

    def test_every_em_bit_flip_rejected(self, rng):
        sk, pk = gen_keypair(rng)
        ct = ecies_encrypt(pk, bytes(range(40)), rng)
        for bit in range(8 * len(ct.em)):
            em = bytearray(ct.em)
            em[bit // 8] ^= 1 << (bit % 8)
            with pytest.raises(AuthenticationError):
                ecies_decrypt(sk, EciesCiphertext(r=ct.r, em=bytes(em), d=ct.d))

    def test_wrong_key(self, rng):
        _, pk = gen_keypair(rng)
        other, _ = gen_keypair(rng)
        with pytest.raises(AuthenticationError):
            ecies_decrypt(other, ecies_encrypt(pk, b"secret", rng))

    def test_tag_checked_before_decryption(self, rng, monkeypatch):
        sk, pk = gen_keypair(rng)
        raw = bytearray(ecies_encrypt(pk, b"secret", rng).to_bytes())
        raw[40] ^= 0x01

        def forbidden(*_):
            raise AssertionError("plaintext released before tag check")

        monkeypatch.setattr(crypto, "_aes_ctr", forbidden)
        with pytest.raises(AuthenticationError):
            ecies_decrypt(sk, bytes(raw))

    def test_short_ciphertext(self, rng):
        sk, _ = gen_keypair(rng)
        with pytest.raises(AuthenticationError):
            ecies_decrypt(sk, bytes(ECIES_OVERHEAD - 1))


# =============================================================================
# Channel protection
# =============================================================================

class TestSymmetric:
    def test_kdf_is_deterministic(self):
        assert kdf(b"z") == kdf(b"z")
        assert kdf(b"z").to_bytes() != kdf(b"y").to_bytes()
        assert len(kdf(b"z").to_bytes()) == 32

    @settings(max_examples=50, deadline=None)
    @given(st.binary(max_size=MAX_PROTECTED_PLAINTEXT), st.integers(0, 255))
    def test_protect_unprotect(self, pt, seq):
        key = kdf(b"hypothesis")
        payload = sym_protect(key, pt, seq, DIRECTION, SeededRandomSource(seq))
        assert len(payload.to_bytes()) == len(pt) + PROTECT_OVERHEAD
        assert sym_unprotect(key, payload.to_bytes(), seq, DIRECTION) == pt

    def test_sequence_is_bound(self, key, rng):
        payload = sym_protect(key, b"hello", 3, DIRECTION, rng)
        with pytest.raises(AuthenticationError):
            sym_unprotect(key, payload, 4, DIRECTION)

    def test_direction_is_bound(self, key, rng):
        payload = sym_protect(key, b"hello", 0, DIRECTION, rng)
        reverse = direction_label(0x000100, 0x001000)
        with pytest.raises(AuthenticationError):
            sym_unprotect(key, payload, 0, reverse)

    def test_every_byte_is_covered(self, key, rng):
        raw = sym_protect(key, b"sixteen byte msg", 1, DIRECTION, rng).to_bytes()
        for offset in range(len(raw)):
            mutated = bytearray(raw)
            mutated[offset] ^= 0x80
            with pytest.raises(AuthenticationError):
                sym_unprotect(key, bytes(mutated), 1, DIRECTION)

    def test_oversize_plaintext(self, key, rng):
        with pytest.raises(OversizePlaintextError):
            sym_protect(key, bytes(MAX_PROTECTED_PLAINTEXT + 1), 0, DIRECTION, rng)

    def test_key_material_length(self):
        with pytest.raises(ValueError):
            SymmetricKey.from_bytes(bytes(31))


# =============================================================================
# Randomness
# =============================================================================

DRAWS = 10_000


class TestNonces:
    def test_no_repeats(self):
        nonces = [gen_nonce() for _ in range(DRAWS)]
        assert all(len(n) == NONCE_SIZE for n in nonces)
        assert len(set(nonces)) == DRAWS

    def test_every_position_spreads(self):
        nonces = [gen_nonce() for _ in range(DRAWS)]
        for position in range(NONCE_SIZE):
            assert len({n[position] for n in nonces}) >= 100, position

    def test_seeded_stream_spreads(self):
        rng = SeededRandomSource("nonces")
        nonces = [gen_nonce(rng) for _ in range(DRAWS)]
        assert len(set(nonces)) == DRAWS


class TestKdf:
    def test_distinct_inputs_give_distinct_keys(self):
        rng = SeededRandomSource("kdf")
        inputs = {rng.token_bytes(32) for _ in range(DRAWS)}
        keys = {kdf(z).to_bytes() for z in inputs}
        assert len(keys) == len(inputs)

    def test_halves_differ(self):
        key = kdf(b"z")
        assert key.enc_key != key.mac_key


class TestKeypairs:
    def test_private_keys_distinct(self):
        keys = [gen_keypair() for _ in range(500)]
        assert len({sk for sk, _ in keys}) == len(keys)
        assert all(1 <= sk < ORDER for sk, _ in keys)

    def test_public_key_matches(self, rng):
        sk, pk = gen_keypair(rng)
        assert pk == GENERATOR * sk


# =============================================================================
# Metering
# =============================================================================

class TestMetering:
    def test_ops_counted_inside_meter_only(self, rng):
        sk, pk = gen_keypair(rng)
        meter = RoleMeter()
        ecdsa_sign(sk, b"outside", rng)
        with meter.measure():
            signature = ecdsa_sign(sk, b"inside", rng)
            ecdsa_verify(pk, b"inside", signature)
            ecies_encrypt(pk, b"x", rng)
            sym_protect(kdf(b"k"), b"x", 0, DIRECTION, rng)
        assert meter.ops.profile() == (1, 0, 1, 1)
        assert meter.ops.sym_ops == 1
        assert meter.ops.asymmetric == 3
        assert meter.cpu_ns > 0 or meter.wall_ns > 0

    def test_nested_measure_counts_once(self, rng):
        meter = RoleMeter()
        with meter.measure():
            with meter.measure():
                sym_protect(kdf(b"k"), b"x", 0, DIRECTION, rng)
        assert meter.ops.sym_ops == 1
