"""
Exception hierarchy.

Library code raises these; the role FSMs translate failures raised while
processing an inbound message into an abort with an AbortReason.
"""


class FlatError(Exception):
    """Root of every error raised by this package."""


# =============================================================================
# Wire
# =============================================================================

class WireError(FlatError):
    """Malformed frame."""


class TruncatedHeaderError(WireError):
    pass


class TruncatedPayloadError(WireError):
    pass


class OversizeError(WireError):
    pass


class UnknownTypeError(WireError):
    pass


# =============================================================================
# Crypto
# =============================================================================

class CryptoError(FlatError):
    pass


class AuthenticationError(CryptoError):
    """MAC tag did not verify. No plaintext is released."""


class PointDecodeError(CryptoError):
    """Bytes do not encode a valid, non-identity curve point."""


class OversizePlaintextError(CryptoError):
    pass


class SignatureFormatError(CryptoError):
    pass


# =============================================================================
# PKI
# =============================================================================

class CertificateError(FlatError):
    pass


class CertificateFormatError(CertificateError):
    pass


class SerialReuseError(CertificateError):
    pass


class CertificateValidationError(CertificateError):
    """ECQV reception check or explicit certificate check failed."""


# =============================================================================
# Protocol / transport / configuration
# =============================================================================

class ProtocolError(FlatError):
    pass


class ProtocolOrderError(ProtocolError):
    """Operation not allowed in the current FSM state."""


class AssertionFormatError(ProtocolError):
    """Assertion bytes do not have the fixed 95-byte layout."""


class ProtocolAbort(ProtocolError):
    """Raised inside a role handler; the role moves to Aborted with `reason`.

    `outbound` holds messages still to be emitted (the SP's denial status).
    """

    def __init__(self, reason, detail: str = "", outbound=None):
        super().__init__(f"{getattr(reason, 'value', reason)}: {detail}" if detail else str(reason))
        self.reason = reason
        self.detail = detail
        self.outbound = list(outbound or [])


class TransportError(FlatError):
    pass


class UnknownEndpointError(TransportError):
    pass


class ConfigError(FlatError):
    pass


class MaterialError(ConfigError):
    pass


class MismatchedRunsError(ConfigError):
    pass
