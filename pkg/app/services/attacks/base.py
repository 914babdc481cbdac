from abc import ABC
from typing import Optional

from app.core.exceptions import ConfigError
from app.core.wire import BaselineMessageType, MessageType
from app.models.schemas import Outcome, ProtocolKind
from app.services.material import EntityMaterial, Federation
from app.services.transport.base import Interceptor, PassThrough
from app.utils.rng import RandomSource


def namespace_for(protocol: ProtocolKind):
    return MessageType if protocol == ProtocolKind.FLAT else BaselineMessageType


def resolve_type(protocol: ProtocolKind, name: str) -> int:
    """Type code for a message name, e.g. CLIENT_KEY, in the protocol's namespace."""
    namespace = namespace_for(protocol)
    try:
        return int(namespace[name.strip().upper()])
    except KeyError:
        names = ", ".join(member.name for member in namespace)
        raise ConfigError(
            f"unknown {protocol.value} message type {name!r}; one of {names}"
        ) from None


class Attack(ABC):
    """A scripted adversary for one scenario.

    Runs get a fresh interceptor each, so no state crosses from one run to the
    next. Attacks that impersonate a party replace its material before the
    roles are built.
    """

    name: str
    description: str

    def __init__(self, protocol: ProtocolKind, target: Optional[str] = None):
        self.protocol = protocol
        self.target = target

    def interceptor(self) -> Interceptor:
        return PassThrough()

    def sp_material(self, federation: Federation, rng: RandomSource) -> EntityMaterial:
        return federation.sp

    def judge(self, sp) -> Optional[Outcome]:
        """Outcome of the adversary's own attempt, when it makes one."""
        return None
