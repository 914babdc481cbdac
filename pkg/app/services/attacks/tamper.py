from typing import Optional

from app.core.wire import peek_type_code
from app.models.schemas import ProtocolKind
from app.services.attacks.base import Attack, resolve_type
from app.services.attacks.registry import AttackRegistry
from app.services.transport.base import (
    Deliver,
    Drop,
    FrameContext,
    Interceptor,
    InterceptorAction,
    Tamper,
)

DEFAULT_TAMPER_TARGETS = {ProtocolKind.FLAT: "CLIENT_KEY", ProtocolKind.BASELINE: "SERVICE"}
DEFAULT_DROP_TARGETS = {ProtocolKind.FLAT: "CLIENT_KEY", ProtocolKind.BASELINE: "ASSERTION"}


class TypeFilter(Interceptor):
    """Applies one action to every frame of a single message type."""

    def __init__(self, type_code: int, action: InterceptorAction):
        super().__init__()
        self.type_code = type_code
        self.action = action

    def act(self, frame: bytes, context: FrameContext) -> InterceptorAction:
        if peek_type_code(frame) != self.type_code:
            return Deliver()
        return self.action


@AttackRegistry.register
class TamperAttack(Attack):
    """Flips the lowest bit of the last payload byte on every frame of the target type."""

    name = "tamper"
    description = "Flip one bit in every frame of one message type."

    def __init__(self, protocol: ProtocolKind, target: Optional[str] = None):
        super().__init__(protocol, target or DEFAULT_TAMPER_TARGETS[protocol])
        self.type_code = resolve_type(protocol, self.target)

    def interceptor(self) -> Interceptor:
        return TypeFilter(self.type_code, Tamper(offset=-1, mask=0x01))


@AttackRegistry.register
class DropAttack(Attack):
    name = "drop"
    description = "Silently drop every frame of one message type."

    def __init__(self, protocol: ProtocolKind, target: Optional[str] = None):
        super().__init__(protocol, target or DEFAULT_DROP_TARGETS[protocol])
        self.type_code = resolve_type(protocol, self.target)

    def interceptor(self) -> Interceptor:
        return TypeFilter(self.type_code, Drop())
