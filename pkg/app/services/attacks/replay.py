from typing import Optional

from app.core.wire import peek_type_code
from app.models.schemas import Outcome
from app.services.attacks.base import Attack, namespace_for
from app.services.attacks.registry import AttackRegistry
from app.services.transport.base import (
    Deliver,
    FrameContext,
    Interceptor,
    InterceptorAction,
    Replay,
)


class ServiceRequestReplayer(Interceptor):
    """Once the SP has answered, replays the client's service request to it."""

    name = "replay"

    def __init__(self, request_code: int, response_code: int):
        super().__init__()
        self.request_code = request_code
        self.response_code = response_code
        self.replayed = False

    def act(self, frame: bytes, context: FrameContext) -> InterceptorAction:
        if self.replayed or peek_type_code(frame) != self.response_code:
            return Deliver()
        for index in range(len(self.transcript) - 1, -1, -1):
            if peek_type_code(self.transcript[index].frame) == self.request_code:
                self.replayed = True
                return Replay(index)
        return Deliver()


@AttackRegistry.register
class ReplayAttack(Attack):
    name = "replay"
    description = "Replay the recorded service request after the SP grants it."

    def interceptor(self) -> Interceptor:
        namespace = namespace_for(self.protocol)
        return ServiceRequestReplayer(
            int(namespace.SERVICE_REQUEST), int(namespace.SERVICE)
        )

    def judge(self, sp) -> Optional[Outcome]:
        if sp.granted > 1:
            return Outcome.GRANTED
        return Outcome.DENIED if sp.denied else None
