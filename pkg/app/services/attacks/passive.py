from app.services.attacks.base import Attack
from app.services.attacks.registry import AttackRegistry


@AttackRegistry.register
class PassiveAttack(Attack):
    """Eavesdropper: records every frame, changes nothing."""

    name = "none"
    description = "Record the transcript and deliver every frame unchanged."
