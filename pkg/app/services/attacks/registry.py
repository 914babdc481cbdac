from typing import Dict, List, Optional, Type

from app.core.exceptions import ConfigError
from app.models.schemas import ProtocolKind
from app.services.attacks.base import Attack


class AttackRegistry:
    """Registry of attack scenarios, keyed by their CLI name."""

    _attacks: Dict[str, Type[Attack]] = {}

    @classmethod
    def register(cls, attack_class: Type[Attack]) -> Type[Attack]:
        """Decorator to register an attack class."""
        cls._attacks[attack_class.name] = attack_class
        return attack_class

    @classmethod
    def get_attack(
        cls, name: str, protocol: ProtocolKind, target: Optional[str] = None
    ) -> Attack:
        if name not in cls._attacks:
            raise ConfigError(f"Attack '{name}' not found in registry")
        return cls._attacks[name](protocol, target)

    @classmethod
    def get_attack_names(cls) -> List[str]:
        return list(cls._attacks.keys())
