# Attacks Package - scripted adversaries
# Import all attacks to register them with the registry

from app.services.attacks.base import Attack
from app.services.attacks.registry import AttackRegistry
from app.services.attacks.passive import PassiveAttack
from app.services.attacks.replay import ReplayAttack
from app.services.attacks.tamper import DropAttack, TamperAttack
from app.services.attacks.fake_sp import FakeSpAttack

__all__ = [
    "Attack",
    "AttackRegistry",
    "PassiveAttack",
    "ReplayAttack",
    "TamperAttack",
    "DropAttack",
    "FakeSpAttack",
]
