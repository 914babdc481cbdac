import logging

from app.core.pki import CertificateAuthority, EntityRole
from app.services.attacks.base import Attack
from app.services.attacks.registry import AttackRegistry
from app.services.material import (
    EntityMaterial,
    Federation,
    identity_for,
    issue_explicit,
    issue_implicit,
)
from app.utils.rng import RandomSource

logger = logging.getLogger(__name__)


def rogue_sp_material(federation: Federation, rng: RandomSource) -> EntityMaterial:
    """SP material with the genuine identity but certificates from a CA nobody trusts."""
    genuine = federation.sp
    rogue_ca = CertificateAuthority.generate(rng)
    implicit, ecqv_sk = issue_implicit(
        rogue_ca, identity_for(genuine.entity_id, genuine.domain_id, EntityRole.SP, 1), rng
    )
    explicit, explicit_sk = issue_explicit(
        rogue_ca, identity_for(genuine.entity_id, genuine.domain_id, EntityRole.SP, 2), rng
    )
    return EntityMaterial(
        entity_id=genuine.entity_id,
        role=EntityRole.SP,
        domain_id=genuine.domain_id,
        ecqv_sk=ecqv_sk,
        implicit_cert=implicit,
        explicit_sk=explicit_sk,
        explicit_cert=explicit,
    )


@AttackRegistry.register
class FakeSpAttack(Attack):
    """An impostor answers for the SP with certificates from a rogue CA."""

    name = "fake-sp"
    description = "Impersonate the SP using certificates issued by a rogue CA."

    def sp_material(self, federation: Federation, rng: RandomSource) -> EntityMaterial:
        logger.debug("fake-sp impostor for sp=%06x", federation.sp.entity_id)
        return rogue_sp_material(federation, rng)
