from typing import Optional

from app.core.crypto import SymmetricKey
from app.models.records import ClientRecord
from app.repositories.base import BaseRepository


class ClientRegistry(BaseRepository[ClientRecord]):
    """Clients provisioned at the IdP, keyed by entity id."""

    def __init__(self):
        super().__init__(ClientRecord)

    def register(
        self,
        entity_id: int,
        k_ci: Optional[SymmetricKey] = None,
        certificate=None,
        credential: bytes = b"",
    ) -> ClientRecord:
        return self.create(id=entity_id, k_ci=k_ci, certificate=certificate, credential=credential)

    def get_key(self, entity_id: int) -> Optional[SymmetricKey]:
        record = self.get_by_id(entity_id)
        return record.k_ci if record is not None else None
