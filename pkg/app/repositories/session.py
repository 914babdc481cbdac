import logging
from typing import List, Optional

from app.config.settings import settings
from app.models.records import IdpSession, SessionPhase
from app.repositories.base import BaseRepository

logger = logging.getLogger(__name__)


class IdpSessionRepository(BaseRepository[IdpSession]):
    """Repository for IdP session operations."""

    def __init__(self, timeout_ms: Optional[int] = None):
        super().__init__(IdpSession)
        self.timeout_ms = timeout_ms if timeout_ms is not None else settings.idp_session_timeout_ms

    def open_session(
        self, client_id: int, sp_id: int, n_c: bytes, phase: SessionPhase, now_ms: int
    ) -> IdpSession:
        """Create a session, superseding any open one for the same (client, SP) pair."""
        with self._lock:
            for stale in self.find(client_id=client_id, sp_id=sp_id, open_only=True):
                self.set_phase(stale, SessionPhase.SUPERSEDED, now_ms)
                logger.info(
                    "session superseded id=%d client=%06x sp=%06x", stale.id, client_id, sp_id
                )
            return self.create(
                client_id=client_id,
                sp_id=sp_id,
                n_c=n_c,
                phase=phase,
                created_ms=now_ms,
                updated_ms=now_ms,
            )

    def find(
        self,
        client_id: Optional[int] = None,
        sp_id: Optional[int] = None,
        phase: Optional[SessionPhase] = None,
        open_only: bool = False,
    ) -> List[IdpSession]:
        """Sessions matching every given field, newest first."""
        matches = self.filter(
            lambda s: (client_id is None or s.client_id == client_id)
            and (sp_id is None or s.sp_id == sp_id)
            and (phase is None or s.phase == phase)
            and (not open_only or s.is_open)
        )
        return sorted(matches, key=lambda s: s.id, reverse=True)

    def set_phase(self, session: IdpSession, phase: SessionPhase, now_ms: int) -> IdpSession:
        return self.update(session, phase=phase, updated_ms=now_ms)

    def is_expired(self, session: IdpSession, now_ms: int) -> bool:
        """Check if an open session has been idle longer than the timeout."""
        if not session.is_open:
            return False
        return (now_ms - session.updated_ms) > self.timeout_ms

    def expire(self, session: IdpSession, now_ms: int) -> IdpSession:
        """Mark session as expired."""
        return self.set_phase(session, SessionPhase.EXPIRED, now_ms)

    def gc(self, now_ms: int) -> int:
        """Expire idle sessions and drop closed ones past the timeout; returns sessions removed."""
        removed = 0
        with self._lock:
            for session in list(self._items.values()):
                if self.is_expired(session, now_ms):
                    self.expire(session, now_ms)
                    logger.info("session expired id=%d client=%06x", session.id, session.client_id)
                if not session.is_open and (now_ms - session.updated_ms) > self.timeout_ms:
                    self.delete(session)
                    removed += 1
        return removed
