"""
UDP binding: one encoded message per datagram, no retransmission.

Loss surfaces to the protocol as a receive timeout. Each endpoint has a single
receiver; any number of tasks may send through it.
"""

import asyncio
import logging
from typing import Optional, Tuple

from app.config.settings import settings
from app.core.exceptions import TransportError
from app.core.wire import MAX_FRAME
from app.services.transport.base import Endpoint

logger = logging.getLogger(__name__)

Address = Tuple[str, int]


class _DatagramQueue(asyncio.DatagramProtocol):
    def __init__(self, entity_id: int):
        self.entity_id = entity_id
        self.queue: "asyncio.Queue[Tuple[bytes, Address]]" = asyncio.Queue()
        self.error: Optional[Exception] = None

    def datagram_received(self, data: bytes, addr: Address) -> None:
        if len(data) > MAX_FRAME:
            logger.warning("drop oversize datagram entity=%06x len=%d", self.entity_id, len(data))
            return
        self.queue.put_nowait((data, addr))

    def error_received(self, exc: Exception) -> None:
        logger.warning("udp error entity=%06x error=%s", self.entity_id, exc)
        self.error = exc


class UdpEndpoint:
    """A bound datagram socket for one entity."""

    def __init__(
        self, entity_id: int, transport: asyncio.DatagramTransport, protocol: _DatagramQueue
    ):
        self.entity_id = entity_id
        self._transport = transport
        self._protocol = protocol
        host, port = transport.get_extra_info("sockname")[:2]
        self.endpoint = Endpoint(entity_id=entity_id, address=(host, port))

    @property
    def address(self) -> Address:
        return self.endpoint.address

    @property
    def closed(self) -> bool:
        return self._transport.is_closing()

    def close(self) -> None:
        self._transport.close()


async def udp_bind(entity_id: int, host: Optional[str] = None, port: int = 0) -> UdpEndpoint:
    """Bind a datagram endpoint; port 0 picks a free port."""
    loop = asyncio.get_running_loop()
    try:
        transport, protocol = await loop.create_datagram_endpoint(
            lambda: _DatagramQueue(entity_id),
            local_addr=(host or settings.udp_host, port),
        )
    except OSError as exc:
        raise TransportError(f"cannot bind {host or settings.udp_host}:{port}: {exc}") from exc
    ep = UdpEndpoint(entity_id, transport, protocol)
    logger.debug("udp bound entity=%06x address=%s:%d", entity_id, *ep.address)
    return ep


def udp_send(ep: UdpEndpoint, to: Address, frame: bytes) -> None:
    if ep.closed:
        raise TransportError(f"endpoint {ep.entity_id:06x} is closed")
    if len(frame) > MAX_FRAME:
        raise TransportError(f"frame of {len(frame)} bytes exceeds {MAX_FRAME}")
    try:
        ep._transport.sendto(frame, to)
    except OSError as exc:
        raise TransportError(f"send to {to} failed: {exc}") from exc


async def udp_recv(ep: UdpEndpoint, timeout_s: Optional[float] = None) -> Optional[bytes]:
    """Next datagram, or None once `timeout_s` elapses with nothing received."""
    timeout_s = settings.udp_timeout_s if timeout_s is None else timeout_s
    try:
        frame, _ = await asyncio.wait_for(ep._protocol.queue.get(), timeout=timeout_s)
    except asyncio.TimeoutError:
        return None
    return frame
