"""
Byte layout tables: one row per wire message of an honest run.

The report compares the totals derived here with the bytes the harness
measured, so a layout change that is not reflected in the tables is caught.
"""

from dataclasses import dataclass
from enum import IntEnum
from typing import Dict, Iterable, Tuple

from app.core.wire import HEADER_SIZE
from app.models.schemas import RoleName


@dataclass(frozen=True)
class LayoutEntry:
    msg_type: IntEnum
    src: RoleName
    dst: RoleName
    payload_size: int
    fields: str

    @property
    def wire_size(self) -> int:
        return HEADER_SIZE + self.payload_size


def role_totals(layout: Iterable[LayoutEntry]) -> Dict[RoleName, Tuple[int, int]]:
    """(tx_bytes, rx_bytes) per role."""
    totals = {role: [0, 0] for role in RoleName}
    for entry in layout:
        totals[entry.src][0] += entry.wire_size
        totals[entry.dst][1] += entry.wire_size
    return {role: (tx, rx) for role, (tx, rx) in totals.items()}


def role_message_counts(layout: Iterable[LayoutEntry]) -> Dict[RoleName, Tuple[int, int]]:
    counts = {role: [0, 0] for role in RoleName}
    for entry in layout:
        counts[entry.src][0] += 1
        counts[entry.dst][1] += 1
    return {role: (tx, rx) for role, (tx, rx) in counts.items()}


def total_bytes(layout: Iterable[LayoutEntry], role: RoleName) -> int:
    tx, rx = role_totals(layout)[role]
    return tx + rx
