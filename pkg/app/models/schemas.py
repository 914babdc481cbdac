from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, model_validator


# =============================================================================
# Enums
# =============================================================================

class ProtocolKind(str, Enum):
    FLAT = "flat"
    BASELINE = "baseline"


class TransportKind(str, Enum):
    MEM = "mem"
    UDP = "udp"


class AttackKind(str, Enum):
    NONE = "none"
    REPLAY = "replay"
    TAMPER = "tamper"
    FAKE_SP = "fake-sp"
    DROP = "drop"


class RoleName(str, Enum):
    CLIENT = "client"
    SP = "sp"
    IDP = "idp"


class Outcome(str, Enum):
    GRANTED = "granted"
    DENIED = "denied"
    ABORTED = "aborted"


class AbortReason(str, Enum):
    """Why a role left its protocol run early."""
    MAC = "mac"
    NONCE = "nonce"
    REPLAY = "replay"
    SEQUENCE = "sequence"
    UNEXPECTED = "unexpected"
    SIGNATURE = "signature"
    CERTIFICATE = "certificate"
    DECRYPT = "decrypt"
    FORMAT = "format"
    TIMEOUT = "timeout"
    DENIED = "denied"
    UNKNOWN_SENDER = "unknown_sender"
    EXPIRED = "expired"
    ASSERTION = "assertion"


# =============================================================================
# Metrics
# =============================================================================

class OpCounters(BaseModel):
    """Cryptographic operations performed by one role during one run."""
    sym_ops: int = 0
    ecdsa_sign: int = 0
    ecdsa_verify: int = 0
    ecies_enc: int = 0
    ecies_dec: int = 0
    ecqv_extract: int = 0

    @property
    def asymmetric(self) -> int:
        return (
            self.ecdsa_sign
            + self.ecdsa_verify
            + self.ecies_enc
            + self.ecies_dec
            + self.ecqv_extract
        )

    def profile(self) -> tuple:
        """(ecies_enc, ecies_dec, ecdsa_sign, ecdsa_verify)."""
        return (self.ecies_enc, self.ecies_dec, self.ecdsa_sign, self.ecdsa_verify)


class RoleMetrics(BaseModel):
    """Traffic, computation and time for one role in one run."""
    entity_id: int
    tx_bytes: int = 0
    rx_bytes: int = 0
    tx_msgs: int = 0
    rx_msgs: int = 0
    ops: OpCounters = Field(default_factory=OpCounters)
    cpu_time_us: float = 0.0
    wall_time_us: float = 0.0

    @property
    def total_bytes(self) -> int:
        return self.tx_bytes + self.rx_bytes


class AbortRecord(BaseModel):
    role: RoleName
    entity_id: int
    reason: AbortReason
    msg_type: Optional[str] = None
    time_ms: int = 0
    detail: str = ""


class RunMetrics(BaseModel):
    """Result of one protocol session."""
    run_index: int
    protocol: ProtocolKind
    transport: TransportKind
    attack: AttackKind
    client_id: int
    roles: Dict[RoleName, RoleMetrics]
    wall_time_us: float = 0.0
    outcome: Outcome
    abort_role: Optional[RoleName] = None
    abort_reason: Optional[AbortReason] = None
    attack_outcome: Optional[Outcome] = None
    restarts: int = 0
    frames: int = 0
    aborts: List[AbortRecord] = Field(default_factory=list)


# =============================================================================
# Scenario configuration
# =============================================================================

class ScenarioConfig(BaseModel):
    """One invocation of the scenario runner."""
    protocol: ProtocolKind = ProtocolKind.FLAT
    transport: TransportKind = TransportKind.MEM
    attack: AttackKind = AttackKind.NONE
    seed: int = 0
    runs: int = Field(default=100, ge=1)
    material: Optional[str] = Field(
        None,
        description="Material directory written by `setup`; generated in memory from the seed "
        "when absent.",
    )
    parallel: int = Field(default=1, ge=1)
    tamper_target: Optional[str] = Field(
        None,
        description="Message type name tampered by the tamper attack; defaults per protocol.",
    )

    @model_validator(mode="after")
    def _attacks_need_memory_network(self) -> "ScenarioConfig":
        if self.attack != AttackKind.NONE and self.transport != TransportKind.MEM:
            raise ValueError("attack scenarios run only on the mem transport")
        return self


class RunSummary(BaseModel):
    runs: int
    granted: int
    denied: int
    aborted: int
    mean_client_bytes: float
    derived_client_bytes: int
    first_aborts: Dict[str, int] = Field(
        default_factory=dict, description="Count of runs per 'role:reason' of their first abort"
    )


class RunSet(BaseModel):
    """Output of `run --report json`, input of `compare`."""
    config: ScenarioConfig
    metrics: List[RunMetrics]
    summary: Optional[RunSummary] = None


# =============================================================================
# Report
# =============================================================================

class RoleTraffic(BaseModel):
    tx: float
    rx: float
    total: float


class TrafficComparison(BaseModel):
    role: str
    a: RoleTraffic
    b: RoleTraffic
    tx_delta_pct: Optional[float] = Field(None, description="null when b is zero and a is not")
    rx_delta_pct: Optional[float] = None
    total_delta_pct: Optional[float] = None


class OpComparison(BaseModel):
    role: str
    a: Dict[str, float]
    b: Dict[str, float]


class TimingComparison(BaseModel):
    role: str
    a_cpu_us: float
    b_cpu_us: float
    ratio: Optional[float] = Field(None, description="a / b; null when b is zero")


class LayoutCheck(BaseModel):
    protocol: ProtocolKind
    derived_client_bytes: int
    measured_client_bytes: float
    matches: bool


class ClaimCheck(BaseModel):
    name: str
    holds: bool
    detail: str


class Report(BaseModel):
    """Comparison of two run sets. Deltas are (a - b) / b in percent."""
    protocol_a: ProtocolKind
    protocol_b: ProtocolKind
    runs: int
    traffic: List[TrafficComparison]
    totals: TrafficComparison
    ops: List[OpComparison]
    timing: List[TimingComparison]
    layouts: List[LayoutCheck] = Field(default_factory=list)
    claims: List[ClaimCheck] = Field(default_factory=list)


# =============================================================================
# Material manifest
# =============================================================================

class EntityRecord(BaseModel):
    entity_id: int
    role: str
    domain_id: int
    files: Dict[str, str] = Field(default_factory=dict)


class MaterialManifest(BaseModel):
    seed: int
    curve: str
    ca_file: str = "ca.key"
    entities: List[EntityRecord]
