"""
Scenario runner.

Each run builds fresh Client, SP and IdP roles over shared federation material
and drives them to completion on one transport. On the memory network a run is
fully determined by (seed, run index): roles, scheduler and interceptor all
draw from streams derived from that pair, so runs can execute in any order or
in parallel and still produce identical metrics and transcripts.
"""

import asyncio
import logging
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

from app.config.settings import settings
from app.core.baseline.client import BaselineClient
from app.core.baseline.idp import BaselineIdentityProvider
from app.core.baseline.layout import DERIVED_CLIENT_BYTES as BASELINE_CLIENT_BYTES
from app.core.baseline.sp import BaselineServiceProvider
from app.core.flat.client import FlatClient
from app.core.flat.idp import FlatIdentityProvider
from app.core.flat.layout import DERIVED_CLIENT_BYTES as FLAT_CLIENT_BYTES
from app.core.flat.sp import FlatServiceProvider
from app.core.roles import BaseRole, ClientRole
from app.core.wire import Message, encode_message
from app.models.schemas import (
    AbortReason,
    AbortRecord,
    Outcome,
    ProtocolKind,
    RoleMetrics,
    RoleName,
    RunMetrics,
    RunSet,
    RunSummary,
    ScenarioConfig,
    TransportKind,
)
from app.repositories.registry import ClientRegistry
from app.services.attacks import Attack, AttackRegistry
from app.services.material import EntityMaterial, Federation, build_federation, load_material
from app.services.transport.base import TrafficCounter
from app.services.transport.memory import MemoryNetwork
from app.services.transport.udp import UdpEndpoint, udp_bind, udp_recv, udp_send
from app.utils.clock import Clock, SimulatedClock, SystemClock
from app.utils.rng import RandomSource, SeededRandomSource, system_random

logger = logging.getLogger(__name__)

MAX_STEPS = 10_000

DERIVED_CLIENT_BYTES = {
    ProtocolKind.FLAT: FLAT_CLIENT_BYTES,
    ProtocolKind.BASELINE: BASELINE_CLIENT_BYTES,
}

TranscriptSink = Callable[[int, List[dict]], None]


@dataclass
class Session:
    """The three roles of one run."""
    protocol: ProtocolKind
    client: ClientRole
    sp: BaseRole
    idp: BaseRole

    @property
    def roles(self) -> Dict[RoleName, BaseRole]:
        return {RoleName.CLIENT: self.client, RoleName.SP: self.sp, RoleName.IDP: self.idp}


@dataclass
class DriveResult:
    traffic: TrafficCounter
    aborts: List[AbortRecord] = field(default_factory=list)
    frames: int = 0
    transcript: List[dict] = field(default_factory=list)


def _derive(rng: RandomSource, label: str) -> RandomSource:
    return rng.derive(label) if isinstance(rng, SeededRandomSource) else rng


def build_session(
    protocol: ProtocolKind,
    federation: Federation,
    registry: ClientRegistry,
    run_index: int,
    clock: Clock,
    rng: RandomSource,
    sp_material: Optional[EntityMaterial] = None,
) -> Session:
    client = federation.client(run_index)
    sp = sp_material or federation.sp
    idp = federation.idp
    idp_id = idp.entity_id
    client_rng, sp_rng, idp_rng = (_derive(rng, label) for label in ("client", "sp", "idp"))

    if protocol == ProtocolKind.FLAT:
        return Session(
            protocol=protocol,
            client=FlatClient(client.entity_id, idp_id, client.k_ci, clock, client_rng),
            sp=FlatServiceProvider(
                sp.entity_id, idp_id, sp.ecqv_sk, sp.implicit_cert, federation.q_ca, clock, sp_rng
            ),
            idp=FlatIdentityProvider(
                idp_id, idp.ecqv_sk, idp.implicit_cert, federation.q_ca, registry, clock, idp_rng
            ),
        )

    # IdP metadata always names the genuine SP certificate
    return Session(
        protocol=protocol,
        client=BaselineClient(
            client.entity_id,
            idp_id,
            client.explicit_sk,
            client.explicit_cert,
            client.credential,
            federation.q_ca,
            clock,
            client_rng,
        ),
        sp=BaselineServiceProvider(
            sp.entity_id,
            idp_id,
            sp.explicit_sk,
            sp.explicit_cert,
            idp.explicit_cert,
            federation.q_ca,
            clock,
            sp_rng,
        ),
        idp=BaselineIdentityProvider(
            idp_id,
            idp.explicit_sk,
            idp.explicit_cert,
            registry,
            {federation.sp.entity_id: federation.sp.explicit_cert},
            clock,
            idp_rng,
        ),
    )


# =============================================================================
# Memory driver
# =============================================================================

class MemoryDriver:
    """Single event loop over the memory network.

    Picks a ready endpoint with the network's seeded scheduler and feeds it
    one frame. When nothing is deliverable before the client's await
    deadline, the client's poll times out and its restart logic runs.
    """

    def __init__(self, session: Session, net: MemoryNetwork):
        self.session = session
        self.net = net
        self.roles: Dict[int, BaseRole] = {r.entity_id: r for r in session.roles.values()}
        self.endpoints = {eid: net.register(eid) for eid in self.roles}
        self.aborts: List[AbortRecord] = []

    def _send(self, m: Message) -> None:
        dst = self.endpoints.get(m.dst)
        if dst is None:
            logger.warning("no endpoint dst=%06x type=%s", m.dst, m.msg_type.name)
            return
        self.net.send(self.endpoints[m.src], dst, encode_message(m))

    def _step(self, role: BaseRole, call: Callable[[], List[Message]]) -> None:
        before = len(role.aborts)
        outbound = call()
        self.aborts.extend(role.aborts[before:])
        for m in outbound:
            self._send(m)

    def run(self) -> None:
        client = self.session.client
        clock = self.net.clock
        client_ep = self.endpoints[client.entity_id]
        self._step(client, lambda: client.start(self.session.sp.entity_id))

        for _ in range(MAX_STEPS):
            deadline = client.deadline_ms
            earliest = self.net.earliest_delivery_ms()
            if earliest is None:
                if deadline is None:
                    return
                self.net.poll(client_ep, deadline - clock.now_ms())
                self._step(client, client.on_timeout)
                continue
            if deadline is not None and earliest > deadline:
                clock.advance_to(deadline)
                self._step(client, client.on_timeout)
                continue
            ep = self.net.pick_ready()
            frame = self.net.poll(ep, 0)
            role = self.roles[ep.entity_id]
            self._step(role, lambda: role.receive(frame))
        logger.error("run stopped after %d steps", MAX_STEPS)


def drive_memory(
    session: Session, clock: SimulatedClock, rng: RandomSource, attack: Attack
) -> DriveResult:
    net = MemoryNetwork(clock, _derive(rng, "net"), attack.interceptor())
    driver = MemoryDriver(session, net)
    driver.run()
    return DriveResult(
        traffic=net.traffic,
        aborts=driver.aborts,
        frames=len(net.transcript),
        transcript=net.export_transcript(),
    )


# =============================================================================
# UDP driver
# =============================================================================

async def drive_udp(session: Session, run_timeout_s: Optional[float] = None) -> DriveResult:
    """Run one session with every role on its own loopback datagram endpoint."""
    client = session.client
    roles: Dict[int, BaseRole] = {r.entity_id: r for r in session.roles.values()}
    endpoints: Dict[int, UdpEndpoint] = {}
    for eid in roles:
        endpoints[eid] = await udp_bind(eid)
    result = DriveResult(traffic=TrafficCounter())
    finished = asyncio.Event()
    run_timeout_s = run_timeout_s or settings.await_timeout_s * (settings.max_restarts + 2)

    def step(role: BaseRole, call: Callable[[], List[Message]]) -> None:
        before = len(role.aborts)
        outbound = call()
        result.aborts.extend(role.aborts[before:])
        for m in outbound:
            dst = endpoints.get(m.dst)
            if dst is None:
                logger.warning("no endpoint dst=%06x type=%s", m.dst, m.msg_type.name)
                continue
            frame = encode_message(m)
            udp_send(endpoints[m.src], dst.address, frame)
            result.traffic.sent(m.src, len(frame))
            result.frames += 1
        if client.is_terminal:
            finished.set()

    async def serve(role: BaseRole) -> None:
        ep = endpoints[role.entity_id]
        while not finished.is_set():
            wait = settings.udp_timeout_s
            if role is client and client.deadline_ms is not None:
                wait = max(0.0, (client.deadline_ms - client.clock.now_ms()) / 1000)
            frame = await udp_recv(ep, wait)
            if frame is None:
                if role is client:
                    step(client, client.on_timeout)
                continue
            result.traffic.received(role.entity_id, len(frame))
            step(role, lambda: role.receive(frame))

    tasks = [asyncio.create_task(serve(role)) for role in roles.values()]
    waiter = asyncio.create_task(finished.wait())
    try:
        step(client, lambda: client.start(session.sp.entity_id))
        done, _ = await asyncio.wait(
            {waiter, *tasks}, timeout=run_timeout_s, return_when=asyncio.FIRST_COMPLETED
        )
        if not done:
            logger.error("udp run timed out after %.1fs", run_timeout_s)
        for task in done:
            if task is not waiter and not task.cancelled() and task.exception() is not None:
                raise task.exception()
    finally:
        for task in (waiter, *tasks):
            task.cancel()
        await asyncio.gather(waiter, *tasks, return_exceptions=True)
        for ep in endpoints.values():
            ep.close()
    return result


# =============================================================================
# Metrics
# =============================================================================

def run_outcome(client: ClientRole) -> Outcome:
    if client.granted:
        return Outcome.GRANTED
    if client.aborts and client.aborts[-1].reason == AbortReason.DENIED:
        return Outcome.DENIED
    return Outcome.ABORTED


def collect_metrics(
    run_index: int,
    cfg: ScenarioConfig,
    session: Session,
    result: DriveResult,
    attack: Attack,
    wall_time_us: float,
) -> RunMetrics:
    roles = {}
    for name, role in session.roles.items():
        traffic = result.traffic.of(role.entity_id)
        roles[name] = RoleMetrics(
            entity_id=role.entity_id,
            tx_bytes=traffic.tx_bytes,
            rx_bytes=traffic.rx_bytes,
            tx_msgs=traffic.tx_msgs,
            rx_msgs=traffic.rx_msgs,
            ops=role.meter.ops.model_copy(),
            cpu_time_us=role.meter.cpu_ns / 1000,
            wall_time_us=role.meter.wall_ns / 1000,
        )
    outcome = run_outcome(session.client)
    first = result.aborts[0] if result.aborts and outcome != Outcome.GRANTED else None
    return RunMetrics(
        run_index=run_index,
        protocol=cfg.protocol,
        transport=cfg.transport,
        attack=cfg.attack,
        client_id=session.client.entity_id,
        roles=roles,
        wall_time_us=wall_time_us,
        outcome=outcome,
        abort_role=first.role if first else None,
        abort_reason=first.reason if first else None,
        attack_outcome=attack.judge(session.sp),
        restarts=session.client.restarts,
        frames=result.frames,
        aborts=result.aborts,
    )


# =============================================================================
# Scenario
# =============================================================================

def run_once(
    cfg: ScenarioConfig,
    federation: Federation,
    registry: ClientRegistry,
    attack: Attack,
    run_index: int,
) -> Tuple[RunMetrics, List[dict]]:
    start = time.perf_counter_ns()
    if cfg.transport == TransportKind.MEM:
        rng = SeededRandomSource(cfg.seed).derive(f"run-{run_index}")
        clock = SimulatedClock(settings.sim_epoch)
        sp_material = attack.sp_material(federation, rng.derive("attack"))
        session = build_session(
            cfg.protocol, federation, registry, run_index, clock, rng, sp_material
        )
        result = drive_memory(session, clock, rng, attack)
    else:
        session = build_session(
            cfg.protocol, federation, registry, run_index, SystemClock(), system_random
        )
        result = asyncio.run(drive_udp(session))
    wall_time_us = (time.perf_counter_ns() - start) / 1000
    metrics = collect_metrics(run_index, cfg, session, result, attack, wall_time_us)
    logger.debug(
        "run done index=%d protocol=%s outcome=%s frames=%d",
        run_index, cfg.protocol.value, metrics.outcome.value, metrics.frames,
    )
    return metrics, result.transcript


def resolve_federation(cfg: ScenarioConfig) -> Federation:
    if cfg.material:
        return load_material(cfg.material)
    return build_federation(cfg.seed)


def run_scenario(
    cfg: ScenarioConfig,
    federation: Optional[Federation] = None,
    on_transcript: Optional[TranscriptSink] = None,
) -> List[RunMetrics]:
    """Execute `cfg.runs` independent sessions; protocol aborts are recorded, never raised.

    Material and configuration errors raise before the first run.
    """
    federation = federation or resolve_federation(cfg)
    attack = AttackRegistry.get_attack(cfg.attack.value, cfg.protocol, cfg.tamper_target)
    registry = federation.client_registry()
    logger.info(
        "scenario start protocol=%s transport=%s attack=%s runs=%d seed=%d parallel=%d",
        cfg.protocol.value, cfg.transport.value, cfg.attack.value, cfg.runs, cfg.seed, cfg.parallel,
    )

    def one(index: int) -> Tuple[RunMetrics, List[dict]]:
        return run_once(cfg, federation, registry, attack, index)

    if cfg.parallel > 1 and cfg.transport == TransportKind.MEM:
        with ThreadPoolExecutor(max_workers=cfg.parallel) as pool:
            results = list(pool.map(one, range(cfg.runs)))
    else:
        results = [one(index) for index in range(cfg.runs)]

    metrics = []
    for run_metrics, transcript in results:
        if on_transcript is not None:
            on_transcript(run_metrics.run_index, transcript)
        metrics.append(run_metrics)

    summary = summarize(cfg.protocol, metrics)
    logger.info(
        "scenario done granted=%d denied=%d aborted=%d mean_client_bytes=%.1f",
        summary.granted, summary.denied, summary.aborted, summary.mean_client_bytes,
    )
    return metrics


def summarize(protocol: ProtocolKind, metrics: List[RunMetrics]) -> RunSummary:
    outcomes = Counter(m.outcome for m in metrics)
    first_aborts = Counter(
        f"{m.abort_role.value}:{m.abort_reason.value}" for m in metrics if m.abort_role is not None
    )
    client_bytes = [m.roles[RoleName.CLIENT].total_bytes for m in metrics]
    return RunSummary(
        runs=len(metrics),
        granted=outcomes[Outcome.GRANTED],
        denied=outcomes[Outcome.DENIED],
        aborted=outcomes[Outcome.ABORTED],
        mean_client_bytes=sum(client_bytes) / len(client_bytes) if client_bytes else 0.0,
        derived_client_bytes=DERIVED_CLIENT_BYTES[protocol],
        first_aborts=dict(first_aborts),
    )


def run_set(cfg: ScenarioConfig, metrics: List[RunMetrics]) -> RunSet:
    return RunSet(config=cfg, metrics=metrics, summary=summarize(cfg.protocol, metrics))
