from pathlib import Path
from typing import Callable, Optional, Tuple

import pytest

from app.config.settings import settings
from app.models.schemas import AttackKind, ProtocolKind, RunMetrics, ScenarioConfig
from app.services.attacks import AttackRegistry
from app.services.material import Federation, build_federation
from app.services.runner import DriveResult, Session, build_session, collect_metrics, drive_memory
from app.utils.clock import SimulatedClock
from app.utils.rng import SeededRandomSource

FIXTURES = Path(__file__).parent / "fixtures"

SessionRun = Tuple[Session, DriveResult, RunMetrics]


@pytest.fixture(scope="session")
def federation() -> Federation:
    """Seeded CA, IdP, SP and four clients shared by the whole test session."""
    return build_federation(seed=7, client_count=4)


@pytest.fixture
def rng() -> SeededRandomSource:
    return SeededRandomSource("tests")


@pytest.fixture
def clock() -> SimulatedClock:
    return SimulatedClock(settings.sim_epoch)


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def drive_session(federation) -> Callable[..., SessionRun]:
    """Run one session on the memory network and keep the roles for inspection."""

    def run(
        protocol: ProtocolKind,
        attack: AttackKind = AttackKind.NONE,
        target: Optional[str] = None,
        run_index: int = 0,
        seed: int = 0,
    ) -> SessionRun:
        cfg = ScenarioConfig(
            protocol=protocol, attack=attack, seed=seed, runs=1, tamper_target=target
        )
        scenario = AttackRegistry.get_attack(attack.value, protocol, target)
        rng = SeededRandomSource(seed).derive(f"run-{run_index}")
        clock = SimulatedClock(settings.sim_epoch)
        sp_material = scenario.sp_material(federation, rng.derive("attack"))
        session = build_session(
            protocol,
            federation,
            federation.client_registry(),
            run_index,
            clock,
            rng,
            sp_material,
        )
        result = drive_memory(session, clock, rng, scenario)
        metrics = collect_metrics(run_index, cfg, session, result, scenario, 0.0)
        return session, result, metrics

    return run
