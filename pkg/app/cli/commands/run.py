import argparse
import json
import logging
from pathlib import Path
from typing import Dict, List

from app.config.settings import settings
from app.models.schemas import AttackKind, Outcome, ProtocolKind, ScenarioConfig, TransportKind
from app.services.report import emit_run_set
from app.services.runner import run_scenario, run_set

logger = logging.getLogger(__name__)

EXIT_UNEXPECTED_ABORT = 1


def register(subparsers) -> None:
    parser = subparsers.add_parser("run", help="Run protocol sessions and report metrics")
    parser.add_argument("--protocol", choices=[p.value for p in ProtocolKind], default="flat")
    parser.add_argument("--transport", choices=[t.value for t in TransportKind], default="mem")
    parser.add_argument("--attack", choices=[a.value for a in AttackKind], default="none")
    parser.add_argument("--runs", type=int, default=settings.default_runs)
    parser.add_argument("--seed", type=int, default=settings.default_seed)
    parser.add_argument("--material", help="Material directory written by `setup`")
    parser.add_argument("--parallel", type=int, default=1, help="Worker threads for mem runs")
    parser.add_argument(
        "--target", help="Message type hit by the tamper/drop attacks, e.g. CLIENT_KEY"
    )
    parser.add_argument("--report", choices=["json", "table"], default="table")
    parser.add_argument("--out", help="Write the report here instead of stdout")
    parser.add_argument("--transcript", help="Write the first run's transcript (JSON) here")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    cfg = ScenarioConfig(
        protocol=args.protocol,
        transport=args.transport,
        attack=args.attack,
        seed=args.seed,
        runs=args.runs,
        material=args.material,
        parallel=args.parallel,
        tamper_target=args.target,
    )
    transcripts: Dict[int, List[dict]] = {}

    def keep_first(index: int, transcript: List[dict]) -> None:
        if index == 0:
            transcripts[index] = transcript

    metrics = run_scenario(cfg, on_transcript=keep_first if args.transcript else None)
    rendered = emit_run_set(run_set(cfg, metrics), args.report)

    if args.out:
        Path(args.out).write_text(rendered)
        logger.info("report written path=%s", args.out)
    else:
        print(rendered, end="")
    if args.transcript:
        Path(args.transcript).write_text(json.dumps(transcripts.get(0, []), indent=2))

    if cfg.attack == AttackKind.NONE:
        failed = [m for m in metrics if m.outcome != Outcome.GRANTED]
        if failed:
            logger.error(
                "unexpected aborts runs=%d first=%s:%s",
                len(failed),
                getattr(failed[0].abort_role, "value", None),
                getattr(failed[0].abort_reason, "value", None),
            )
            return EXIT_UNEXPECTED_ABORT
    return 0
