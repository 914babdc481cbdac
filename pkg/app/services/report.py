"""
Comparison reports over two run sets.

All numbers are per-run means. The JSON rendering is the machine interface;
the table renders the same Report object, so both always agree.
"""

import logging
from statistics import fmean
from typing import Callable, List, Literal, Optional

from app.core.baseline.layout import DERIVED_CLIENT_BYTES as BASELINE_CLIENT_BYTES
from app.core.exceptions import MismatchedRunsError
from app.core.flat.layout import DERIVED_CLIENT_BYTES as FLAT_CLIENT_BYTES
from app.models.schemas import (
    ClaimCheck,
    LayoutCheck,
    OpComparison,
    OpCounters,
    Outcome,
    ProtocolKind,
    Report,
    RoleMetrics,
    RoleName,
    RoleTraffic,
    RunMetrics,
    RunSet,
    TimingComparison,
    TrafficComparison,
)

logger = logging.getLogger(__name__)

ReportFormat = Literal["json", "table"]

OP_FIELDS = list(OpCounters.model_fields)
BASELINE_CLIENT_PROFILE = (1, 1, 2, 5)
CLIENT_BYTES_TARGET = 500
CLIENT_BYTES_TOLERANCE = 0.16
CLIENT_BYTES_MAX_SHARE = 0.45
CLIENT_CPU_MAX_RATIO = 0.1

_DERIVED = {ProtocolKind.FLAT: FLAT_CLIENT_BYTES, ProtocolKind.BASELINE: BASELINE_CLIENT_BYTES}


def _mean(runs: List[RunMetrics], pick: Callable[[RunMetrics], float]) -> float:
    return fmean(pick(m) for m in runs)


def _role_mean(runs: List[RunMetrics], role: RoleName, pick: Callable[[RoleMetrics], float]):
    return _mean(runs, lambda m: pick(m.roles[role]))


def delta_pct(a: float, b: float) -> Optional[float]:
    if b == 0:
        return 0.0 if a == 0 else None
    return (a - b) / b * 100


def _traffic(name: str, a: RoleTraffic, b: RoleTraffic) -> TrafficComparison:
    return TrafficComparison(
        role=name,
        a=a,
        b=b,
        tx_delta_pct=delta_pct(a.tx, b.tx),
        rx_delta_pct=delta_pct(a.rx, b.rx),
        total_delta_pct=delta_pct(a.total, b.total),
    )


def _role_traffic(runs: List[RunMetrics], role: RoleName) -> RoleTraffic:
    tx = _role_mean(runs, role, lambda r: r.tx_bytes)
    rx = _role_mean(runs, role, lambda r: r.rx_bytes)
    return RoleTraffic(tx=tx, rx=rx, total=tx + rx)


def _sum_traffic(parts: List[RoleTraffic]) -> RoleTraffic:
    return RoleTraffic(
        tx=sum(p.tx for p in parts), rx=sum(p.rx for p in parts), total=sum(p.total for p in parts)
    )


def _layout_check(runs: List[RunMetrics]) -> LayoutCheck:
    protocol = runs[0].protocol
    derived = _DERIVED[protocol]
    measured = _role_mean(runs, RoleName.CLIENT, lambda r: r.total_bytes)
    return LayoutCheck(
        protocol=protocol,
        derived_client_bytes=derived,
        measured_client_bytes=measured,
        matches=measured == derived,
    )


def _claims(a: List[RunMetrics], b: List[RunMetrics], report: Report) -> List[ClaimCheck]:
    """Directional checks that apply when FLAT (a) is compared against the baseline (b)."""
    traffic = {t.role: t for t in report.traffic}
    client, sp, idp = traffic["client"], traffic["sp"], traffic["idp"]
    cpu = {t.role: t for t in report.timing}["client"]
    low = CLIENT_BYTES_TARGET * (1 - CLIENT_BYTES_TOLERANCE)
    high = CLIENT_BYTES_TARGET * (1 + CLIENT_BYTES_TOLERANCE)
    profiles = {m.roles[RoleName.CLIENT].ops.profile() for m in b}
    flat_asym = max(m.roles[RoleName.CLIENT].ops.asymmetric for m in a)
    share = client.a.total / client.b.total if client.b.total else 0.0
    return [
        ClaimCheck(
            name="client_bytes_near_500",
            holds=low <= client.a.total <= high,
            detail=f"FLAT client {client.a.total:.1f} B, accepted range {low:.0f}-{high:.0f} B",
        ),
        ClaimCheck(
            name="client_bytes_reduction",
            holds=client.b.total > 0 and share <= CLIENT_BYTES_MAX_SHARE,
            detail=f"FLAT client uses {share:.1%} of baseline client bytes",
        ),
        ClaimCheck(
            name="total_bytes_lower",
            holds=report.totals.a.total < report.totals.b.total,
            detail=f"all roles {report.totals.a.total:.1f} B vs {report.totals.b.total:.1f} B",
        ),
        ClaimCheck(
            name="idp_bytes_higher",
            holds=idp.a.total > idp.b.total,
            detail=f"IdP {idp.a.total:.1f} B vs {idp.b.total:.1f} B",
        ),
        ClaimCheck(
            name="sp_bytes_lower",
            holds=sp.a.total < sp.b.total,
            detail=f"SP {sp.a.total:.1f} B vs {sp.b.total:.1f} B",
        ),
        ClaimCheck(
            name="client_symmetric_only",
            holds=flat_asym == 0,
            detail=f"max FLAT client asymmetric ops per run: {flat_asym}",
        ),
        ClaimCheck(
            name="baseline_client_profile",
            holds=profiles == {BASELINE_CLIENT_PROFILE},
            detail=f"baseline client (enc, dec, sign, verify) profiles seen: {sorted(profiles)}",
        ),
        ClaimCheck(
            name="client_cpu_ratio",
            holds=cpu.ratio is not None and cpu.ratio <= CLIENT_CPU_MAX_RATIO,
            detail=f"FLAT/baseline client CPU time ratio: {cpu.ratio}",
        ),
    ]


def compare(a: List[RunMetrics], b: List[RunMetrics]) -> Report:
    if not a or not b:
        raise MismatchedRunsError("both run sets must be non-empty")
    if len(a) != len(b):
        raise MismatchedRunsError(f"run counts differ: {len(a)} vs {len(b)}")

    roles = list(RoleName)
    traffic = [
        _traffic(role.value, _role_traffic(a, role), _role_traffic(b, role)) for role in roles
    ]
    totals = _traffic(
        "all",
        _sum_traffic([t.a for t in traffic]),
        _sum_traffic([t.b for t in traffic]),
    )
    ops = [
        OpComparison(
            role=role.value,
            a={op: _role_mean(a, role, lambda r, op=op: getattr(r.ops, op)) for op in OP_FIELDS},
            b={op: _role_mean(b, role, lambda r, op=op: getattr(r.ops, op)) for op in OP_FIELDS},
        )
        for role in roles
    ]
    timing = []
    for role in roles:
        a_cpu = _role_mean(a, role, lambda r: r.cpu_time_us)
        b_cpu = _role_mean(b, role, lambda r: r.cpu_time_us)
        timing.append(
            TimingComparison(
                role=role.value,
                a_cpu_us=a_cpu,
                b_cpu_us=b_cpu,
                ratio=a_cpu / b_cpu if b_cpu else None,
            )
        )

    report = Report(
        protocol_a=a[0].protocol,
        protocol_b=b[0].protocol,
        runs=len(a),
        traffic=traffic,
        totals=totals,
        ops=ops,
        timing=timing,
        layouts=[_layout_check(a), _layout_check(b)],
    )
    if report.protocol_a == ProtocolKind.FLAT and report.protocol_b == ProtocolKind.BASELINE:
        report.claims = _claims(a, b, report)
    logger.info(
        "compare %s vs %s runs=%d claims_held=%d/%d",
        report.protocol_a.value, report.protocol_b.value, report.runs,
        sum(c.holds for c in report.claims), len(report.claims),
    )
    return report


# =============================================================================
# Rendering
# =============================================================================

def _pct(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:+.1f}%"


def _report_table(r: Report) -> str:
    a, b = r.protocol_a.value, r.protocol_b.value
    lines = [f"{a} (a) vs {b} (b), {r.runs} runs each", "", "Communication (mean bytes per run)"]
    lines.append(
        f"{'role':<8}{'a tx':>9}{'a rx':>9}{'a total':>10}{'b tx':>9}{'b rx':>9}{'b total':>10}"
        f"{'total delta':>13}"
    )
    for t in [*r.traffic, r.totals]:
        lines.append(
            f"{t.role:<8}{t.a.tx:>9.1f}{t.a.rx:>9.1f}{t.a.total:>10.1f}"
            f"{t.b.tx:>9.1f}{t.b.rx:>9.1f}{t.b.total:>10.1f}{_pct(t.total_delta_pct):>13}"
        )

    lines += ["", "Computation (mean operations per run, a / b)"]
    lines.append(f"{'role':<8}" + "".join(f"{op:>16}" for op in OP_FIELDS))
    for o in r.ops:
        cells = "".join(f"{o.a[op]:>7.2f} / {o.b[op]:<6.2f}" for op in OP_FIELDS)
        lines.append(f"{o.role:<8}{cells}")

    lines += ["", "CPU time (mean us per run)"]
    lines.append(f"{'role':<8}{'a':>12}{'b':>12}{'a / b':>10}")
    for t in r.timing:
        ratio = "n/a" if t.ratio is None else f"{t.ratio:.4f}"
        lines.append(f"{t.role:<8}{t.a_cpu_us:>12.1f}{t.b_cpu_us:>12.1f}{ratio:>10}")

    lines += ["", "Client layout (derived vs measured bytes)"]
    for check in r.layouts:
        mark = "ok" if check.matches else "MISMATCH"
        lines.append(
            f"{check.protocol.value:<10}{check.derived_client_bytes:>6}"
            f"{check.measured_client_bytes:>10.1f}  {mark}"
        )

    if r.claims:
        lines += ["", "Claims"]
        for claim in r.claims:
            lines.append(f"[{'x' if claim.holds else ' '}] {claim.name}: {claim.detail}")
    return "\n".join(lines) + "\n"


def emit_report(r: Report, fmt: ReportFormat = "json") -> str:
    if fmt == "json":
        return r.model_dump_json(indent=2) + "\n"
    return _report_table(r)


def _run_set_table(run_set: RunSet) -> str:
    cfg = run_set.config
    metrics = run_set.metrics
    lines = [
        f"{cfg.protocol.value} over {cfg.transport.value}, attack={cfg.attack.value}, "
        f"runs={len(metrics)}, seed={cfg.seed}",
        "",
        f"{'role':<8}{'tx':>9}{'rx':>9}{'total':>9}{'tx msgs':>9}{'rx msgs':>9}{'cpu us':>11}",
    ]
    for role in RoleName:
        tx = _role_mean(metrics, role, lambda r: r.tx_bytes)
        rx = _role_mean(metrics, role, lambda r: r.rx_bytes)
        lines.append(
            f"{role.value:<8}{tx:>9.1f}{rx:>9.1f}{tx + rx:>9.1f}"
            f"{_role_mean(metrics, role, lambda r: r.tx_msgs):>9.1f}"
            f"{_role_mean(metrics, role, lambda r: r.rx_msgs):>9.1f}"
            f"{_role_mean(metrics, role, lambda r: r.cpu_time_us):>11.1f}"
        )
    lines += ["", "Computation (mean operations per run)"]
    lines.append(f"{'role':<8}" + "".join(f"{op:>14}" for op in OP_FIELDS))
    for role in RoleName:
        lines.append(
            f"{role.value:<8}"
            + "".join(
                f"{_role_mean(metrics, role, lambda r, op=op: getattr(r.ops, op)):>14.2f}"
                for op in OP_FIELDS
            )
        )
    summary = run_set.summary
    if summary is not None:
        lines += [
            "",
            f"outcomes: granted={summary.granted} denied={summary.denied} "
            f"aborted={summary.aborted}",
            f"client bytes: measured {summary.mean_client_bytes:.1f}, "
            f"derived {summary.derived_client_bytes}",
        ]
        for key, n in sorted(summary.first_aborts.items()):
            lines.append(f"first abort {key}: {n}")
    attacks = [m.attack_outcome for m in metrics if m.attack_outcome is not None]
    if attacks:
        denied = sum(outcome == Outcome.DENIED for outcome in attacks)
        lines.append(f"adversary attempts: {len(attacks)}, denied {denied}")
    return "\n".join(lines) + "\n"


def emit_run_set(run_set: RunSet, fmt: ReportFormat = "json") -> str:
    if fmt == "json":
        return run_set.model_dump_json(indent=2) + "\n"
    return _run_set_table(run_set)
