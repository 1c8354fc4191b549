from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from torsim.core.harness.saturation import (
    GammaStar,
    Verdict,
    gamma_star_from_verdicts,
    majority_verdict,
)
from torsim.core.routing.idn import IdnFamily, Policy
from torsim.core.sim.models import Pattern, PacketRecord, SimResult

RUN_COLUMNS = [
    "row_type",
    "policy",
    "pattern",
    "gamma",
    "seed",
    "verdict",
    "saturated",
    "complete",
    "extended",
    "generated",
    "consumed",
    "local_messages",
    "packets",
    "mean_lifetime_ns",
    "median_lifetime_ns",
    "p99_lifetime_ns",
    "mean_hops",
    "frac_oidn",
    "frac_widn",
    "frac_derouted",
    "stalls",
    "hop_violations",
    "trace_digest",
    "gamma_star",
    "sweep_limited",
    "non_monotone",
    "error",
]


@dataclass(frozen=True)
class RunStats:
    generated: int = 0
    consumed: int = 0
    local_messages: int = 0
    packets: int = 0
    mean_lifetime_ns: Optional[float] = None
    median_lifetime_ns: Optional[float] = None
    p99_lifetime_ns: Optional[float] = None
    mean_hops: Optional[float] = None
    frac_oidn: float = 0.0
    frac_widn: float = 0.0
    frac_derouted: float = 0.0
    stalls: int = 0
    hop_violations: int = 0
    phase_violations: int = 0
    events: int = 0
    trace_digest: Optional[str] = None


@dataclass(frozen=True)
class RunOutcome:
    policy: Policy
    pattern: Pattern
    gamma: float
    seed: int
    verdict: Verdict
    complete: bool
    stats: RunStats
    extended: bool = False
    error: Optional[str] = None

    @property
    def sort_key(self) -> Tuple[str, str, float, int]:
        return (self.policy.value, self.pattern.value, self.gamma, self.seed)


@dataclass(frozen=True)
class CellSummary:
    policy: Policy
    pattern: Pattern
    gamma_star: GammaStar
    verdicts: Tuple[Verdict, ...]
    complete: bool
    frac_oidn: Optional[float]
    frac_widn: Optional[float]
    frac_derouted: Optional[float]


def deroute_fractions(records: Sequence[PacketRecord]) -> Tuple[float, float, float]:
    """(OIDN, WIDN, total) shares of derouted packets; all zero without traffic."""
    if not records:
        return 0.0, 0.0, 0.0
    families = [record.family for record in records]
    oidn = families.count(IdnFamily.OIDN)
    widn = families.count(IdnFamily.WIDN)
    total = len(records)
    return oidn / total, widn / total, (oidn + widn) / total


def summarize(result: SimResult) -> RunStats:
    records = result.records
    frac_oidn, frac_widn, frac_derouted = deroute_fractions(records)
    mean = median = p99 = hops = None
    if records:
        count = len(records)
        lifetimes = np.fromiter((r.lifetime_ns for r in records), dtype=np.int64, count=count)
        hop_counts = np.fromiter((r.hops for r in records), dtype=np.int64, count=count)
        mean = float(lifetimes.mean())
        median = float(np.median(lifetimes))
        p99 = float(np.percentile(lifetimes, 99))
        hops = float(hop_counts.mean())
    return RunStats(
        generated=result.generated,
        consumed=result.consumed,
        local_messages=result.local_messages,
        packets=len(records),
        mean_lifetime_ns=mean,
        median_lifetime_ns=median,
        p99_lifetime_ns=p99,
        mean_hops=hops,
        frac_oidn=frac_oidn,
        frac_widn=frac_widn,
        frac_derouted=frac_derouted,
        stalls=result.stalls,
        hop_violations=result.hop_violations,
        phase_violations=result.phase_violations,
        events=result.events_processed,
        trace_digest=result.trace_digest,
    )


def summarize_cell(outcomes: Sequence[RunOutcome], gammas: Sequence[float]) -> CellSummary:
    """γ* and the mean deroute shares over γ ≤ γ* for one (policy, pattern) cell."""
    by_gamma: Dict[float, List[RunOutcome]] = defaultdict(list)
    for outcome in outcomes:
        by_gamma[outcome.gamma].append(outcome)
    verdicts = tuple(
        majority_verdict(
            [o.verdict if o.complete else Verdict.INCONCLUSIVE for o in by_gamma.get(g, [])]
        )
        for g in gammas
    )
    star = gamma_star_from_verdicts(gammas, verdicts)
    below = [o for o in outcomes if o.complete and o.gamma <= star.value]

    def _mean(attr: str) -> Optional[float]:
        if not below:
            return None
        return float(np.mean([getattr(o.stats, attr) for o in below]))

    first = outcomes[0]
    return CellSummary(
        policy=first.policy,
        pattern=first.pattern,
        gamma_star=star,
        verdicts=verdicts,
        complete=all(o.complete for o in outcomes) and len(outcomes) > 0,
        frac_oidn=_mean("frac_oidn"),
        frac_widn=_mean("frac_widn"),
        frac_derouted=_mean("frac_derouted"),
    )


def run_row(outcome: RunOutcome) -> Dict[str, Any]:
    stats = outcome.stats
    return {
        "row_type": "run",
        "policy": outcome.policy.value,
        "pattern": outcome.pattern.value,
        "gamma": outcome.gamma,
        "seed": outcome.seed,
        "verdict": outcome.verdict.value,
        "saturated": outcome.verdict is Verdict.SATURATED,
        "complete": outcome.complete,
        "extended": outcome.extended,
        "generated": stats.generated,
        "consumed": stats.consumed,
        "local_messages": stats.local_messages,
        "packets": stats.packets,
        "mean_lifetime_ns": stats.mean_lifetime_ns,
        "median_lifetime_ns": stats.median_lifetime_ns,
        "p99_lifetime_ns": stats.p99_lifetime_ns,
        "mean_hops": stats.mean_hops,
        "frac_oidn": stats.frac_oidn,
        "frac_widn": stats.frac_widn,
        "frac_derouted": stats.frac_derouted,
        "stalls": stats.stalls,
        "hop_violations": stats.hop_violations,
        "trace_digest": stats.trace_digest,
        "error": outcome.error,
    }


def summary_row(cell: CellSummary) -> Dict[str, Any]:
    return {
        "row_type": "summary",
        "policy": cell.policy.value,
        "pattern": cell.pattern.value,
        "complete": cell.complete,
        "gamma_star": cell.gamma_star.value,
        "sweep_limited": cell.gamma_star.sweep_limited,
        "non_monotone": cell.gamma_star.non_monotone,
        "frac_oidn": cell.frac_oidn,
        "frac_widn": cell.frac_widn,
        "frac_derouted": cell.frac_derouted,
    }


def group_cells(outcomes: Iterable[RunOutcome]) -> Dict[Tuple[Policy, Pattern], List[RunOutcome]]:
    cells: Dict[Tuple[Policy, Pattern], List[RunOutcome]] = defaultdict(list)
    for outcome in sorted(outcomes, key=lambda o: o.sort_key):
        cells[(outcome.policy, outcome.pattern)].append(outcome)
    return dict(sorted(cells.items(), key=lambda item: (item[0][0].value, item[0][1].value)))


def aggregate(
    outcomes: Sequence[RunOutcome], gammas: Sequence[float]
) -> Tuple[List[Dict[str, Any]], List[CellSummary]]:
    """One row per run in key order, then one summary row per (policy, pattern)."""
    cells = group_cells(outcomes)
    summaries = [summarize_cell(cell_outcomes, gammas) for cell_outcomes in cells.values()]
    rows = [run_row(o) for cell_outcomes in cells.values() for o in cell_outcomes]
    rows.extend(summary_row(cell) for cell in summaries)
    return rows, summaries
