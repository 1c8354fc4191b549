from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence

from torsim.core.errors import ContractViolation
from torsim.core.sim.models import SimResult

LOGGER = logging.getLogger(__name__)

MIN_SUBWINDOWS = 4


class Verdict(str, Enum):
    STABLE = "stable"
    SATURATED = "saturated"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class SaturationThresholds:
    lifetime_ratio: float = 1.5
    backlog_growth_packets: float = 48
    min_packets: int = 100
    extend_on_inconclusive: bool = True

    @classmethod
    def from_config(cls, config: Dict[str, Any]) -> "SaturationThresholds":
        section = config.get("saturation", {})
        return cls(
            lifetime_ratio=float(section.get("lifetime_ratio", cls.lifetime_ratio)),
            backlog_growth_packets=float(
                section.get("backlog_growth_packets", cls.backlog_growth_packets)
            ),
            min_packets=int(section.get("min_packets", cls.min_packets)),
            extend_on_inconclusive=bool(
                section.get("extend_on_inconclusive", cls.extend_on_inconclusive)
            ),
        )

    def describe(self) -> str:
        return (
            f"lifetime_ratio={self.lifetime_ratio:g} "
            f"backlog_growth_packets={self.backlog_growth_packets:g} "
            f"min_packets={self.min_packets}"
        )


@dataclass(frozen=True)
class GammaStar:
    value: float
    sweep_limited: bool = False
    non_monotone: bool = False


def _strictly_increasing(values: Sequence[float]) -> bool:
    return all(b > a for a, b in zip(values, values[1:]))


def detect_saturation(
    lifetime_series: Sequence[Optional[float]],
    backlog_series: Sequence[float] = (),
    consumed: Optional[int] = None,
    thresholds: SaturationThresholds = SaturationThresholds(),
) -> Verdict:
    """Judge one run from its per-sub-window mean lifetimes and per-node generator backlog."""
    if len(lifetime_series) < MIN_SUBWINDOWS:
        raise ContractViolation(
            f"saturation needs at least {MIN_SUBWINDOWS} sub-windows, got {len(lifetime_series)}"
        )
    if consumed is not None and consumed < thresholds.min_packets:
        return Verdict.INCONCLUSIVE

    means = [value for value in lifetime_series if value is not None]
    if (
        len(means) >= 2
        and means[0] > 0
        and _strictly_increasing(means)
        and means[-1] / means[0] > thresholds.lifetime_ratio
    ):
        return Verdict.SATURATED
    if (
        len(backlog_series) >= 2
        and _strictly_increasing(backlog_series)
        and backlog_series[-1] - backlog_series[0] >= thresholds.backlog_growth_packets
    ):
        return Verdict.SATURATED
    return Verdict.STABLE


def judge(result: SimResult, thresholds: SaturationThresholds) -> Verdict:
    return detect_saturation(
        result.lifetime_series(),
        result.backlog_series(),
        result.measured_consumed,
        thresholds,
    )


def majority_verdict(verdicts: Sequence[Verdict]) -> Verdict:
    """Stable only with a strict majority; anything else counts against stability."""
    if not verdicts:
        return Verdict.INCONCLUSIVE
    counts = Counter(verdicts)
    if counts[Verdict.STABLE] * 2 > len(verdicts):
        return Verdict.STABLE
    if counts[Verdict.SATURATED]:
        return Verdict.SATURATED
    return Verdict.INCONCLUSIVE


def gamma_star_from_verdicts(gammas: Sequence[float], verdicts: Sequence[Verdict]) -> GammaStar:
    if len(gammas) != len(verdicts):
        raise ContractViolation("one verdict per gamma is required")
    if not gammas:
        raise ContractViolation("empty sweep")
    if not _strictly_increasing(list(gammas)):
        raise ContractViolation("sweep gammas must be strictly increasing")

    first_bad = next((i for i, v in enumerate(verdicts) if v is not Verdict.STABLE), None)
    if first_bad is None:
        return GammaStar(value=float(gammas[-1]), sweep_limited=True)

    value = float(gammas[first_bad - 1]) if first_bad > 0 else 0.0
    recovered: List[float] = [
        float(g) for g, v in zip(gammas[first_bad + 1 :], verdicts[first_bad + 1 :])
        if v is Verdict.STABLE
    ]
    if recovered:
        LOGGER.warning(
            "stable verdicts above a saturated point; keeping the conservative gamma*",
            extra={"fields": {"gamma_star": value, "stable_above": recovered}},
        )
    return GammaStar(value=value, non_monotone=bool(recovered))
