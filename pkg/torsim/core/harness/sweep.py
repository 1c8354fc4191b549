from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

from torsim.core.config import sim_config_from
from torsim.core.errors import ConfigError, TorsimError
from torsim.core.geometry.topology import TorusShape
from torsim.core.harness.aggregate import (
    CellSummary,
    RunOutcome,
    RunStats,
    aggregate,
    summarize,
)
from torsim.core.harness.saturation import (
    GammaStar,
    SaturationThresholds,
    Verdict,
    judge,
)
from torsim.core.routing.idn import Policy, require_cover_support
from torsim.core.routing.policy import as_fraction, resolve_eta
from torsim.core.sim.engine import run
from torsim.core.sim.models import Pattern, SimConfig
from torsim.core.sim.traffic import gamma0_rate, validate_pattern

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class SweepSpec:
    base: SimConfig
    gammas: Tuple[float, ...]
    seeds: Tuple[int, ...] = (1,)
    policies: Tuple[Policy, ...] = ()
    patterns: Tuple[Pattern, ...] = ()
    thresholds: SaturationThresholds = field(default_factory=SaturationThresholds)
    eta: Optional[Fraction] = None
    pattern_shape_override: Optional[Tuple[int, ...]] = None
    workers: int = 1

    def __post_init__(self) -> None:
        if not self.gammas:
            raise ConfigError("a sweep needs at least one gamma")
        if any(b <= a for a, b in zip(self.gammas, self.gammas[1:])):
            raise ConfigError("sweep gammas must be strictly increasing")
        if not self.seeds:
            raise ConfigError("a sweep needs at least one seed")
        if not self.policies:
            object.__setattr__(self, "policies", (self.base.policy,))
        if not self.patterns:
            object.__setattr__(self, "patterns", (self.base.pattern,))

    def cells(self) -> List[Tuple[Policy, Pattern]]:
        return [(policy, pattern) for policy in self.policies for pattern in self.patterns]

    def config_for(self, policy: Policy, pattern: Pattern, gamma: float, seed: int) -> SimConfig:
        shape = self.base.shape
        if pattern is Pattern.TRANSPOSE and self.pattern_shape_override:
            shape = TorusShape(self.pattern_shape_override)
        return replace(
            self.base,
            shape=shape,
            policy=policy,
            pattern=pattern,
            gamma=as_fraction(gamma),
            seed=seed,
            eta=resolve_eta(policy, self.eta),
        )

    def check(self) -> None:
        """Fail fast on pattern or shape problems before any run starts."""
        for policy, pattern in self.cells():
            cfg = self.config_for(policy, pattern, self.gammas[0], self.seeds[0])
            require_cover_support(policy, cfg.oidn_cover, cfg.shape)
            validate_pattern(cfg.pattern, cfg.shape)
            gamma0_rate(cfg)

    def run_keys(self) -> List[Tuple[Policy, Pattern, float, int]]:
        return [
            (policy, pattern, gamma, seed)
            for policy, pattern in self.cells()
            for gamma in self.gammas
            for seed in self.seeds
        ]

    def header_lines(self) -> List[str]:
        base = self.base
        return [
            f"shape={'x'.join(str(k) for k in base.shape.dims)} capacity={base.capacity} "
            f"packet_size={base.packet_size_bytes} message_size={base.message_size} "
            f"delta={base.delta}",
            f"saturation {self.thresholds.describe()} subwindows={base.subwindows} "
            f"measure_ns={base.measure_ns}",
            f"seeds={','.join(str(s) for s in self.seeds)}",
        ]


@dataclass
class SweepResult:
    spec: SweepSpec
    outcomes: List[RunOutcome]
    rows: List[Dict[str, Any]]
    summaries: List[CellSummary]

    @property
    def incomplete(self) -> List[RunOutcome]:
        return [o for o in self.outcomes if not o.complete]

    def gamma_stars(self) -> Dict[Tuple[Policy, Pattern], GammaStar]:
        return {(cell.policy, cell.pattern): cell.gamma_star for cell in self.summaries}


def sweep_spec_from(config: Dict[str, Any]) -> SweepSpec:
    sweep = config["sweep"]
    override = config["network"].get("pattern_shape_override")
    eta = config["routing"].get("eta")
    spec = SweepSpec(
        base=sim_config_from(config),
        gammas=tuple(float(g) for g in sweep["gammas"]),
        seeds=tuple(sweep["seeds"]),
        policies=tuple(Policy(p) for p in sweep["policies"]),
        patterns=tuple(Pattern(p) for p in sweep["patterns"]),
        thresholds=SaturationThresholds.from_config(config),
        eta=as_fraction(eta) if eta is not None else None,
        pattern_shape_override=tuple(override) if override else None,
        workers=sweep["workers"],
    )
    spec.check()
    return spec


def execute_run(
    cfg: SimConfig, thresholds: SaturationThresholds, gamma: Optional[float] = None
) -> RunOutcome:
    """Run one point and judge it, extending once when the verdict is inconclusive."""
    label = float(cfg.gamma) if gamma is None else gamma
    extended = False
    try:
        result = run(cfg)
        verdict = judge(result, thresholds)
        if verdict is Verdict.INCONCLUSIVE and thresholds.extend_on_inconclusive:
            LOGGER.info(
                "inconclusive run extended",
                extra={"fields": {"run": cfg.key(), "measure_ns": cfg.measure_ns * 2}},
            )
            result = run(replace(cfg, measure_ns=cfg.measure_ns * 2))
            verdict = judge(result, thresholds)
            extended = True
    except TorsimError as exc:
        LOGGER.error("run failed", extra={"fields": {"run": cfg.key(), "error": str(exc)}})
        return RunOutcome(
            policy=cfg.policy,
            pattern=cfg.pattern,
            gamma=label,
            seed=cfg.seed,
            verdict=Verdict.INCONCLUSIVE,
            complete=False,
            stats=RunStats(),
            extended=extended,
            error=str(exc),
        )

    LOGGER.info(
        "run judged",
        extra={"fields": {"run": cfg.key(), "verdict": verdict.value, "stalls": result.stalls}},
    )
    return RunOutcome(
        policy=cfg.policy,
        pattern=cfg.pattern,
        gamma=label,
        seed=cfg.seed,
        verdict=verdict,
        complete=True,
        stats=summarize(result),
        extended=extended,
    )


def _failed(key: Tuple[Policy, Pattern, float, int], error: str) -> RunOutcome:
    policy, pattern, gamma, seed = key
    return RunOutcome(
        policy=policy,
        pattern=pattern,
        gamma=gamma,
        seed=seed,
        verdict=Verdict.INCONCLUSIVE,
        complete=False,
        stats=RunStats(),
        error=error,
    )


def _run_all(
    spec: SweepSpec, keys: Sequence[Tuple[Policy, Pattern, float, int]]
) -> List[RunOutcome]:
    outcomes: List[RunOutcome] = []
    if spec.workers <= 1:
        for done, key in enumerate(keys, start=1):
            try:
                cfg = spec.config_for(*key)
            except TorsimError as exc:
                outcomes.append(_failed(key, str(exc)))
                continue
            outcomes.append(execute_run(cfg, spec.thresholds, key[2]))
            LOGGER.info("sweep progress", extra={"fields": {"done": done, "total": len(keys)}})
        return outcomes

    with ProcessPoolExecutor(max_workers=spec.workers) as pool:
        futures = {}
        for key in keys:
            try:
                futures[key] = pool.submit(
                    execute_run, spec.config_for(*key), spec.thresholds, key[2]
                )
            except TorsimError as exc:
                outcomes.append(_failed(key, str(exc)))
        for done, (key, future) in enumerate(futures.items(), start=1):
            try:
                outcomes.append(future.result())
            except Exception as exc:  # worker crashed or was killed
                LOGGER.error("sweep worker failed", extra={"fields": {"error": str(exc)}})
                outcomes.append(_failed(key, str(exc)))
            LOGGER.info("sweep progress", extra={"fields": {"done": done, "total": len(keys)}})
    return outcomes


def run_sweep(spec: SweepSpec) -> SweepResult:
    keys = spec.run_keys()
    LOGGER.info(
        "sweep started",
        extra={"fields": {"runs": len(keys), "cells": len(spec.cells()), "workers": spec.workers}},
    )
    outcomes = sorted(_run_all(spec, keys), key=lambda o: o.sort_key)
    rows, summaries = aggregate(outcomes, spec.gammas)
    for cell in summaries:
        LOGGER.info(
            "gamma* measured",
            extra={
                "fields": {
                    "policy": cell.policy.value,
                    "pattern": cell.pattern.value,
                    "gamma_star": cell.gamma_star.value,
                    "sweep_limited": cell.gamma_star.sweep_limited,
                }
            },
        )
    return SweepResult(spec=spec, outcomes=outcomes, rows=rows, summaries=summaries)


def find_gamma_star(spec: SweepSpec) -> Dict[Tuple[Policy, Pattern], GammaStar]:
    return run_sweep(spec).gamma_stars()
