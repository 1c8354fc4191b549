from __future__ import annotations

from pathlib import Path
from typing import Any, Callable, Dict, List

import click
from rich.console import Console
from rich.table import Table

from torsim.core.config import (
    FLAG_SETTERS,
    apply_overrides,
    load_config,
    parse_gamma_list,
    sim_config_from,
)
from torsim.core.errors import ConfigError, TorsimError
from torsim.core.geometry.topology import TorusShape, torus_distance
from torsim.core.harness.aggregate import RunOutcome, run_row, summarize
from torsim.core.harness.report import write_csv, write_packets
from torsim.core.harness.saturation import SaturationThresholds, judge
from torsim.core.harness.sweep import run_sweep, sweep_spec_from
from torsim.core.observability.logging import configure_logging
from torsim.core.routing.idn import OidnCover, Policy, candidate_set, nu_link_coverage
from torsim.core.sim.engine import Simulation
from torsim.core.sim.traffic import gamma0_rate

console = Console()


class ConfigClickError(click.ClickException):
    exit_code = 2


class IncompleteSweepError(click.ClickException):
    exit_code = 3


def _apply(options: List[Callable]) -> Callable:
    def decorator(fn: Callable) -> Callable:
        for option in reversed(options):
            fn = option(fn)
        return fn

    return decorator


SHAPE_OPTIONS = [
    click.option("--config", "config_path", type=click.Path(path_type=Path)),
    click.option("--k", type=int, default=None, help="Nodes per dimension of a 3D torus"),
    click.option("--dims", default=None, help="Explicit shape, e.g. 8,8,8 or 16x8x8"),
    click.option("--pattern-shape", default=None, help="Shape used for transposition traffic"),
    click.option("--policy", default=None, help="abr, por or ofr (comma list for sweep)"),
    click.option("--delta", type=int, default=None, help="Outflank distance"),
    click.option("--oidn-cover", type=click.Choice(["reduced", "full"]), default=None),
    click.option("--ofr-include-widns/--ofr-exclude-widns", default=None),
    click.option("--log-format", type=click.Choice(["json", "plain"]), default=None),
    click.option("--log-level", default=None),
]

SIM_OPTIONS = SHAPE_OPTIONS + [
    click.option("--pattern", default=None, help="Traffic pattern (comma list for sweep)"),
    click.option("--gamma", default=None, help="Offered load: 0.5, 0.1,0.2 or 0.05:1.0:0.05"),
    click.option("--eta", default=None, help="Minimality weight (default 2.0 OFR, 1.0 POR)"),
    click.option("--capacity", type=int, default=None, help="Packets per virtual channel"),
    click.option("--abr-two-vcs/--abr-three-vcs", default=None),
    click.option("--packet-size", type=int, default=None, help="Packet size in bytes"),
    click.option("--message-size", type=int, default=None, help="Packets per message"),
    click.option("--lat-int", default=None, help="Generator/sink link latency, e.g. 80ns"),
    click.option("--bw-int", default=None, help="Generator/sink bandwidth, e.g. 64Gb/s"),
    click.option("--lat-ext", default=None, help="Router link latency, e.g. 200ns"),
    click.option("--bw-ext", default=None, help="Router link bandwidth, e.g. 20Gb/s"),
    click.option("--seed", type=int, default=None),
    click.option("--seeds", default=None, help="Replicate seeds for sweep, e.g. 1,2,3"),
    click.option("--warmup", default=None, help="Warmup duration, e.g. 500us"),
    click.option("--measure", default=None, help="Measurement duration, e.g. 2ms"),
    click.option("--workers", type=int, default=None, help="Parallel runs for sweep"),
    click.option("--out", default=None, help="CSV output path"),
    click.option("--emit-packets", default=None, help="NDJSON per-packet output path"),
]


def _load(config_path: Path | None, options: Dict[str, Any]) -> Dict[str, Any]:
    flags = {
        name.replace("_", "-"): value
        for name, value in options.items()
        if name.replace("_", "-") in FLAG_SETTERS
    }
    try:
        config = apply_overrides(load_config(config_path), flags)
    except ConfigError as exc:
        raise ConfigClickError(str(exc)) from exc
    configure_logging(config)
    return config


def _fmt(value: float | None, digits: int = 1) -> str:
    return "-" if value is None else f"{value:,.{digits}f}"


@click.group()
def cli() -> None:
    """Torus interconnect routing simulator."""


@cli.command("run")
@_apply(SIM_OPTIONS)
def run_command(config_path: Path | None, **options: Any) -> None:
    """Simulate one configuration and report lifetimes, hops and deroutes."""
    config = _load(config_path, options)
    if options.get("gamma") and len(parse_gamma_list(options["gamma"])) > 1:
        raise ConfigClickError("run takes a single --gamma value; use 'torsim sweep' for lists")
    for name in ("policy", "pattern"):
        if options.get(name) and "," in options[name]:
            raise ConfigClickError(f"run takes a single --{name}; use 'torsim sweep' for lists")
    try:
        cfg = sim_config_from(config)
        simulation = Simulation(cfg)
        gamma0 = gamma0_rate(cfg)
    except ConfigError as exc:
        raise ConfigClickError(str(exc)) from exc

    try:
        result = simulation.run()
    except TorsimError as exc:
        raise click.ClickException(f"Simulation failed: {exc}") from exc

    thresholds = SaturationThresholds.from_config(config)
    verdict = judge(result, thresholds)
    stats = summarize(result)

    table = Table(title=f"torsim run {cfg.key()}", show_header=True)
    table.add_column("Metric", style="cyan")
    table.add_column("Value", style="white", justify="right")
    table.add_row("gamma0 (pkts/s/node)", f"{float(gamma0):,.0f}")
    table.add_row("warmup / end (ns)", f"{result.warmup_ns:,} / {result.end_ns:,}")
    table.add_row("generated", f"{result.generated:,}")
    table.add_row("consumed", f"{result.consumed:,}")
    table.add_row("measured packets", f"{stats.packets:,}")
    table.add_row("local messages", f"{result.local_messages:,}")
    table.add_row("mean lifetime (ns)", _fmt(stats.mean_lifetime_ns))
    table.add_row("median lifetime (ns)", _fmt(stats.median_lifetime_ns))
    table.add_row("p99 lifetime (ns)", _fmt(stats.p99_lifetime_ns))
    table.add_row("mean hops", _fmt(stats.mean_hops, 3))
    table.add_row("derouted via OIDN", f"{stats.frac_oidn:.3f}")
    table.add_row("derouted via WIDN", f"{stats.frac_widn:.3f}")
    table.add_row("derouted total", f"{stats.frac_derouted:.3f}")
    table.add_row("watchdog stalls", str(result.stalls))
    table.add_row("hop violations", str(result.hop_violations))
    table.add_row("verdict", verdict.value)
    if result.trace_digest:
        table.add_row("trace digest", result.trace_digest)
    console.print(table)

    packets_path = config["output"]["packets"]
    if packets_path:
        count = write_packets(result.records, Path(packets_path))
        console.print(f"Wrote {count} packet records to {packets_path}")
    csv_path = config["output"]["csv"]
    if csv_path:
        outcome = RunOutcome(
            policy=cfg.policy,
            pattern=cfg.pattern,
            gamma=float(cfg.gamma),
            seed=cfg.seed,
            verdict=verdict,
            complete=True,
            stats=stats,
        )
        write_csv([run_row(outcome)], Path(csv_path), [f"saturation {thresholds.describe()}"])
        console.print(f"Wrote run row to {csv_path}")


@cli.command("sweep")
@_apply(SIM_OPTIONS)
def sweep_command(config_path: Path | None, **options: Any) -> None:
    """Sweep offered load and report the saturation throughput per policy and pattern."""
    config = _load(config_path, options)
    try:
        spec = sweep_spec_from(config)
    except ConfigError as exc:
        raise ConfigClickError(str(exc)) from exc

    result = run_sweep(spec)

    csv_path = config["output"]["csv"]
    if csv_path:
        write_csv(result.rows, Path(csv_path), spec.header_lines())
        console.print(f"Wrote {len(result.rows)} rows to {csv_path}")

    table = Table(title="Saturation throughput (gamma0 units)", show_header=True)
    table.add_column("Policy", style="magenta")
    table.add_column("Pattern", style="green")
    table.add_column("gamma*", style="cyan", justify="right")
    table.add_column("Derouted (gamma <= gamma*)", justify="right")
    table.add_column("Flags", style="yellow")
    for cell in result.summaries:
        flags = []
        if cell.gamma_star.sweep_limited:
            flags.append("sweep-limited")
        if cell.gamma_star.non_monotone:
            flags.append("non-monotone")
        if not cell.complete:
            flags.append("incomplete")
        table.add_row(
            cell.policy.value,
            cell.pattern.value,
            f"{cell.gamma_star.value:.2f}",
            _fmt(cell.frac_derouted, 3),
            ", ".join(flags) or "-",
        )
    console.print(table)

    if result.incomplete:
        raise IncompleteSweepError(f"{len(result.incomplete)} run(s) did not complete")


def _parse_coord(raw: str, shape: TorusShape) -> tuple[int, ...]:
    try:
        coord = tuple(int(part) for part in raw.replace(" ", "").split(","))
    except ValueError as exc:
        raise ConfigClickError(f"invalid coordinate {raw!r}") from exc
    if not shape.contains(coord):
        raise ConfigClickError(f"coordinate {coord} is outside the torus {shape.dims}")
    return coord


@cli.command("idn")
@_apply(SHAPE_OPTIONS)
@click.option("--source", required=True, help="Source coordinate, e.g. 0,0,0")
@click.option("--dest", required=True, help="Destination coordinate, e.g. 3,5,0")
def idn_command(config_path: Path | None, source: str, dest: str, **options: Any) -> None:
    """List the intermediate destination candidates for one source/destination pair."""
    config = _load(config_path, options)
    shape = TorusShape(tuple(config["network"]["dims"]))
    s = _parse_coord(source, shape)
    t = _parse_coord(dest, shape)
    routing = config["routing"]
    policy = Policy(routing["policy"])
    try:
        candidates = candidate_set(
            s,
            t,
            policy,
            routing["delta"],
            shape,
            include_widns=routing["ofr_include_widns"],
            cover=OidnCover(routing["oidn_cover"]),
        )
    except ConfigError as exc:
        raise ConfigClickError(str(exc)) from exc

    console.print(f"d({s}, {t}) = {torus_distance(s, t, shape)} on {shape.dims} ({policy.value})")
    if not candidates:
        console.print("No intermediate destinations: packets are routed minimally.")
        return
    table = Table(title="Intermediate destination candidates", show_header=True)
    table.add_column("Kind", style="magenta")
    table.add_column("Vector", style="dim")
    table.add_column("IDN", style="green")
    table.add_column("d(s,q)+d(q,t)", justify="right")
    table.add_column("Dilation", style="cyan", justify="right")
    for candidate in candidates:
        table.add_row(
            candidate.kind.family.value,
            str(list(candidate.kind.vector)),
            str(candidate.q),
            str(candidate.total_dist),
            str(candidate.dilation),
        )
    console.print(table)

    missing_s, missing_t = nu_link_coverage(s, t, candidates, shape)
    if missing_s or missing_t:
        console.print(
            "[yellow]![/yellow] Off-path links without a candidate: "
            f"at source {[str(link) for link in missing_s]}, "
            f"at destination {[str(link) for link in missing_t]}"
        )


if __name__ == "__main__":
    cli()
