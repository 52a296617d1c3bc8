"""Batch execution: one replication per (seed, cell), merged outputs."""
from __future__ import annotations

import hashlib
import math
import os
import shutil
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .config import ScenarioConfig, ScenarioKind
from .energy import EnergyLedger, Segment, build_trace, ledger_from_trace
from .metrics import ConservationReport, SampleSeries, ccdf, conservation_audit, outage_latency
from .paging import PagingCell, wake_up_time
from .scheduler import DownlinkCell
from .sim import TICKS_PER_MS, IntervalLog, ms_to_ticks
from .traffic import Packet
from .uplink import UplinkCell


@dataclass
class ReplicationResult:
    replication_id: int
    seed: int
    cell: int
    series: str
    # (global ue id, value in ms); +inf for a lost packet
    samples: list[tuple[int, float]]
    ledgers: list[EnergyLedger]
    audit: ConservationReport
    violations: list[str]
    counters: dict[str, int]
    trace: list[tuple[int, Segment]] | None = None


@dataclass
class BatchResult:
    config: ScenarioConfig
    series: SampleSeries
    replications: list[ReplicationResult]
    audit: ConservationReport
    files: dict[str, str] = field(default_factory=dict)  # name -> sha256
    out_dir: Path | None = None

    @property
    def violations(self) -> list[str]:
        return [v for r in self.replications for v in r.violations]

    def counter(self, name: str) -> int:
        return sum(r.counters.get(name, 0) for r in self.replications)

    @property
    def ledgers(self) -> list[EnergyLedger]:
        return [led for r in self.replications for led in r.ledgers]

    def outage(self, p: float | None = None):
        return outage_latency(self.series.values, p if p is not None else self.config.outage_p)


SERIES_NAME = {
    ScenarioKind.DOWNLINK: "latency",
    ScenarioKind.UPLINK: "latency",
    ScenarioKind.PAGING: "wakeup",
}


def replication_plan(cfg: ScenarioConfig) -> list[tuple[int, int, int]]:
    """(replication_id, seed, cell) in merge order."""
    plan = []
    for seed in cfg.seeds:
        for cell in range(cfg.cells):
            plan.append((len(plan), seed, cell))
    return plan


def _packet_samples(packets: list[Packet], base: int) -> list[tuple[int, float]]:
    out = []
    for p in packets:
        if p.delivered is not None:
            out.append((base + p.ue_id, (p.delivered - p.arrival) / TICKS_PER_MS))
        elif p.lost:
            out.append((base + p.ue_id, math.inf))
    return out


def run_replication(cfg: ScenarioConfig, replication_id: int, seed: int, cell: int,
                    trace: bool = False) -> ReplicationResult:
    stop_at = ms_to_ticks(cfg.duration_s * 1000)
    horizon = stop_at + ms_to_ticks(cfg.drain_s * 1000)
    base = replication_id * cfg.ues_per_cell
    counters: dict[str, int] = {}
    violations: list[str] = []
    logs: list[IntervalLog]

    if cfg.kind is ScenarioKind.DOWNLINK:
        sim = DownlinkCell(
            seed=seed, cell=cell, num_ues=cfg.ues_per_cell,
            rate=cfg.traffic.per_ue_arrival_rate, size_bytes=cfg.traffic.packet_size_bytes,
            stop_at=stop_at, link=cfg.link, sched=cfg.scheduler_config(),
            drx=cfg.drx if cfg.drx.enabled else None,
        )
        sim.run(horizon)
        samples = _packet_samples(sim.packets, base)
        packets = sim.packets
        violations = list(sim.violations)
        counters["grants"] = len(sim.grant_log)
        logs = sim.finalize_logs(horizon)
    elif cfg.kind is ScenarioKind.UPLINK:
        sim = UplinkCell(
            seed=seed, cell=cell, num_ues=cfg.ues_per_cell,
            rate=cfg.traffic.per_ue_arrival_rate, size_bytes=cfg.traffic.packet_size_bytes,
            stop_at=stop_at, link=cfg.link, ul=cfg.uplink, rrc=cfg.rrc,
        )
        sim.run(horizon)
        samples = _packet_samples(sim.packets, base)
        packets = sim.packets
        counters.update(cg_attempts=sim.cg_attempts, cg_collisions=sim.cg_collisions,
                        fallbacks=sim.fallbacks)
        logs = sim.logs
    else:
        sched = cfg.scheduler_config()
        sim = PagingCell(
            seed=seed, cell=cell, num_ues=cfg.ues_per_cell, stop_at=stop_at, link=cfg.link,
            paging=cfg.paging, rrc=cfg.rrc, access_ms=cfg.uplink.four_step_ms,
            dl_pipeline_symbols=sched.sched_delay_symbols + sched.feedback_delay,
            size_bytes=cfg.traffic.packet_size_bytes,
        )
        sim.run(horizon)
        samples = [(base + ep.ue_id, wake_up_time(ep)) for ep in sim.episodes if ep.closed]
        packets = sim.packets
        violations = list(sim.violations)
        counters.update(episodes=len(sim.episodes), false_alarms=sim.false_alarms,
                        paged=sum(ep.paged for ep in sim.episodes))
        logs = sim.logs

    ledgers = []
    trace_rows: list[tuple[int, Segment]] | None = [] if trace else None
    for u, log in enumerate(logs):
        segs = build_trace(log, horizon, cfg.energy)
        ledgers.append(ledger_from_trace(base + u, segs, cfg.energy))
        if trace_rows is not None:
            trace_rows.extend((base + u, s) for s in segs)

    return ReplicationResult(
        replication_id=replication_id, seed=seed, cell=cell, series=SERIES_NAME[cfg.kind],
        samples=samples, ledgers=ledgers, audit=conservation_audit(packets),
        violations=violations, counters=counters, trace=trace_rows,
    )


def _run_task(args: tuple) -> ReplicationResult:
    return run_replication(*args)


def run_batch(cfg: ScenarioConfig, out_dir: str | Path | None = None, trace: bool = False,
              jobs: int = 1) -> BatchResult:
    """Run every replication and, when `out_dir` is given, write the outputs.

    Files appear all at once: they are written to a sibling temp directory
    that replaces `out_dir` only after every file is complete.
    """
    cfg.validate()
    tasks = [(cfg, rid, seed, cell, trace) for rid, seed, cell in replication_plan(cfg)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reps = list(pool.map(_run_task, tasks, chunksize=1))
    else:
        reps = [_run_task(t) for t in tasks]

    series = SampleSeries(SERIES_NAME[cfg.kind])
    for r in reps:
        for ue, v in r.samples:
            series.add(v, r.replication_id, ue)
    audit = ConservationReport(
        *(sum(getattr(r.audit, f) for r in reps)
          for f in ("arrived", "delivered", "lost", "pending", "duplicates"))
    )
    result = BatchResult(cfg, series, reps, audit)
    if out_dir is not None:
        _write_outputs(result, Path(out_dir), trace)
    return result


# -- output files --------------------------------------------------------------

def fmt(v: float) -> str:
    return "inf" if v == math.inf else repr(float(v))


def _samples_csv(series: SampleSeries) -> str:
    lines = ["replication_id,ue_id,value_ms"]
    lines += [f"{r},{u},{fmt(v)}" for (r, u), v in zip(series.keys, series.values)]
    return "\n".join(lines) + "\n"


def _ccdf_csv(series: SampleSeries) -> str:
    lines = ["x_ms,exceedance"]
    lines += [f"{fmt(x)},{fmt(p)}" for x, p in ccdf(series.values)]
    return "\n".join(lines) + "\n"


def energy_rows(ledgers: list[EnergyLedger]) -> list[str]:
    rows = []
    for led in ledgers:
        for label in sorted(led.state_ticks):
            rows.append(f"{led.ue_id},{label},{fmt(led.state_ticks[label] / TICKS_PER_MS)},"
                        f"{fmt(float(led.state_energy[label]))}")
    return rows


def _energy_csv(ledgers: list[EnergyLedger]) -> str:
    return "\n".join(["ue_id,state,duration_ms,energy_units"] + energy_rows(ledgers)) + "\n"


def _trace_csv(reps: list[ReplicationResult]) -> str:
    lines = ["ue_id,start_tick,end_tick,state"]
    for r in reps:
        lines += [f"{u},{s.start},{s.end},{s.label}" for u, s in r.trace or []]
    return "\n".join(lines) + "\n"


def read_trace(path: str | Path) -> dict[int, list[Segment]]:
    out: dict[int, list[Segment]] = {}
    with open(path, encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            u, s, e, label = line.rstrip("\n").split(",")
            out.setdefault(int(u), []).append(Segment(int(s), int(e), label))
    return out


def _manifest(result: BatchResult) -> str:
    cfg = result.config
    lines = [
        f"tool = nrpower {__version__}",
        f"scenario = {cfg.scenario}",
        f"config_sha256 = {cfg.digest()}",
        f"seeds = {','.join(str(s) for s in cfg.seeds)}",
        f"replications = {len(result.replications)}",
        f"samples = {len(result.series)}",
    ]
    if len(result.series):
        rep = result.outage()
        flags = ",".join(rep.flags) or "-"
        lines.append(f"outage_p = {cfg.outage_p!r}")
        lines.append(f"outage_ms = {fmt(rep.value_ms)} [{fmt(rep.ci_low)}, {fmt(rep.ci_high)}] {flags}")
    a = result.audit
    lines.append(f"audit = arrived {a.arrived} delivered {a.delivered} lost {a.lost} "
                 f"pending {a.pending} duplicates {a.duplicates}")
    lines.append(f"violations = {len(result.violations)}")
    for name, digest in result.files.items():
        lines.append(f"file {name} {digest}")
    return "\n".join(lines) + "\n"


def _write_outputs(result: BatchResult, out: Path, trace: bool) -> None:
    name = result.series.name
    contents = {
        f"samples_{name}.csv": _samples_csv(result.series),
        f"ccdf_{name}.csv": _ccdf_csv(result.series),
        "energy.csv": _energy_csv(result.ledgers),
        "config.toml": result.config.echo(),
    }
    if trace:
        contents["trace.csv"] = _trace_csv(result.replications)
    out = out.resolve()
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        for fname, text in contents.items():
            data = text.encode("utf-8")
            (tmp / fname).write_bytes(data)
            result.files[fname] = hashlib.sha256(data).hexdigest()
        (tmp / "manifest.txt").write_text(_manifest(result), encoding="utf-8")
        old = None
        if out.exists():
            old = out.with_name(f".{out.name}.old")
            if old.exists():
                shutil.rmtree(old)
            os.replace(out, old)
        os.replace(tmp, out)
        if old is not None:
            shutil.rmtree(old)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    result.out_dir = out
