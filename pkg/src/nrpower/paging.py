"""Idle/Inactive-mode paging with optional early paging indication (EPI).

Each UE wakes ahead of its paging occasion (PO) to re-acquire sync on SSB
bursts, then decodes paging DCI. With EPI the UE first decodes a short
indication and, when it is not addressed, goes back to sleep without the
PO and without the remaining SSB bursts. A tracking RS configured for idle
UEs replaces the SSB pre-sync altogether.

Every PO of every UE counts as one wake-up episode, paged or not.
"""
from __future__ import annotations

import enum
import random
from collections import deque
from dataclasses import dataclass, field

from .link import LinkConfig, Outcome, PacketFate, SinrClass, SinrProfile, draw_sinr_profiles
from .rrc import RrcConfig, RrcState, UeRrc, rrc_transition
from .sim import TICKS_PER_MS, TTI_SYMBOLS, Engine, Event, EventKind, IntervalLog, Stream, ms_to_ticks, rng_stream
from .traffic import ArrivalProcess, Direction, Packet


class EpiMode(enum.Enum):
    NONE = "none"
    COMMON = "common"
    GROUPED = "grouped"


class EpiOutcome(enum.Enum):
    MONITOR_PO = "monitor"
    SKIP_PO = "skip"


@dataclass
class PagingConfig:
    po_period_ms: float = 320.0
    epi_mode: EpiMode = EpiMode.NONE
    num_groups: int = 8
    # EPI occasion lead before the PO
    epi_lead_ms: float = 5.0
    idle_rs: bool = False
    ssb_period_ms: float = 20.0
    ssb_active_ms: float = 2.0
    low_wake_ahead_ms: float = 80.0
    low_num_ssbs: int = 3
    rs_sync_ms: float = 1.0
    epi_decode_ms: float = 0.5
    po_decode_ms: float = 2.0
    page_rate_per_s: float = 0.08
    initial_state: RrcState = RrcState.INACTIVE

    def validate(self) -> None:
        if self.po_period_ms <= 0 or self.ssb_period_ms <= 0:
            raise ValueError("paging periods must be > 0")
        if self.num_groups < 1:
            raise ValueError("paging.num_groups must be >= 1")
        if self.low_num_ssbs < 1:
            raise ValueError("paging.low_num_ssbs must be >= 1")
        if not 0 < self.epi_decode_ms <= self.po_decode_ms:
            raise ValueError("paging.epi_decode_ms must be in (0, po_decode_ms]")
        if self.ssb_active_ms <= 0 or self.rs_sync_ms <= 0:
            raise ValueError("paging sync durations must be > 0")
        if self.initial_state is RrcState.CONNECTED:
            raise ValueError("paging.initial_state must be inactive or idle")
        if self.page_rate_per_s < 0:
            raise ValueError("paging.page_rate_per_s must be >= 0")
        wake = max(self.low_wake_ahead_ms, self.epi_lead_ms + self.rs_sync_ms)
        if wake >= self.po_period_ms:
            raise ValueError("paging wake-ahead must be shorter than the PO period")
        if self.epi_mode is not EpiMode.NONE and not self.idle_rs:
            if self.epi_lead_ms < self.ssb_active_ms:
                raise ValueError("paging.epi_lead_ms leaves no room for a sync burst before EPI")


def ssb_presync_plan(profile: SinrProfile, cfg: PagingConfig) -> tuple[float, int]:
    """(wake-ahead ms, SSB bursts) needed before a PO without EPI/RS help."""
    if cfg.idle_rs:
        return cfg.epi_lead_ms + cfg.rs_sync_ms, 0
    if profile.sinr_class is SinrClass.LOW:
        return cfg.low_wake_ahead_ms, cfg.low_num_ssbs
    return cfg.ssb_period_ms, 1


def assign_groups(rng: random.Random, num_ues: int, num_groups: int) -> list[int]:
    return [rng.randrange(num_groups) for _ in range(num_ues)]


def epi_outcome(ue: int, paged: set[int], group: list[int] | None, mode: EpiMode) -> EpiOutcome:
    """Monitor the PO when the indication may concern this UE.

    Common EPI fires for any page in the PO, grouped EPI only for a page in
    the UE's own group. A paged UE always sees its indication.
    """
    if mode is EpiMode.NONE:
        return EpiOutcome.MONITOR_PO
    if not paged:
        return EpiOutcome.SKIP_PO
    if mode is EpiMode.COMMON or group is None:
        return EpiOutcome.MONITOR_PO
    mine = group[ue]
    if any(group[p] == mine for p in paged):
        return EpiOutcome.MONITOR_PO
    return EpiOutcome.SKIP_PO


@dataclass
class WakeUp:
    """One wake-up episode: receiver-on pieces from first sync to the end
    of PO processing or, for a paged UE, to payload delivery."""
    ue_id: int
    po: int
    paged: bool
    monitored: bool
    pieces: list[tuple[int, int, int]] = field(default_factory=list)
    payload_delivered: int | None = None
    closed: bool = False

    def add(self, start: int, end: int, level: int = 1) -> None:
        if end > start:
            self.pieces.append((start, end, level))

    @property
    def start(self) -> int:
        return min(p[0] for p in self.pieces)

    @property
    def end(self) -> int:
        return max(p[1] for p in self.pieces)

    @property
    def active_ticks(self) -> int:
        return sum(e - s for s, e, _ in self.pieces)


def _ssb_instants_from(t: int, period: int, n: int) -> list[int]:
    first = -(-t // period) * period
    return [first + k * period for k in range(n)]


def presync_pieces(profile: SinrProfile, po: int, outcome: EpiOutcome, cfg: PagingConfig,
                   mode: EpiMode) -> list[tuple[int, int]]:
    """Receiver-on pieces before and at the PO, for one UE and one PO."""
    period = ms_to_ticks(cfg.ssb_period_ms)
    ssb = ms_to_ticks(cfg.ssb_active_ms)
    po_t = ms_to_ticks(cfg.po_decode_ms)
    epi_t = ms_to_ticks(cfg.epi_decode_ms)
    lead = ms_to_ticks(cfg.epi_lead_ms)
    pieces: list[tuple[int, int]] = []
    wake, n_ssb = ssb_presync_plan(profile, cfg)

    if cfg.idle_rs:
        rs = ms_to_ticks(cfg.rs_sync_ms)
        epi_at = po - lead
        pieces.append((epi_at - rs, epi_at))
        if mode is EpiMode.NONE:
            pieces.append((po, po + po_t))
        elif outcome is EpiOutcome.SKIP_PO:
            pieces.append((epi_at, epi_at + epi_t))
        else:
            # EPI decode counts against the PO decode budget
            pieces.append((epi_at, epi_at + epi_t))
            pieces.append((po, po + po_t - epi_t))
        return pieces

    if mode is EpiMode.NONE:
        for s in _ssb_instants_from(po - ms_to_ticks(wake), period, n_ssb):
            pieces.append((s, s + ssb))
        pieces.append((po, po + po_t))
        return pieces

    # EPI without RS: sync on the last burst that completes before the EPI
    # occasion, decode EPI, and only continue when the PO must be read.
    epi_at = po - lead
    first = ((epi_at - ssb) // period) * period
    pieces.append((first, first + ssb))
    pieces.append((epi_at, epi_at + epi_t))
    if outcome is EpiOutcome.SKIP_PO:
        return pieces
    for s in _ssb_instants_from(epi_at + epi_t, period, n_ssb - 1):
        if s + ssb <= po:
            pieces.append((s, s + ssb))
    pieces.append((po, po + po_t - epi_t))
    return pieces


class PoAction(enum.Enum):
    START_RESUME = "resume"
    BACK_TO_SLEEP = "sleep"


def process_po(ue: int, paged: set[int]) -> PoAction:
    return PoAction.START_RESUME if ue in paged else PoAction.BACK_TO_SLEEP


def wake_up_time(episode: WakeUp) -> float:
    return episode.active_ticks / TICKS_PER_MS


@dataclass
class _PagingUe:
    ue_id: int
    rrc: UeRrc
    pending: deque = field(default_factory=deque)
    busy: bool = False


class PagingCell:
    """Idle/Inactive UEs of one cell receiving DL pages at their POs."""

    def __init__(self, *, seed: int, cell: int, num_ues: int, stop_at: int, link: LinkConfig,
                 paging: PagingConfig, rrc: RrcConfig, access_ms: float,
                 dl_pipeline_symbols: int, size_bytes: int = 50,
                 engine: Engine | None = None, packet_id_base: int = 0):
        self.engine = engine or Engine()
        self.cfg = paging
        self.link = link
        self.rrc_cfg = rrc
        self.size_bytes = size_bytes
        self.access_ticks = ms_to_ticks(access_ms)
        self.dl_pipeline = dl_pipeline_symbols
        self.profiles = draw_sinr_profiles(rng_stream(seed, Stream.DROP, cell), num_ues, link)
        self.link_rng = rng_stream(seed, Stream.LINK, cell)
        self.groups = assign_groups(rng_stream(seed, Stream.GROUPING, cell), num_ues,
                                    paging.num_groups)
        self.ues = [_PagingUe(u, UeRrc(u, paging.initial_state,
                                       paging.initial_state is RrcState.INACTIVE))
                    for u in range(num_ues)]
        self.logs = [IntervalLog() for _ in range(num_ues)]
        self.arrivals = [
            ArrivalProcess(rng_stream(seed, Stream.PAGING, cell, u), paging.page_rate_per_s,
                           stop_at)
            for u in range(num_ues)
        ]
        self.packets: list[Packet] = []
        self.episodes: list[WakeUp] = []
        self.violations: list[str] = []
        self._fates: dict[int, PacketFate] = {}
        self._next_pid = packet_id_base
        self.po_period = ms_to_ticks(paging.po_period_ms)
        self.stop_at = stop_at
        self.false_alarms = 0

        e = self.engine
        e.on(EventKind.PACKET_ARRIVAL, self._on_page_arrival)
        e.on(EventKind.PAGING_OCCASION, self._on_po)
        e.on(EventKind.RACH_STEP, self._on_access_done)
        e.on(EventKind.HARQ_FEEDBACK, self._on_feedback)
        e.on(EventKind.RRC_TIMER_EXPIRY, self._on_suspend)
        for u, proc in enumerate(self.arrivals):
            t = proc.next_arrival()
            if t is not None:
                e.schedule(t, EventKind.PACKET_ARRIVAL, u)
        if self.po_period <= stop_at:
            e.schedule(self.po_period, EventKind.PAGING_OCCASION)

    def _on_page_arrival(self, ev: Event) -> None:
        u = ev.payload
        now = self.engine.now
        pkt = Packet(self._next_pid, u, Direction.DL, self.size_bytes, now)
        self._next_pid += 1
        self.packets.append(pkt)
        self._fates[pkt.id] = PacketFate(self.link_rng, self.link.max_harq_attempts)
        self.ues[u].pending.append(pkt)
        t = self.arrivals[u].next_arrival()
        if t is not None:
            self.engine.schedule(t, EventKind.PACKET_ARRIVAL, u)

    def _on_po(self, ev: Event) -> None:
        now = self.engine.now
        mode = self.cfg.epi_mode
        listening = [ue for ue in self.ues if ue.rrc.state is not RrcState.CONNECTED]
        paged = {ue.ue_id for ue in listening if ue.pending}
        for ue in listening:
            u = ue.ue_id
            is_paged = u in paged
            outcome = epi_outcome(u, paged, self.groups, mode)
            if is_paged and outcome is not EpiOutcome.MONITOR_PO:
                self.violations.append(f"paged UE {u} skipped PO at {now}")
            ep = WakeUp(u, now, is_paged, outcome is EpiOutcome.MONITOR_PO)
            for s, e in presync_pieces(self.profiles[u], now, outcome, self.cfg, mode):
                ep.add(s, e)
            if ep.monitored and not is_paged:
                self.false_alarms += 1
            self.episodes.append(ep)
            action = process_po(u, paged) if ep.monitored else PoAction.BACK_TO_SLEEP
            ep.closed = action is PoAction.BACK_TO_SLEEP
            if action is PoAction.START_RESUME:
                ue.busy = True
                self.engine.schedule(ep.end, EventKind.RACH_STEP, (ue, ep))
            else:
                for s, e, lvl in ep.pieces:
                    self.logs[u].add(s, e, lvl)
        nxt = now + self.po_period
        if nxt <= self.stop_at:
            self.engine.schedule(nxt, EventKind.PAGING_OCCASION)

    def _on_access_done(self, ev: Event) -> None:
        ue, ep = ev.payload
        now = self.engine.now
        if ue.rrc.state is RrcState.CONNECTED:
            # access finished; start DL delivery of everything pending
            self._send(ue, ep, now, 1)
            return
        delay = self.access_ticks + rrc_transition(ue.rrc, RrcState.CONNECTED, self.rrc_cfg)
        ep.add(now, now + delay)
        self.engine.schedule(now + delay, EventKind.RACH_STEP, (ue, ep))

    def _send(self, ue: _PagingUe, ep: WakeUp, data_at: int, attempt: int) -> None:
        end = data_at + self.dl_pipeline
        ep.add(data_at, data_at + TTI_SYMBOLS, 2)
        ep.add(data_at + TTI_SYMBOLS, end, 1)
        self.engine.schedule(end, EventKind.HARQ_FEEDBACK, (ue, ep, data_at, attempt))

    def _on_feedback(self, ev: Event) -> None:
        ue, ep, data_at, attempt = ev.payload
        now = self.engine.now
        head = ue.pending[0]
        fate = self._fates[head.id]
        if fate.outcome(self.profiles[ue.ue_id], attempt, self.link) is Outcome.NACK:
            if attempt < self.link.max_harq_attempts:
                nxt = data_at + self.link.harq_rtt_symbols
                ep.add(now, nxt)
                self._send(ue, ep, nxt, attempt + 1)
                return
            outcome_lost = True
        else:
            outcome_lost = False
        # one transport block carries every page queued at PO time
        while ue.pending and ue.pending[0].arrival <= ep.po:
            p = ue.pending.popleft()
            self._fates.pop(p.id, None)
            if outcome_lost:
                p.lost = True
            else:
                p.delivered = now
            p.harq_attempts = attempt
        ep.payload_delivered = None if outcome_lost else now
        ep.closed = True
        for s, e, lvl in ep.pieces:
            self.logs[ue.ue_id].add(s, e, lvl)
        suspend_at = now + ms_to_ticks(self.rrc_cfg.suspend_inactivity_ms)
        self.logs[ue.ue_id].add(now, suspend_at, 1)
        self.engine.schedule(suspend_at, EventKind.RRC_TIMER_EXPIRY, ue)

    def _on_suspend(self, ev: Event) -> None:
        ue = ev.payload
        rrc_transition(ue.rrc, RrcState.INACTIVE, self.rrc_cfg)
        if self.cfg.initial_state is RrcState.IDLE:
            rrc_transition(ue.rrc, RrcState.IDLE, self.rrc_cfg)
        ue.busy = False

    def run(self, end: int) -> int:
        return self.engine.run_until(end)
