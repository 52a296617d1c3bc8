"""Downlink grant pipeline: PDCCH occasions, proportional-fair ordering,
cross-slot offsets, PDCCH skipping and PDSCH/HARQ delivery."""
from __future__ import annotations

import enum
import math
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .link import LinkConfig, Outcome, PacketFate, SinrProfile, draw_sinr_profiles
from .rrc import DrxConfig, DrxState
from .sim import (TTI_SYMBOLS, Engine, Event, EventKind, IntervalLog, Stream, rng_stream,
                  slots_to_ticks)
from .traffic import ArrivalProcess, Direction, Packet

PF_EPSILON = 1e-9


class PolicyKind(enum.Enum):
    INSTANT = "instant"
    FIXED = "fixed"
    DYNAMIC = "dynamic"


@dataclass
class SchedulingPolicy:
    """Grant-to-data offset rule plus optional PDCCH skipping.

    ``skip_slots == 0`` disables skipping; otherwise the policy is the
    skipping variant layered on ``kind``.
    """

    kind: PolicyKind = PolicyKind.INSTANT
    k_min_symbols: int = 14
    k_max_symbols: int = 56
    skip_slots: int = 0
    skip_fraction: float = 1.0

    def validate(self) -> None:
        if self.k_min_symbols < 0:
            raise ValueError("scheduler.k_min_symbols must be >= 0")
        if self.kind is PolicyKind.DYNAMIC and self.k_max_symbols < self.k_min_symbols:
            raise ValueError("scheduler.k_max_symbols must be >= k_min_symbols")
        if self.skip_slots < 0:
            raise ValueError("scheduler.skip_slots must be >= 0 (0 disables skipping)")
        if not 0 <= self.skip_fraction <= 1:
            raise ValueError("scheduler.skip_fraction must be in [0, 1]")

    @property
    def skipping(self) -> bool:
        return self.skip_slots >= 1

    def data_offset(self, rng: random.Random) -> int:
        if self.kind is PolicyKind.INSTANT:
            return 0
        if self.kind is PolicyKind.FIXED:
            return self.k_min_symbols
        return rng.randint(self.k_min_symbols, self.k_max_symbols)


@dataclass
class PdcchGrid:
    period_symbols: int = TTI_SYMBOLS
    capacity_grants_per_occasion: int = 2

    def validate(self) -> None:
        if self.period_symbols < 1:
            raise ValueError("scheduler.pdcch_period_symbols must be >= 1")
        if self.capacity_grants_per_occasion < 1:
            raise ValueError("scheduler.grants_per_occasion must be >= 1")

    def next_occasion(self, t: int) -> int:
        p = self.period_symbols
        return -(-t // p) * p


@dataclass
class SchedulerConfig:
    policy: SchedulingPolicy = field(default_factory=SchedulingPolicy)
    grid: PdcchGrid = field(default_factory=PdcchGrid)
    sched_delay_symbols: int = 4
    ue_decode_symbols: int = 4
    pf_alpha: float = 0.01

    def validate(self, link: LinkConfig | None = None) -> None:
        self.policy.validate()
        self.grid.validate()
        if self.sched_delay_symbols < 0 or self.ue_decode_symbols < 0:
            raise ValueError("scheduler processing delays must be >= 0")
        if not 0 < self.pf_alpha <= 1:
            raise ValueError("scheduler.pf_alpha must be in (0, 1]")
        if link is not None and link.harq_rtt_symbols < TTI_SYMBOLS + self.ue_decode_symbols:
            raise ValueError(
                "link.harq_rtt_symbols must cover one TTI plus UE decode "
                f"({TTI_SYMBOLS + self.ue_decode_symbols} symbols)"
            )

    @property
    def feedback_delay(self) -> int:
        """Data start to ACK/NACK: one TTI on air plus UE decode."""
        return TTI_SYMBOLS + self.ue_decode_symbols


@dataclass
class UeSchedState:
    ue_id: int
    avg_throughput: float = 1.0
    dl_queue: deque = field(default_factory=deque)
    skip_until: int | None = None
    skipping_enabled: bool = False
    in_flight: int = 0
    drx: DrxState | None = None

    def skipping_at(self, now: int) -> bool:
        return self.skip_until is not None and self.skip_until > now


def instantaneous_rate(profile: SinrProfile) -> float:
    """Shannon rate per Hz for the UE's mean SINR (static drop)."""
    return math.log2(1.0 + 10 ** (profile.mean_sinr_db / 10.0))


def pf_order(ues: Iterable[UeSchedState], profiles: Sequence[SinrProfile] | dict,
             rates: dict[int, float] | None = None) -> list[UeSchedState]:
    """Backlogged UEs sorted by rate / avg throughput, descending; ties by ue_id."""
    def rate(ue: UeSchedState) -> float:
        if rates is not None:
            return rates[ue.ue_id]
        return instantaneous_rate(profiles[ue.ue_id])

    backlogged = [u for u in ues if u.dl_queue]
    return sorted(backlogged,
                  key=lambda u: (-rate(u) / max(u.avg_throughput, PF_EPSILON), u.ue_id))


def on_pdcch_occasion(now: int, policy: SchedulingPolicy, grid: PdcchGrid,
                      ues: Iterable[UeSchedState], profiles, offset_rng: random.Random,
                      ready_at: int | None = None, rates: dict[int, float] | None = None,
                      ) -> list[tuple[int, int, int]]:
    """Issue up to `capacity` grants in PF order.

    Returns (ue_id, packet_id, data_at). A UE is eligible when not inside a
    skipping window, reachable under DRX, and its head packet has cleared
    the gNB scheduling delay (head.arrival <= ready_at, default now).
    Granted packets are popped from the queues.
    """
    if now % grid.period_symbols:
        raise ValueError(f"tick {now} is not on the PDCCH grid")
    cutoff = now if ready_at is None else ready_at
    eligible = [
        u for u in ues
        if u.dl_queue
        and not u.skipping_at(now)
        and (u.drx is None or u.drx.is_active(now))
        and u.dl_queue[0].arrival <= cutoff
    ]
    grants = []
    for ue in pf_order(eligible, profiles, rates)[: grid.capacity_grants_per_occasion]:
        pkt = ue.dl_queue.popleft()
        grants.append((ue.ue_id, pkt.id, now + policy.data_offset(offset_rng)))
    return grants


def apply_skipping(ue: UeSchedState, now: int, skip_slots: int) -> int:
    if skip_slots < 1:
        raise ValueError("skip_slots must be >= 1")
    ue.skip_until = now + slots_to_ticks(skip_slots)
    return ue.skip_until


@dataclass
class _Tx:
    packet: Packet
    fate: PacketFate
    data_at: int
    attempt: int = 1


class DownlinkCell:
    """One cell of connected-mode UEs with DL FTP3 traffic.

    PDCCH occasions are only materialised when some UE could be granted;
    an idle cell costs no events.
    """

    def __init__(self, *, seed: int, cell: int, num_ues: int, rate: float, size_bytes: int,
                 stop_at: int, link: LinkConfig, sched: SchedulerConfig,
                 drx: DrxConfig | None = None, engine: Engine | None = None,
                 packet_id_base: int = 0):
        self.engine = engine or Engine()
        self.link = link
        self.sched = sched
        self.size_bits = size_bytes * 8
        self.size_bytes = size_bytes
        self.profiles = draw_sinr_profiles(rng_stream(seed, Stream.DROP, cell), num_ues, link)
        self.rates = {p.ue_id: instantaneous_rate(p) for p in self.profiles}
        self.link_rng = rng_stream(seed, Stream.LINK, cell)
        self.offset_rng = rng_stream(seed, Stream.OFFSET, cell)
        skip_rng = rng_stream(seed, Stream.SKIP, cell)
        self.logs = [IntervalLog() for _ in range(num_ues)]
        self.ues = []
        for ue in range(num_ues):
            st = UeSchedState(ue)
            st.skipping_enabled = sched.policy.skipping and skip_rng.random() < sched.policy.skip_fraction
            if drx is not None and drx.enabled:
                st.drx = DrxState(ue, drx, self.engine, self.logs[ue])
            self.ues.append(st)
        self.arrivals = [
            ArrivalProcess(rng_stream(seed, Stream.TRAFFIC, cell, ue), rate, stop_at)
            for ue in range(num_ues)
        ]
        self.packets: list[Packet] = []
        self._next_pid = packet_id_base
        self._tx: dict[int, _Tx] = {}
        self._pending_pdcch: Event | None = None
        self._last_pdcch = -1
        self.grant_log: list[tuple[int, int, int]] = []  # (tick, ue_id, attempt)
        self.violations: list[str] = []
        self.skip_log: list[tuple[int, int, int]] = []  # (ue_id, start, end)

        e = self.engine
        e.on(EventKind.PACKET_ARRIVAL, self._on_arrival)
        e.on(EventKind.PDCCH_OCCASION, self._on_pdcch)
        e.on(EventKind.HARQ_FEEDBACK, self._on_feedback)
        e.on(EventKind.DRX_TIMER_EXPIRY, lambda ev: ev.payload.on_expiry(ev))
        e.on(EventKind.MEASUREMENT_FLUSH, self._on_skip_end)
        for ue, proc in enumerate(self.arrivals):
            t = proc.next_arrival()
            if t is not None:
                e.schedule(t, EventKind.PACKET_ARRIVAL, ue)
        for st in self.ues:
            if st.skipping_enabled:
                self._start_skip(st, 0)

    # -- events -----------------------------------------------------------

    def _on_arrival(self, ev: Event) -> None:
        ue = ev.payload
        now = self.engine.now
        pkt = Packet(self._next_pid, ue, Direction.DL, self.size_bytes, now)
        self._next_pid += 1
        self.packets.append(pkt)
        self._tx[pkt.id] = _Tx(pkt, PacketFate(self.link_rng, self.link.max_harq_attempts), -1)
        self.ues[ue].dl_queue.append(pkt)
        t = self.arrivals[ue].next_arrival()
        if t is not None:
            self.engine.schedule(t, EventKind.PACKET_ARRIVAL, ue)
        self._request_pdcch(self._eligible_from(self.ues[ue]))

    def _on_pdcch(self, ev: Event) -> None:
        self._pending_pdcch = None
        now = self.engine.now
        self._last_pdcch = now
        sched = self.sched
        grants = on_pdcch_occasion(now, sched.policy, sched.grid, self.ues, self.profiles,
                                   self.offset_rng, ready_at=now - sched.sched_delay_symbols,
                                   rates=self.rates)
        granted = set()
        for ue, pid, data_at in grants:
            tx = self._tx[pid]
            tx.data_at = data_at
            self._issue(self.ues[ue], tx, now)
            granted.add(ue)
        alpha = sched.pf_alpha
        for st in self.ues:
            served = self.size_bits if st.ue_id in granted else 0.0
            st.avg_throughput = (1 - alpha) * st.avg_throughput + alpha * served
        self._request_pdcch(min((self._eligible_from(u) for u in self.ues if u.dl_queue),
                                default=None), after=now)

    def _issue(self, st: UeSchedState, tx: _Tx, grant_at: int) -> None:
        self.grant_log.append((grant_at, st.ue_id, tx.attempt))
        if st.skipping_at(grant_at):
            self.violations.append(f"grant to UE {st.ue_id} inside skip window at {grant_at}")
        if st.drx is not None:
            if not st.drx.is_active(grant_at):
                self.violations.append(f"grant to UE {st.ue_id} during DRX sleep at {grant_at}")
            else:
                st.drx.on_grant(grant_at)
        st.in_flight += 1
        tx.packet.harq_attempts = tx.attempt
        self.logs[st.ue_id].add(tx.data_at, tx.data_at + TTI_SYMBOLS, 2)
        self.engine.schedule(tx.data_at + self.sched.feedback_delay, EventKind.HARQ_FEEDBACK,
                             (st, tx))

    def _on_feedback(self, ev: Event) -> None:
        st, tx = ev.payload
        now = self.engine.now
        st.in_flight -= 1
        if tx.fate.outcome(self.profiles[st.ue_id], tx.attempt, self.link) is Outcome.ACK:
            tx.packet.delivered = now
            del self._tx[tx.packet.id]
        elif tx.attempt >= self.link.max_harq_attempts:
            tx.packet.lost = True
            del self._tx[tx.packet.id]
        else:
            # the retransmission grant is sent with the data, one HARQ RTT after
            # the previous attempt; it does not take PDCCH occasion capacity
            tx.attempt += 1
            tx.data_at += self.link.harq_rtt_symbols
            self._issue(st, tx, tx.data_at)
            return
        if st.skipping_enabled and not st.dl_queue and st.in_flight == 0:
            self._start_skip(st, now)

    def _start_skip(self, st: UeSchedState, now: int) -> None:
        until = apply_skipping(st, now, self.sched.policy.skip_slots)
        self.skip_log.append((st.ue_id, now, until))
        self.engine.schedule(until, EventKind.MEASUREMENT_FLUSH, st)

    def _on_skip_end(self, ev: Event) -> None:
        st = ev.payload
        now = self.engine.now
        if st.skip_until != now:
            return
        if st.dl_queue:
            self._request_pdcch(self._eligible_from(st))
        elif not st.in_flight:
            self._start_skip(st, now)

    # -- helpers ----------------------------------------------------------

    def _eligible_from(self, st: UeSchedState) -> int:
        t = max(st.dl_queue[0].arrival + self.sched.sched_delay_symbols, self.engine.now)
        if st.skip_until is not None:
            t = max(t, st.skip_until)
        if st.drx is not None:
            t = st.drx.next_active_start(t)
        return t

    def _request_pdcch(self, t: int | None, after: int | None = None) -> None:
        if t is None:
            return
        if after is not None:
            t = max(t, after + 1)
        # one occasion per grid tick, even if a same-tick event asks again
        t = max(t, self._last_pdcch + 1)
        g = self.sched.grid.next_occasion(t)
        pending = self._pending_pdcch
        if pending is not None:
            if pending.fire_at <= g:
                return
            pending.cancel()
        self._pending_pdcch = self.engine.schedule(g, EventKind.PDCCH_OCCASION)

    # -- results ----------------------------------------------------------

    def run(self, end: int) -> int:
        return self.engine.run_until(end)

    def finalize_logs(self, horizon: int) -> list[IntervalLog]:
        """Add the always-on / onDuration monitoring to the activity logs."""
        for st, log in zip(self.ues, self.logs):
            if st.drx is None:
                log.add(0, horizon, 1)
            else:
                st.drx.log_on_durations(horizon)
        return self.logs
