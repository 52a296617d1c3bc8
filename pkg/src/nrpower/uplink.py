"""Uplink transmission paths for Inactive UEs: RRC establishment, configured
grant small data (with preamble contention) and RACH small data."""
from __future__ import annotations

import enum
import random
from collections import deque
from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

from .link import LinkConfig, Outcome, PacketFate, draw_sinr_profiles
from .rrc import RrcConfig, RrcState, UeRrc, rrc_transition
from .sim import TTI_SYMBOLS, Engine, Event, EventKind, IntervalLog, Stream, ms_to_ticks, rng_stream
from .traffic import ArrivalProcess, Direction, Packet


class UplinkModeKind(enum.Enum):
    RRC = "rrc"
    CG = "cg"
    RACH = "rach"


class RachSteps(enum.Enum):
    TWO = "two"
    FOUR = "four"


class CgResult(enum.Enum):
    SUCCESS = "success"
    COLLISION = "collision"


@dataclass
class UplinkConfig:
    mode: UplinkModeKind = UplinkModeKind.RRC
    preamble_pool: int = 4
    dedicated: bool = False
    cg_period_ms: float = 5.0
    rach_period_ms: float = 10.0
    rach_steps: RachSteps = RachSteps.FOUR
    four_step_ms: float = 7.0
    two_step_ms: float = 3.0
    rrc_setup_ms: float = 10.0
    rach_sdt_delta_ms: float = 2.0
    ul_grant_ms: float = 1.0
    gnb_decode_ms: float = 1.0
    max_sdt_attempts: int = 8

    def validate(self, active_ues: int | None = None) -> None:
        if self.preamble_pool < 1:
            raise ValueError("uplink.preamble_pool must be >= 1")
        if self.dedicated and active_ues is not None and self.preamble_pool < active_ues:
            raise ValueError(
                f"uplink.dedicated requires preamble_pool >= active UL UEs ({active_ues})"
            )
        for name in ("cg_period_ms", "rach_period_ms"):
            if getattr(self, name) <= 0:
                raise ValueError(f"uplink.{name} must be > 0")
        for name in ("four_step_ms", "two_step_ms", "rrc_setup_ms", "rach_sdt_delta_ms",
                     "ul_grant_ms", "gnb_decode_ms"):
            if getattr(self, name) < 0:
                raise ValueError(f"uplink.{name} must be >= 0")
        if self.two_step_ms > self.four_step_ms:
            raise ValueError("uplink.two_step_ms must not exceed four_step_ms")
        if self.max_sdt_attempts < 1:
            raise ValueError("uplink.max_sdt_attempts must be >= 1")

    def rach_sdt_exchange_ms(self) -> float:
        """Preamble exchange before the payload is decoded.

        Two-step carries the payload in msgA, so only the fixed delta is
        paid; four-step adds the msg2/msg3 round trip.
        """
        extra = 0.0 if self.rach_steps is RachSteps.TWO else self.four_step_ms - self.two_step_ms
        return self.rach_sdt_delta_ms + extra


def cg_attempt_resolution(attempts: Sequence[tuple[int, int]]) -> dict[int, CgResult]:
    """Success iff the UE's preamble is unique among this occasion's attempts."""
    counts: dict[int, int] = {}
    seen: set[int] = set()
    for ue, preamble in attempts:
        if ue in seen:
            raise ValueError(f"UE {ue} appears twice in one CG occasion")
        seen.add(ue)
        counts[preamble] = counts.get(preamble, 0) + 1
    return {ue: CgResult.SUCCESS if counts[p] == 1 else CgResult.COLLISION
            for ue, p in attempts}


def draw_preambles(rng: random.Random, ues: Sequence[int], pool: int,
                   dedicated: bool) -> list[tuple[int, int]]:
    if dedicated:
        if pool < len(ues):
            raise ValueError("dedicated preambles need pool >= number of UEs")
        return [(ue, ue % pool) for ue in ues]
    return [(ue, rng.randrange(pool)) for ue in ues]


def collision_probability(n: int, pool: int) -> float:
    """Per-UE collision probability with n UEs drawing uniformly from pool."""
    if n <= 1:
        return 0.0
    return 1.0 - (1.0 - 1.0 / pool) ** (n - 1)


def collision_probability_enumerated(n: int, pool: int) -> float:
    """Exact per-UE collision probability by enumerating all pool**n draws."""
    if n <= 1:
        return 0.0
    hits = 0
    total = 0
    for draw in product(range(pool), repeat=n):
        res = cg_attempt_resolution(list(enumerate(draw)))
        hits += sum(r is CgResult.COLLISION for r in res.values())
        total += n
    return hits / total


def rrc_state_after_ul(mode: UplinkModeKind, fell_back: bool = False) -> RrcState:
    if mode is UplinkModeKind.RRC or fell_back:
        return RrcState.CONNECTED
    return RrcState.INACTIVE


def next_occasion(t: int, period: int) -> int:
    return -(-t // period) * period


@dataclass
class _UlUe:
    ue_id: int
    rrc: UeRrc
    queue: deque = field(default_factory=deque)
    busy: bool = False  # an SDT / establishment is in progress for the head packet
    attempts: int = 0  # CG attempts for the head packet
    suspend_timer: Event | None = None
    fallbacks: int = 0


@dataclass
class _UlTx:
    packet: Packet
    fate: PacketFate
    attempt: int = 1


class UplinkCell:
    """One cell of Inactive UEs with UL FTP3 traffic under one uplink mode."""

    def __init__(self, *, seed: int, cell: int, num_ues: int, rate: float, size_bytes: int,
                 stop_at: int, link: LinkConfig, ul: UplinkConfig, rrc: RrcConfig,
                 initial_state: RrcState = RrcState.INACTIVE, engine: Engine | None = None,
                 packet_id_base: int = 0):
        self.engine = engine or Engine()
        self.link = link
        self.ul = ul
        self.rrc_cfg = rrc
        self.size_bytes = size_bytes
        self.profiles = draw_sinr_profiles(rng_stream(seed, Stream.DROP, cell), num_ues, link)
        self.link_rng = rng_stream(seed, Stream.LINK, cell)
        self.preamble_rng = rng_stream(seed, Stream.PREAMBLE, cell)
        self.initial_state = initial_state
        self.ues = [_UlUe(u, UeRrc(u, initial_state, initial_state is not RrcState.IDLE))
                    for u in range(num_ues)]
        self.logs = [IntervalLog() for _ in range(num_ues)]
        self.arrivals = [
            ArrivalProcess(rng_stream(seed, Stream.TRAFFIC, cell, u), rate, stop_at)
            for u in range(num_ues)
        ]
        self.packets: list[Packet] = []
        self._next_pid = packet_id_base
        self._fates: dict[int, PacketFate] = {}
        self._cg_event: Event | None = None
        self.cg_period = ms_to_ticks(ul.cg_period_ms)
        self.rach_period = ms_to_ticks(ul.rach_period_ms)
        self.cg_attempts = 0
        self.cg_collisions = 0
        self.fallbacks = 0
        self.occasion_log: list[tuple[int, list[tuple[int, int]]]] = []

        e = self.engine
        e.on(EventKind.PACKET_ARRIVAL, self._on_arrival)
        e.on(EventKind.CG_OCCASION, self._on_cg)
        e.on(EventKind.RACH_STEP, self._on_access_done)
        e.on(EventKind.HARQ_FEEDBACK, self._on_feedback)
        e.on(EventKind.RRC_TIMER_EXPIRY, self._on_suspend_timer)
        for u, proc in enumerate(self.arrivals):
            t = proc.next_arrival()
            if t is not None:
                e.schedule(t, EventKind.PACKET_ARRIVAL, u)

    # -- arrivals and dispatch ---------------------------------------------

    def _on_arrival(self, ev: Event) -> None:
        u = ev.payload
        now = self.engine.now
        pkt = Packet(self._next_pid, u, Direction.UL, self.size_bytes, now)
        self._next_pid += 1
        self.packets.append(pkt)
        self._fates[pkt.id] = PacketFate(self.link_rng, self.link.max_harq_attempts)
        ue = self.ues[u]
        ue.queue.append(pkt)
        t = self.arrivals[u].next_arrival()
        if t is not None:
            self.engine.schedule(t, EventKind.PACKET_ARRIVAL, u)
        self._dispatch(ue)

    def _dispatch(self, ue: _UlUe) -> None:
        """Start the uplink path for the head packet if the UE is free."""
        if not ue.queue or ue.busy:
            return
        now = self.engine.now
        if ue.rrc.state is RrcState.CONNECTED:
            self._cancel_suspend(ue)
            ue.busy = True
            pkt = ue.queue.popleft()
            self._transmit(ue, pkt, now + ms_to_ticks(self.ul.ul_grant_ms))
            return
        mode = self.ul.mode
        if mode is UplinkModeKind.CG:
            self._request_cg(now)
        elif mode is UplinkModeKind.RACH:
            ue.busy = True
            start = next_occasion(now, self.rach_period)
            done = start + ms_to_ticks(self.ul.rach_sdt_exchange_ms())
            self.logs[ue.ue_id].add(start, done, 1)
            self.engine.schedule(done, EventKind.RACH_STEP, (ue, "sdt"))
        else:
            self._start_establishment(ue, now)

    def _start_establishment(self, ue: _UlUe, now: int) -> None:
        ue.busy = True
        start = next_occasion(now, self.rach_period)
        if ue.rrc.state is RrcState.IDLE:
            signalling = rrc_transition(ue.rrc, RrcState.CONNECTED, self.rrc_cfg)
        else:
            # Inactive UE: RRC (re)establishment signalling of the legacy UL path
            ue.rrc.state = RrcState.CONNECTED
            signalling = ms_to_ticks(self.ul.rrc_setup_ms)
        done = start + ms_to_ticks(self.ul.four_step_ms) + signalling
        self.logs[ue.ue_id].add(start, done, 1)
        self.engine.schedule(done, EventKind.RACH_STEP, (ue, "connected"))

    def _on_access_done(self, ev: Event) -> None:
        ue, what = ev.payload
        now = self.engine.now
        pkt = ue.queue.popleft()
        if what == "sdt":
            self._transmit(ue, pkt, now)
        else:
            self._transmit(ue, pkt, now + ms_to_ticks(self.ul.ul_grant_ms))

    # -- configured grant -------------------------------------------------

    def _request_cg(self, now: int) -> None:
        t = next_occasion(now, self.cg_period)
        if self._cg_event is None or self._cg_event.fire_at > t:
            if self._cg_event is not None:
                self._cg_event.cancel()
            self._cg_event = self.engine.schedule(t, EventKind.CG_OCCASION)

    def _on_cg(self, ev: Event) -> None:
        self._cg_event = None
        now = self.engine.now
        contenders = [ue.ue_id for ue in self.ues
                      if ue.queue and not ue.busy and ue.rrc.state is not RrcState.CONNECTED]
        if not contenders:
            return
        attempts = draw_preambles(self.preamble_rng, contenders, self.ul.preamble_pool,
                                  self.ul.dedicated)
        self.occasion_log.append((now, attempts))
        results = cg_attempt_resolution(attempts)
        retry = False
        for u in contenders:
            ue = self.ues[u]
            self.cg_attempts += 1
            ue.attempts += 1
            self.logs[u].add(now, now + TTI_SYMBOLS, 2)
            if results[u] is CgResult.SUCCESS:
                ue.attempts = 0
                ue.busy = True
                self._transmit(ue, ue.queue.popleft(), now, logged=True)
            else:
                self.cg_collisions += 1
                if ue.attempts >= self.ul.max_sdt_attempts:
                    ue.attempts = 0
                    ue.fallbacks += 1
                    self.fallbacks += 1
                    self._start_establishment(ue, now)
                else:
                    retry = True
        if retry:
            self._request_cg(now + 1)

    # -- data and HARQ ----------------------------------------------------

    def _transmit(self, ue: _UlUe, pkt: Packet, data_at: int, attempt: int = 1,
                  logged: bool = False) -> None:
        pkt.harq_attempts = attempt
        if not logged:
            self.logs[ue.ue_id].add(data_at, data_at + TTI_SYMBOLS, 2)
        done = data_at + ms_to_ticks(self.ul.gnb_decode_ms)
        self.engine.schedule(max(done, self.engine.now), EventKind.HARQ_FEEDBACK,
                             (ue, pkt, data_at, attempt))

    def _on_feedback(self, ev: Event) -> None:
        ue, pkt, data_at, attempt = ev.payload
        now = self.engine.now
        fate = self._fates[pkt.id]
        if fate.outcome(self.profiles[ue.ue_id], attempt, self.link) is Outcome.NACK:
            if attempt < self.link.max_harq_attempts:
                self._transmit(ue, pkt, data_at + self.link.harq_rtt_symbols, attempt + 1)
                return
            pkt.lost = True
        else:
            pkt.delivered = now
        del self._fates[pkt.id]
        ue.busy = False
        if ue.rrc.state is RrcState.CONNECTED:
            self._arm_suspend(ue, now)
        self._dispatch(ue)

    # -- RRC inactivity ---------------------------------------------------

    def _arm_suspend(self, ue: _UlUe, now: int) -> None:
        self._cancel_suspend(ue)
        if ue.queue:
            return
        ue.suspend_timer = self.engine.schedule(
            now + ms_to_ticks(self.rrc_cfg.suspend_inactivity_ms), EventKind.RRC_TIMER_EXPIRY, ue)
        self.logs[ue.ue_id].add(now, ue.suspend_timer.fire_at, 1)

    @staticmethod
    def _cancel_suspend(ue: _UlUe) -> None:
        if ue.suspend_timer is not None:
            ue.suspend_timer.cancel()
            ue.suspend_timer = None

    def _on_suspend_timer(self, ev: Event) -> None:
        ue = ev.payload
        ue.suspend_timer = None
        if ue.rrc.state is RrcState.CONNECTED and not ue.busy and not ue.queue:
            rrc_transition(ue.rrc, RrcState.INACTIVE, self.rrc_cfg)
            if self.initial_state is RrcState.IDLE:
                rrc_transition(ue.rrc, RrcState.IDLE, self.rrc_cfg)

    def run(self, end: int) -> int:
        return self.engine.run_until(end)
