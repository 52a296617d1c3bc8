"""Discrete-event engine on an OFDM-symbol clock.

Time is an integer count of symbols at 30 kHz sub-carrier spacing
(14 symbols per 0.5 ms slot), so 1 ms is exactly 28 ticks.
"""
from __future__ import annotations

import enum
import hashlib
import heapq
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable

SCS_KHZ = 30
SYMBOLS_PER_SLOT = 14
SLOT_US = 500
TTI_SYMBOLS = 4
TICKS_PER_MS = SYMBOLS_PER_SLOT * 1000 // SLOT_US  # 28
SYMBOL_US = Fraction(SLOT_US, SYMBOLS_PER_SLOT)


def symbols_to_ms_exact(ticks: int) -> Fraction:
    return ticks * SYMBOL_US / 1000


def symbols_to_ms(ticks: int) -> float:
    return ticks / TICKS_PER_MS


def ms_to_ticks(ms: float) -> int:
    """Smallest tick count covering `ms` (rounded up to the next symbol)."""
    if ms <= 0:
        return 0
    # absorb float noise such as 2.5 * 28 = 70.00000000000001
    return math.ceil(round(ms * TICKS_PER_MS, 9))


def slots_to_ticks(slots: int) -> int:
    return slots * SYMBOLS_PER_SLOT


class EventKind(enum.Enum):
    PACKET_ARRIVAL = "packet_arrival"
    PDCCH_OCCASION = "pdcch_occasion"
    PDSCH_DELIVERY = "pdsch_delivery"
    HARQ_FEEDBACK = "harq_feedback"
    DRX_TIMER_EXPIRY = "drx_timer_expiry"
    PAGING_OCCASION = "paging_occasion"
    EPI_OCCASION = "epi_occasion"
    SSB_BURST = "ssb_burst"
    CG_OCCASION = "cg_occasion"
    RACH_STEP = "rach_step"
    RRC_TIMER_EXPIRY = "rrc_timer_expiry"
    MEASUREMENT_FLUSH = "measurement_flush"


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled before the current clock."""


@dataclass(eq=False)
class Event:
    fire_at: int
    kind: EventKind
    payload: Any = None
    sequence: int = -1
    cancelled: bool = False

    def cancel(self) -> None:
        self.cancelled = True


class EventQueue:
    """Future-event set ordered by (fire_at, sequence)."""

    def __init__(self) -> None:
        self._heap: list[tuple[int, int, Event]] = []
        self._next_seq = 0

    def push(self, event: Event) -> Event:
        event.sequence = self._next_seq
        self._next_seq += 1
        heapq.heappush(self._heap, (event.fire_at, event.sequence, event))
        return event

    def peek_time(self) -> int | None:
        self._drop_cancelled()
        return self._heap[0][0] if self._heap else None

    def pop(self) -> Event:
        self._drop_cancelled()
        return heapq.heappop(self._heap)[2]

    def _drop_cancelled(self) -> None:
        heap = self._heap
        while heap and heap[0][2].cancelled:
            heapq.heappop(heap)

    def __len__(self) -> int:
        return sum(1 for _, _, ev in self._heap if not ev.cancelled)


Handler = Callable[[Event], None]


class Engine:
    """Single-threaded event loop.

    Handlers are registered per EventKind. With ``record_trace`` the engine
    folds every processed event into a running SHA-256 so replays can be
    compared cheaply.
    """

    def __init__(self, record_trace: bool = False) -> None:
        self.now = 0
        self.queue = EventQueue()
        self._handlers: dict[EventKind, Handler] = {}
        self._hash = hashlib.sha256() if record_trace else None
        self.processed = 0

    def on(self, kind: EventKind, handler: Handler) -> None:
        self._handlers[kind] = handler

    def schedule(self, fire_at: int, kind: EventKind, payload: Any = None) -> Event:
        if fire_at < self.now:
            raise SchedulingError(
                f"cannot schedule {kind.value} at tick {fire_at} (clock is {self.now})"
            )
        return self.queue.push(Event(fire_at, kind, payload))

    def schedule_in(self, delay: int, kind: EventKind, payload: Any = None) -> Event:
        return self.schedule(self.now + delay, kind, payload)

    @staticmethod
    def cancel(handle: Event) -> None:
        handle.cancel()

    def run_until(self, end: int) -> int:
        if end < self.now:
            raise SchedulingError(f"run_until({end}) is behind the clock ({self.now})")
        count = 0
        queue = self.queue
        while True:
            t = queue.peek_time()
            if t is None or t > end:
                break
            ev = queue.pop()
            self.now = ev.fire_at
            if self._hash is not None:
                self._hash.update(f"{ev.fire_at}:{ev.sequence}:{ev.kind.value};".encode())
            handler = self._handlers.get(ev.kind)
            if handler is not None:
                handler(ev)
            count += 1
        self.now = end
        self.processed += count
        return count

    @property
    def trace_digest(self) -> str:
        if self._hash is None:
            raise RuntimeError("engine was created without record_trace")
        return self._hash.hexdigest()


class Stream(enum.IntEnum):
    TRAFFIC = 0
    LINK = 1
    PREAMBLE = 2
    OFFSET = 3
    DROP = 4
    PAGING = 5
    GROUPING = 6
    SKIP = 7


def rng_stream(seed: int, stream: int, *extra: int) -> random.Random:
    """Independent generator for (seed, stream, extra...).

    The key is hashed so neighbouring seeds do not produce correlated
    Mersenne Twister states.
    """
    key = ":".join(str(int(v)) for v in (seed, stream, *extra)).encode()
    digest = hashlib.sha256(key).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


@dataclass
class IntervalLog:
    """Receiver activity of one UE as (start_tick, end_tick, level) intervals.

    level 1 = PDCCH monitoring, level 2 = PDSCH/PUSCH data. Consumed by the
    energy model at replication end.
    """

    intervals: list[tuple[int, int, int]] = field(default_factory=list)

    def add(self, start: int, end: int, level: int = 1) -> None:
        if end > start:
            self.intervals.append((start, end, level))
