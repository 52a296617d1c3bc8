"""FTP model 3 traffic: Poisson arrivals of fixed-size packets per UE."""
from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass

from .sim import TICKS_PER_MS


class Direction(enum.Enum):
    DL = "DL"
    UL = "UL"


@dataclass
class Packet:
    id: int
    ue_id: int
    direction: Direction
    size_bytes: int
    arrival: int
    delivered: int | None = None
    harq_attempts: int = 0
    lost: bool = False

    @property
    def latency_ticks(self) -> int | None:
        if self.delivered is None:
            return None
        return self.delivered - self.arrival


@dataclass
class TrafficConfig:
    per_ue_arrival_rate: float = 100.0  # packets / s
    packet_size_bytes: int = 50
    direction: Direction = Direction.DL

    def validate(self) -> None:
        if self.per_ue_arrival_rate < 0:
            raise ValueError("traffic.rate_per_s must be >= 0")
        if self.packet_size_bytes <= 0:
            raise ValueError("traffic.packet_size_bytes must be > 0")


def next_interarrival(rng: random.Random, rate: float) -> int | None:
    """Exponential gap with mean 1/rate seconds, in ticks, rounded up.

    Returns None for a disabled generator (rate <= 0).
    """
    if rate <= 0:
        return None
    return math.ceil(rng.expovariate(rate) * 1000.0 * TICKS_PER_MS)


def offered_load_per_cell(ues_per_cell: int, rate: float, size_bytes: int) -> float:
    """Offered load in bit/s, linear in UE count, rate and payload size."""
    return ues_per_cell * rate * size_bytes * 8


class ArrivalProcess:
    """Arrival clock for one UE.

    The Poisson clock runs in continuous time; only the reported arrival is
    rounded up to a tick, so quantization error does not accumulate.
    """

    def __init__(self, rng: random.Random, rate: float, stop_at: int):
        self.rng = rng
        self.rate = rate
        self.stop_at = stop_at
        self._t_ticks = 0.0

    def next_arrival(self) -> int | None:
        if self.rate <= 0:
            return None
        self._t_ticks += self.rng.expovariate(self.rate) * 1000.0 * TICKS_PER_MS
        tick = math.ceil(self._t_ticks)
        if tick > self.stop_at:
            return None
        return tick
