"""Link-to-system abstraction.

Geometry, receiver and MIMO are folded into a static per-UE mean SINR drawn
once per drop. The SINR only selects a class (HIGH/LOW); the class scales a
geometric HARQ BLER model whose first-transmission value is the link
adaptation target.
"""
from __future__ import annotations

import enum
import random
from dataclasses import dataclass

from .sim import symbols_to_ms


class SinrClass(enum.Enum):
    HIGH = "HIGH"
    LOW = "LOW"


class Outcome(enum.Enum):
    ACK = "ACK"
    NACK = "NACK"


@dataclass(frozen=True)
class SinrProfile:
    ue_id: int
    mean_sinr_db: float
    sinr_class: SinrClass


@dataclass
class LinkConfig:
    sinr_mean_db: float = 15.0
    sinr_std_db: float = 8.0
    first_tx_bler: float = 0.01
    retx_bler_multiplier: float = 0.1
    harq_rtt_symbols: int = 56
    max_harq_attempts: int = 4
    low_sinr_threshold_db: float = 5.0
    low_sinr_bler_factor: float = 10.0

    def validate(self) -> None:
        if not 0 < self.first_tx_bler < 1:
            raise ValueError("link.first_tx_bler must be in (0, 1)")
        if not 0 < self.retx_bler_multiplier < 1:
            raise ValueError("link.retx_bler_multiplier must be in (0, 1)")
        if self.harq_rtt_symbols <= 0:
            raise ValueError("link.harq_rtt_symbols must be > 0")
        if self.max_harq_attempts < 1:
            raise ValueError("link.max_harq_attempts must be >= 1")
        if self.sinr_std_db < 0:
            raise ValueError("link.sinr_std_db must be >= 0")
        if self.low_sinr_bler_factor < 1:
            raise ValueError("link.low_sinr_bler_factor must be >= 1")


def classify(mean_sinr_db: float, threshold_db: float) -> SinrClass:
    return SinrClass.LOW if mean_sinr_db < threshold_db else SinrClass.HIGH


def draw_sinr_profiles(rng: random.Random, num_ues: int, cfg: LinkConfig) -> list[SinrProfile]:
    profiles = []
    for ue in range(num_ues):
        sinr = cfg.sinr_mean_db
        if cfg.sinr_std_db > 0:
            sinr = rng.gauss(cfg.sinr_mean_db, cfg.sinr_std_db)
        profiles.append(SinrProfile(ue, sinr, classify(sinr, cfg.low_sinr_threshold_db)))
    return profiles


def nack_probability(profile: SinrProfile, attempt: int, cfg: LinkConfig) -> float:
    if attempt < 1:
        raise ValueError("attempt counts from 1")
    base = cfg.first_tx_bler
    if profile.sinr_class is SinrClass.LOW:
        base *= cfg.low_sinr_bler_factor
    return min(1.0, base * cfg.retx_bler_multiplier ** (attempt - 1))


def residual_loss_probability(profile: SinrProfile, attempts: int, cfg: LinkConfig) -> float:
    """Probability that all of the first `attempts` transmissions fail."""
    p = 1.0
    for a in range(1, attempts + 1):
        p *= nack_probability(profile, a, cfg)
    return p


def transmission_outcome(rng: random.Random, profile: SinrProfile, attempt: int,
                         cfg: LinkConfig) -> Outcome:
    if rng.random() < nack_probability(profile, attempt, cfg):
        return Outcome.NACK
    return Outcome.ACK


def harq_exhausted(attempt: int, cfg: LinkConfig) -> bool:
    """True once `attempt` failed transmissions leave no retransmission budget."""
    return attempt >= cfg.max_harq_attempts


def harq_retx_delay(cfg: LinkConfig) -> int:
    return cfg.harq_rtt_symbols


def harq_retx_delay_ms(cfg: LinkConfig) -> float:
    return symbols_to_ms(cfg.harq_rtt_symbols)


class PacketFate:
    """Uniform draws fixed per packet at arrival.

    Outcome of attempt k is decided by the k-th draw, so a packet meets the
    same channel whatever the scheduling policy does to its timing. This is
    what makes cross-policy comparisons paired.
    """

    __slots__ = ("_draws",)

    def __init__(self, rng: random.Random, n: int):
        self._draws = [rng.random() for _ in range(n)]

    def outcome(self, profile: SinrProfile, attempt: int, cfg: LinkConfig) -> Outcome:
        if self._draws[attempt - 1] < nack_probability(profile, attempt, cfg):
            return Outcome.NACK
        return Outcome.ACK
