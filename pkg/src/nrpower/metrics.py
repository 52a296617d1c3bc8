"""Sample series, empirical CCDFs and outage statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Iterable, Sequence

from .traffic import Packet

LOW_CONFIDENCE = "LOW_CONFIDENCE"


@dataclass
class SampleSeries:
    """Latency-like samples in ms; lost packets are +inf."""
    name: str
    values: list[float] = field(default_factory=list)
    # (replication_id, ue_id) per value, same order
    keys: list[tuple[int, int]] = field(default_factory=list)

    def add(self, value: float, replication: int = 0, ue: int = 0) -> None:
        self.values.append(value)
        self.keys.append((replication, ue))

    def extend(self, other: "SampleSeries") -> None:
        self.values.extend(other.values)
        self.keys.extend(other.keys)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def finite(self) -> list[float]:
        return [v for v in self.values if math.isfinite(v)]

    def mean(self) -> float:
        vals = self.finite
        return sum(vals) / len(vals) if vals else math.nan


@dataclass
class OutageReport:
    p: float
    value_ms: float
    n: int
    ci_low: float
    ci_high: float
    flags: tuple[str, ...] = ()

    @property
    def low_confidence(self) -> bool:
        return LOW_CONFIDENCE in self.flags


def ccdf(values: Iterable[float]) -> list[tuple[float, float]]:
    """(x, P(X > x)) at every distinct finite sample value, ascending.

    Infinite samples are kept in the denominator, so the curve flattens
    above zero when packets were lost.
    """
    vals = sorted(values)
    n = len(vals)
    if n == 0:
        return []
    out: list[tuple[float, float]] = []
    i = 0
    while i < n:
        x = vals[i]
        if not math.isfinite(x):
            break
        j = i
        while j < n and vals[j] == x:
            j += 1
        out.append((x, (n - j) / n))
        i = j
    return out


def outage_latency(values: Sequence[float], p: float, confidence: float = 0.95) -> OutageReport:
    """Smallest sample x with empirical P(X > x) <= p.

    Returns +inf when losses alone exceed p. The interval comes from the
    order statistics bracketing a Wilson interval on the exceedance count.
    """
    if not 0 < p < 1:
        raise ValueError("p must be in (0, 1)")
    n = len(values)
    if n == 0:
        raise ValueError("no samples")
    vals = sorted(values)
    allowed = _floor_count(n * p)
    k = n - allowed - 1
    value = vals[k]
    flags = (LOW_CONFIDENCE,) if n * p < 10 else ()
    lo_p, hi_p = wilson_interval(_floor_count(n * p), n, confidence)
    lo_k = min(n - 1, max(0, n - _floor_count(n * hi_p) - 1))
    hi_k = min(n - 1, max(0, n - _floor_count(n * lo_p) - 1))
    return OutageReport(p, value, n, vals[lo_k], vals[hi_k], flags)


def _floor_count(x: float) -> int:
    # n * p is often an integer up to float noise
    return math.floor(round(x, 9))


def wilson_interval(successes: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    if n <= 0:
        raise ValueError("n must be positive")
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    phat = successes / n
    denom = 1 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class ConservationReport:
    arrived: int
    delivered: int
    lost: int
    pending: int
    duplicates: int

    @property
    def balanced(self) -> bool:
        return self.duplicates == 0 and self.arrived == self.delivered + self.lost + self.pending


def conservation_audit(packets: Iterable[Packet]) -> ConservationReport:
    arrived = delivered = lost = pending = duplicates = 0
    seen: set[int] = set()
    for p in packets:
        if p.id in seen:
            duplicates += 1
            continue
        seen.add(p.id)
        arrived += 1
        if p.delivered is not None and p.lost:
            duplicates += 1
        elif p.delivered is not None:
            delivered += 1
        elif p.lost:
            lost += 1
        else:
            pending += 1
    return ConservationReport(arrived, delivered, lost, pending, duplicates)
