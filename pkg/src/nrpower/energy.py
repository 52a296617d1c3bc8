"""UE sleep states and energy bookkeeping.

Energy is kept as an exact Fraction of (relative power units x ms) so the
ledger can be recomputed bit-for-bit from the emitted state trace.
"""
from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .sim import TICKS_PER_MS, IntervalLog, ms_to_ticks


class SleepState(enum.Enum):
    ACTIVE = "active"
    MICRO = "micro"
    LIGHT = "light"
    DEEP = "deep"


# trace labels for receiver-on segments
MONITOR = "active_monitor"
DATA = "active_data"


@dataclass
class EnergyModel:
    deep_power: float = 1.0
    light_power: float = 20.0
    micro_power: float = 45.0
    monitor_power: float = 100.0
    data_power: float = 300.0
    deep_overhead_ms: float = 20.0
    light_overhead_ms: float = 6.0
    micro_overhead_ms: float = 1.0

    def validate(self) -> None:
        if not (0 <= self.deep_power < self.light_power < self.micro_power
                < self.monitor_power <= self.data_power):
            raise ValueError("energy powers must satisfy deep < light < micro < monitor <= data")
        if not (0 < self.micro_overhead_ms < self.light_overhead_ms < self.deep_overhead_ms):
            raise ValueError("energy overheads must satisfy micro < light < deep")

    def power(self, label: str) -> Fraction:
        return Fraction(str({
            MONITOR: self.monitor_power,
            DATA: self.data_power,
            SleepState.ACTIVE.value: self.monitor_power,
            SleepState.MICRO.value: self.micro_power,
            SleepState.LIGHT.value: self.light_power,
            SleepState.DEEP.value: self.deep_power,
        }[label]))

    def overhead_ticks(self, state: SleepState) -> int:
        return ms_to_ticks({
            SleepState.MICRO: self.micro_overhead_ms,
            SleepState.LIGHT: self.light_overhead_ms,
            SleepState.DEEP: self.deep_overhead_ms,
        }[state])

    def transition_power(self, state: SleepState) -> Fraction:
        """Average of the monitoring power and the target sleep power."""
        return (self.power(MONITOR) + self.power(state.value)) / 2


_DEEPEST_FIRST = (SleepState.DEEP, SleepState.LIGHT, SleepState.MICRO)


def select_sleep_state(gap_ms: float, model: EnergyModel | None = None) -> SleepState:
    """Deepest sleep state whose entry+exit overhead strictly fits in the gap."""
    if gap_ms < 0:
        raise ValueError("gap must be non-negative")
    model = model or EnergyModel()
    return select_sleep_state_ticks(ms_to_ticks(gap_ms) if gap_ms else 0, model)


def select_sleep_state_ticks(gap_ticks: int, model: EnergyModel) -> SleepState:
    for state in _DEEPEST_FIRST:
        if model.overhead_ticks(state) < gap_ticks:
            return state
    return SleepState.ACTIVE


@dataclass(frozen=True)
class Segment:
    start: int  # ticks
    end: int
    label: str  # MONITOR, DATA, a SleepState value, or "to_<state>"

    @property
    def ticks(self) -> int:
        return self.end - self.start


@dataclass
class EnergyLedger:
    ue_id: int
    total_energy: Fraction = Fraction(0)
    state_ticks: dict[str, int] = field(default_factory=lambda: defaultdict(int))
    state_energy: dict[str, Fraction] = field(default_factory=lambda: defaultdict(Fraction))
    transition_count: dict[str, int] = field(default_factory=lambda: defaultdict(int))

    def duration_ms(self, label: str) -> float:
        return self.state_ticks.get(label, 0) / TICKS_PER_MS

    @property
    def active_ticks(self) -> int:
        return self.state_ticks.get(MONITOR, 0) + self.state_ticks.get(DATA, 0)


def accumulate(ledger: EnergyLedger, state: str | SleepState, duration_ms: float,
               model: EnergyModel | None = None) -> EnergyLedger:
    """Add `duration_ms` spent in `state` (a dwell, not a transition)."""
    if duration_ms < 0:
        raise ValueError("duration must be non-negative")
    model = model or EnergyModel()
    label = state.value if isinstance(state, SleepState) else state
    _add(ledger, label, ms_to_ticks(duration_ms), model.power(label))
    return ledger


def _add(ledger: EnergyLedger, label: str, ticks: int, power: Fraction) -> None:
    if ticks == 0:
        return
    e = power * ticks / TICKS_PER_MS
    ledger.state_ticks[label] += ticks
    ledger.state_energy[label] += e
    ledger.total_energy += e


def flatten(intervals: Iterable[tuple[int, int, int]]) -> list[tuple[int, int, int]]:
    """Disjoint (start, end, level) pieces, keeping the highest level where
    intervals overlap. Adjacent pieces of equal level are merged."""
    points: dict[int, list[tuple[int, int]]] = defaultdict(list)
    for s, e, lvl in intervals:
        if e > s:
            points[s].append((lvl, +1))
            points[e].append((lvl, -1))
    out: list[tuple[int, int, int]] = []
    counts = [0, 0, 0]
    prev_t = None
    for t in sorted(points):
        level = 2 if counts[2] else (1 if counts[1] else 0)
        if prev_t is not None and level and t > prev_t:
            if out and out[-1][1] == prev_t and out[-1][2] == level:
                out[-1] = (out[-1][0], t, level)
            else:
                out.append((prev_t, t, level))
        for lvl, d in points[t]:
            counts[lvl] += d
        prev_t = t
    return out


def build_trace(log: IntervalLog, horizon: int, model: EnergyModel) -> list[Segment]:
    """Full [0, horizon) state trace: receiver-on pieces from the log, gaps
    filled by the deepest sleep that fits (transition first, then dwell)."""
    trace: list[Segment] = []
    cursor = 0
    for s, e, lvl in flatten(log.intervals):
        s, e = max(s, 0), min(e, horizon)
        if e <= s:
            continue
        if s > cursor:
            trace.extend(_gap(cursor, s, model))
        trace.append(Segment(s, e, DATA if lvl == 2 else MONITOR))
        cursor = e
    if horizon > cursor:
        trace.extend(_gap(cursor, horizon, model))
    return trace


def _gap(start: int, end: int, model: EnergyModel) -> list[Segment]:
    state = select_sleep_state_ticks(end - start, model)
    if state is SleepState.ACTIVE:
        return [Segment(start, end, MONITOR)]
    o = model.overhead_ticks(state)
    return [Segment(start, start + o, f"to_{state.value}"), Segment(start + o, end, state.value)]


def segment_energy(seg: Segment, model: EnergyModel) -> Fraction:
    if seg.label.startswith("to_"):
        p = model.transition_power(SleepState(seg.label[3:]))
    else:
        p = model.power(seg.label)
    return p * seg.ticks / TICKS_PER_MS


def ledger_from_trace(ue_id: int, trace: Iterable[Segment], model: EnergyModel) -> EnergyLedger:
    ledger = EnergyLedger(ue_id)
    for seg in trace:
        if seg.label.startswith("to_"):
            e = segment_energy(seg, model)
            ledger.state_ticks[seg.label] += seg.ticks
            ledger.state_energy[seg.label] += e
            ledger.total_energy += e
            ledger.transition_count[seg.label[3:]] += 1
        else:
            _add(ledger, seg.label, seg.ticks, model.power(seg.label))
    return ledger
