"""RRC state machine and connected-mode DRX."""
from __future__ import annotations

import enum
from dataclasses import dataclass

from .sim import Engine, Event, EventKind, IntervalLog, ms_to_ticks


class RrcState(enum.Enum):
    CONNECTED = "connected"
    INACTIVE = "inactive"
    IDLE = "idle"


class IllegalTransition(RuntimeError):
    pass


LEGAL_EDGES = {
    (RrcState.CONNECTED, RrcState.INACTIVE): "suspend",
    (RrcState.INACTIVE, RrcState.CONNECTED): "resume",
    (RrcState.INACTIVE, RrcState.IDLE): "release",
    (RrcState.IDLE, RrcState.CONNECTED): "setup",
}


@dataclass
class RrcConfig:
    resume_from_inactive_ms: float = 5.0
    setup_from_idle_ms: float = 20.0
    suspend_inactivity_ms: float = 100.0

    def validate(self) -> None:
        if self.resume_from_inactive_ms < 0 or self.setup_from_idle_ms < 0:
            raise ValueError("rrc delays must be non-negative")
        if not self.resume_from_inactive_ms < self.setup_from_idle_ms:
            raise ValueError("rrc.resume_from_inactive_ms must be < rrc.setup_from_idle_ms")
        if self.suspend_inactivity_ms < 0:
            raise ValueError("rrc.suspend_inactivity_ms must be >= 0")


@dataclass
class UeRrc:
    ue_id: int
    state: RrcState = RrcState.INACTIVE
    # anchor-gNB context; kept through suspend, dropped on release
    has_context: bool = True
    setups: int = 0
    resumes: int = 0


def rrc_transition(ue: UeRrc, target: RrcState, cfg: RrcConfig) -> int:
    """Move `ue` to `target`; returns the signalling delay in ticks."""
    edge = LEGAL_EDGES.get((ue.state, target))
    if edge is None:
        raise IllegalTransition(f"{ue.state.value} -> {target.value}")
    ue.state = target
    if edge == "suspend":
        ue.has_context = True
        return 0
    if edge == "release":
        ue.has_context = False
        return 0
    if edge == "resume":
        ue.resumes += 1
        return ms_to_ticks(cfg.resume_from_inactive_ms)
    ue.setups += 1
    ue.has_context = True
    return ms_to_ticks(cfg.setup_from_idle_ms)


SHORT_CYCLE_MS = (2.0, 640.0)
LONG_CYCLE_MS = (10.0, 10240.0)


@dataclass
class DrxConfig:
    enabled: bool = False
    kind: str = "long"  # "short" or "long"
    cycle_ms: float = 40.0
    on_duration_ms: float = 2.0
    inactivity_timer_ms: float = 8.0

    def validate(self) -> None:
        if self.kind not in ("short", "long"):
            raise ValueError("drx.kind must be 'short' or 'long'")
        lo, hi = SHORT_CYCLE_MS if self.kind == "short" else LONG_CYCLE_MS
        if not lo <= self.cycle_ms <= hi:
            raise ValueError(
                f"drx.cycle_ms={self.cycle_ms} outside the {self.kind} cycle range [{lo}, {hi}] ms"
            )
        if not 0 < self.on_duration_ms <= self.cycle_ms:
            raise ValueError("drx.on_duration_ms must be in (0, cycle_ms]")
        if self.inactivity_timer_ms < 0:
            raise ValueError("drx.inactivity_timer_ms must be >= 0")


class DrxState:
    """C-DRX reachability of one UE.

    The UE is reachable inside every onDuration window and until the
    inactivity timer started by the latest grant runs out. Windows are
    aligned to tick 0.
    """

    def __init__(self, ue_id: int, cfg: DrxConfig, engine: Engine | None = None,
                 log: IntervalLog | None = None):
        self.ue_id = ue_id
        self.cycle = ms_to_ticks(cfg.cycle_ms)
        self.on = ms_to_ticks(cfg.on_duration_ms)
        self.timer = ms_to_ticks(cfg.inactivity_timer_ms)
        self.active_until = 0  # end of the inactivity-timer extension
        self.engine = engine
        self.log = log
        self._expiry: Event | None = None
        self.expiries = 0

    def in_on_duration(self, t: int) -> bool:
        return t % self.cycle < self.on

    def is_active(self, t: int) -> bool:
        return t < self.active_until or self.in_on_duration(t)

    def next_active_start(self, t: int) -> int:
        if self.is_active(t):
            return t
        return (t // self.cycle + 1) * self.cycle

    def window_end(self, t: int) -> int:
        """End of the continuous reachable span containing t."""
        end = t
        while self.is_active(end):
            nxt = max(end, self.active_until)
            if self.in_on_duration(nxt):
                nxt = (nxt // self.cycle) * self.cycle + self.on
            if nxt == end:
                break
            end = nxt
        return end

    def on_grant(self, now: int) -> int:
        """Restart the inactivity timer; returns the new reachable-until tick."""
        if not self.is_active(now):
            raise AssertionError(f"UE {self.ue_id} granted at {now} while in DRX sleep")
        new_until = now + self.timer
        if self.log is not None:
            self.log.add(now, new_until, 1)
        if new_until > self.active_until:
            self.active_until = new_until
            if self.engine is not None:
                if self._expiry is not None:
                    self._expiry.cancel()
                self._expiry = self.engine.schedule(new_until, EventKind.DRX_TIMER_EXPIRY, self)
        return self.window_end(now)

    def on_expiry(self, ev: Event) -> None:
        self._expiry = None
        self.expiries += 1

    def log_on_durations(self, horizon: int) -> None:
        if self.log is None:
            return
        for start in range(0, horizon, self.cycle):
            self.log.add(start, min(start + self.on, horizon), 1)


def drx_on_grant(drx: DrxState, now: int) -> int:
    return drx.on_grant(now)
