from fractions import Fraction

import pytest

from nrpower.sim import (
    TICKS_PER_MS, Engine, EventKind, SchedulingError, Stream, ms_to_ticks, rng_stream,
    slots_to_ticks, symbols_to_ms, symbols_to_ms_exact,
)


def test_clock_units():
    assert TICKS_PER_MS == 28
    assert slots_to_ticks(2) == TICKS_PER_MS
    assert symbols_to_ms_exact(28) == 1
    assert symbols_to_ms_exact(1) == Fraction(1, 28)
    assert symbols_to_ms(14) == 0.5


@pytest.mark.parametrize("ms,ticks", [(0, 0), (-1, 0), (1, 28), (0.5, 14), (2.5, 70),
                                      (0.01, 1), (20, 560), (1 / 28, 1)])
def test_ms_to_ticks_rounds_up(ms, ticks):
    assert ms_to_ticks(ms) == ticks


def test_same_time_events_fire_in_insertion_order():
    eng = Engine()
    seen = []
    eng.on(EventKind.PACKET_ARRIVAL, lambda ev: seen.append(ev.payload))
    for i in range(5):
        eng.schedule(10, EventKind.PACKET_ARRIVAL, i)
    eng.schedule(3, EventKind.PACKET_ARRIVAL, "early")
    eng.run_until(10)
    assert seen == ["early", 0, 1, 2, 3, 4]


def test_clock_advances_to_end_and_never_back():
    eng = Engine()
    times = []
    eng.on(EventKind.PACKET_ARRIVAL, lambda ev: times.append(eng.now))
    for t in (7, 3, 3, 12):
        eng.schedule(t, EventKind.PACKET_ARRIVAL)
    assert eng.run_until(10) == 3
    assert times == [3, 3, 7]
    assert eng.now == 10
    with pytest.raises(SchedulingError):
        eng.schedule(9, EventKind.PACKET_ARRIVAL)
    eng.run_until(20)
    assert times[-1] == 12


def test_scheduling_at_now_is_allowed():
    eng = Engine()
    seen = []

    def handler(ev):
        seen.append(ev.payload)
        if ev.payload == 0:
            eng.schedule(eng.now, EventKind.PACKET_ARRIVAL, 1)

    eng.on(EventKind.PACKET_ARRIVAL, handler)
    eng.schedule(5, EventKind.PACKET_ARRIVAL, 0)
    eng.run_until(5)
    assert seen == [0, 1]


def test_cancelled_event_does_not_fire():
    eng = Engine()
    seen = []
    eng.on(EventKind.DRX_TIMER_EXPIRY, lambda ev: seen.append(ev.payload))
    a = eng.schedule(4, EventKind.DRX_TIMER_EXPIRY, "a")
    eng.schedule(6, EventKind.DRX_TIMER_EXPIRY, "b")
    eng.cancel(a)
    assert len(eng.queue) == 1
    eng.run_until(10)
    assert seen == ["b"]


def _replay(seed):
    eng = Engine(record_trace=True)
    rng = rng_stream(seed, Stream.TRAFFIC)

    def handler(ev):
        if ev.payload < 200:
            eng.schedule(eng.now + rng.randrange(5), EventKind.PACKET_ARRIVAL, ev.payload + 1)

    eng.on(EventKind.PACKET_ARRIVAL, handler)
    eng.schedule(0, EventKind.PACKET_ARRIVAL, 0)
    eng.run_until(10_000)
    return eng.trace_digest


def test_trace_digest_is_reproducible():
    assert _replay(3) == _replay(3)
    assert _replay(3) != _replay(4)


def test_rng_streams_are_independent_and_stable():
    a = [rng_stream(1, Stream.TRAFFIC, 0).random() for _ in range(2)]
    assert a[0] == a[1]
    draws = {rng_stream(1, s, 0).random() for s in Stream}
    assert len(draws) == len(Stream)
    assert rng_stream(1, Stream.LINK, 0).random() != rng_stream(1, Stream.LINK, 1).random()
