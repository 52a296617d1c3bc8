import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nrpower.rrc import (
    DrxConfig, DrxState, IllegalTransition, RrcConfig, RrcState, UeRrc, drx_on_grant,
    rrc_transition,
)
from nrpower.sim import Engine, EventKind, IntervalLog, ms_to_ticks

CFG = RrcConfig()


def test_legal_transitions_and_delays():
    ue = UeRrc(0, RrcState.CONNECTED)
    assert rrc_transition(ue, RrcState.INACTIVE, CFG) == 0
    assert ue.has_context
    assert rrc_transition(ue, RrcState.CONNECTED, CFG) == ms_to_ticks(5)
    rrc_transition(ue, RrcState.INACTIVE, CFG)
    rrc_transition(ue, RrcState.IDLE, CFG)
    assert not ue.has_context
    assert rrc_transition(ue, RrcState.CONNECTED, CFG) == ms_to_ticks(20)
    assert (ue.resumes, ue.setups) == (1, 1)


@pytest.mark.parametrize("src,dst", [
    (RrcState.IDLE, RrcState.INACTIVE), (RrcState.CONNECTED, RrcState.IDLE),
    (RrcState.CONNECTED, RrcState.CONNECTED), (RrcState.IDLE, RrcState.IDLE),
])
def test_illegal_transitions(src, dst):
    with pytest.raises(IllegalTransition):
        rrc_transition(UeRrc(0, src), dst, CFG)


def test_resume_is_cheaper_than_setup_always():
    with pytest.raises(ValueError):
        RrcConfig(resume_from_inactive_ms=20, setup_from_idle_ms=20).validate()


@pytest.mark.parametrize("kind,cycle,ok", [
    ("short", 1, False), ("short", 2, True), ("short", 640, True), ("short", 641, False),
    ("long", 9, False), ("long", 10, True), ("long", 10240, True), ("long", 10241, False),
])
def test_drx_cycle_ranges(kind, cycle, ok):
    cfg = DrxConfig(enabled=True, kind=kind, cycle_ms=cycle, on_duration_ms=1)
    if ok:
        cfg.validate()
    else:
        with pytest.raises(ValueError):
            cfg.validate()


def test_drx_on_duration_bounds():
    with pytest.raises(ValueError):
        DrxConfig(cycle_ms=10, on_duration_ms=11).validate()
    with pytest.raises(ValueError):
        DrxConfig(on_duration_ms=0).validate()


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([10, 20, 40]), st.integers(1, 8), st.integers(0, 12),
       st.lists(st.integers(0, 4000), max_size=6))
def test_drx_reachability_matches_oracle(cycle, on, timer, grants):
    on = min(on, cycle)
    drx = DrxState(0, DrxConfig(True, "long", cycle, on, timer))
    extend_until = 0
    for g in sorted(grants):
        if drx.is_active(g):
            drx.on_grant(g)
            extend_until = max(extend_until, g + ms_to_ticks(timer))
    for t in range(0, 4200, 7):
        oracle = t % ms_to_ticks(cycle) < ms_to_ticks(on) or t < extend_until
        assert drx.is_active(t) == oracle
        nxt = drx.next_active_start(t)
        assert nxt >= t and drx.is_active(nxt)
        assert all(not drx.is_active(x) for x in range(t, nxt, 3))
        if drx.is_active(t):
            end = drx.window_end(t)
            assert not drx.is_active(end)
            assert all(drx.is_active(x) for x in range(t, end, 5))


def test_grant_restarts_inactivity_timer_event():
    eng = Engine()
    fired = []
    eng.on(EventKind.DRX_TIMER_EXPIRY, lambda ev: fired.append(eng.now))
    log = IntervalLog()
    drx = DrxState(0, DrxConfig(True, "long", 40, 2, 8), eng, log)
    drx_on_grant(drx, 0)
    eng.run_until(300)
    start = ms_to_ticks(40)  # next onDuration
    drx_on_grant(drx, start)
    eng.run_until(start + 10)
    drx_on_grant(drx, start + 10)  # restarts the running timer
    eng.run_until(5000)
    assert fired == [ms_to_ticks(8), start + 10 + ms_to_ticks(8)]
    assert log.intervals[0] == (0, ms_to_ticks(8), 1)


def test_grant_while_asleep_is_an_error():
    drx = DrxState(0, DrxConfig(True, "long", 40, 2, 8))
    with pytest.raises(AssertionError):
        drx.on_grant(ms_to_ticks(10))
