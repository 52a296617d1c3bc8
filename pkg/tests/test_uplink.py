import itertools
import math

import pytest

from nrpower.link import LinkConfig
from nrpower.rrc import RrcConfig, RrcState
from nrpower.sim import Stream, ms_to_ticks, rng_stream
from nrpower.uplink import (
    CgResult, RachSteps, UplinkCell, UplinkConfig, UplinkModeKind, cg_attempt_resolution,
    collision_probability, collision_probability_enumerated, draw_preambles, rrc_state_after_ul,
)


def test_resolution_examples():
    assert cg_attempt_resolution([(0, 1)]) == {0: CgResult.SUCCESS}
    assert cg_attempt_resolution([(0, 1), (1, 1)]) == {0: CgResult.COLLISION,
                                                       1: CgResult.COLLISION}
    res = cg_attempt_resolution([(0, 0), (1, 1), (2, 1)])
    assert res[0] is CgResult.SUCCESS and res[1] is res[2] is CgResult.COLLISION
    with pytest.raises(ValueError):
        cg_attempt_resolution([(0, 0), (0, 1)])


def _brute(n, pool):
    # independent count: a draw collides for UE i when any other UE picked the same value
    hits = total = 0
    for draw in itertools.product(range(pool), repeat=n):
        for i in range(n):
            hits += draw.count(draw[i]) > 1
            total += 1
    return hits / total


@pytest.mark.parametrize("n,pool", [(n, p) for n in range(1, 5) for p in range(1, 5)])
def test_enumeration_matches_closed_form(n, pool):
    assert collision_probability_enumerated(n, pool) == pytest.approx(_brute(n, pool), abs=1e-15)
    assert collision_probability(n, pool) == pytest.approx(_brute(n, pool), abs=1e-12)


def test_dedicated_preambles_never_collide():
    attempts = draw_preambles(rng_stream(1, Stream.PREAMBLE), list(range(8)), 8, dedicated=True)
    assert all(r is CgResult.SUCCESS for r in cg_attempt_resolution(attempts).values())
    with pytest.raises(ValueError):
        draw_preambles(rng_stream(1, Stream.PREAMBLE), list(range(8)), 4, dedicated=True)
    with pytest.raises(ValueError):
        UplinkConfig(dedicated=True, preamble_pool=4).validate(active_ues=5)


def test_config_validation():
    UplinkConfig().validate()
    with pytest.raises(ValueError):
        UplinkConfig(preamble_pool=0).validate()
    with pytest.raises(ValueError):
        UplinkConfig(two_step_ms=8).validate()
    with pytest.raises(ValueError):
        UplinkConfig(max_sdt_attempts=0).validate()


def test_rrc_state_after_ul():
    assert rrc_state_after_ul(UplinkModeKind.RRC) is RrcState.CONNECTED
    assert rrc_state_after_ul(UplinkModeKind.CG) is RrcState.INACTIVE
    assert rrc_state_after_ul(UplinkModeKind.RACH) is RrcState.INACTIVE
    assert rrc_state_after_ul(UplinkModeKind.CG, fell_back=True) is RrcState.CONNECTED


QUIET_LINK = LinkConfig(first_tx_bler=1e-9, retx_bler_multiplier=0.5, sinr_std_db=0.0)


def _cell(ul, *, ues=1, rate=0.5, seconds=300, link=QUIET_LINK, state=RrcState.INACTIVE,
          suspend=0.0):
    cell = UplinkCell(seed=3, cell=0, num_ues=ues, rate=rate, size_bytes=50,
                      stop_at=ms_to_ticks(seconds * 1000), link=link, ul=ul,
                      rrc=RrcConfig(suspend_inactivity_ms=suspend), initial_state=state)
    cell.run(ms_to_ticks(seconds * 1000 + 2000))
    return cell


def _next(t, period_ms):
    p = ms_to_ticks(period_ms)
    return -(-t // p) * p


def test_rrc_path_timeline():
    cell = _cell(UplinkConfig(mode=UplinkModeKind.RRC))
    assert len(cell.packets) > 100
    for prev, p in zip([None] + cell.packets, cell.packets):
        if prev is not None and prev.delivered >= p.arrival:
            continue  # queued behind an establishment; served while connected
        expected = _next(p.arrival, 10) + ms_to_ticks(7) + ms_to_ticks(10) + ms_to_ticks(1) \
            + ms_to_ticks(1)
        assert p.delivered == expected
    assert all(ue.rrc.state is RrcState.INACTIVE for ue in cell.ues)


def test_idle_rrc_path_is_longer():
    inactive = _cell(UplinkConfig(mode=UplinkModeKind.RRC))
    idle = _cell(UplinkConfig(mode=UplinkModeKind.RRC), state=RrcState.IDLE)
    diffs = [b.latency_ticks - a.latency_ticks
             for prev, a, b in zip([None] + inactive.packets, inactive.packets, idle.packets)
             if prev is None or prev.delivered < a.arrival - ms_to_ticks(30)]
    assert len(diffs) > 100
    assert set(diffs) == {ms_to_ticks(20) - ms_to_ticks(10)}
    assert all(ue.rrc.state is RrcState.IDLE for ue in idle.ues)


def test_cg_path_timeline_and_state():
    cell = _cell(UplinkConfig(mode=UplinkModeKind.CG, dedicated=True, preamble_pool=1))
    for p in cell.packets:
        assert p.delivered == _next(p.arrival, 5) + ms_to_ticks(1)
    assert all(ue.rrc.state is RrcState.INACTIVE for ue in cell.ues)
    assert cell.cg_collisions == 0


def test_rach_sdt_exceeds_dedicated_cg_by_delta():
    common = dict(cg_period_ms=5.0, rach_period_ms=5.0, rach_steps=RachSteps.TWO)
    link = LinkConfig(first_tx_bler=0.3, retx_bler_multiplier=0.5, sinr_std_db=0.0)
    cg = _cell(UplinkConfig(mode=UplinkModeKind.CG, dedicated=True, preamble_pool=1, **common),
               link=link)
    rach = _cell(UplinkConfig(mode=UplinkModeKind.RACH, **common), link=link)
    assert any(p.harq_attempts > 1 for p in cg.packets)
    for a, b in zip(cg.packets, rach.packets):
        assert a.arrival == b.arrival
        assert b.latency_ticks - a.latency_ticks == ms_to_ticks(2)


def test_four_step_rach_sdt_is_slower():
    two = _cell(UplinkConfig(mode=UplinkModeKind.RACH, rach_steps=RachSteps.TWO))
    four = _cell(UplinkConfig(mode=UplinkModeKind.RACH, rach_steps=RachSteps.FOUR))
    for a, b in zip(two.packets, four.packets):
        assert b.latency_ticks - a.latency_ticks == ms_to_ticks(4)


def test_fallback_after_max_attempts():
    # a single shared preamble makes every simultaneous attempt collide
    ul = UplinkConfig(mode=UplinkModeKind.CG, preamble_pool=1, max_sdt_attempts=3)
    cell = _cell(ul, ues=4, rate=50.0, seconds=5)
    assert cell.fallbacks > 0
    assert all(p.delivered is not None for p in cell.packets)


def test_cell_collision_rate_tracks_contention():
    ul = UplinkConfig(mode=UplinkModeKind.CG, preamble_pool=4)
    light = _cell(ul, ues=10, rate=2.0, seconds=60)
    heavy = _cell(ul, ues=10, rate=40.0, seconds=10)
    rate = lambda c: c.cg_collisions / c.cg_attempts
    assert rate(light) < rate(heavy)
    for _, attempts in heavy.occasion_log[:2000]:
        n = len(attempts)
        assert n == len({u for u, _ in attempts})
    assert not math.isnan(rate(heavy))
