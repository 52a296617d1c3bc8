import math

import pytest

from nrpower.link import (
    LinkConfig, Outcome, PacketFate, SinrClass, SinrProfile, classify, draw_sinr_profiles,
    harq_exhausted, harq_retx_delay, harq_retx_delay_ms, nack_probability,
    residual_loss_probability, transmission_outcome,
)
from nrpower.sim import Stream, rng_stream

HIGH = SinrProfile(0, 20.0, SinrClass.HIGH)
LOW = SinrProfile(1, 0.0, SinrClass.LOW)


def test_classify_threshold_is_strict():
    assert classify(4.99, 5.0) is SinrClass.LOW
    assert classify(5.0, 5.0) is SinrClass.HIGH


def test_nack_probability_geometric():
    cfg = LinkConfig()
    assert nack_probability(HIGH, 1, cfg) == pytest.approx(0.01)
    assert nack_probability(HIGH, 2, cfg) == pytest.approx(0.001)
    assert nack_probability(LOW, 1, cfg) == pytest.approx(0.1)
    assert nack_probability(LOW, 3, cfg) == pytest.approx(0.001)
    with pytest.raises(ValueError):
        nack_probability(HIGH, 0, cfg)


def test_nack_probability_is_capped():
    cfg = LinkConfig(first_tx_bler=0.5, low_sinr_bler_factor=10)
    assert nack_probability(LOW, 1, cfg) == 1.0


def test_residual_is_product():
    cfg = LinkConfig()
    expected = math.prod(nack_probability(LOW, a, cfg) for a in range(1, 5))
    assert residual_loss_probability(LOW, 4, cfg) == pytest.approx(expected)
    assert residual_loss_probability(HIGH, 0, cfg) == 1.0


def test_single_draw_frequency():
    cfg = LinkConfig(first_tx_bler=0.2)
    rng = rng_stream(4, Stream.LINK)
    n = 50_000
    k = sum(transmission_outcome(rng, HIGH, 1, cfg) is Outcome.NACK for _ in range(n))
    sigma = math.sqrt(n * 0.2 * 0.8)
    assert abs(k - n * 0.2) < 4 * sigma


def test_harq_helpers():
    cfg = LinkConfig(harq_rtt_symbols=56, max_harq_attempts=4)
    assert harq_retx_delay(cfg) == 56
    assert harq_retx_delay_ms(cfg) == 2.0
    assert not harq_exhausted(3, cfg)
    assert harq_exhausted(4, cfg)


def test_sinr_draw_statistics():
    cfg = LinkConfig(sinr_mean_db=5.0, sinr_std_db=8.0)
    profiles = draw_sinr_profiles(rng_stream(1, Stream.DROP), 20000, cfg)
    low = sum(p.sinr_class is SinrClass.LOW for p in profiles) / len(profiles)
    assert low == pytest.approx(0.5, abs=0.02)
    assert [p.ue_id for p in profiles[:3]] == [0, 1, 2]


def test_zero_std_is_deterministic():
    cfg = LinkConfig(sinr_mean_db=3.0, sinr_std_db=0.0)
    profiles = draw_sinr_profiles(rng_stream(1, Stream.DROP), 4, cfg)
    assert {p.mean_sinr_db for p in profiles} == {3.0}
    assert {p.sinr_class for p in profiles} == {SinrClass.LOW}


def test_packet_fate_is_fixed_per_packet():
    cfg = LinkConfig(first_tx_bler=0.5, retx_bler_multiplier=0.9)
    fate = PacketFate(rng_stream(8, Stream.LINK), 4)
    first = [fate.outcome(HIGH, a, cfg) for a in range(1, 5)]
    again = [fate.outcome(HIGH, a, cfg) for a in range(1, 5)]
    assert first == again


def test_config_validation():
    LinkConfig().validate()
    for bad in (dict(first_tx_bler=0), dict(retx_bler_multiplier=1.0), dict(harq_rtt_symbols=0),
                dict(max_harq_attempts=0), dict(sinr_std_db=-1)):
        with pytest.raises(ValueError):
            LinkConfig(**bad).validate()
