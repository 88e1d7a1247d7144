import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from calltriage.netsim import (
    ChannelConfig,
    PacketFrame,
    bandwidth_admission,
    effective_loss_probability,
    frames_for_duration,
    reception_rate,
    transmit,
    with_overflow_loss,
)


def frames(n, payload=b"\x00"):
    return [PacketFrame(seq=i, send_time_ms=i * 20, payload=payload) for i in range(n)]


class TestChannelConfig:
    def test_rejects_out_of_range_probability(self):
        with pytest.raises(ValueError):
            ChannelConfig(p_random=1.5)
        with pytest.raises(ValueError):
            ChannelConfig(burst_loss=-0.1)

    def test_rejects_absorbing_bad_state(self):
        with pytest.raises(ValueError):
            ChannelConfig(burst_enter=0.1, burst_exit=0.0)

    def test_rejects_negative_delay(self):
        with pytest.raises(ValueError):
            ChannelConfig(delay_mean_ms=-1)


class TestEffectiveLoss:
    def test_no_loss_sources(self):
        assert effective_loss_probability(ChannelConfig()) == 0.0

    def test_random_only_is_additive_identity(self):
        assert effective_loss_probability(ChannelConfig(p_random=0.01)) == 0.01

    def test_bursty_stationary_occupancy(self):
        # two-state chain: stationary bad-state share = 0.1 / (0.1 + 0.4)
        cfg = ChannelConfig(burst_enter=0.1, burst_exit=0.4, burst_loss=1.0)
        assert effective_loss_probability(cfg) == pytest.approx(0.2)

    def test_clamped_at_one(self):
        cfg = ChannelConfig(p_random=0.9, burst_enter=0.5, burst_exit=0.5, burst_loss=1.0)
        assert effective_loss_probability(cfg) == 1.0

    @given(
        p=st.floats(0, 1),
        enter=st.floats(0, 1),
        exit_=st.floats(0.01, 1),
        h=st.floats(0, 1),
    )
    def test_reception_complements_loss_exactly(self, p, enter, exit_, h):
        cfg = ChannelConfig(p_random=p, burst_enter=enter, burst_exit=exit_, burst_loss=h)
        p_l = effective_loss_probability(cfg)
        assert reception_rate(p_l) + p_l == 1.0


class TestReceptionRate:
    @pytest.mark.parametrize("p,expected", [(0.0, 1.0), (1.0, 0.0), (0.05, 0.95)])
    def test_values(self, p, expected):
        assert reception_rate(p) == pytest.approx(expected)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            reception_rate(1.2)


class TestTransmit:
    def test_lossless_channel_delivers_everything_in_order(self):
        trace = transmit(frames(100), ChannelConfig())
        assert trace.dropped == []
        assert [seq for seq, _ in trace.delivered] == list(range(100))
        assert [t for _, t in trace.delivered] == [i * 20 for i in range(100)]

    def test_certain_loss_drops_everything(self):
        trace = transmit(frames(50), ChannelConfig(p_random=1.0))
        assert trace.delivered == []
        assert trace.dropped == list(range(50))

    def test_empty_input_allowed(self):
        trace = transmit([], ChannelConfig(p_random=0.5))
        assert trace.delivered == [] and trace.dropped == []
        assert trace.empirical_loss_rate == 0.0

    def test_partition_of_input(self):
        cfg = ChannelConfig(p_random=0.3, seed=3)
        trace = transmit(frames(1000), cfg)
        assert sorted(trace.delivered_seqs() | set(trace.dropped)) == list(range(1000))
        assert trace.delivered_seqs() & set(trace.dropped) == set()

    def test_monte_carlo_random_loss_concentrates(self):
        # oracle: direct counting of drops over 10^6 Bernoulli(0.05) frames
        cfg = ChannelConfig(p_random=0.05, seed=42)
        trace = transmit(frames(1_000_000), cfg)
        assert 0.045 <= trace.empirical_loss_rate <= 0.055

    def test_equal_seeds_give_byte_identical_traces(self):
        cfg = ChannelConfig(p_random=0.05, burst_enter=0.05, burst_exit=0.3, jitter_std_ms=5, seed=9)
        a = transmit(frames(2000), cfg).to_json()
        b = transmit(frames(2000), cfg).to_json()
        assert a == b

    def test_different_seeds_differ(self):
        base = dict(p_random=0.05)
        a = transmit(frames(2000), ChannelConfig(seed=1, **base)).to_json()
        b = transmit(frames(2000), ChannelConfig(seed=2, **base)).to_json()
        assert a != b

    def test_delay_and_jitter_shift_arrivals(self):
        cfg = ChannelConfig(delay_mean_ms=40, jitter_std_ms=10, seed=5)
        trace = transmit(frames(500), cfg)
        assert len(trace.delivered) == 500
        for seq, arrival in trace.delivered:
            assert arrival >= seq * 20  # clamp: never before send

    def test_jitter_can_reorder_arrivals(self):
        cfg = ChannelConfig(delay_mean_ms=30, jitter_std_ms=25, seed=11)
        arrivals = [t for _, t in transmit(frames(500), cfg).delivered]
        assert any(b < a for a, b in zip(arrivals, arrivals[1:]))

    def test_trace_json_round_trips(self):
        trace = transmit(frames(50), ChannelConfig(p_random=0.2, seed=1))
        obj = json.loads(trace.to_json())
        assert set(obj) == {"delivered", "dropped", "empirical_loss_rate"}
        assert len(obj["delivered"]) + len(obj["dropped"]) == 50


class TestGilbertElliott:
    def test_empirical_loss_matches_stationary_rate(self):
        cfg = ChannelConfig(burst_enter=0.1, burst_exit=0.4, burst_loss=1.0, seed=13)
        trace = transmit(frames(1_000_000), cfg)
        assert abs(trace.empirical_loss_rate - 0.2) <= 0.005

    def test_mean_burst_length_is_geometric_sojourn(self):
        # sojourn in the bad state is geometric with mean 1/burst_exit = 2.5
        cfg = ChannelConfig(burst_enter=0.1, burst_exit=0.4, burst_loss=1.0, seed=17)
        trace = transmit(frames(1_000_000), cfg)
        dropped = sorted(trace.dropped)
        bursts = []
        run = 1
        for prev, cur in zip(dropped, dropped[1:]):
            if cur == prev + 1:
                run += 1
            else:
                bursts.append(run)
                run = 1
        bursts.append(run)
        mean = sum(bursts) / len(bursts)
        assert 2.5 * 0.95 <= mean <= 2.5 * 1.05

    def test_burst_off_when_enter_zero(self):
        cfg = ChannelConfig(burst_enter=0.0, burst_exit=0.0, burst_loss=1.0)
        trace = transmit(frames(10_000), cfg)
        assert trace.dropped == []

    @settings(max_examples=10)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_mixed_sources_match_effective_loss(self, seed):
        # product term p_r * p_b is far below the 0.005 tolerance here
        cfg = ChannelConfig(p_random=0.02, burst_enter=0.02, burst_exit=0.4, burst_loss=1.0, seed=seed)
        trace = transmit(frames(200_000), cfg)
        assert abs(trace.empirical_loss_rate - effective_loss_probability(cfg)) <= 0.005


class TestBandwidthAdmission:
    def test_under_capacity_admitted(self):
        cfg = ChannelConfig(bandwidth_avail_kbps=1000, per_call_kbps=64)
        decision = bandwidth_admission(10, cfg)
        assert decision.admitted and decision.utilized_kbps == 640

    def test_boundary_is_admitted(self):
        cfg = ChannelConfig(bandwidth_avail_kbps=640, per_call_kbps=64)
        assert bandwidth_admission(10, cfg).admitted

    def test_over_capacity_degrades(self):
        cfg = ChannelConfig(bandwidth_avail_kbps=600, per_call_kbps=64)
        decision = bandwidth_admission(10, cfg)
        assert decision.status == "degraded"
        assert decision.utilized_kbps == 640
        assert decision.overflow_loss == pytest.approx(40 / 640)

    def test_overflow_raises_random_loss(self):
        cfg = ChannelConfig(p_random=0.01, bandwidth_avail_kbps=600, per_call_kbps=64)
        decision = bandwidth_admission(10, cfg)
        degraded = with_overflow_loss(cfg, decision)
        assert degraded.p_random == pytest.approx(0.01 + 40 / 640)

    def test_zero_calls(self):
        assert bandwidth_admission(0, ChannelConfig()).admitted

    @given(n=st.integers(0, 500))
    def test_monotone_in_call_count(self, n):
        cfg = ChannelConfig(bandwidth_avail_kbps=1000, per_call_kbps=64)
        if bandwidth_admission(n, cfg).admitted:
            for smaller in range(0, n, max(1, n // 7)):
                assert bandwidth_admission(smaller, cfg).admitted


def test_frames_for_duration_covers_script():
    out = list(frames_for_duration(1000))
    assert len(out) == 50
    assert out[0].send_time_ms == 0 and out[-1].send_time_ms == 980
    assert all(len(f.payload) == 160 for f in out)
    assert math.ceil(990 / 20) == len(list(frames_for_duration(990)))
