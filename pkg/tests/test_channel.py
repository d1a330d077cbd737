import pytest

from navp.channel import (
    SCENARIO_PRESETS,
    ChannelEvent,
    Direction,
    NetworkScenario,
    VirtualChannel,
    VirtualClock,
    expected_idle_probe_rtt_us,
    one_way_delay,
    serialization_us,
)
from navp.errors import ChannelClosedError
from navp.rng import Xoshiro256StarStar


def flat(name="flat", down=1000.0, up=1000.0, rtt=0.0, loss=0.0):
    return NetworkScenario(name, downlink_mbps=down, uplink_mbps=up, base_rtt_ms=rtt, loss_prob=loss)


class TestPresets:
    def test_five_presets_exact(self):
        expected = {
            "extreme-4g": (10, 5, 100, 0.05),
            "congested-4g": (25, 10, 100, 0.02),
            "hybrid-4g5g": (50, 25, 50, 0.005),
            "good-5g": (200, 50, 30, 0.001),
            "ultra-5g": (800, 200, 10, 0.0),
        }
        assert set(SCENARIO_PRESETS) == set(expected)
        for name, (down, up, rtt, loss) in expected.items():
            s = SCENARIO_PRESETS[name]
            assert (s.downlink_mbps, s.uplink_mbps, s.base_rtt_ms, s.loss_prob) == (down, up, rtt, loss)

    def test_scenario_validation(self):
        with pytest.raises(ValueError):
            NetworkScenario("x", downlink_mbps=0, uplink_mbps=1, base_rtt_ms=0, loss_prob=0)
        with pytest.raises(ValueError):
            NetworkScenario("x", downlink_mbps=1, uplink_mbps=1, base_rtt_ms=-1, loss_prob=0)
        with pytest.raises(ValueError):
            NetworkScenario("x", downlink_mbps=1, uplink_mbps=1, base_rtt_ms=0, loss_prob=1.5)


class TestOneWayDelay:
    def test_serialization_only(self):
        # 125000 bytes at 10 Mbps -> 10^6 bits / 10^7 bps = 100 ms
        s = flat(down=10, up=10)
        rng = Xoshiro256StarStar(0)
        assert one_way_delay(s, Direction.UP, 125_000, rng, jitter_frac=0.0) == 100_000

    def test_fast_uplink_with_propagation(self):
        # 50 kB at 200 Mbps = 2 ms serialization, plus 5 ms half-RTT
        s = flat(down=800, up=200, rtt=10)
        rng = Xoshiro256StarStar(0)
        assert one_way_delay(s, Direction.UP, 50_000, rng, jitter_frac=0.0) == 7_000

    def test_zero_loss_means_zero_retransmits(self):
        s = flat(rtt=20)
        clock = VirtualClock()
        ch = VirtualChannel(s, clock, Xoshiro256StarStar(1))
        ch.on_deliver(Direction.UP, lambda m, t: None)
        for _ in range(200):
            ch.send(Direction.UP, 100, object())
        assert all(e.retransmit_count == 0 for e in ch.trace)

    def test_loss_inflates_delay_geometrically(self):
        s = flat(rtt=0, loss=0.5)
        rng = Xoshiro256StarStar(1)
        delays = [one_way_delay(s, Direction.UP, 1, rng, jitter_frac=0.0) for _ in range(2000)]
        # with p = 0.5, mean penalty is rto * p/(1-p) = 200 ms
        mean = sum(delays) / len(delays)
        assert 180_000 < mean < 220_000

    def test_payload_must_be_positive(self):
        with pytest.raises(ValueError):
            one_way_delay(flat(), Direction.UP, 0, Xoshiro256StarStar(0))

    def test_odd_base_rtt_splits_exactly(self):
        s = flat(rtt=5)  # 5 ms -> 2500 us each way via floor + remainder
        rng = Xoshiro256StarStar(0)
        up = one_way_delay(s, Direction.UP, 1, rng, jitter_frac=0.0)
        down = one_way_delay(s, Direction.DOWN, 1, rng, jitter_frac=0.0)
        assert up + down == 5000 + 2 * serialization_us(s, Direction.UP, 1)


class TestVirtualClock:
    def test_ties_run_in_insertion_order(self):
        clock = VirtualClock()
        order = []
        clock.schedule(10, lambda: order.append("a"))
        clock.schedule(10, lambda: order.append("b"))
        clock.schedule(5, lambda: order.append("c"))
        clock.run()
        assert order == ["c", "a", "b"]
        assert clock.now_us == 10

    def test_no_scheduling_into_the_past(self):
        clock = VirtualClock()
        clock.schedule(10, lambda: None)
        clock.run()
        with pytest.raises(ValueError):
            clock.schedule(5, lambda: None)

    def test_advance_until(self):
        clock = VirtualClock()
        hits = []
        clock.schedule(10, lambda: hits.append(10))
        clock.schedule(20, lambda: hits.append(20))
        clock.advance_until(15)
        assert hits == [10]
        assert clock.now_us == 15
        clock.advance_until(25)
        assert hits == [10, 20]


class TestVirtualChannel:
    def test_link_occupancy_back_to_back(self):
        # two 100 ms serialization messages sent together deliver at 100 and 200 ms
        s = flat(down=10, up=10)
        clock = VirtualClock()
        got = []
        ch = VirtualChannel(s, clock, Xoshiro256StarStar(1), jitter_frac=0.0)
        ch.on_deliver(Direction.UP, lambda m, t: got.append((m, t)))
        ch.send(Direction.UP, 125_000, "m1")
        ch.send(Direction.UP, 125_000, "m2")
        clock.run()
        assert got == [("m1", 100_000), ("m2", 200_000)]

    def test_single_message_equals_one_way_delay(self):
        s = flat(down=10, up=10, rtt=40)
        delays = []
        clock = VirtualClock()
        ch = VirtualChannel(s, clock, Xoshiro256StarStar(5))
        ch.on_deliver(Direction.UP, lambda m, t: delays.append(t))
        ch.send(Direction.UP, 125_000, "m")
        clock.run()
        expected = one_way_delay(s, Direction.UP, 125_000, Xoshiro256StarStar(5))
        assert delays == [expected]

    def test_seeded_trace_identical(self):
        def run_once():
            s = SCENARIO_PRESETS["extreme-4g"]
            clock = VirtualClock()
            ch = VirtualChannel(s, clock, Xoshiro256StarStar(77))
            ch.on_deliver(Direction.UP, lambda m, t: None)
            ch.on_deliver(Direction.DOWN, lambda m, t: None)
            for i in range(100):
                ch.send(Direction.UP if i % 2 else Direction.DOWN, 1000 + i, i)
            clock.run()
            return ch.trace

        assert run_once() == run_once()

    def test_fifo_per_direction(self):
        s = SCENARIO_PRESETS["extreme-4g"]  # loss + jitter on
        clock = VirtualClock()
        deliveries = {Direction.UP: [], Direction.DOWN: []}
        ch = VirtualChannel(s, clock, Xoshiro256StarStar(3))
        ch.on_deliver(Direction.UP, lambda m, t: deliveries[Direction.UP].append((m, t)))
        ch.on_deliver(Direction.DOWN, lambda m, t: deliveries[Direction.DOWN].append((m, t)))
        rng = Xoshiro256StarStar(4)
        for i in range(300):
            d = Direction.UP if rng.randint(2) else Direction.DOWN
            ch.send(d, 1 + rng.randint(300_000), (d, i))
        clock.run()
        for d, got in deliveries.items():
            sent_order = [m for m, _ in got]
            assert sent_order == sorted(sent_order, key=lambda m: m[1])
            times = [t for _, t in got]
            assert times == sorted(times)

    def test_closed_channel_rejects_sends(self):
        s = flat()
        clock = VirtualClock()
        ch = VirtualChannel(s, clock, Xoshiro256StarStar(0))
        ch.on_deliver(Direction.UP, lambda m, t: None)
        ch.close()
        with pytest.raises(ChannelClosedError):
            ch.send(Direction.UP, 10, "x")

    def test_idle_probe_rtt_matches_closed_form(self):
        # Monte Carlo mean over 1000 probes within 5% of the analytic expectation
        s = SCENARIO_PRESETS["extreme-4g"]
        clock = VirtualClock()
        ch = VirtualChannel(s, clock, Xoshiro256StarStar(11))
        arrivals = {}
        ch.on_deliver(Direction.UP, lambda m, t: arrivals.__setitem__(("up", m), t))
        ch.on_deliver(Direction.DOWN, lambda m, t: arrivals.__setitem__(("down", m), t))
        n = 1000
        spacing = 5_000_000  # idle link: no queueing between probes
        rtts = []
        for i in range(n):
            t0 = i * spacing
            clock.advance_until(t0)
            ch.send(Direction.UP, 22, i)
            clock.run()
            t_up = arrivals[("up", i)]
            clock.advance_until(t_up)
            ch.send(Direction.DOWN, 22, i)
            clock.run()
            rtts.append(arrivals[("down", i)] - t0)
        mean = sum(rtts) / n
        expected = expected_idle_probe_rtt_us(s, 22)
        assert abs(mean - expected) / expected < 0.05

    def test_event_invariant(self):
        with pytest.raises(ValueError):
            ChannelEvent(message_id=0, direction=Direction.UP, enqueue_us=10, deliver_us=5, retransmit_count=0)


def test_scenario_json_file(tmp_path):
    p = tmp_path / "scen.json"
    p.write_text('{"name": "ultra-5g", "loss_prob": 0.25}', encoding="utf-8")
    s = NetworkScenario.from_json_file(p)
    assert s.downlink_mbps == 800 and s.loss_prob == 0.25

    q = tmp_path / "full.json"
    q.write_text(
        '{"name": "lab", "downlink_mbps": 3, "uplink_mbps": 2, "base_rtt_ms": 7, "loss_prob": 0.1}',
        encoding="utf-8",
    )
    s2 = NetworkScenario.from_json_file(q)
    assert (s2.name, s2.uplink_mbps) == ("lab", 2)
