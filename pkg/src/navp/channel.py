"""Deterministic discrete-event emulation of an impaired bidirectional link.

Each direction is a single-server queue: a link transmits one message at a
time, so serialization slots never overlap and queueing delay accrues
under load. A message's one-way delay is

    propagation (half the base RTT) + jitter + serialization + loss penalty

where jitter ~ U[0, jitter_frac * base_rtt], serialization is
payload_bits / link_rate, and loss never drops a message (the transport
underneath is reliable): with probability `loss_prob` the message pays one
retransmission timeout, repeated independently, i.e. a geometric number of
fixed RTO penalties. Delivery within a direction is clamped to FIFO order.

All times are integer microseconds on a virtual clock; runs with the same
(scenario, seed, workload) produce identical event traces.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass
from enum import Enum
from typing import Callable

from .errors import ChannelClosedError
from .rng import Xoshiro256StarStar

DEFAULT_JITTER_FRAC = 0.10
DEFAULT_RTO_MS = 200.0


@dataclass(frozen=True)
class NetworkScenario:
    name: str
    downlink_mbps: float
    uplink_mbps: float
    base_rtt_ms: float
    loss_prob: float

    def __post_init__(self) -> None:
        if self.downlink_mbps <= 0 or self.uplink_mbps <= 0:
            raise ValueError("link rates must be positive")
        if self.base_rtt_ms < 0:
            raise ValueError("base RTT must be non-negative")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError("loss probability must be in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "downlink_mbps": self.downlink_mbps,
            "uplink_mbps": self.uplink_mbps,
            "base_rtt_ms": self.base_rtt_ms,
            "loss_prob": self.loss_prob,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkScenario":
        return cls(
            name=d["name"],
            downlink_mbps=d["downlink_mbps"],
            uplink_mbps=d["uplink_mbps"],
            base_rtt_ms=d["base_rtt_ms"],
            loss_prob=d["loss_prob"],
        )

    @classmethod
    def from_json_file(cls, path) -> "NetworkScenario":
        with open(path, "r", encoding="utf-8") as fh:
            base = json.load(fh)
        preset = SCENARIO_PRESETS.get(base.get("name", ""))
        if preset is not None:
            merged = preset.to_dict()
            merged.update(base)
            return cls.from_dict(merged)
        return cls.from_dict(base)


SCENARIO_PRESETS: dict[str, NetworkScenario] = {
    s.name: s
    for s in (
        NetworkScenario("extreme-4g", downlink_mbps=10, uplink_mbps=5, base_rtt_ms=100, loss_prob=0.05),
        NetworkScenario("congested-4g", downlink_mbps=25, uplink_mbps=10, base_rtt_ms=100, loss_prob=0.02),
        NetworkScenario("hybrid-4g5g", downlink_mbps=50, uplink_mbps=25, base_rtt_ms=50, loss_prob=0.005),
        NetworkScenario("good-5g", downlink_mbps=200, uplink_mbps=50, base_rtt_ms=30, loss_prob=0.001),
        NetworkScenario("ultra-5g", downlink_mbps=800, uplink_mbps=200, base_rtt_ms=10, loss_prob=0.0),
    )
}


class Direction(str, Enum):
    UP = "client_to_server"
    DOWN = "server_to_client"


@dataclass(frozen=True)
class ChannelEvent:
    message_id: int
    direction: Direction
    enqueue_us: int
    deliver_us: int
    retransmit_count: int

    def __post_init__(self) -> None:
        if self.deliver_us < self.enqueue_us:
            raise ValueError("deliver time precedes enqueue time")


class VirtualClock:
    """Event queue over integer microseconds; ties run in insertion order."""

    def __init__(self) -> None:
        self.now_us = 0
        self._heap: list[tuple[int, int, Callable[[], None]]] = []
        self._seq = 0

    def schedule(self, at_us: int, fn: Callable[[], None]) -> None:
        if at_us < self.now_us:
            raise ValueError("cannot schedule into the past")
        heapq.heappush(self._heap, (int(at_us), self._seq, fn))
        self._seq += 1

    def schedule_in(self, delay_us: int, fn: Callable[[], None]) -> None:
        self.schedule(self.now_us + int(delay_us), fn)

    def advance_until(self, t_us: int) -> None:
        while self._heap and self._heap[0][0] <= t_us:
            at, _, fn = heapq.heappop(self._heap)
            self.now_us = at
            fn()
        self.now_us = max(self.now_us, t_us)

    def run(self) -> None:
        while self._heap:
            at, _, fn = heapq.heappop(self._heap)
            self.now_us = at
            fn()

    def pending(self) -> int:
        return len(self._heap)


def _rate_bps(scenario: NetworkScenario, direction: Direction) -> int:
    mbps = scenario.uplink_mbps if direction == Direction.UP else scenario.downlink_mbps
    return round(mbps * 1_000_000)


def serialization_us(scenario: NetworkScenario, direction: Direction, payload_bytes: int) -> int:
    rate = _rate_bps(scenario, direction)
    return (payload_bytes * 8 * 1_000_000 + rate // 2) // rate


def _propagation_us(scenario: NetworkScenario, direction: Direction) -> int:
    base_us = round(scenario.base_rtt_ms * 1000)
    half = base_us // 2
    return half if direction == Direction.UP else base_us - half


def _jitter_us(scenario: NetworkScenario, rng: Xoshiro256StarStar, jitter_frac: float) -> int:
    if jitter_frac <= 0 or scenario.base_rtt_ms <= 0:
        return 0
    return int(rng.random() * jitter_frac * scenario.base_rtt_ms * 1000)


def _retransmits(scenario: NetworkScenario, rng: Xoshiro256StarStar) -> int:
    if scenario.loss_prob <= 0:
        return 0
    count = 0
    while rng.random() < scenario.loss_prob:
        count += 1
    return count


def one_way_delay(
    scenario: NetworkScenario,
    direction: Direction,
    payload_bytes: int,
    rng: Xoshiro256StarStar,
    jitter_frac: float = DEFAULT_JITTER_FRAC,
    rto_ms: float = DEFAULT_RTO_MS,
) -> int:
    """Delay in microseconds for one message on an otherwise idle link."""
    if payload_bytes < 1:
        raise ValueError("payload must be at least one byte")
    delay, _ = _delay_parts(scenario, direction, payload_bytes, rng, jitter_frac, rto_ms)
    return delay


def _delay_parts(scenario, direction, payload_bytes, rng, jitter_frac, rto_ms) -> tuple[int, int]:
    serial = serialization_us(scenario, direction, payload_bytes)
    prop = _propagation_us(scenario, direction)
    jitter = _jitter_us(scenario, rng, jitter_frac)
    retrans = _retransmits(scenario, rng)
    penalty = retrans * round(rto_ms * 1000)
    return prop + jitter + serial + penalty, retrans


class _LinkState:
    __slots__ = ("free_us", "last_deliver_us")

    def __init__(self) -> None:
        self.free_us = 0
        self.last_deliver_us = 0


class VirtualChannel:
    """Bidirectional shaped link delivering messages through the clock.

    Handlers are installed per direction; `send` draws jitter/loss from the
    channel RNG, books the serialization slot, clamps delivery to FIFO
    order within the direction, and schedules the handler call.
    """

    def __init__(
        self,
        scenario: NetworkScenario,
        clock: VirtualClock,
        rng: Xoshiro256StarStar,
        jitter_frac: float = DEFAULT_JITTER_FRAC,
        rto_ms: float = DEFAULT_RTO_MS,
    ) -> None:
        self.scenario = scenario
        self.clock = clock
        self.rng = rng
        self.jitter_frac = jitter_frac
        self.rto_ms = rto_ms
        self.trace: list[ChannelEvent] = []
        self._links = {Direction.UP: _LinkState(), Direction.DOWN: _LinkState()}
        self._handlers: dict[Direction, Callable[[object, int], None]] = {}
        self._next_id = 0
        self._closed = False

    def on_deliver(self, direction: Direction, handler: Callable[[object, int], None]) -> None:
        self._handlers[direction] = handler

    def close(self) -> None:
        self._closed = True

    @property
    def closed(self) -> bool:
        return self._closed

    def send(self, direction: Direction, wire_bytes: int, message: object) -> ChannelEvent:
        if self._closed:
            raise ChannelClosedError("send into a closed channel")
        if wire_bytes < 1:
            raise ValueError("wire length must be at least one byte")
        now = self.clock.now_us
        link = self._links[direction]

        depart = max(now, link.free_us) + serialization_us(self.scenario, direction, wire_bytes)
        link.free_us = depart
        jitter = _jitter_us(self.scenario, self.rng, self.jitter_frac)
        retrans = _retransmits(self.scenario, self.rng)
        raw_arrival = (
            depart
            + _propagation_us(self.scenario, direction)
            + jitter
            + retrans * round(self.rto_ms * 1000)
        )
        deliver = max(raw_arrival, link.last_deliver_us)  # reliable in-order delivery
        link.last_deliver_us = deliver

        event = ChannelEvent(
            message_id=self._next_id,
            direction=direction,
            enqueue_us=now,
            deliver_us=deliver,
            retransmit_count=retrans,
        )
        self._next_id += 1
        self.trace.append(event)
        handler = self._handlers.get(direction)
        if handler is None:
            raise RuntimeError(f"no handler installed for {direction}")
        self.clock.schedule(deliver, lambda: handler(message, deliver))
        return event


def expected_idle_probe_rtt_us(
    scenario: NetworkScenario,
    probe_wire_bytes: int,
    jitter_frac: float = DEFAULT_JITTER_FRAC,
    rto_ms: float = DEFAULT_RTO_MS,
) -> float:
    """Closed-form mean probe RTT on an idle channel.

    Both directions contribute independently: jitter in expectation is
    jitter_frac/2 * base_rtt per direction, and the geometric loss penalty
    is rto * p/(1-p) per direction.
    """
    base_us = scenario.base_rtt_ms * 1000.0
    serial = serialization_us(scenario, Direction.UP, probe_wire_bytes) + serialization_us(
        scenario, Direction.DOWN, probe_wire_bytes
    )
    jitter = 2 * (jitter_frac / 2.0) * base_us
    p = scenario.loss_prob
    loss = 2 * (rto_ms * 1000.0) * (p / (1.0 - p)) if p > 0 else 0.0
    return base_us + jitter + serial + loss
