"""Closed-loop encoding policy: smoothed RTT mapped onto discrete tiers.

The controller keeps the most recent K round-trip samples in a bounded
FIFO, averages them, and picks the first tier whose threshold the mean
does not exceed. Thresholds are inclusive; the last tier has no threshold
and catches everything. No hysteresis by default: oscillation near a
boundary is accepted behavior, with an optional margin knob for
experiments.
"""

from __future__ import annotations

import math
import threading
from collections import deque
from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class EncodingParams:
    """One tier's parameter vector: quality, resolution cap, send interval."""

    quality: int
    max_resolution: int
    send_interval_ms: float
    tier_index: int


@dataclass(frozen=True)
class TierRow:
    rtt_threshold_ms: Optional[float]  # None = catch-all final row
    quality: int
    max_resolution: int
    send_interval_ms: float


DEFAULT_TIERS = (
    TierRow(30.0, 90, 1920, 80.0),
    TierRow(50.0, 80, 1280, 100.0),
    TierRow(100.0, 65, 960, 150.0),
    TierRow(150.0, 50, 720, 250.0),
    TierRow(None, 40, 480, 500.0),
)


class TierTable:
    """Ordered tier rows; validates the monotone structure on construction."""

    def __init__(self, rows=DEFAULT_TIERS) -> None:
        rows = tuple(rows)
        if len(rows) < 1:
            raise ValueError("tier table needs at least one row")
        for i, row in enumerate(rows):
            last = i == len(rows) - 1
            if last and row.rtt_threshold_ms is not None:
                raise ValueError("final tier row must be the catch-all (no threshold)")
            if not last and row.rtt_threshold_ms is None:
                raise ValueError("only the final tier row may omit its threshold")
        thresholds = [r.rtt_threshold_ms for r in rows[:-1]]
        if any(t2 <= t1 for t1, t2 in zip(thresholds, thresholds[1:])):
            raise ValueError("tier thresholds must be strictly increasing")
        if any(b.quality > a.quality for a, b in zip(rows, rows[1:])):
            raise ValueError("tier qualities must be non-increasing")
        if any(b.max_resolution > a.max_resolution for a, b in zip(rows, rows[1:])):
            raise ValueError("tier resolutions must be non-increasing")
        if any(b.send_interval_ms < a.send_interval_ms for a, b in zip(rows, rows[1:])):
            raise ValueError("tier send intervals must be non-decreasing")
        self.rows = rows

    def __len__(self) -> int:
        return len(self.rows)

    def params(self, tier_index: int) -> EncodingParams:
        row = self.rows[tier_index]
        return EncodingParams(
            quality=row.quality,
            max_resolution=row.max_resolution,
            send_interval_ms=row.send_interval_ms,
            tier_index=tier_index,
        )

    def select(self, mean_rtt_ms: float) -> EncodingParams:
        """First row whose (inclusive) threshold accommodates the mean RTT."""
        if mean_rtt_ms < 0:
            raise ValueError("mean RTT must be non-negative")
        for i, row in enumerate(self.rows):
            if row.rtt_threshold_ms is None or mean_rtt_ms <= row.rtt_threshold_ms:
                return self.params(i)
        raise AssertionError("unreachable: final row is a catch-all")


def select_tier(table: TierTable, mean_rtt_ms: float) -> EncodingParams:
    return table.select(mean_rtt_ms)


class RttWindow:
    """Bounded FIFO of the most recent RTT samples (milliseconds).

    Single writer, many readers: push and mean take a lock so a reader
    always sees a consistent snapshot.
    """

    def __init__(self, capacity: int = 5) -> None:
        if capacity < 1:
            raise ValueError("window capacity must be >= 1")
        self.capacity = capacity
        self._samples: deque[float] = deque(maxlen=capacity)
        self._lock = threading.Lock()

    def push(self, sample_ms: float) -> None:
        sample_ms = float(sample_ms)
        if not math.isfinite(sample_ms) or sample_ms < 0:
            raise ValueError(f"RTT sample must be finite and non-negative, got {sample_ms!r}")
        with self._lock:
            self._samples.append(sample_ms)

    def __len__(self) -> int:
        with self._lock:
            return len(self._samples)

    def snapshot(self) -> list[float]:
        with self._lock:
            return list(self._samples)

    def mean(self) -> float:
        with self._lock:
            if not self._samples:
                raise ValueError("mean of an empty RTT window")
            return sum(self._samples) / len(self._samples)


def push_rtt(window: RttWindow, sample_ms: float) -> RttWindow:
    window.push(sample_ms)
    return window


def mean_rtt(window: RttWindow) -> float:
    return window.mean()


class Controller:
    """Feedback policy: push a sample, re-select the tier, flag changes.

    In static mode the window still records samples but the selection is
    pinned to tier 0, which is also the cold-start tier while the window
    is empty. `hysteresis_ms > 0` makes upgrades (to a lower tier index)
    sticky: the mean must clear the boundary by the margin.
    """

    def __init__(
        self,
        table: TierTable | None = None,
        capacity: int = 5,
        static: bool = False,
        hysteresis_ms: float = 0.0,
    ) -> None:
        self.table = table if table is not None else TierTable()
        self.window = RttWindow(capacity)
        self.static = static
        self.hysteresis_ms = float(hysteresis_ms)
        self._current = self.table.params(0)
        self.tier_changes: list[tuple[int, int]] = []

    @property
    def params(self) -> EncodingParams:
        return self._current

    def step(self, sample_ms: float) -> EncodingParams:
        self.window.push(sample_ms)
        if self.static:
            return self._current
        mean = self.window.mean()
        candidate = self.table.select(mean)
        if candidate.tier_index < self._current.tier_index and self.hysteresis_ms > 0:
            # upgrade only as far as the margin-confirmed tier
            confirmed = self.table.select(mean + self.hysteresis_ms)
            candidate = confirmed if confirmed.tier_index < self._current.tier_index else self._current
        if candidate.tier_index != self._current.tier_index:
            self.tier_changes.append((self._current.tier_index, candidate.tier_index))
            self._current = candidate
        return self._current


def controller_step(controller: Controller, sample_ms: float) -> EncodingParams:
    return controller.step(sample_ms)
