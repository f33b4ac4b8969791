"""Deterministic discrete-event core.

Virtual clock (milliseconds, float), a (time, seq)-ordered event queue,
point-to-point links with serialization delay, propagation delay, drop-tail
queues, burst loss models and scheduled outage windows. Two runs with the
same configuration and seed replay bit-identically.
"""

from __future__ import annotations

import enum
import hashlib
import heapq
import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional


class SchedulingInPast(ValueError):
    pass


class InvalidWindow(ValueError):
    pass


class Simulator:
    """Event queue plus virtual clock. Ties dequeue in scheduling order."""

    def __init__(self):
        self.now = 0.0
        self._heap: list = []
        self._seq = 0
        self.processed = 0

    def schedule(self, time: float, action: Callable[[], None]) -> int:
        if time < self.now:
            raise SchedulingInPast(f"cannot schedule at {time} (clock at {self.now})")
        self._seq += 1
        heapq.heappush(self._heap, (time, self._seq, action))
        return self._seq

    def schedule_in(self, delay: float, action: Callable[[], None]) -> int:
        return self.schedule(self.now + delay, action)

    def run_until(self, t_end: float) -> int:
        if t_end < self.now:
            raise SchedulingInPast(f"t_end {t_end} before clock {self.now}")
        count = 0
        while self._heap and self._heap[0][0] <= t_end:
            time, _, action = heapq.heappop(self._heap)
            self.now = time
            action()
            count += 1
        self.now = t_end
        self.processed += count
        return count


def stream_seed(base_seed: int, *labels) -> int:
    """Derive a stable 64-bit seed for a named rng stream."""
    text = ":".join([str(base_seed)] + [str(x) for x in labels])
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "little")


class RngStreams:
    """Independent, named ``random.Random`` streams.

    Consumers draw from their own stream (traffic, loss.<link>, agent.explore,
    agent.replay, net.init, ...) so adding draws in one place never perturbs
    the others.
    """

    def __init__(self, base_seed: int, run_index: int = 0):
        import random

        self.base_seed = base_seed
        self.run_index = run_index
        self._random_cls = random.Random
        self._streams: dict[str, "random.Random"] = {}

    def stream(self, name: str):
        rng = self._streams.get(name)
        if rng is None:
            rng = self._random_cls(stream_seed(self.base_seed, self.run_index, name))
            self._streams[name] = rng
        return rng


class BurstLossModel:
    """Burst packet loss: each non-burst packet starts a burst with
    probability ``rate``; burst lengths are Exponential(mean_burst) rounded
    half-up and clamped to >= 1. All packets inside a burst are dropped.
    """

    def __init__(self, rate: float, mean_burst: float):
        if not 0.0 <= rate <= 1.0:
            raise ValueError("rate must be in [0, 1]")
        if mean_burst < 1:
            raise ValueError("mean_burst must be >= 1")
        self.rate = rate
        self.mean_burst = mean_burst
        self.remaining_burst = 0

    def should_drop(self, rng) -> bool:
        if self.remaining_burst > 0:
            self.remaining_burst -= 1
            return True
        if rng.random() < self.rate:
            length = max(1, math.floor(-self.mean_burst * math.log(1.0 - rng.random()) + 0.5))
            self.remaining_burst = length - 1
            return True
        return False


class TxOutcome(enum.Enum):
    ARRIVE = "arrive"
    QUEUE_DROP = "queue-drop"
    ERROR_DROP = "error-drop"
    OUTAGE_DROP = "outage-drop"


@dataclass
class TxResult:
    outcome: TxOutcome
    arrive_at: Optional[float] = None


class LinkDirection:
    """One direction of a point-to-point link.

    A packet entering the direction is checked against outage windows
    (half-open [from, to)), then the loss model, then the drop-tail queue;
    survivors arrive at queue-drain + size/bandwidth + delay.
    """

    def __init__(self, delay_ms: float, bandwidth_bps: float, queue_capacity: int,
                 rng=None, label: str = ""):
        if delay_ms < 0:
            raise ValueError("delay must be >= 0")
        if bandwidth_bps <= 0:
            raise ValueError("bandwidth must be > 0")
        self.delay_ms = delay_ms
        self.bandwidth_bps = bandwidth_bps
        self.queue_capacity = queue_capacity
        # (start, stop, model): model applies to packets entering in [start, stop)
        self.loss_models: list[tuple[float, float, BurstLossModel]] = []
        self.rng = rng
        self.label = label
        self.outage_windows: list[tuple[float, float]] = []
        self._busy_until = 0.0
        self._queued_starts: deque = deque()  # serialization start times of waiting packets
        # conservation counters
        self.counts = {o: 0 for o in TxOutcome}

    def add_outage(self, start: float, stop: float):
        if start >= stop:
            raise InvalidWindow(f"outage window [{start}, {stop}) is empty")
        self.outage_windows.append((start, stop))

    def in_outage(self, now: float) -> bool:
        return any(start <= now < stop for start, stop in self.outage_windows)

    def add_loss_window(self, start: float, stop: float, model: BurstLossModel):
        if start >= stop:
            raise InvalidWindow(f"loss window [{start}, {stop}) is empty")
        self.loss_models.append((start, stop, model))

    def _active_loss_model(self, now: float) -> Optional[BurstLossModel]:
        for start, stop, model in self.loss_models:
            if start <= now < stop:
                return model
        return None

    def queue_occupancy(self, now: float) -> int:
        q = self._queued_starts
        while q and q[0] <= now:
            q.popleft()
        return len(q)

    def transmit(self, size_bits: int, now: float) -> TxResult:
        if self.in_outage(now):
            self.counts[TxOutcome.OUTAGE_DROP] += 1
            return TxResult(TxOutcome.OUTAGE_DROP)
        model = self._active_loss_model(now)
        if model is not None and model.should_drop(self.rng):
            self.counts[TxOutcome.ERROR_DROP] += 1
            return TxResult(TxOutcome.ERROR_DROP)
        if self.queue_occupancy(now) >= self.queue_capacity:
            self.counts[TxOutcome.QUEUE_DROP] += 1
            return TxResult(TxOutcome.QUEUE_DROP)
        start = max(now, self._busy_until)
        finish = start + size_bits / self.bandwidth_bps * 1000.0
        self._busy_until = finish
        if start > now:
            self._queued_starts.append(start)
        self.counts[TxOutcome.ARRIVE] += 1
        return TxResult(TxOutcome.ARRIVE, arrive_at=finish + self.delay_ms)


class Link:
    """Bidirectional link between (node_a, face_a) and (node_b, face_b)."""

    def __init__(self, node_a: str, node_b: str, delay_ms: float, bandwidth_bps: float,
                 queue_capacity: int):
        self.node_a = node_a
        self.node_b = node_b
        self.directions: dict[tuple[str, str], LinkDirection] = {
            (node_a, node_b): LinkDirection(delay_ms, bandwidth_bps, queue_capacity,
                                            label=f"{node_a}->{node_b}"),
            (node_b, node_a): LinkDirection(delay_ms, bandwidth_bps, queue_capacity,
                                            label=f"{node_b}->{node_a}"),
        }

    def direction(self, src: str, dst: str) -> LinkDirection:
        return self.directions[(src, dst)]

    def other_end(self, node: str) -> str:
        return self.node_b if node == self.node_a else self.node_a

    def add_outage(self, start: float, stop: float):
        for d in self.directions.values():
            d.add_outage(start, stop)

    def add_burst_loss(self, start: float, stop: float, rate: float, mean_burst: float):
        """Install a burst-loss window on both directions (independent state)."""
        for d in self.directions.values():
            d.add_loss_window(start, stop, BurstLossModel(rate, mean_burst))
