"""Per-face statistics consumed by the forwarding strategies.

Tracks, per interface: the recent-send count eta over a trailing interval,
the delivery rate omega over a send-rate-coupled window, the availability
flag delta, plus RTT/SRTT/RTO bookkeeping. A fixed-order (omega, delta)
packing of all faces forms the state vector fed to the DQN strategy.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from typing import Optional

ETA_INTERVAL_MS = 100.0
OMEGA_MIN_WINDOW = 10
SRTT_ALPHA = 1.0 / 8.0
RTTVAR_BETA = 1.0 / 4.0
RTO_MIN_MS = 200.0
RTO_MAX_MS = 2000.0


class UnmatchedOutcome(RuntimeError):
    pass


class NonPositiveSample(ValueError):
    pass


class LossCause(enum.Enum):
    TIMEOUT = "timeout"
    NACK = "nack"


@dataclass
class Outcome:
    delivered: bool
    rtt: Optional[float] = None  # ms, deliveries only
    cause: Optional[LossCause] = None  # losses only

    @classmethod
    def ok(cls, rtt: float) -> "Outcome":
        return cls(delivered=True, rtt=rtt)

    @classmethod
    def lost(cls, cause: LossCause) -> "Outcome":
        return cls(delivered=False, cause=cause)


class FaceStats:
    """Measurement record for one interface."""

    def __init__(self, eta_interval_ms: float = ETA_INTERVAL_MS,
                 omega_min_window: int = OMEGA_MIN_WINDOW):
        self.eta_interval_ms = eta_interval_ms
        self.omega_min_window = omega_min_window
        self._sent_log: deque[float] = deque()
        self._outcomes: deque[bool] = deque()  # True = delivered
        self._pending = 0  # sends without a resolved outcome yet
        self.omega = 1.0  # optimistic until the first outcome
        self.delta = 1  # 0 after Lost(timeout), 1 again after a delivery
        self.srtt: Optional[float] = None  # unmeasured until first RTT sample
        self.rttvar = 0.0
        self.consecutive_losses = 0
        self.measured = False  # any outcome recorded yet
        self.last_delivery_time: Optional[float] = None

    # -- eta ------------------------------------------------------------

    def record_sent(self, now: float):
        self._sent_log.append(now)
        self._pending += 1
        self._trim_sent(now)

    def _trim_sent(self, now: float):
        horizon = now - self.eta_interval_ms
        log = self._sent_log
        while log and log[0] <= horizon:
            log.popleft()

    def eta(self, now: float) -> int:
        """Count of sends in (now - t, now]."""
        self._trim_sent(now)
        return len(self._sent_log)

    # -- omega / delta ---------------------------------------------------

    def record_outcome(self, outcome: Outcome, now: float):
        if self._pending <= 0:
            raise UnmatchedOutcome("no pending send for this face")
        self._pending -= 1
        window = max(self.eta(now), self.omega_min_window)
        self._outcomes.append(outcome.delivered)
        while len(self._outcomes) > window:
            self._outcomes.popleft()
        self.omega = sum(self._outcomes) / len(self._outcomes)
        self.measured = True
        if outcome.delivered:
            self.delta = 1
            self.consecutive_losses = 0
            self.last_delivery_time = now
            if outcome.rtt is not None:
                self.srtt_update(outcome.rtt)
        else:
            self.consecutive_losses += 1
            if outcome.cause is LossCause.TIMEOUT:
                self.delta = 0

    # -- SRTT / RTO --------------------------------------------------------

    def srtt_update(self, rtt_sample: float) -> float:
        if rtt_sample <= 0:
            raise NonPositiveSample(f"rtt sample {rtt_sample} must be > 0")
        if self.srtt is None:
            self.srtt = rtt_sample
            self.rttvar = rtt_sample / 2.0
        else:
            self.rttvar = (1.0 - RTTVAR_BETA) * self.rttvar + RTTVAR_BETA * abs(self.srtt - rtt_sample)
            self.srtt = (1.0 - SRTT_ALPHA) * self.srtt + SRTT_ALPHA * rtt_sample
        return self.srtt

    @property
    def rto(self) -> float:
        """Loss-detection timeout; 200 ms floor also covers the unmeasured case."""
        if self.srtt is None:
            return RTO_MIN_MS
        return min(max(self.srtt + 4.0 * self.rttvar, RTO_MIN_MS), RTO_MAX_MS)


def state_vector(stats_by_face: dict[int, FaceStats], face_order: list[int]) -> list[float]:
    """Pack [omega_1, delta_1, omega_2, delta_2, ...] in fixed face order.

    Faces without any recorded outcome report the optimistic (1.0, 1) so
    an agent still explores them.
    """
    vec: list[float] = []
    for face in face_order:
        st = stats_by_face.get(face)
        if st is None or not st.measured:
            vec.extend([1.0, 1.0])
        else:
            vec.extend([st.omega, float(st.delta)])
    return vec
