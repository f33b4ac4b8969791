"""Forwarding strategies: Best-Route, Multicast, ASF and DQ-Learning.

A strategy picks the out-face set for each interest from the FIB nexthops
and reacts to delivery / loss feedback. Strategy state is per-router and
mutated only from the event loop.
"""

from __future__ import annotations

import math
from typing import Optional

from .core import DqAnnotation, FibEntry
from .measurements import FaceStats, LossCause


class NoNexthop(RuntimeError):
    pass


class MissingAnnotation(RuntimeError):
    pass


class Strategy:
    """Interface shared by all strategies.

    ``choose`` must return a non-empty subset of the FIB nexthops; it raises
    NoNexthop when no usable nexthop exists (the router answers with a
    no-route NACK). Feedback callbacks receive the face, the interest key
    (name, nonce) and the current time.
    """

    name = "strategy"
    needs_annotation = False  # DQ-Learning: piggyback hop feedback on data
    probe_interval_ms: Optional[float] = None  # ASF: periodic probe rounds

    def bind(self, stats_by_face: dict[int, FaceStats], schedule_in, rng):
        self.stats = stats_by_face
        self.schedule_in = schedule_in
        self.rng = rng

    def choose(self, fib_entry: FibEntry, in_face: Optional[int], now: float,
               key=None) -> list[int]:
        raise NotImplementedError

    def on_send(self, face: int, key, now: float):
        pass

    def on_data(self, face: int, rtt: Optional[float], key, now: float,
                annotation: Optional[DqAnnotation] = None):
        pass

    def on_loss(self, face: int, cause: LossCause, key, now: float):
        pass

    def probe_faces(self, fib_entry: FibEntry, now: float) -> list[int]:
        return []

    def data_annotation(self, fib_entry: Optional[FibEntry], now: float) -> Optional[DqAnnotation]:
        return None


class BestRouteStrategy(Strategy):
    """Always the lowest-cost nexthop, ties by FIB insertion order.

    Never consults measurements, so it keeps using a nexthop whose link is
    down until the FIB itself changes.
    """

    name = "best-route"

    def choose(self, fib_entry, in_face, now, key=None):
        if not fib_entry.nexthops:
            raise NoNexthop(fib_entry.prefix)
        return [fib_entry.nexthops[0].face]


class MulticastStrategy(Strategy):
    """Replicates every interest to all nexthops except the arrival face."""

    name = "multicast"

    def choose(self, fib_entry, in_face, now, key=None):
        faces = [h.face for h in fib_entry.nexthops if h.face != in_face]
        if not faces:
            raise NoNexthop(fib_entry.prefix)
        return faces


class AsfStrategy(Strategy):
    """SRTT-ranked forwarding with periodic probing of non-best faces.

    Faces are ranked measured-by-SRTT first, unmeasured next (FIB order),
    penalized last; SRTT ties fall back to the FIB rank. A face is penalized
    when an interest sent on it stays unanswered for ``timeout_ms`` (the
    interest-lifetime horizon, matching the sluggish timeout detection of
    the deployed strategy rather than the fast RTO loss signal), and leaves
    the penalized set on the next delivery, typically a probe reply.
    """

    name = "asf"

    def __init__(self, probe_interval_ms: float = 1000.0, timeout_ms: float = 2000.0):
        self.probe_interval_ms = probe_interval_ms
        self.timeout_ms = timeout_ms
        self.penalized: set[int] = set()

    def _ranked(self, faces: list[int]) -> list[int]:
        def key(pair):
            rank, face = pair
            st = self.stats.get(face)
            measured = st is not None and st.srtt is not None
            if face in self.penalized:
                group = 2
            elif measured:
                group = 0
            else:
                group = 1
            srtt = st.srtt if measured else math.inf
            return (group, srtt, rank)

        indexed = sorted(enumerate(faces), key=key)
        return [face for _, face in indexed]

    def choose(self, fib_entry, in_face, now, key=None):
        faces = [h.face for h in fib_entry.nexthops]
        if not faces:
            raise NoNexthop(fib_entry.prefix)
        return [self._ranked(faces)[0]]

    def on_send(self, face, key, now):
        self.schedule_in(self.timeout_ms, lambda: self._timeout_check(face, now))

    def _timeout_check(self, face, sent_at):
        st = self.stats.get(face)
        if st is None:
            return
        if st.last_delivery_time is None or st.last_delivery_time < sent_at:
            self.penalized.add(face)

    def on_data(self, face, rtt, key, now, annotation=None):
        self.penalized.discard(face)

    def probe_faces(self, fib_entry, now):
        faces = [h.face for h in fib_entry.nexthops]
        if len(faces) < 2:
            return []
        best = self._ranked(faces)[0]
        return [f for f in faces if f != best]


class DqLearningStrategy(Strategy):
    """Distributed Q-learning over per-face delay estimates.

    Q values estimate the delay (ms) behind each nexthop and are updated
    from hop feedback piggybacked on data packets: the sending router's
    best Q (zero at the producer) plus the observed hop delay. Losses pull
    Q toward a large penalty. After two consecutive losses on the currently
    best face, choices are sampled with probability proportional to
    1/(Q + q_floor) for a suppression span during which Q is frozen, so a
    flapping face is not penalized unnecessarily.
    """

    name = "dq-learning"
    needs_annotation = True

    def __init__(self, alpha: float = 0.3, gamma: float = 0.9,
                 loss_penalty_ms: float = 1000.0, q_floor_ms: float = 1.0,
                 suppression_losses: int = 2, suppression_span_ms: float = 500.0):
        self.alpha = alpha
        self.gamma = gamma
        self.loss_penalty_ms = loss_penalty_ms
        self.q_floor_ms = q_floor_ms
        self.suppression_losses = suppression_losses
        self.suppression_span_ms = suppression_span_ms
        self.q: dict[int, float] = {}
        self.suppression_until = -math.inf
        self._face_order: list[int] = []

    def q_value(self, face: int) -> float:
        return self.q.get(face, 0.0)

    def suppressed(self, now: float) -> bool:
        return now < self.suppression_until

    def _argmin(self, faces: list[int]) -> int:
        best = faces[0]
        best_q = self.q_value(best)
        for face in faces[1:]:
            qv = self.q_value(face)
            if qv < best_q:
                best, best_q = face, qv
        return best

    def choose(self, fib_entry, in_face, now, key=None):
        faces = [h.face for h in fib_entry.nexthops]
        if not faces:
            raise NoNexthop(fib_entry.prefix)
        self._face_order = faces
        if self.suppressed(now):
            return [self._sample(faces)]
        return [self._argmin(faces)]

    def _sample(self, faces: list[int]) -> int:
        weights = [1.0 / (self.q_value(f) + self.q_floor_ms) for f in faces]
        total = sum(weights)
        u = self.rng.random() * total
        acc = 0.0
        for face, w in zip(faces, weights):
            acc += w
            if u < acc:
                return face
        return faces[-1]

    def on_data(self, face, rtt, key, now, annotation=None):
        if annotation is None:
            raise MissingAnnotation(f"DQ-Learning data without annotation on face {face}")
        self.suppression_until = -math.inf
        delay = now - annotation.send_time
        old = self.q_value(face)
        self.q[face] = (1.0 - self.alpha) * old + self.alpha * (delay + self.gamma * annotation.best_q)

    def on_loss(self, face, cause, key, now):
        if self.suppressed(now):
            return  # frozen: do not penalize during suppression
        faces = self._face_order or [face]
        was_argmin = face == self._argmin(faces)
        old = self.q_value(face)
        self.q[face] = (1.0 - self.alpha) * old + self.alpha * self.loss_penalty_ms
        st = self.stats.get(face)
        losses_in_row = st.consecutive_losses if st is not None else 0
        if was_argmin and losses_in_row >= self.suppression_losses:
            self.suppression_until = now + self.suppression_span_ms

    def data_annotation(self, fib_entry, now):
        if fib_entry is None or not fib_entry.nexthops:
            best = 0.0
        else:
            best = min(self.q_value(h.face) for h in fib_entry.nexthops)
        return DqAnnotation(best_q=best, send_time=now)
