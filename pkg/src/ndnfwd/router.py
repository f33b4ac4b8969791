"""Router forwarding pipeline and network wiring.

Each node is a router driving the CS -> PIT -> FIB -> strategy pipeline.
Consumer and producer applications attach through local app faces; local
faces take no part in per-interface measurements. Loss feedback for
strategies is generated by a per-interest timer of the face RTO armed at
send time, independent of the PIT lifetime.
"""

from __future__ import annotations

from typing import Callable, Optional

from .core import (
    ContentStore,
    DataPacket,
    Face,
    Fib,
    InterestPacket,
    NackPacket,
    NackReason,
    Name,
    Pit,
    PitInsertResult,
)
from .engine import Link, LinkDirection, Simulator, TxOutcome
from .measurements import FaceStats, LossCause, Outcome
from .strategies import BestRouteStrategy, NoNexthop, Strategy

INTEREST_HEADER_BYTES = 64
DATA_HEADER_BYTES = 64
NACK_BYTES = 64
PROBE_COMPONENT = "_probe"


def interest_bits(_interest: InterestPacket) -> int:
    return INTEREST_HEADER_BYTES * 8


def data_bits(data: DataPacket) -> int:
    return (DATA_HEADER_BYTES + data.payload_size) * 8


def is_probe_name(name: Name) -> bool:
    return PROBE_COMPONENT in name.components


class Router:
    def __init__(self, name: str, sim: Simulator, lifetime_ms: float = 2000.0,
                 cs_capacity: int = 0):
        self.name = name
        self.sim = sim
        self.lifetime_ms = lifetime_ms
        self.pit = Pit()
        self.fib = Fib()
        self.cs = ContentStore(cs_capacity)
        self.faces: dict[int, Face] = {}
        self.stats: dict[int, FaceStats] = {}
        self._next_face_id = 1
        self._links: dict[int, tuple[LinkDirection, "Router", int]] = {}
        self._app_interest: dict[int, Callable] = {}
        self._app_data: dict[int, Callable] = {}
        self.strategy: Strategy = BestRouteStrategy()
        self.strategy.bind(self.stats, sim.schedule_in, None)
        # metric hook: called as (face_id, interest, now) for network sends
        self.interest_sent_hook: Optional[Callable] = None
        self._open_sends: dict[tuple[Name, int], float] = {}
        self._probe_seq = 0
        self.unsolicited_data = 0
        self.duplicate_interests = 0

    # -- wiring -----------------------------------------------------------

    def _new_face(self, link=None) -> int:
        face_id = self._next_face_id
        self._next_face_id += 1
        self.faces[face_id] = Face(id=face_id, link=link)
        self.stats[face_id] = FaceStats()
        return face_id

    def add_app_face(self, on_interest: Optional[Callable] = None,
                     on_data: Optional[Callable] = None) -> int:
        face_id = self._new_face(link=None)
        if on_interest is not None:
            self._app_interest[face_id] = on_interest
        if on_data is not None:
            self._app_data[face_id] = on_data
        return face_id

    def attach_link(self, direction: LinkDirection, peer: "Router", peer_face: int = -1) -> int:
        face_id = self._new_face(link=direction)
        self._links[face_id] = (direction, peer, peer_face)
        return face_id

    def set_peer_face(self, face_id: int, peer_face: int):
        direction, peer, _ = self._links[face_id]
        self._links[face_id] = (direction, peer, peer_face)

    def set_strategy(self, strategy: Strategy, rng=None):
        strategy.bind(self.stats, self.sim.schedule_in, rng)
        self.strategy = strategy

    def is_local_face(self, face_id: int) -> bool:
        return self.faces[face_id].is_local

    # -- interest path ------------------------------------------------------

    def receive_interest(self, interest: InterestPacket, in_face: int, now: float):
        interest.hop_trace.append(self.name)
        cached = self.cs.lookup(interest.name)
        if cached is not None:
            self._deliver_data_downstream(cached, {in_face}, now)
            return
        result, entry = self.pit.insert_or_aggregate(interest, in_face, now)
        if result is PitInsertResult.DUPLICATE_NONCE:
            self.duplicate_interests += 1
            return
        if result is PitInsertResult.AGGREGATED:
            return
        self.sim.schedule_in(self.lifetime_ms, self._expire_pit)
        fib_entry = self.fib.longest_prefix_match(interest.name)
        if fib_entry is None:
            self._send_nack(in_face, NackPacket(interest.name, interest.nonce,
                                                NackReason.NO_ROUTE), now)
            self.pit.remove_nacked(interest.name)
            return
        try:
            out_faces = self.strategy.choose(fib_entry, in_face, now,
                                             key=(interest.name, interest.nonce))
        except NoNexthop:
            self._send_nack(in_face, NackPacket(interest.name, interest.nonce,
                                                NackReason.NO_ROUTE), now)
            self.pit.remove_nacked(interest.name)
            return
        for face_id in out_faces:
            self._forward_interest(entry, interest, face_id, now)

    def _forward_interest(self, entry, interest: InterestPacket, face_id: int, now: float):
        self.pit.add_out_record(entry, face_id, interest.nonce, now)
        if self.is_local_face(face_id):
            handler = self._app_interest.get(face_id)
            if handler is not None:
                handler(interest, face_id, now)
            return
        key = (interest.name, interest.nonce)
        self._open_sends[(interest.name, face_id)] = (now, interest.nonce)
        st = self.stats[face_id]
        st.record_sent(now)
        if self.interest_sent_hook is not None:
            self.interest_sent_hook(face_id, interest, now)
        self.strategy.on_send(face_id, key, now)
        rto = st.rto
        self.sim.schedule_in(rto, lambda: self._loss_timer(interest.name, interest.nonce,
                                                           face_id))
        self._transmit(face_id, "interest", interest, interest_bits(interest), now)

    def express_interest(self, interest: InterestPacket, app_face: int, now: float):
        self.receive_interest(interest, app_face, now)

    def inject_probe(self, prefix: Name, face_id: int, now: float) -> InterestPacket:
        """Strategy-originated probe interest with a fresh name, no in-face."""
        self._probe_seq += 1
        name = prefix.appended(PROBE_COMPONENT).appended(self.name).appended(self._probe_seq)
        interest = InterestPacket(name=name, nonce=1_000_000_000 + self._probe_seq,
                                  lifetime_ms=self.lifetime_ms)
        result, entry = self.pit.insert_or_aggregate(interest, None, now)
        if result is not PitInsertResult.NEW_ENTRY:
            return interest
        self.sim.schedule_in(self.lifetime_ms, self._expire_pit)
        self._forward_interest(entry, interest, face_id, now)
        return interest

    # -- data path -----------------------------------------------------------

    def receive_data(self, data: DataPacket, in_face: int, now: float):
        res = self.pit.satisfy(data, in_face, now)
        if not res.matched:
            self.unsolicited_data += 1
            return
        if not self.is_local_face(in_face):
            open_key = (data.name, in_face)
            if open_key in self._open_sends:
                del self._open_sends[open_key]
                st = self.stats[in_face]
                rtt = res.rtt if res.rtt is not None and res.rtt > 0 else None
                st.record_outcome(Outcome.ok(rtt) if rtt else Outcome(delivered=True), now)
                self.strategy.on_data(in_face, rtt, (data.name, res.nonce), now,
                                      annotation=data.dq_annotation)
        self.cs.insert(data)
        self._deliver_data_downstream(data, res.down_faces, now)

    def _deliver_data_downstream(self, data: DataPacket, down_faces: set, now: float):
        for face_id in down_faces:
            if self.is_local_face(face_id):
                sink = self._app_data.get(face_id)
                if sink is not None:
                    sink(data, now)
                continue
            out = data
            if self.strategy.needs_annotation:
                fib_entry = self.fib.longest_prefix_match(data.name)
                out = data.with_annotation(self.strategy.data_annotation(fib_entry, now))
            self._transmit(face_id, "data", out, data_bits(out), now)

    # -- nack path -------------------------------------------------------------

    def receive_nack(self, nack: NackPacket, in_face: int, now: float):
        entry = self.pit.get(nack.name)
        if entry is None:
            return
        rec = entry.out_records.get(in_face)
        if rec is None or rec.nonce != nack.nonce:
            return
        self._resolve_loss(nack.name, nack.nonce, in_face, LossCause.NACK, now)
        del entry.out_records[in_face]
        if not entry.out_records:
            for face_id in entry.in_faces:
                if not self.is_local_face(face_id):
                    self._send_nack(face_id, NackPacket(nack.name, nack.nonce, nack.reason), now)
            self.pit.remove_nacked(nack.name)

    # -- loss detection -----------------------------------------------------

    def _loss_timer(self, name: Name, nonce: int, face_id: int):
        if (name, face_id) in self._open_sends:
            self._resolve_loss(name, nonce, face_id, LossCause.TIMEOUT, self.sim.now)

    def _resolve_loss(self, name: Name, nonce: int, face_id: int, cause: LossCause,
                      now: float):
        if (name, face_id) not in self._open_sends:
            return
        del self._open_sends[(name, face_id)]
        self.stats[face_id].record_outcome(Outcome.lost(cause), now)
        self.strategy.on_loss(face_id, cause, (name, nonce), now)

    def _expire_pit(self):
        self.pit.expire(self.sim.now)

    # -- transmission ---------------------------------------------------------

    def _transmit(self, face_id: int, kind: str, packet, size_bits: int, now: float):
        direction, peer, peer_face = self._links[face_id]
        result = direction.transmit(size_bits, now)
        if result.outcome is not TxOutcome.ARRIVE:
            return
        if kind == "interest":
            action = lambda: peer.receive_interest(packet, peer_face, self.sim.now)
        elif kind == "data":
            action = lambda: peer.receive_data(packet, peer_face, self.sim.now)
        else:
            action = lambda: peer.receive_nack(packet, peer_face, self.sim.now)
        self.sim.schedule(result.arrive_at, action)

    def _send_nack(self, face_id: int, nack: NackPacket, now: float):
        if self.is_local_face(face_id):
            return
        self._transmit(face_id, "nack", nack, NACK_BYTES * 8, now)

    # -- audit -----------------------------------------------------------------

    def audit_pit(self) -> bool:
        return self.pit.audit_balanced()


class Network:
    """Routers plus links; helper for topology construction."""

    def __init__(self, sim: Simulator):
        self.sim = sim
        self.routers: dict[str, Router] = {}
        self.links: dict[tuple[str, str], Link] = {}

    def add_router(self, name: str, lifetime_ms: float = 2000.0) -> Router:
        router = Router(name, self.sim, lifetime_ms=lifetime_ms)
        self.routers[name] = router
        return router

    def connect(self, a: str, b: str, delay_ms: float, bandwidth_bps: float,
                queue_capacity: int) -> Link:
        link = Link(a, b, delay_ms, bandwidth_bps, queue_capacity)
        ra, rb = self.routers[a], self.routers[b]
        face_a = ra.attach_link(link.direction(a, b), rb)
        face_b = rb.attach_link(link.direction(b, a), ra)
        ra.set_peer_face(face_a, face_b)
        rb.set_peer_face(face_b, face_a)
        self.links[(a, b)] = link
        return link

    def link_between(self, a: str, b: str) -> Link:
        link = self.links.get((a, b)) or self.links.get((b, a))
        if link is None:
            raise KeyError(f"no link between {a} and {b}")
        return link

    def face_toward(self, node: str, neighbor: str) -> int:
        router = self.routers[node]
        for face_id, (direction, peer, _) in router._links.items():
            if peer.name == neighbor:
                return face_id
        raise KeyError(f"{node} has no face toward {neighbor}")
