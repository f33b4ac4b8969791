"""Names, packets and the three per-router tables (CS, PIT, FIB).

Everything in this module is independent of the simulator clock source:
callers pass the current time explicitly (milliseconds, float).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

DEFAULT_INTEREST_LIFETIME_MS = 2000.0


@dataclass(frozen=True, order=True)
class Name:
    """Hierarchical content name: an ordered tuple of components.

    Ordering is lexicographic by component so names can serve as
    deterministic map keys. The last component conventionally carries a
    sequence number for always-fresh content requests.
    """

    components: tuple[str, ...]

    def __post_init__(self):
        if not isinstance(self.components, tuple):
            object.__setattr__(self, "components", tuple(self.components))

    @classmethod
    def from_uri(cls, uri: str) -> "Name":
        parts = tuple(p for p in uri.split("/") if p)
        return cls(parts)

    def to_uri(self) -> str:
        return "/" + "/".join(self.components)

    def appended(self, component: str) -> "Name":
        return Name(self.components + (str(component),))

    def is_prefix_of(self, other: "Name") -> bool:
        n = len(self.components)
        return other.components[:n] == self.components

    def __len__(self) -> int:
        return len(self.components)

    def __repr__(self) -> str:
        return f"Name({self.to_uri()!r})"


@dataclass
class DqAnnotation:
    """Piggybacked hop feedback used only by the DQ-Learning strategy."""

    best_q: float  # ms; zero when stamped by the producer node
    send_time: float  # ms, simulation clock of the sending router


@dataclass
class InterestPacket:
    name: Name
    nonce: int
    lifetime_ms: float = DEFAULT_INTEREST_LIFETIME_MS
    hop_trace: list = field(default_factory=list)

    def __post_init__(self):
        if self.lifetime_ms <= 0:
            raise ValueError("interest lifetime must be positive")


@dataclass
class DataPacket:
    name: Name
    payload_size: int
    dq_annotation: Optional[DqAnnotation] = None

    def __post_init__(self):
        if self.payload_size < 0:
            raise ValueError("payload_size must be >= 0")

    def with_annotation(self, annotation: Optional[DqAnnotation]) -> "DataPacket":
        return replace(self, dq_annotation=annotation)


class NackReason(enum.Enum):
    NO_ROUTE = "no-route"
    CONGESTION = "congestion"
    LINK_DOWN = "link-down"


@dataclass
class NackPacket:
    name: Name
    nonce: int
    reason: NackReason


@dataclass
class OutRecord:
    send_time: float
    nonce: int


@dataclass
class PitEntry:
    name: Name
    in_faces: set = field(default_factory=set)
    out_records: dict = field(default_factory=dict)  # face id -> OutRecord
    expiry: float = 0.0


class PitInsertResult(enum.Enum):
    NEW_ENTRY = "new"
    AGGREGATED = "aggregated"
    DUPLICATE_NONCE = "duplicate-nonce"


@dataclass
class SatisfyResult:
    matched: bool
    down_faces: set
    rtt: Optional[float]  # ms, only when the arrival face has an out-record
    nonce: Optional[int] = None  # nonce of the arrival face's out-record


class Pit:
    """Pending Interest Table with nonce-based loop suppression.

    Seen (name, nonce) pairs are remembered for one interest lifetime
    after last sighting (dead-nonce behaviour, bounded memory). Expiry is
    inclusive: an entry with ``expiry <= now`` is expired.
    """

    def __init__(self):
        self._entries: dict[Name, PitEntry] = {}
        self._seen_nonces: dict[tuple[Name, int], float] = {}  # -> forget time
        # end-of-run audit counters: created == satisfied + expired + nacked + len(self)
        self.created = 0
        self.satisfied = 0
        self.expired = 0
        self.nacked = 0

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, name: Name) -> Optional[PitEntry]:
        return self._entries.get(name)

    def _purge_nonces(self, now: float):
        if len(self._seen_nonces) < 4096:
            return
        stale = [k for k, t in self._seen_nonces.items() if t <= now]
        for k in stale:
            del self._seen_nonces[k]

    def insert_or_aggregate(
        self, interest: InterestPacket, in_face: Optional[int], now: float
    ) -> tuple[PitInsertResult, Optional[PitEntry]]:
        key = (interest.name, interest.nonce)
        seen_until = self._seen_nonces.get(key)
        if seen_until is not None and seen_until > now:
            return PitInsertResult.DUPLICATE_NONCE, None
        self._purge_nonces(now)
        self._seen_nonces[key] = now + interest.lifetime_ms

        entry = self._entries.get(interest.name)
        if entry is not None:
            if in_face is not None:
                entry.in_faces.add(in_face)
            return PitInsertResult.AGGREGATED, entry

        entry = PitEntry(name=interest.name, expiry=now + interest.lifetime_ms)
        if in_face is not None:
            entry.in_faces.add(in_face)
        self._entries[interest.name] = entry
        self.created += 1
        return PitInsertResult.NEW_ENTRY, entry

    def add_out_record(self, entry: PitEntry, face: int, nonce: int, now: float):
        entry.out_records[face] = OutRecord(send_time=now, nonce=nonce)
        self._seen_nonces[(entry.name, nonce)] = now + DEFAULT_INTEREST_LIFETIME_MS

    def satisfy(self, data: DataPacket, arrival_face: Optional[int], now: float) -> SatisfyResult:
        entry = self._entries.pop(data.name, None)
        if entry is None:
            return SatisfyResult(matched=False, down_faces=set(), rtt=None)
        self.satisfied += 1
        rtt = None
        nonce = None
        rec = entry.out_records.get(arrival_face)
        if rec is not None:
            rtt = now - rec.send_time
            nonce = rec.nonce
        return SatisfyResult(matched=True, down_faces=set(entry.in_faces), rtt=rtt, nonce=nonce)

    def remove_nacked(self, name: Name):
        if self._entries.pop(name, None) is not None:
            self.nacked += 1

    def expire(self, now: float) -> list[PitEntry]:
        """Remove and report every entry with expiry <= now (inclusive)."""
        due = [e for e in self._entries.values() if e.expiry <= now]
        for e in due:
            del self._entries[e.name]
            self.expired += 1
        return due

    def audit_balanced(self) -> bool:
        return self.created == self.satisfied + self.expired + self.nacked + len(self)


@dataclass
class FibNexthop:
    face: int
    cost: int


class FibEntry:
    """One prefix with nexthops kept sorted ascending by cost.

    Cost ties preserve insertion order; that order defines the best
    classified rank used by strategies for tie-breaking.
    """

    def __init__(self, prefix: Name):
        self.prefix = prefix
        self.nexthops: list[FibNexthop] = []

    def add_nexthop(self, face: int, cost: int):
        hop = FibNexthop(face=face, cost=cost)
        idx = len(self.nexthops)
        for i, existing in enumerate(self.nexthops):
            if existing.cost > cost:
                idx = i
                break
        self.nexthops.insert(idx, hop)

    def faces(self) -> list[int]:
        return [h.face for h in self.nexthops]


class Fib:
    def __init__(self):
        self._entries: dict[Name, FibEntry] = {}

    def add_route(self, prefix: Name, face: int, cost: int = 1):
        entry = self._entries.get(prefix)
        if entry is None:
            entry = FibEntry(prefix)
            self._entries[prefix] = entry
        entry.add_nexthop(face, cost)

    def longest_prefix_match(self, name: Name) -> Optional[FibEntry]:
        best = None
        best_len = -1
        for prefix, entry in self._entries.items():
            if prefix.is_prefix_of(name) and len(prefix) > best_len:
                best = entry
                best_len = len(prefix)
        return best

    def entries(self) -> Iterable[FibEntry]:
        return self._entries.values()


class ContentStore:
    """LRU data cache. The benchmark scenario runs it with capacity 0."""

    def __init__(self, capacity: int = 0):
        self.capacity = capacity
        self._store: dict[Name, DataPacket] = {}

    def lookup(self, name: Name) -> Optional[DataPacket]:
        data = self._store.get(name)
        if data is not None:
            # refresh LRU position
            del self._store[name]
            self._store[name] = data
        return data

    def insert(self, data: DataPacket):
        if self.capacity <= 0:
            return
        if data.name in self._store:
            del self._store[data.name]
        self._store[data.name] = data
        while len(self._store) > self.capacity:
            oldest = next(iter(self._store))
            del self._store[oldest]

    def __len__(self) -> int:
        return len(self._store)


@dataclass
class Face:
    """A router interface: either one end of a link or a local app face."""

    id: int
    link: object = None  # (Link, direction) tuple, or None for app faces
    up: bool = True

    @property
    def is_local(self) -> bool:
        return self.link is None
