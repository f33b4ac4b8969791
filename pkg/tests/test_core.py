import pytest

from ndnfwd.core import (
    ContentStore,
    DataPacket,
    Fib,
    InterestPacket,
    Name,
    Pit,
    PitInsertResult,
)


def name(uri):
    return Name.from_uri(uri)


def interest(uri, nonce=1, lifetime=2000.0):
    return InterestPacket(name=name(uri), nonce=nonce, lifetime_ms=lifetime)


class TestName:
    def test_ordering_is_lexicographic_by_component(self):
        assert name("/a/b") < name("/a/c")
        assert name("/a") < name("/a/b")
        assert sorted([name("/b"), name("/a/z"), name("/a")]) == [
            name("/a"), name("/a/z"), name("/b")]

    def test_prefix_relation(self):
        assert name("/a/b").is_prefix_of(name("/a/b/1"))
        assert not name("/a/b").is_prefix_of(name("/a/c"))
        assert Name(()).is_prefix_of(name("/anything"))

    def test_appended_sequence_numbers(self):
        base = name("/video")
        assert base.appended("7") == name("/video/7")
        assert base.appended(8).components[-1] == "8"

    def test_usable_as_dict_key(self):
        d = {name("/a"): 1, name("/a/b"): 2}
        assert d[name("/a/b")] == 2


class TestPacketInvariants:
    def test_interest_requires_positive_lifetime(self):
        with pytest.raises(ValueError):
            InterestPacket(name=name("/p"), nonce=1, lifetime_ms=0)

    def test_data_requires_nonnegative_payload(self):
        with pytest.raises(ValueError):
            DataPacket(name=name("/p"), payload_size=-1)


class TestPit:
    def test_new_entry_sets_expiry(self):
        pit = Pit()
        result, entry = pit.insert_or_aggregate(interest("/p/1", lifetime=2000), 1, now=100.0)
        assert result is PitInsertResult.NEW_ENTRY
        assert entry.expiry == 2100.0

    def test_same_name_fresh_nonce_aggregates(self):
        pit = Pit()
        pit.insert_or_aggregate(interest("/p/1", nonce=1), 1, now=0.0)
        result, entry = pit.insert_or_aggregate(interest("/p/1", nonce=2), 2, now=5.0)
        assert result is PitInsertResult.AGGREGATED
        assert entry.in_faces == {1, 2}
        assert len(pit) == 1

    def test_replayed_nonce_is_suppressed(self):
        pit = Pit()
        pit.insert_or_aggregate(interest("/p/1", nonce=7), 1, now=0.0)
        result, entry = pit.insert_or_aggregate(interest("/p/1", nonce=7), 2, now=5.0)
        assert result is PitInsertResult.DUPLICATE_NONCE
        assert entry is None

    def test_nonce_remembered_after_satisfaction(self):
        # dead-nonce window: the pair stays blocked for a lifetime after the
        # entry is gone
        pit = Pit()
        pit.insert_or_aggregate(interest("/p/1", nonce=7), 1, now=0.0)
        pit.satisfy(DataPacket(name("/p/1"), 100), 1, now=50.0)
        result, _ = pit.insert_or_aggregate(interest("/p/1", nonce=7), 1, now=60.0)
        assert result is PitInsertResult.DUPLICATE_NONCE

    def test_satisfy_reports_rtt_from_out_record(self):
        pit = Pit()
        _, entry = pit.insert_or_aggregate(interest("/p/1"), 1, now=90.0)
        pit.add_out_record(entry, face=2, nonce=1, now=100.0)
        res = pit.satisfy(DataPacket(name("/p/1"), 100), 2, now=140.0)
        assert res.matched
        assert res.rtt == 40.0
        assert res.down_faces == {1}
        assert len(pit) == 0

    def test_unsolicited_data_does_not_match(self):
        pit = Pit()
        res = pit.satisfy(DataPacket(name("/q/9"), 100), 1, now=0.0)
        assert not res.matched
        assert res.down_faces == set()

    def test_satisfy_fans_out_to_all_in_faces(self):
        pit = Pit()
        pit.insert_or_aggregate(interest("/p/1", nonce=1), 1, now=0.0)
        pit.insert_or_aggregate(interest("/p/1", nonce=2), 2, now=0.0)
        res = pit.satisfy(DataPacket(name("/p/1"), 100), 3, now=10.0)
        assert res.down_faces == {1, 2}

    def test_expiry_boundary_is_inclusive(self):
        pit = Pit()
        pit.insert_or_aggregate(interest("/p/1", lifetime=500), 1, now=0.0)
        assert pit.expire(now=499.0) == []
        expired = pit.expire(now=500.0)
        assert len(expired) == 1
        assert expired[0].name == name("/p/1")

    def test_expire_reports_each_entry_once(self):
        pit = Pit()
        for i, lifetime in enumerate([100, 200, 900]):
            pit.insert_or_aggregate(interest(f"/p/{i}", nonce=i, lifetime=lifetime), 1, 0.0)
        expired = pit.expire(now=300.0)
        assert {e.name for e in expired} == {name("/p/0"), name("/p/1")}
        assert len(pit) == 1
        assert pit.expire(now=300.0) == []

    def test_audit_counts_every_disposition(self):
        pit = Pit()
        pit.insert_or_aggregate(interest("/a", nonce=1, lifetime=100), 1, 0.0)
        pit.insert_or_aggregate(interest("/b", nonce=2), 1, 0.0)
        pit.insert_or_aggregate(interest("/c", nonce=3), 1, 0.0)
        pit.satisfy(DataPacket(name("/b"), 0), 1, 10.0)
        pit.expire(200.0)
        pit.remove_nacked(name("/c"))
        assert pit.audit_balanced()
        assert pit.created == 3 and pit.satisfied == 1 and pit.expired == 1 and pit.nacked == 1

    def test_insert_after_satisfy_matches_again(self):
        # round-trip property: a fresh insert with the same name matches new data
        pit = Pit()
        pit.insert_or_aggregate(interest("/p/1", nonce=1), 1, 0.0)
        assert pit.satisfy(DataPacket(name("/p/1"), 0), 1, 1.0).matched
        pit.insert_or_aggregate(interest("/p/1", nonce=2), 1, 2.0)
        assert pit.satisfy(DataPacket(name("/p/1"), 0), 1, 3.0).matched


class TestFib:
    def test_longest_prefix_wins(self):
        fib = Fib()
        fib.add_route(name("/a"), face=1)
        fib.add_route(name("/a/b"), face=2)
        entry = fib.longest_prefix_match(name("/a/b/1"))
        assert entry.prefix == name("/a/b")

    def test_no_match_returns_none(self):
        fib = Fib()
        fib.add_route(name("/a"), face=1)
        assert fib.longest_prefix_match(name("/b/1")) is None

    def test_root_prefix_matches_everything(self):
        fib = Fib()
        fib.add_route(Name(()), face=1)
        assert fib.longest_prefix_match(name("/x/y")) is not None

    def test_nexthops_sorted_by_cost_ties_keep_insertion_order(self):
        fib = Fib()
        fib.add_route(name("/a"), face=5, cost=2)
        fib.add_route(name("/a"), face=2, cost=1)
        fib.add_route(name("/a"), face=3, cost=1)
        entry = fib.longest_prefix_match(name("/a/1"))
        assert entry.faces() == [2, 3, 5]


class TestContentStore:
    def test_capacity_zero_never_stores(self):
        cs = ContentStore(capacity=0)
        cs.insert(DataPacket(name("/a/1"), 10))
        assert cs.lookup(name("/a/1")) is None

    def test_store_then_fetch(self):
        cs = ContentStore(capacity=10)
        data = DataPacket(name("/a/1"), 10)
        cs.insert(data)
        assert cs.lookup(name("/a/1")) is data

    def test_lru_eviction_at_capacity_one(self):
        cs = ContentStore(capacity=1)
        cs.insert(DataPacket(name("/a/1"), 10))
        cs.insert(DataPacket(name("/a/2"), 10))
        assert cs.lookup(name("/a/1")) is None
        assert cs.lookup(name("/a/2")) is not None

    def test_lookup_refreshes_lru_position(self):
        cs = ContentStore(capacity=2)
        cs.insert(DataPacket(name("/a/1"), 10))
        cs.insert(DataPacket(name("/a/2"), 10))
        cs.lookup(name("/a/1"))
        cs.insert(DataPacket(name("/a/3"), 10))
        assert cs.lookup(name("/a/2")) is None
        assert cs.lookup(name("/a/1")) is not None
