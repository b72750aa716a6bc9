import math

import pytest

from dynmatch.offline_oracle import DeletionSchedule, OfflineOracle, SequenceError


def test_single_insertion_open_interval():
    s = DeletionSchedule.build([("+", 1, 2)])
    assert s.intervals == {(1, 2): [(0, math.inf)]}
    assert s.next_deletion(2, 1, 0) == math.inf


def test_reinsertion_intervals():
    seq = [("+", 1, 2), ("-", 1, 2), ("+", 2, 1)]
    s = DeletionSchedule.build(seq)
    assert s.intervals[(1, 2)] == [(0, 1), (2, math.inf)]
    assert s.next_deletion(1, 2, 0) == 1
    assert s.next_deletion(1, 2, 5) == math.inf


def test_delete_of_absent_names_index():
    seq = [("+", 0, 1), ("+", 1, 2), ("+", 2, 3), ("-", 0, 1), ("+", 3, 4), ("-", 5, 6)]
    with pytest.raises(SequenceError) as info:
        DeletionSchedule.build(seq)
    assert info.value.index == 5


def test_double_insert_rejected():
    with pytest.raises(SequenceError) as info:
        DeletionSchedule.build([("+", 0, 1), ("+", 1, 0)])
    assert info.value.index == 1


def test_interval_lookup():
    seq = [("+", 0, 9), ("+", 0, 8), ("+", 1, 2)] + [("+", 3, i) for i in range(4, 7)]
    seq.append(("-", 1, 2))  # index 6
    s = DeletionSchedule.build(seq)
    assert s.next_deletion(1, 2, 4) == 6
    with pytest.raises(KeyError):
        s.next_deletion(1, 2, 7)
    with pytest.raises(KeyError):
        s.next_deletion(4, 5, 0)


def test_second_occurrence_uses_its_own_deletion():
    seq = [("+", 1, 2), ("-", 1, 2), ("+", 1, 2), ("+", 5, 6), ("-", 1, 2)]
    s = DeletionSchedule.build(seq)
    assert s.next_deletion(1, 2, 0) == 1
    assert s.next_deletion(1, 2, 3) == 4


def _oracle_with_times(times):
    """Edges (0, w) deleted at the given indices (None = never)."""
    seq = [("+", 0, w) for w in times]
    events = sorted((t, w) for w, t in times.items() if t is not None)
    pos = len(seq)
    for t, w in events:
        while pos < t:
            seq.append(("+", 100 + pos, 200 + pos))
            pos += 1
        seq.append(("-", 0, w))
        pos += 1
    return OfflineOracle.from_updates(seq)


def test_pick_single_candidate():
    o = _oracle_with_times({3: 10})
    assert o.pick_latest_deleted(0, [3], now=1) == 3


def test_pick_prefers_never_deleted():
    o = _oracle_with_times({1: 10, 2: None, 3: 10})
    assert o.pick_latest_deleted(0, [1, 2, 3], now=3) == 2


def test_pick_ties_to_smallest_id():
    o = _oracle_with_times({4: None, 2: None, 7: None})
    assert o.pick_latest_deleted(0, [7, 4, 2], now=3) == 2


def test_fuzzed_oracle_stays_within_candidates():
    o = OfflineOracle(DeletionSchedule.build([("+", 0, w) for w in range(1, 20)]), rho=0.5, seed=3)
    for _ in range(50):
        assert o.pick_latest_deleted(0, range(1, 20), now=19) in range(1, 20)
    with pytest.raises(ValueError):
        OfflineOracle(DeletionSchedule.build([]), rho=1.0)
