from fractions import Fraction

import pytest

from dynmatch.transform import Transform, TransformError, riskyedge_bound


def run_to_done(tf, limit=10_000):
    steps = []
    while tf.phase != "done" and len(steps) < limit:
        steps.append(tf.step())
        assert tf.valid()
        assert all(len(ch) <= 3 * tf.r for ch in steps)
    return steps


def test_identical_matchings_need_no_replacements():
    m = [(0, 1), (2, 3)]
    tf = Transform(m, m, Fraction(1, 10))
    steps = run_to_done(tf)
    assert all(ch == [] for ch in steps)
    assert tf.output() == m


def test_four_cycle_swap():
    m, mp = [(0, 1), (2, 3)], [(1, 2), (0, 3)]
    tf = Transform(m, mp, Fraction(1, 10))
    changes = tf.step()
    # both targets start risky, so the smaller one goes first and evicts both old edges
    assert changes[:3] == [("-", (0, 1)), ("-", (2, 3)), ("+", (0, 3))]
    run_to_done(tf)
    assert tf.output() == sorted(mp)


def test_empty_source_window_floor():
    mp = [(0, 1), (2, 3), (4, 5)]
    tf = Transform([], mp, Fraction(1, 10))
    assert tf.W == 1
    steps = run_to_done(tf)
    assert sorted(tf.star) == mp
    assert max(len(ch) for ch in steps) <= 3 * tf.r


def test_single_risky_edge_replaces_two():
    tf = Transform([(0, 1), (2, 3)], [(1, 2)], Fraction(1, 10))
    changes = tf.step()
    assert sorted(changes) == [("+", (1, 2)), ("-", (0, 1)), ("-", (2, 3))]
    assert len(tf.star) == 1


def test_safe_edge_has_precedence():
    tf = Transform([(0, 1), (2, 3)], [(1, 2), (4, 5)], Fraction(1, 10))
    tf.r = 1
    changes = []
    while tf.phase == "classify":
        changes = tf.step()
    assert changes == [("+", (4, 5))]


def test_deleted_target_edge_leaves_transform():
    tf = Transform([(0, 1)], [(1, 2), (3, 4)], Fraction(1, 10))
    tf.step()
    tf.step(deleted=[(3, 4)])
    assert (3, 4) not in tf.target and (3, 4) not in tf.star


def test_invalid_input_rejected():
    with pytest.raises(TransformError):
        Transform([(0, 1), (1, 2)], [], Fraction(1, 10))


def test_riskyedge_hand_cases():
    m = [(0, 1), (2, 3)]
    assert riskyedge_bound(m, m)
    # path 0-1-2-3-4 with e1=(0,1), e2=(1,2), e3=(2,3)
    assert riskyedge_bound([(0, 1), (2, 3)], [(1, 2)])


def test_size_bound_and_validity_through_random_windows():
    import random

    rng = random.Random(2)
    for _ in range(200):
        n = rng.randint(4, 16)
        verts = list(range(n))
        rng.shuffle(verts)
        m = [tuple(sorted(verts[i:i + 2])) for i in range(0, rng.randint(0, n // 2) * 2, 2)]
        rng.shuffle(verts)
        mp = [tuple(sorted(verts[i:i + 2])) for i in range(0, rng.randint(0, n // 2) * 2, 2)]
        tf = Transform(m, mp, Fraction(1, 4))
        while tf.phase != "done":
            deleted = []
            if rng.random() < 0.2 and (tf.star or tf.target):
                pool = sorted(tf.star | tf.target)
                deleted = [pool[rng.randrange(len(pool))]]
            changes = tf.step(deleted)
            assert tf.valid()
            assert len(changes) <= 3 * tf.r
            assert tf.size_bound_holds()
