import random

from hypothesis import given, settings
from hypothesis import strategies as st

from dynmatch.ostree import OrderStatSet


@given(st.sets(st.integers(0, 10_000), max_size=200), st.data())
@settings(max_examples=200, deadline=None)
def test_select_matches_sorted(keys, data):
    s = OrderStatSet(keys)
    ordered = sorted(keys)
    assert len(s) == len(ordered)
    assert list(s) == ordered
    if ordered:
        k = data.draw(st.integers(1, len(ordered)))
        assert s.select(k) == ordered[k - 1]
        assert s.rank(ordered[k - 1]) == k - 1


def test_insert_delete_interleaving():
    rng = random.Random(3)
    s = OrderStatSet()
    ref = set()
    for _ in range(3000):
        x = rng.randrange(500)
        if x in ref:
            s.delete(x)
            ref.remove(x)
        else:
            s.insert(x)
            ref.add(x)
        assert (x in s) == (x in ref)
    assert list(s) == sorted(ref)
    assert s.depth() <= 4 * max(1, len(ref)).bit_length() + 4


def test_from_sorted_balanced():
    keys = list(range(0, 2000, 3))
    s = OrderStatSet.from_sorted(keys)
    assert list(s) == keys
    assert s.select(1) == 0 and s.select(len(keys)) == keys[-1]
    assert s.depth() <= 2 * len(keys).bit_length()
