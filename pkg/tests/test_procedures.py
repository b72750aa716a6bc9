import heapq

import pytest

from dynmatch import procedures as proc
from dynmatch.graph_core import OUT, GraphError, edge_key
from dynmatch.verify import audit_invariants

from .conftest import make_engine


def drive(program):
    """Run a program to completion; returns (total steps, return value)."""
    total = 0
    while True:
        try:
            total += next(program)
        except StopIteration as stop:
            return total, stop.value


def at_level(eng, v, level):
    eng.graph.set_public_level(v, level)


def test_set_level_same_level_keeps_orientation():
    eng = make_engine()
    G = eng.graph
    at_level(eng, 3, 1)
    at_level(eng, 4, 0)
    G.insert_edge_raw(3, 4)
    before = G.debug_dump()
    eng.activate(3, "subject")
    drive(proc.set_level(eng, 3, 1))
    eng.deactivate(3)
    assert G.debug_dump() == before


def test_star_center_falls():
    eng = make_engine()
    G = eng.graph
    center, leaves = 0, [1, 2, 3, 4, 5]
    at_level(eng, center, 2)
    for x in leaves:
        at_level(eng, x, 1)
        G.insert_edge_raw(center, x)
    before = {x: list(G.phi[x]) for x in leaves}
    eng.activate(center, "subject")
    drive(proc.set_level(eng, center, 0))
    eng.deactivate(center)
    assert G.out[center] == set()
    assert G.inc[center][1 + 1] == set(leaves)
    for x in leaves:
        assert G.where[x][center] == OUT
        assert G.phi[x][1] == before[x][1] + 1
        assert G.phi[x][2] == before[x][2] + 1
        assert G.phi[x][3] == before[x][3]
    assert audit_invariants(eng).empty()


def test_rise_flips_incoming():
    eng = make_engine()
    G = eng.graph
    v, a, b = 10, 3, 4
    at_level(eng, v, 0)
    at_level(eng, a, 0)
    at_level(eng, b, 1)
    G.insert_edge_raw(v, a)
    G.insert_edge_raw(v, b)
    assert G.inc[v][0 + 1] == {a} and G.inc[v][1 + 1] == {b}
    pa, pb = list(G.phi[a]), list(G.phi[b])
    eng.activate(v, "subject")
    drive(proc.set_level(eng, v, 2))
    eng.deactivate(v)
    assert G.out[v] == {a, b}
    assert G.where[a][v] == 2 and G.where[b][v] == 2
    assert G.phi[a][1] == pa[1] - 1 and G.phi[a][2] == pa[2] - 1 and G.phi[a][3] == pa[3]
    assert G.phi[b][2] == pb[2] - 1 and G.phi[b][3] == pb[3]
    assert audit_invariants(eng).empty()


def test_set_level_requires_active():
    eng = make_engine()
    with pytest.raises(GraphError):
        drive(proc.set_level(eng, 1, 0))


def test_insertion_matches_two_free_vertices():
    eng = make_engine()
    drive(proc.handle_insertion(eng, 1, 2))
    G = eng.graph
    assert G.mate[1] == 2 and G.level[1] == G.level[2] == 0
    rec = G.matched[G.edge_of[1]]
    assert rec.level == 0 and rec.sample_original == 1 and rec.members == [(1, 2)]
    assert audit_invariants(eng).empty()


def test_insertion_with_matched_endpoint_leaves_matching():
    eng = make_engine()
    drive(proc.handle_insertion(eng, 1, 2))
    drive(proc.handle_insertion(eng, 2, 3))
    G = eng.graph
    assert G.mate[2] == 1 and G.mate[3] is None and G.level[3] == -1


def test_insertion_does_not_match_temporarily_free():
    eng = make_engine()
    G = eng.graph
    for x in (5, 6):
        at_level(eng, x, 1)
        G.free_origin[x] = "adv"
    drive(proc.handle_insertion(eng, 5, 6))
    assert G.mate[5] is None and G.mate[6] is None


def _matched(eng, a, b, level, extra_members=()):
    G = eng.graph
    at_level(eng, a, level)
    at_level(eng, b, level)
    if not G.has_edge(a, b):
        G.insert_edge_raw(a, b)
    for x, y in extra_members:
        if not G.has_edge(x, y):
            G.insert_edge_raw(x, y)
    return G.create_match(a, b, level, [edge_key(a, b), *extra_members])


def test_deletion_of_unmatched_edge():
    eng = make_engine()
    G = eng.graph
    eng.tick("+", 1, 2)
    eng.tick("+", 2, 3)
    eng.tick("-", 2, 3)
    assert G.mate[1] == 2 and all(len(q) == 0 for q in eng.queues)


def test_deletion_of_matched_high_edge_enqueues_in_order():
    eng = make_engine()
    _matched(eng, 7, 3, 3)
    drive(proc.handle_deletion(eng, 7, 3))
    assert list(eng.queues[3]) == [7, 3]
    assert eng.graph.free_origin == {7: "adv", 3: "adv"}


def test_deletion_of_level0_edge_resolved_in_tick():
    eng = make_engine()
    eng.tick("+", 1, 2)
    eng.tick("+", 2, 3)
    eng.tick("-", 1, 2)
    G = eng.graph
    assert G.mate[2] == 3 and G.level[2] == 0
    assert G.level[1] == -1 and G.mate[1] is None
    assert all(len(q) == 0 for q in eng.queues)
    assert not G.active and not G.free_origin
    assert audit_invariants(eng).empty()


def test_handle_free_isolated_goes_to_minus_one():
    eng = make_engine()
    G = eng.graph
    at_level(eng, 4, 0)
    G.free_origin[4] = "adv"
    _, freed = drive(proc.handle_free(eng, 4))
    assert freed is None and G.level[4] == -1 and not G.active


def test_handle_free_level0_matches_free_neighbor():
    eng = make_engine()
    G = eng.graph
    at_level(eng, 4, 0)
    G.free_origin[4] = "adv"
    G.insert_edge_raw(4, 9)
    _, freed = drive(proc.handle_free(eng, 4))
    assert freed is None
    assert G.mate[4] == 9 and G.level[9] == 0
    assert audit_invariants(eng).empty()


def test_handle_free_high_level_recursion():
    eng = make_engine()
    G = eng.graph
    P = eng.params
    v = 0
    at_level(eng, v, 2)
    G.free_origin[v] = "alg"
    nbrs = list(range(1, 41))
    for a in range(1, 41, 2):
        _matched(eng, a, a + 1, 0)
    for x in nbrs:
        G.insert_edge_raw(v, x)
    assert G.phi[v][2] >= P.gamma_pow[2] if G.level[v] < 2 else True
    _, freed = drive(proc.handle_free(eng, v))
    rec = G.matched[G.edge_of[v]]
    assert rec.level == 2 and G.level[v] == 2
    w = rec.other(v)
    assert rec.sample_original == min(len(nbrs), P.gamma_pow[2])
    assert rec.sample_original >= P.sample_lo(2)
    assert freed is not None and freed == (w + 1 if w % 2 else w - 1)
    assert G.active.get(freed) == "freed"
    drive(proc.handle_free_chain(eng, freed))
    assert not G.active
    assert audit_invariants(eng).empty()


def test_handle_free_skips_reserved_vertex():
    eng = make_engine()
    G = eng.graph
    at_level(eng, 4, 1)
    G.free_origin[4] = "alg"
    eng.activate(4, "reserved")
    eng.next_in_line[2] = 4
    eng.reserved_by[4] = 2
    steps, freed = drive(proc.handle_free(eng, 4))
    assert freed is None and G.active[4] == "reserved" and G.level[4] == 1
    assert eng.stats.skipped_reserved == 1


def test_low_level_scan_may_take_reserved_vertex():
    eng = make_engine()
    G = eng.graph
    at_level(eng, 4, 0)
    G.free_origin[4] = "adv"
    G.insert_edge_raw(4, 9)
    eng.activate(9, "reserved")
    eng.next_in_line[2] = 9
    eng.reserved_by[9] = 2
    drive(proc.handle_free(eng, 4))
    assert G.mate[4] == 9
    assert 2 not in eng.next_in_line and 9 not in G.active
