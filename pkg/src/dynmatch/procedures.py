"""Resumable procedures: set_level, handle_insertion, handle_deletion, handle_free.

Every procedure is a generator.  It performs a chunk of work, then yields the
number of steps that chunk cost; the engine decides whether the next chunk runs
in the same tick or after later updates.  ``yield from`` composes them, and a
generator's return value carries results (the next recursion subject).
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Generator, List, Optional, Tuple

from .graph_core import OUT, GraphError, edge_key
from .ostree import OrderStatSet
from .graph_core import sample_uniform

if TYPE_CHECKING:  # pragma: no cover
    from .engine import Engine

Program = Generator[int, None, Optional[int]]

CHUNK = 32  # neighbors processed between two charge points


def set_level(eng: "Engine", v: int, target: int) -> Program:
    """Move ``v`` to ``target``, re-orienting and retagging the affected edges."""
    G = eng.graph
    if v not in G.active:
        raise GraphError(f"set_level on non-active vertex {v}")
    old = G.level[v]
    cost = G.set_public_level(v, target)
    if target < old:
        targets: List[int] = list(G.out[v])
    elif target > old:
        targets = list(G.out[v])
        inc = G.inc[v]
        for k in range(old, target + 1):
            targets.extend(inc[k + 1])
    else:
        targets = []
    where_v = G.where[v]
    scanned = 0
    for y in targets:
        if y in where_v:
            cost += G.retag(v, y)
        scanned += 1
        if scanned % CHUNK == 0:
            yield cost
            eng.stats.note_setlevel(cost)
            cost = 0
    cost += eng.authenticate(v)
    eng.stats.note_setlevel(cost)
    eng.stats.set_level_calls += 1
    yield cost
    return None


def handle_insertion(eng: "Engine", u: int, v: int) -> Program:
    G = eng.graph
    cost = G.insert_edge_raw(u, v)
    # a reserved vertex is only parked, so it can still be matched here
    if G.level[u] == -1 and G.level[v] == -1 and not eng.busy(u) and not eng.busy(v):
        eng.activate(u, "mate")
        eng.activate(v, "mate")
        yield cost
        yield from set_level(eng, u, 0)
        yield from set_level(eng, v, 0)
        rec = G.create_match(u, v, 0, [edge_key(u, v)], now=eng.now)
        eng.notify_match(rec)
        cost = eng.deactivate(u) + eng.deactivate(v)
    yield cost
    return None


def handle_deletion(eng: "Engine", u: int, v: int) -> Program:
    G = eng.graph
    if not G.has_edge(u, v):
        raise GraphError(f"edge ({u}, {v}) absent")
    cost = 1
    eid = G.edge_of[u]
    if eid is not None and G.mate[u] == v:
        rec = G.unmatch(eid, "adv")
        eng.notify_hit(rec)
        for x in (u, v):
            if x not in G.active:
                eng.enqueue(x)
            cost += 1
    step, touched = G.delete_edge_raw(u, v)
    eng.notify_edge_deleted(u, v, touched)
    yield cost + step
    return None


def handle_free_chain(eng: "Engine", v: int) -> Program:
    """Run handle_free on ``v`` and then on each vertex it renders free."""
    subject: Optional[int] = v
    while subject is not None:
        subject = yield from handle_free(eng, subject)
    return None


def _candidates(eng: "Engine", v: int, level: int) -> List[int]:
    """Non-active neighbors of ``v`` strictly below ``level``, ascending by id."""
    G = eng.graph
    lv = G.level
    active = G.active
    found = []
    for x in G.out[v]:
        if lv[x] < level and x not in active:
            found.append(x)
    if G.level[v] < level:
        inc = G.inc[v]
        for k in range(max(G.level[v], -1), level):
            for x in inc[k + 1]:
                if lv[x] < level and x not in active:
                    found.append(x)
    found.sort()
    return found


def _draw_mate(eng: "Engine", v: int, level: int, cands: List[int]) -> Tuple[int, List[Tuple[int, int]], int]:
    """Sample a mate among the first gamma^level candidates; returns (mate, sample, steps)."""
    cap = eng.params.gamma_pow[level]
    top = min(len(cands), cap)
    members = [edge_key(v, x) for x in cands[:top]]
    if eng.oracle is not None:
        w = eng.oracle.pick_latest_deleted(v, cands[:top], eng.now)
        return w, members, len(cands) + top
    tree = OrderStatSet.from_sorted(cands)
    w, steps = sample_uniform(tree, cap, eng.rng_sampling)
    return w, members, len(cands) + steps


def handle_free(eng: "Engine", v: int) -> Program:
    G = eng.graph
    P = eng.params
    if G.active.get(v) == "reserved":
        # owned by a rise sub-scheduler that will raise it later
        eng.stats.skipped_reserved += 1
        yield 1
        return None
    if G.mate[v] is not None:
        raise GraphError(f"handle_free on matched vertex {v}")
    eng.activate(v, "subject")
    lv = G.level[v]
    if lv < 0:
        cost = eng.deactivate(v)
        yield cost
        return None
    cost = eng.authenticate(v)
    # phi_v(j) for j <= lv is not maintained: recount it from the out-neighbors
    counts = [0] * (lv + 2)
    level = G.level
    for x in G.out[v]:
        lx = level[x]
        if lx < lv:
            counts[lx + 1] += 1
    cost += len(G.out[v]) + 1
    phi_low = [0] * (lv + 1)
    running = 0
    for j in range(lv + 1):
        running += counts[j]
        phi_low[j] = running
    yield cost
    cost = 0

    gamma_pow = P.gamma_pow
    cut = P.low_level_cut
    qualifying = [j for j in range(lv, -1, -1) if phi_low[j] >= gamma_pow[j]]
    for lvl in qualifying:
        if lvl >= cut:
            cands = _candidates(eng, v, lvl)
            cost += len(G.out[v]) + 1
            if not cands:
                eng.stats.empty_candidates += 1
                continue
            w, members, steps = _draw_mate(eng, v, lvl, cands)
            cost += steps
            eng.activate(w, "mate")
            yield cost
            cost = 0
            yield from set_level(eng, v, lvl)
            match_level = lvl
            # a higher level may have become violated while v was falling
            lstar = None
            for j in range(lv, lvl, -1):
                if G.phi[v][j] >= gamma_pow[j]:
                    lstar = j
                    break
            cost += lv - lvl + 1
            if lstar is not None:
                cands_star = _candidates(eng, v, lstar)
                cands_star = [x for x in cands_star if x != w]
                cost += len(G.where[v]) + 1
                if cands_star:
                    eng.stats.lstar_rises += 1
                    cost += eng.deactivate(w)
                    w, members, steps = _draw_mate(eng, v, lstar, cands_star)
                    cost += steps
                    eng.activate(w, "mate")
                    yield cost
                    cost = 0
                    yield from set_level(eng, v, lstar)
                    match_level = lstar
            freed = None
            eid = G.edge_of[w]
            if eid is not None:
                rec = G.unmatch(eid, "alg")
                freed = rec.other(w)
                if freed not in G.active:
                    eng.activate(freed, "freed")
                cost += 1
            yield cost
            cost = 0
            yield from set_level(eng, w, match_level)
            rec = G.create_match(v, w, match_level, members, now=eng.now)
            eng.notify_match(rec)
            cost += 1 + eng.deactivate(v) + eng.deactivate(w)
            eng.stats.recursions += freed is not None
            yield cost
            return freed
        # low level: deterministic scan for a free neighbor
        mate = None
        busy = eng.busy
        for x in G.out[v]:
            if level[x] == -1 and not busy(x) and (mate is None or x < mate):
                mate = x
        cost += len(G.out[v]) + 1
        if mate is not None:
            eng.activate(mate, "mate")
            yield cost
            cost = 0
            yield from set_level(eng, v, lvl)
            yield from set_level(eng, mate, lvl)
            rec = G.create_match(v, mate, lvl, [edge_key(v, mate)], now=eng.now)
            eng.notify_match(rec)
            cost += 1 + eng.deactivate(v) + eng.deactivate(mate)
            yield cost
            return None
        break
    yield cost
    yield from set_level(eng, v, -1)
    yield eng.deactivate(v)
    return None


def rise_program(eng: "Engine", x: int, level: int) -> Program:
    G = eng.graph
    cost = 1
    partner = G.mate[x]
    if partner is not None:
        G.unmatch(G.edge_of[x], "alg")
        if partner not in G.active:
            eng.activate(partner, "freed")
        cost += 1
    else:
        G.free_origin.setdefault(x, "alg")
    yield cost
    yield from set_level(eng, x, level)
    G.free_origin.setdefault(x, "alg")
    G.active[x] = "freed"
    yield from handle_free_chain(eng, x)
    if partner is not None and G.active.get(partner) == "freed":
        yield from handle_free_chain(eng, partner)
    return None


def unmatch_program(eng: "Engine", eid: int) -> Program:
    G = eng.graph
    rec = G.unmatch(eid, "alg")
    owned = []
    for x in (rec.u, rec.v):
        if x not in G.active:
            eng.activate(x, "freed")
            owned.append(x)
    yield 2
    for x in owned:
        if G.active.get(x) == "freed":
            yield from handle_free_chain(eng, x)
    return None


def temp_program(eng: "Engine", v: int) -> Program:
    eng.activate(v, "freed")
    yield 1
    yield from handle_free_chain(eng, v)
    return None
