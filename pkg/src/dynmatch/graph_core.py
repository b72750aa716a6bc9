"""Leveled dynamic graph: adjacency, orientation, incoming buckets, phi counters,
matching records with sample tracking, and the indexes the schedulers query."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Set, Tuple

from .ostree import OrderStatSet
from .params import Params

OUT = -2  # placement code: the neighbor is an out-neighbor of the owner


class GraphError(RuntimeError):
    """Raised on malformed updates or internal corruption."""


def edge_key(u: int, v: int) -> Tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass
class MatchedEdge:
    eid: int
    u: int
    v: int
    level: int
    sample_original: int
    sample_remaining: int
    members: List[Tuple[int, int]]
    sampler: int
    under_sampled: bool = False
    created_at: int = 0

    def endpoints(self) -> Tuple[int, int]:
        return self.u, self.v

    def other(self, x: int) -> int:
        return self.v if x == self.u else self.u


class IndexedSet:
    """Insertion-ordered set with O(1) add, remove and positional access."""

    __slots__ = ("items", "pos")

    def __init__(self) -> None:
        self.items: List[int] = []
        self.pos: Dict[int, int] = {}

    def __len__(self) -> int:
        return len(self.items)

    def __contains__(self, x: int) -> bool:
        return x in self.pos

    def add(self, x: int) -> None:
        if x in self.pos:
            return
        self.pos[x] = len(self.items)
        self.items.append(x)

    def remove(self, x: int) -> None:
        i = self.pos.pop(x)
        last = self.items.pop()
        if i < len(self.items):
            self.items[i] = last
            self.pos[last] = i


class PhiIndex:
    """Vertices keyed by one phi threshold; max query with exclusions.

    Every change to a phi value is a unit step, so the max pointer only
    needs to move by one bucket at a time on increments.
    """

    __slots__ = ("buckets", "top")

    def __init__(self) -> None:
        self.buckets: Dict[int, Set[int]] = {}
        self.top = 0

    def add(self, v: int, value: int) -> None:
        bucket = self.buckets.get(value)
        if bucket is None:
            bucket = self.buckets[value] = set()
        bucket.add(v)
        if value > self.top:
            self.top = value

    def remove(self, v: int, value: int) -> None:
        bucket = self.buckets[value]
        bucket.discard(v)
        if not bucket:
            del self.buckets[value]

    def move(self, v: int, old: int, new: int) -> None:
        self.remove(v, old)
        self.add(v, new)

    def best(self, excluded: Iterable[int] = (), floor: int = 0) -> Optional[Tuple[int, int]]:
        """(vertex, value) with maximal value >= floor outside ``excluded``; ties to smallest id."""
        while self.top > 0 and self.top not in self.buckets:
            self.top -= 1
        excluded_set = excluded if isinstance(excluded, (set, frozenset, dict)) else set(excluded)
        value = self.top
        while value >= floor:
            bucket = self.buckets.get(value)
            if bucket:
                choice = None
                for v in bucket:
                    if v not in excluded_set and (choice is None or v < choice):
                        choice = v
                if choice is not None:
                    return choice, value
            value -= 1
        return None


class LeveledGraph:
    """Vertex records and matching state.

    Each vertex ``x`` keeps a *view* of every neighbor ``y``: either ``y`` is an
    out-neighbor (``where[x][y] == OUT``) or ``y`` sits in the incoming bucket
    ``I_x[k]`` with ``k = where[x][y]`` the level at which ``x`` last saw ``y``.
    ``phi[x][j]`` is kept equal to ``|O_x| + sum_{k<j} |I_x[k]|`` for every
    ``j``; for ``j > level(x)`` that is the number of neighbors below ``j``.
    """

    def __init__(self, params: Params) -> None:
        self.params = params
        n = params.n
        L = params.L_max
        self.n = n
        self.L = L
        self.level: List[int] = [-1] * n
        self.mate: List[Optional[int]] = [None] * n
        self.where: List[Dict[int, int]] = [dict() for _ in range(n)]
        self.out: List[Set[int]] = [set() for _ in range(n)]
        self.inc: List[List[Set[int]]] = [[set() for _ in range(L + 2)] for _ in range(n)]
        self.phi: List[List[int]] = [[0] * (L + 1) for _ in range(n)]
        self.phi_index: List[PhiIndex] = [PhiIndex() for _ in range(L + 1)]
        for j in range(L + 1):
            for v in range(n):
                self.phi_index[j].add(v, 0)
        self.edge_count = 0
        # Active list: vertex -> role tag; destination level is the public level.
        self.active: Dict[int, str] = {}
        # temporarily free vertices (unmatched, level >= 0) -> who freed them
        self.free_origin: Dict[int, str] = {}
        # matching
        self.matched: Dict[int, MatchedEdge] = {}
        self.edge_of: List[Optional[int]] = [None] * n
        self.level_edges: List[IndexedSet] = [IndexedSet() for _ in range(L + 1)]
        self._min_heap: List[List[Tuple[int, int]]] = [[] for _ in range(L + 1)]
        self.sample_index: Dict[Tuple[int, int], List[int]] = {}
        self.next_eid = 0
        self.under_sampled_created = 0
        # incremental-audit support: vertices whose audited predicates may have changed
        self.dirty: Set[int] = set()
        self.track_dirty = False

    # ------------------------------------------------------------------ basics
    def has_edge(self, u: int, v: int) -> bool:
        return v in self.where[u]

    def neighbors(self, v: int) -> Iterable[int]:
        return self.where[v].keys()

    def degree(self, v: int) -> int:
        return len(self.where[v])

    def edges(self) -> List[Tuple[int, int]]:
        return sorted((u, v) for u in range(self.n) for v in self.where[u] if u < v)

    def orient_out(self, x: int, y: int) -> bool:
        """True iff the edge (x, y) should be oriented x -> y under current public levels."""
        lx = self.level[x]
        ly = self.level[y]
        return ly < lx or (ly == lx and y > x)

    def _mark(self, v: int) -> None:
        if self.track_dirty:
            self.dirty.add(v)

    def _mark_with_neighbors(self, v: int) -> None:
        if self.track_dirty:
            self.dirty.add(v)
            self.dirty.update(self.where[v])

    # --------------------------------------------------------------- placements
    def _place(self, owner: int, nb: int, new: Optional[int]) -> int:
        """Move ``nb`` to placement ``new`` in ``owner``'s view (None removes it).

        Returns the number of phi thresholds touched plus one.
        """
        view = self.where[owner]
        old = view.get(nb)
        if old == new:
            return 1
        L = self.L
        if old is None:
            a = L + 1
        elif old == OUT:
            self.out[owner].discard(nb)
            a = 0
        else:
            self.inc[owner][old + 1].discard(nb)
            a = old + 1
        if new is None:
            del view[nb]
            b = L + 1
        elif new == OUT:
            view[nb] = OUT
            self.out[owner].add(nb)
            b = 0
        else:
            view[nb] = new
            self.inc[owner][new + 1].add(nb)
            b = new + 1
        if a > L + 1:
            a = L + 1
        if b > L + 1:
            b = L + 1
        if a == b:
            return 1
        phi = self.phi[owner]
        lvl = self.level[owner]
        index = self.phi_index
        if a > b:
            for j in range(b, a):
                if j > L:
                    break
                old_val = phi[j]
                phi[j] = old_val + 1
                if lvl < j:
                    index[j].move(owner, old_val, old_val + 1)
            touched = a - b
        else:
            for j in range(a, b):
                if j > L:
                    break
                old_val = phi[j]
                phi[j] = old_val - 1
                if lvl < j:
                    index[j].move(owner, old_val, old_val - 1)
            touched = b - a
        if self.track_dirty:
            self.dirty.add(owner)
        return 1 + touched

    def retag(self, x: int, y: int) -> int:
        """Make both endpoint views of edge (x, y) agree with current public levels."""
        if self.orient_out(x, y):
            return self._place(x, y, OUT) + self._place(y, x, self.level[x])
        return self._place(y, x, OUT) + self._place(x, y, self.level[y])

    def view_is_current(self, x: int, y: int) -> bool:
        if self.orient_out(x, y):
            return self.where[x].get(y) == OUT and self.where[y].get(x) == self.level[x]
        return self.where[y].get(x) == OUT and self.where[x].get(y) == self.level[y]

    # ------------------------------------------------------------------- edges
    def insert_edge_raw(self, u: int, v: int) -> int:
        if u == v:
            raise GraphError(f"self-loop ({u}, {v}) rejected")
        if not (0 <= u < self.n and 0 <= v < self.n):
            raise GraphError(f"vertex out of range in ({u}, {v})")
        if v in self.where[u]:
            raise GraphError(f"duplicate edge ({u}, {v}) rejected")
        self.edge_count += 1
        return self.retag(u, v)

    def delete_edge_raw(self, u: int, v: int) -> Tuple[int, List[int]]:
        """Remove an unmatched edge; returns (steps, matched edges whose sample shrank)."""
        if v not in self.where[u]:
            raise GraphError(f"edge ({u}, {v}) absent")
        eid_u = self.edge_of[u]
        if eid_u is not None and eid_u == self.edge_of[v]:
            raise GraphError(f"edge ({u}, {v}) is matched; unmatch it first")
        cost = self._place(u, v, None) + self._place(v, u, None)
        self.edge_count -= 1
        touched = self.sample_index.pop(edge_key(u, v), [])
        for eid in touched:
            rec = self.matched[eid]
            rec.sample_remaining -= 1
            heapq.heappush(self._min_heap[rec.level], (rec.sample_remaining, eid))
            cost += 1
            self._mark(rec.u)
            self._mark(rec.v)
        return cost, touched

    def relevel_neighbor(self, w: int, v: int, old_level: int, new_level: int) -> int:
        """Move ``v`` between incoming buckets of ``w`` (``v`` stays above ``w``)."""
        if self.where[w].get(v) != old_level:
            raise GraphError(f"vertex {v} not in I_{w}[{old_level}]")
        if old_level == new_level:
            return 1
        return self._place(w, v, new_level)

    # ------------------------------------------------------------------ levels
    def set_public_level(self, v: int, new: int) -> int:
        old = self.level[v]
        if new == old:
            return 1
        phi = self.phi[v]
        if new < old:
            for j in range(new + 1, old + 1):
                self.phi_index[j].add(v, phi[j])
        else:
            for j in range(old + 1, new + 1):
                self.phi_index[j].remove(v, phi[j])
        self.level[v] = new
        if new == -1:
            self.free_origin.pop(v, None)
        self._mark_with_neighbors(v)
        return 1 + abs(new - old)

    def true_phi(self, v: int, j: int) -> int:
        lv = self.level
        return sum(1 for x in self.where[v] if lv[x] < j)

    # ---------------------------------------------------------------- matching
    def create_match(
        self,
        sampler: int,
        w: int,
        level: int,
        members: List[Tuple[int, int]],
        now: int = 0,
    ) -> MatchedEdge:
        if self.mate[sampler] is not None or self.mate[w] is not None:
            raise GraphError(f"cannot match ({sampler}, {w}): endpoint already matched")
        if self.level[sampler] != level or self.level[w] != level:
            raise GraphError(f"cannot match ({sampler}, {w}) at level {level}: levels differ")
        if w not in self.where[sampler]:
            raise GraphError(f"cannot match ({sampler}, {w}): not an edge")
        eid = self.next_eid
        self.next_eid += 1
        u, v = edge_key(sampler, w)
        size = len(members)
        under = level >= self.params.low_level_cut and size < self.params.sample_lo(level)
        rec = MatchedEdge(eid, u, v, level, size, size, list(members), sampler, under, now)
        self.matched[eid] = rec
        self.mate[sampler] = w
        self.mate[w] = sampler
        self.edge_of[sampler] = eid
        self.edge_of[w] = eid
        self.free_origin.pop(sampler, None)
        self.free_origin.pop(w, None)
        for key in members:
            self.sample_index.setdefault(key, []).append(eid)
        self.level_edges[level].add(eid)
        heapq.heappush(self._min_heap[level], (size, eid))
        if under:
            self.under_sampled_created += 1
        self._mark(u)
        self._mark(v)
        return rec

    def unmatch(self, eid: int, origin: str) -> MatchedEdge:
        rec = self.matched.pop(eid)
        for key in rec.members:
            lst = self.sample_index.get(key)
            if lst is not None:
                lst.remove(eid)
                if not lst:
                    del self.sample_index[key]
        self.level_edges[rec.level].remove(eid)
        self._compact_heap(rec.level)
        for x in (rec.u, rec.v):
            self.mate[x] = None
            self.edge_of[x] = None
            if self.level[x] >= 0:
                self.free_origin[x] = origin
            self._mark(x)
        return rec

    def _compact_heap(self, level: int) -> None:
        heap = self._min_heap[level]
        if len(heap) > 4 * len(self.level_edges[level]) + 64:
            live = [(self.matched[e].sample_remaining, e) for e in self.level_edges[level].items]
            heapq.heapify(live)
            self._min_heap[level] = live

    def smallest_sample_edge(self, level: int) -> Optional[MatchedEdge]:
        heap = self._min_heap[level]
        while heap:
            remaining, eid = heap[0]
            rec = self.matched.get(eid)
            if rec is not None and rec.level == level and rec.sample_remaining == remaining:
                return rec
            heapq.heappop(heap)
        return None

    def random_matched_edge(self, level: int, rng) -> Optional[MatchedEdge]:
        items = self.level_edges[level].items
        if not items:
            return None
        return self.matched[items[int(rng.integers(len(items)))]]

    def max_phi_vertex(self, level: int, excluded: Iterable[int] = (), floor: int = 0):
        return self.phi_index[level].best(excluded, floor)

    def matching_edges(self) -> List[Tuple[int, int]]:
        return sorted((rec.u, rec.v) for rec in self.matched.values())

    def matching_size(self) -> int:
        return len(self.matched)

    # -------------------------------------------------------------------- dump
    def debug_dump(self) -> str:
        lines = []
        for v in range(self.n):
            out = sorted(self.out[v])
            inc = {k - 1: sorted(b) for k, b in enumerate(self.inc[v]) if b}
            phi = self.phi[v][self.level[v] + 1:] if self.level[v] + 1 <= self.L else []
            mate = self.mate[v]
            eid = self.edge_of[v]
            lvl = self.matched[eid].level if eid is not None else None
            inc_txt = ";".join(f"{k}:{','.join(map(str, b))}" for k, b in sorted(inc.items()))
            lines.append(
                f"v={v} level={self.level[v]} mate={'-' if mate is None else mate}"
                f" edge_level={'-' if lvl is None else lvl}"
                f" out={','.join(map(str, out))} in={inc_txt}"
                f" phi={','.join(map(str, phi))}"
                f" active={self.active.get(v, '-')}"
            )
        return "\n".join(lines) + "\n"


def sample_uniform(candidates: OrderStatSet, cap: int, rng) -> Tuple[int, int]:
    """Draw a uniform element among the ``min(|set|, cap)`` smallest; returns (vertex, steps)."""
    size = len(candidates)
    if size == 0:
        raise GraphError("empty candidate set")
    top = min(size, cap)
    k = int(rng.integers(1, top + 1))
    choice = candidates.select(k)
    return choice, 1 + candidates.last_touched
