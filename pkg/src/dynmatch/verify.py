"""Auditors and ground-truth oracles used by the harness and the tests."""

from __future__ import annotations

import json
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .graph_core import OUT, LeveledGraph, edge_key

INVARIANTS = (
    "inv1a",
    "inv1b",
    "inv1c",
    "inv1d",
    "phi",
    "inv2",
    "inv3",
    "sample_bounds",
    "queue",
    "active_cap",
    "active_leak",
    "good_edge_hit",
    "fallback_maximal",
    "budget",
)

WITNESS_LIMIT = 20


class ViolationReport:
    """Violation counts per predicate plus a few witnesses for each."""

    def __init__(self) -> None:
        self.counts: Dict[str, int] = {name: 0 for name in INVARIANTS}
        self.witnesses: Dict[str, List[Tuple[int, str]]] = {name: [] for name in INVARIANTS}
        self.under_sampled = 0
        self.max_active = 0
        self.max_tick_steps = 0
        self.audits = 0

    def add(self, name: str, t: int, witness: str) -> None:
        self.counts[name] += 1
        if len(self.witnesses[name]) < WITNESS_LIMIT:
            self.witnesses[name].append((t, witness))

    def merge(self, other: "ViolationReport") -> None:
        for name in INVARIANTS:
            self.counts[name] += other.counts[name]
            room = WITNESS_LIMIT - len(self.witnesses[name])
            if room > 0:
                self.witnesses[name].extend(other.witnesses[name][:room])
        self.under_sampled = max(self.under_sampled, other.under_sampled)
        self.max_active = max(self.max_active, other.max_active)
        self.max_tick_steps = max(self.max_tick_steps, other.max_tick_steps)
        self.audits += other.audits

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def empty(self) -> bool:
        return self.total == 0

    def to_dict(self) -> Dict[str, object]:
        return {
            "violations": dict(self.counts),
            "witnesses": {k: [list(w) for w in v] for k, v in self.witnesses.items() if v},
            "under_sampled": self.under_sampled,
            "max_active": self.max_active,
            "max_tick_steps": self.max_tick_steps,
            "audits": self.audits,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _audit_vertex(G: LeveledGraph, v: int, t: int, report: ViolationReport, scope) -> None:
    P = G.params
    L = G.L
    level = G.level
    active = G.active
    lv = level[v]
    mate = G.mate[v]
    if mate is not None and lv < 0:
        report.add("inv1a", t, f"v={v} matched at level {lv}")
    if lv == -1:
        if mate is not None:
            report.add("inv1c", t, f"v={v} free but matched")
        for y in G.out[v]:
            if y not in active:
                report.add("inv1c", t, f"free v={v} has out-neighbor {y} at level {level[y]}")
    # orientation and bucket placement against public levels
    hist = [0] * (L + 3)
    where_v = G.where[v]
    for y, placed in where_v.items():
        if y in active:
            # count by the owner's view of the in-flight neighbor
            seen = -1 if placed == OUT else placed
        else:
            seen = level[y]
            # an edge audited from both ends is reported once, from its smaller id
            if not G.view_is_current(v, y) and (v < y or y not in scope):
                report.add("inv1d", t, f"edge ({v}, {y}) levels ({lv}, {seen}) view {placed}")
        hist[seen + 1] += 1
    phi = G.phi[v]
    running = 0
    for j in range(L + 1):
        running += hist[j]
        if j > lv:
            if phi[j] != running:
                report.add("phi", t, f"v={v} phi({j}) stored {phi[j]} recount {running}")
            if phi[j] > P.phi_cap(j):
                report.add("inv3", t, f"v={v} phi({j})={phi[j]} > cap {P.phi_cap(j)}")


def _audit_edge(G: LeveledGraph, eid: int, t: int, report: ViolationReport) -> None:
    rec = G.matched[eid]
    u, v = rec.u, rec.v
    P = G.params
    if G.mate[u] != v or G.mate[v] != u or G.edge_of[u] != eid or G.edge_of[v] != eid:
        report.add("inv1b", t, f"edge {eid} ({u}, {v}) mate pointers inconsistent")
    if v not in G.where[u]:
        report.add("inv1b", t, f"matched edge ({u}, {v}) missing from graph")
    if not (u in G.active or v in G.active):
        if G.level[u] != rec.level or G.level[v] != rec.level:
            report.add("inv1b", t, f"edge ({u}, {v}) at {rec.level} but levels {G.level[u]}, {G.level[v]}")
    present = sum(1 for a, b in rec.members if b in G.where[a])
    if present != rec.sample_remaining:
        report.add("inv2", t, f"edge ({u}, {v}) remaining {rec.sample_remaining} recount {present}")
    if rec.level >= P.low_level_cut and not rec.under_sampled:
        if rec.sample_remaining <= P.sample_floor(rec.level):
            report.add(
                "inv2",
                t,
                f"edge ({u}, {v}) level {rec.level} sample {rec.sample_remaining} <= {P.sample_floor(rec.level)}",
            )


def audit_invariants(engine, t: Optional[int] = None, vertices: Optional[Iterable[int]] = None) -> ViolationReport:
    """Recompute every audited predicate from raw adjacency.

    With ``vertices`` given, only those vertex records are rechecked (edges and
    queues are always checked in full; they are small).
    """
    G: LeveledGraph = engine.graph
    P = G.params
    t = engine.t if t is None else t
    report = ViolationReport()
    report.audits = 1
    scope = range(G.n) if vertices is None else set(vertices)
    for v in sorted(scope):
        if v not in G.active:
            _audit_vertex(G, v, t, report, scope)
    for eid in G.matched:
        _audit_edge(G, eid, t, report)
    for lvl, q in enumerate(engine.queues):
        for v in q:
            if G.level[v] != lvl or G.mate[v] is not None or v in G.active or v not in G.free_origin:
                report.add("queue", t, f"Q_{lvl} holds invalid vertex {v}")
    if len(G.active) > P.active_cap:
        report.add("active_cap", t, f"|Active| = {len(G.active)}")
    idle = engine.idle_threads()
    for v, role in G.active.items():
        if role != "reserved" and idle:
            report.add("active_leak", t, f"vertex {v} left active as {role} with no thread running")
    if vertices is None:
        _audit_index(G, t, report)
    report.under_sampled = sum(1 for rec in G.matched.values() if rec.under_sampled)
    report.max_active = engine.stats.max_active
    return report


def _audit_index(G: LeveledGraph, t: int, report: ViolationReport) -> None:
    for j, index in enumerate(G.phi_index):
        seen: Dict[int, int] = {}
        for value, bucket in index.buckets.items():
            for v in bucket:
                seen[v] = value
        for v in range(G.n):
            if G.level[v] < j:
                if seen.get(v) != G.phi[v][j]:
                    report.add("phi", t, f"index {j} holds {seen.get(v)} for v={v}, phi={G.phi[v][j]}")
            elif v in seen:
                report.add("phi", t, f"index {j} holds v={v} at level {G.level[v]}")


class IncrementalAuditor:
    """Audits only vertices touched since the last call, plus a periodic full pass."""

    def __init__(self, engine, full_every: int = 0) -> None:
        self.engine = engine
        self.full_every = full_every
        self.calls = 0
        engine.graph.track_dirty = True
        engine.graph.dirty = set(range(engine.graph.n))

    def __call__(self) -> ViolationReport:
        G = self.engine.graph
        self.calls += 1
        if self.full_every and self.calls % self.full_every == 0:
            G.dirty.clear()
            return audit_invariants(self.engine)
        dirty = G.dirty
        G.dirty = set()
        return audit_invariants(self.engine, vertices=dirty)


def fallback_audit(fb, t: int, report: ViolationReport) -> None:
    if fb.size < fb.delta:
        for a, b in fb.free_free_edges():
            report.add("fallback_maximal", t, f"free edge ({a}, {b}) with |M_delta|={fb.size}")
            break


class BadEdgeShadow:
    """Verification-only copy of every sample, with deletion ranks.

    The algorithm never reads this state.
    """

    def __init__(self, params, graph: LeveledGraph) -> None:
        self.params = params
        self.graph = graph
        self.members: Dict[int, Set[Tuple[int, int]]] = {}
        self.deleted: Dict[int, int] = {}
        self.level: Dict[int, int] = {}
        self.under: Dict[int, bool] = {}
        self.reverse: Dict[Tuple[int, int], Set[int]] = {}
        self.hits = 0
        self.hits_cut = 0
        self.bad_hits = 0
        self.report = ViolationReport()

    def on_match(self, rec, now: int) -> None:
        P = self.params
        if rec.level < P.low_level_cut:
            return
        size = len(rec.members)
        if not rec.under_sampled and not (P.sample_lo(rec.level) <= size <= P.gamma_pow[rec.level]):
            self.report.add("sample_bounds", now, f"edge ({rec.u}, {rec.v}) sample {size} at level {rec.level}")
        if size > P.gamma_pow[rec.level]:
            self.report.add("sample_bounds", now, f"edge ({rec.u}, {rec.v}) sample {size} over cap")
        self.members[rec.eid] = set(rec.members)
        self.deleted[rec.eid] = 0
        self.level[rec.eid] = rec.level
        self.under[rec.eid] = rec.under_sampled
        for key in rec.members:
            self.reverse.setdefault(key, set()).add(rec.eid)
        if len(self.members) > 4 * len(self.graph.matched) + 256:
            self._prune()

    def _prune(self) -> None:
        live = self.graph.matched
        for eid in [e for e in self.members if e not in live]:
            for key in self.members.pop(eid):
                holders = self.reverse.get(key)
                if holders is not None:
                    holders.discard(eid)
                    if not holders:
                        del self.reverse[key]
            del self.deleted[eid], self.level[eid], self.under[eid]

    def on_edge_deleted(self, u: int, v: int, now: int) -> None:
        for eid in self.reverse.pop(edge_key(u, v), ()):
            if eid in self.deleted:
                self.deleted[eid] += 1

    def on_hit(self, rec, now: int) -> None:
        self.hits += 1
        if rec.level < self.params.low_level_cut:
            return
        self.hits_cut += 1
        if rec.eid not in self.deleted:
            return
        earlier = self.deleted[rec.eid]
        bad = Fraction(earlier) < self.params.bad_rank_limit(rec.level)
        if bad:
            self.bad_hits += 1
        elif not self.under[rec.eid]:
            self.report.add("good_edge_hit", now, f"edge ({rec.u}, {rec.v}) hit after {earlier} sample deletions")


# ------------------------------------------------------------ exact matching
def max_matching_exact(n: int, edges: Iterable[Tuple[int, int]]) -> int:
    """Maximum matching size by augmenting paths with blossom contraction."""
    if n > 64:
        raise ValueError(f"exact matching limited to n <= 64, got {n}")
    adj: List[List[int]] = [[] for _ in range(n)]
    for a, b in edges:
        if a != b:
            adj[a].append(b)
            adj[b].append(a)
    match = [-1] * n

    def augment_from(root: int) -> bool:
        used = [False] * n
        parent = [-1] * n
        base = list(range(n))
        used[root] = True
        queue = [root]
        head = 0

        def lca(a: int, b: int) -> int:
            seen = [False] * n
            while True:
                a = base[a]
                seen[a] = True
                if match[a] == -1:
                    break
                a = parent[match[a]]
            while True:
                b = base[b]
                if seen[b]:
                    return b
                b = parent[match[b]]

        def mark_path(v: int, b: int, child: int, blossom: List[bool]) -> None:
            while base[v] != b:
                blossom[base[v]] = blossom[base[match[v]]] = True
                parent[v] = child
                child = match[v]
                v = parent[match[v]]

        while head < len(queue):
            v = queue[head]
            head += 1
            for to in adj[v]:
                if base[v] == base[to] or match[v] == to:
                    continue
                if to == root or (match[to] != -1 and parent[match[to]] != -1):
                    cur = lca(v, to)
                    blossom = [False] * n
                    mark_path(v, cur, to, blossom)
                    mark_path(to, cur, v, blossom)
                    for i in range(n):
                        if blossom[base[i]]:
                            base[i] = cur
                            if not used[i]:
                                used[i] = True
                                queue.append(i)
                elif parent[to] == -1:
                    parent[to] = v
                    if match[to] == -1:
                        # flip the alternating path ending at ``to``
                        while to != -1:
                            pv = parent[to]
                            nxt = match[pv]
                            match[to] = pv
                            match[pv] = to
                            to = nxt
                        return True
                    used[match[to]] = True
                    queue.append(match[to])
        return False

    size = 0
    for v in range(n):
        if match[v] == -1:
            for to in adj[v]:
                if match[to] == -1:
                    match[v], match[to] = to, v
                    size += 1
                    break
    for v in range(n):
        if match[v] == -1 and augment_from(v):
            size += 1
    return size


def max_matching_bruteforce(n: int, edges: Iterable[Tuple[int, int]]) -> int:
    """Subset recursion over vertex bitmasks; meant for n <= 10."""
    if n > 16:
        raise ValueError("brute force limited to n <= 16")
    nbr = [0] * n
    for a, b in edges:
        if a != b:
            nbr[a] |= 1 << b
            nbr[b] |= 1 << a

    @lru_cache(maxsize=None)
    def best(mask: int) -> int:
        if mask == 0:
            return 0
        low = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << low)
        result = best(rest)
        options = nbr[low] & rest
        while options:
            bit = options & -options
            options ^= bit
            result = max(result, 1 + best(rest & ~bit))
        return result

    return best((1 << n) - 1)


def is_matching(edges: Iterable[Tuple[int, int]], graph_edges: Optional[Set[Tuple[int, int]]] = None) -> bool:
    seen: Set[int] = set()
    for a, b in edges:
        if a in seen or b in seen or a == b:
            return False
        if graph_edges is not None and edge_key(a, b) not in graph_edges:
            return False
        seen.add(a)
        seen.add(b)
    return True


def amm_metrics(engine, fallback=None) -> Dict[str, object]:
    """Temporarily free counts, output size and per-level populations."""
    G = engine.graph
    P = engine.params
    adv, alg = engine.temporarily_free()
    adv_high = sum(
        1 for v, origin in G.free_origin.items() if origin == "adv" and G.level[v] >= P.low_level_cut
    )
    rand_size = G.matching_size()
    if fallback is not None:
        from .fallback import select_output

        choice = select_output(fallback.size, P.delta_threshold)
        output = fallback.size if choice == "use_mdelta" else rand_size
    else:
        choice = "use_mrand"
        output = rand_size
    population = [0] * (P.L_max + 2)
    for lv in G.level:
        population[lv + 1] += 1
    return {
        "tf_adversary": adv,
        "tf_algorithm": alg,
        "tf_adversary_high": adv_high,
        "M_output": output,
        "M_rand": rand_size,
        "output_source": choice,
        "level_population": population,
    }
