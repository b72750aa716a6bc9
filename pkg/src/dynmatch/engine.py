"""Cooperative execution: budgeted logical threads, the four schedulers, queues,
the Active list and the per-update tick loop."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Generator, List, Optional, Tuple

import numpy as np

from .graph_core import GraphError, LeveledGraph, MatchedEdge
from .params import Params
from . import procedures as proc

SCHEDULERS = ("temp", "rise", "shuffle", "unmatch")

_STREAM_TAGS = {"temp": 1, "rise": 2, "shuffle": 3, "unmatch": 4, "sampling": 5}


class BudgetOverrun(RuntimeError):
    """A procedure needed more steps than its slot allows."""

    def __init__(self, message: str, diagnostics: Dict[str, object]) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics


class InvariantFailure(RuntimeError):
    pass


def make_stream(seed: int, tag: str, level: int = 0) -> np.random.Generator:
    """Independent Philox stream for one (scheduler, level) pair."""
    seq = np.random.SeedSequence(entropy=seed, spawn_key=(_STREAM_TAGS[tag], level))
    return np.random.Generator(np.random.Philox(seq))


@dataclass
class LogicalThread:
    scheduler: str
    level: int
    slot: int
    sim_param: int
    start: Optional[Fraction]
    end: Optional[Fraction]
    program: Generator
    work: object = None
    steps_done: int = 0
    debt: int = 0
    status: str = "running"


@dataclass
class EngineStats:
    set_level_calls: int = 0
    setlevel_max_chunk: int = 0
    skipped_reserved: int = 0
    empty_candidates: int = 0
    lstar_rises: int = 0
    recursions: int = 0
    max_active: int = 0
    busy_sleeps: int = 0
    adversarial_hits: Dict[int, int] = field(default_factory=dict)
    threads_started: Dict[str, int] = field(default_factory=dict)
    max_thread_steps: Dict[str, int] = field(default_factory=dict)
    max_update_steps: int = 0
    max_tick_steps: int = 0

    def note_setlevel(self, cost: int) -> None:
        if cost > self.setlevel_max_chunk:
            self.setlevel_max_chunk = cost

    def to_dict(self) -> Dict[str, object]:
        return {
            "set_level_calls": self.set_level_calls,
            "skipped_reserved": self.skipped_reserved,
            "empty_candidates": self.empty_candidates,
            "lstar_rises": self.lstar_rises,
            "recursions": self.recursions,
            "max_active": self.max_active,
            "busy_sleeps": self.busy_sleeps,
            "adversarial_hits": {str(k): v for k, v in sorted(self.adversarial_hits.items())},
            "threads_started": dict(sorted(self.threads_started.items())),
            "max_thread_steps": dict(sorted(self.max_thread_steps.items())),
            "max_update_steps": self.max_update_steps,
            "max_tick_steps": self.max_tick_steps,
        }


@dataclass
class TickResult:
    t: int
    op: str
    steps_update: int
    steps_by_scheduler: Dict[str, int]

    @property
    def steps_total(self) -> int:
        return self.steps_update + sum(self.steps_by_scheduler.values())


def slot_shape(slot: int, sim: int) -> Tuple[int, int]:
    """(span, threads per tick) for a slot of ``slot`` steps granted ``sim`` per update.

    Both are powers of two, so all thread intervals are dyadic and therefore
    nested or disjoint across every scheduler and level.
    """
    if slot <= sim:
        return 1, 1 << ((sim // slot).bit_length() - 1)
    ticks = -(-slot // sim)
    return 1 << (ticks - 1).bit_length(), 1


class Engine:
    def __init__(
        self,
        params: Params,
        seed: Optional[int] = None,
        oracle=None,
        observers: Tuple = (),
        log_intervals: bool = False,
    ) -> None:
        self.params = params
        self.seed = params.config.seed if seed is None else seed
        self.graph = LeveledGraph(params)
        self.oracle = oracle
        self.observers = list(observers)
        self.stats = EngineStats()
        self.t = 0
        self.now = 0
        L = params.L_max
        cut = params.low_level_cut
        self.queues: List[Dict[int, None]] = [dict() for _ in range(L + 1)]
        self.next_in_line: Dict[int, int] = {}
        self.reserved_by: Dict[int, int] = {}
        self.rng = {(s, l): make_stream(self.seed, s, l) for s in SCHEDULERS for l in range(L + 1)}
        self.rng_sampling = make_stream(self.seed, "sampling")
        self.shape: Dict[Tuple[str, int], Tuple[int, int]] = {}
        self.sim: Dict[str, int] = {}
        for s in SCHEDULERS:
            sim = params.Delta if s == "unmatch" else params.DeltaPrime
            self.sim[s] = sim
            for l in range(L + 1):
                if s in ("shuffle", "unmatch") and l < cut:
                    continue
                self.shape[(s, l)] = slot_shape(params.T[l], sim)
        log2 = params.log_n * params.log_n
        self.rise_trigger = [
            params.gamma_pow[l] if l >= cut else params.gamma_pow[l] * log2 for l in range(L + 1)
        ]
        self.current: Dict[Tuple[str, int], Optional[LogicalThread]] = {k: None for k in self.shape}
        self.log_intervals = log_intervals
        self.intervals: List[Tuple[str, int, Fraction, Fraction]] = []

    # ------------------------------------------------------------ Active list
    def activate(self, v: int, role: str) -> None:
        G = self.graph
        q = self.queues[G.level[v]] if G.level[v] >= 0 else None
        if q is not None:
            q.pop(v, None)
        if G.active.get(v) == "reserved" and role != "reserved":
            lvl = self.reserved_by.pop(v)
            del self.next_in_line[lvl]
        G.active[v] = role
        size = len(G.active)
        if size > self.stats.max_active:
            self.stats.max_active = size
        if size > self.params.active_cap:
            raise InvariantFailure(f"Active list holds {size} > {self.params.active_cap} vertices")
        G._mark_with_neighbors(v)

    def deactivate(self, v: int) -> int:
        """Remove ``v`` from the Active list and reconcile its active neighbors."""
        G = self.graph
        role = G.active.pop(v, None)
        if role == "reserved":
            lvl = self.reserved_by.pop(v)
            del self.next_in_line[lvl]
        cost = 1 + len(G.active)
        where_v = G.where[v]
        for a in G.active:
            if a in where_v:
                cost += G.retag(v, a)
        G._mark_with_neighbors(v)
        return cost

    def authenticate(self, v: int) -> int:
        G = self.graph
        cost = 1 + len(G.active) * self.params.log_n
        where_v = G.where[v]
        for a in G.active:
            if a != v and a in where_v:
                cost += G.retag(v, a)
        return cost

    def enqueue(self, v: int) -> None:
        G = self.graph
        if G.level[v] < 0 or G.mate[v] is not None or v in G.active:
            return
        self.queues[G.level[v]][v] = None

    def busy(self, v: int) -> bool:
        role = self.graph.active.get(v)
        return role is not None and role != "reserved"

    # ------------------------------------------------------------- observers
    def notify_match(self, rec: MatchedEdge) -> None:
        for obs in self.observers:
            obs.on_match(rec, self.now)

    def notify_hit(self, rec: MatchedEdge) -> None:
        self.stats.adversarial_hits[rec.level] = self.stats.adversarial_hits.get(rec.level, 0) + 1
        for obs in self.observers:
            obs.on_hit(rec, self.now)

    def notify_edge_deleted(self, u: int, v: int, touched: List[int]) -> None:
        for obs in self.observers:
            obs.on_edge_deleted(u, v, self.now)

    # ------------------------------------------------------------- tick loop
    def tick(self, op: str, u: int, v: int, now: Optional[int] = None) -> TickResult:
        self.now = self.t if now is None else now
        if op == "+":
            program = proc.handle_insertion(self, u, v)
        elif op == "-":
            program = proc.handle_deletion(self, u, v)
        else:
            raise GraphError(f"unknown operation {op!r}")
        steps_update = sum(program)
        if steps_update > self.params.update_cap:
            raise BudgetOverrun(
                f"update handler used {steps_update} > {self.params.update_cap} steps",
                {"t": self.t, "op": op, "u": u, "v": v},
            )
        self.stats.max_update_steps = max(self.stats.max_update_steps, steps_update)
        by_sched = {s: 0 for s in SCHEDULERS}
        L = self.params.L_max
        for s in SCHEDULERS:
            for l in range(L, -1, -1):
                if (s, l) in self.shape:
                    by_sched[s] += self._run_slot(s, l)
        result = TickResult(self.t, op, steps_update, by_sched)
        self.stats.max_tick_steps = max(self.stats.max_tick_steps, result.steps_total)
        self.t += 1
        return result

    def _run_slot(self, s: str, l: int) -> int:
        span, per_tick = self.shape[(s, l)]
        slot = self.params.T[l]
        sim = self.sim[s]
        t = self.t
        if span == 1:
            charged = 0
            log = self.log_intervals
            for i in range(per_tick):
                start = Fraction(t * per_tick + i, per_tick) if log else None
                th = self._start(s, l, start, start + Fraction(1, per_tick) if log else None)
                if th is None:
                    break
                charged += self._advance(th, slot)
                if th.status != "done":
                    self._overrun(th)
            return charged
        th = self.current[(s, l)]
        if t % span == 0:
            if th is not None and th.status != "done":
                self._overrun(th)
            th = self._start(s, l, Fraction(t), Fraction(t + span)) if self.log_intervals else self._start(s, l, None, None)
            self.current[(s, l)] = th
        if th is None or th.status == "done":
            return 0
        charged = self._advance(th, min(sim, slot - th.steps_done))
        if th.status != "done" and th.steps_done >= slot:
            self._overrun(th)
        return charged

    def _overrun(self, th: LogicalThread) -> None:
        raise BudgetOverrun(
            f"{th.scheduler}_{th.level} thread exceeded its slot of {th.slot} steps",
            {
                "t": self.t,
                "scheduler": th.scheduler,
                "level": th.level,
                "steps_done": th.steps_done,
                "debt": th.debt,
                "work": repr(th.work),
            },
        )

    def _advance(self, th: LogicalThread, grant: int) -> int:
        """Run ``th`` until its grant is spent or it finishes; returns steps charged."""
        paid = 0
        if th.debt:
            pay = min(th.debt, grant)
            th.debt -= pay
            paid += pay
        while paid < grant and th.debt == 0:
            try:
                cost = next(th.program)
            except StopIteration:
                th.status = "done"
                break
            pay = min(cost, grant - paid)
            paid += pay
            th.debt = cost - pay
        th.steps_done += paid
        if th.status == "done":
            key = f"{th.scheduler}_{th.level}"
            if th.steps_done > self.stats.max_thread_steps.get(key, 0):
                self.stats.max_thread_steps[key] = th.steps_done
        return paid

    # --------------------------------------------------------- work selection
    def _start(self, s: str, l: int, start: Optional[Fraction], end: Optional[Fraction]) -> Optional[LogicalThread]:
        found = getattr(self, f"_select_{s}")(l)
        if found is None:
            return None
        work, program = found
        key = f"{s}_{l}"
        self.stats.threads_started[key] = self.stats.threads_started.get(key, 0) + 1
        if self.log_intervals:
            self.intervals.append((s, l, start, end))
        return LogicalThread(s, l, self.params.T[l], self.sim[s], start, end, program, work)

    def _select_temp(self, l: int):
        G = self.graph
        q = self.queues[l]
        while q:
            v = next(iter(q))
            del q[v]
            if G.level[v] == l and G.mate[v] is None and v not in G.active:
                return v, proc.temp_program(self, v)
        return None

    def _select_unmatch(self, l: int):
        rec = self.graph.smallest_sample_edge(l)
        if rec is None:
            return None
        if self.busy(rec.u) or self.busy(rec.v):
            self.stats.busy_sleeps += 1
            return None
        return rec.eid, proc.unmatch_program(self, rec.eid)

    def _select_shuffle(self, l: int):
        rec = self.graph.random_matched_edge(l, self.rng[("shuffle", l)])
        if rec is None:
            return None
        if self.busy(rec.u) or self.busy(rec.v):
            self.stats.busy_sleeps += 1
            return None
        return rec.eid, proc.unmatch_program(self, rec.eid)

    def _rise_ok(self, x: int, l: int) -> bool:
        G = self.graph
        return G.level[x] < l and G.phi[x][l] >= self.rise_trigger[l]

    def _select_rise(self, l: int):
        G = self.graph
        trigger = self.rise_trigger[l]
        cost = 1
        x = self.next_in_line.get(l)
        if x is not None:
            cost += self.deactivate(x)
            if not self._rise_ok(x, l):
                self.enqueue(x)
                x = None
        if x is None:
            best = G.max_phi_vertex(l, G.active, trigger)
            cost += 1
            if best is None:
                return None
            x = best[0]
        self.activate(x, "raised")
        cost += self.authenticate(x)
        nxt = G.max_phi_vertex(l, G.active, trigger)
        cost += 1
        if nxt is not None:
            y = nxt[0]
            self.activate(y, "reserved")
            self.next_in_line[l] = y
            self.reserved_by[y] = l
        return x, _prefixed(cost, proc.rise_program(self, x, l))

    # ------------------------------------------------------------- snapshots
    def queue_sizes(self) -> List[int]:
        return [len(q) for q in self.queues]

    def temporarily_free(self) -> Tuple[int, int]:
        adv = alg = 0
        for origin in self.graph.free_origin.values():
            if origin == "adv":
                adv += 1
            else:
                alg += 1
        return adv, alg

    def idle_threads(self) -> bool:
        """True when no thread is suspended mid-program."""
        return not any(th is not None and th.status != "done" for th in self.current.values())


def _prefixed(cost: int, program: Generator) -> Generator:
    yield cost
    return (yield from program)
