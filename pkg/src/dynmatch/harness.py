"""Update sequences, generators, and the run driver (epochs, fallback, audits, combiner)."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, IO, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from .engine import BudgetOverrun, Engine
from .fallback import FallbackMatching, select_output
from .graph_core import IndexedSet, edge_key
from .offline_oracle import OfflineOracle, SequenceError
from .params import Config, Params, derive
from .transform import Transform
from .verify import (
    BadEdgeShadow,
    IncrementalAuditor,
    ViolationReport,
    audit_invariants,
    fallback_audit,
    max_matching_exact,
)

Update = Tuple[str, int, int]
MODELS = ("random", "sliding-window", "churn-matched-proxy", "offline-stress")
COPY_RATE = 4
PROXY_SEED_SALT = 0x9E3779B97F4A7C15


@dataclass
class UpdateSequence:
    n: int
    updates: List[Update]
    provenance: Dict[str, object] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.updates)

    def validate(self) -> None:
        validate_updates(self.n, self.updates)

    def to_text(self) -> str:
        lines = [f"n={self.n}"]
        for key in sorted(self.provenance):
            lines.append(f"# {key}={self.provenance[key]}")
        lines.extend(f"{op} {u} {v}" for op, u, v in self.updates)
        return "\n".join(lines) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="ascii")

    @classmethod
    def parse(cls, text: str) -> "UpdateSequence":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("n="):
            raise SequenceError(0, "first line must be n=<int>")
        try:
            n = int(lines[0][2:])
        except ValueError as exc:
            raise SequenceError(0, f"bad vertex count {lines[0]!r}") from exc
        provenance: Dict[str, object] = {}
        updates: List[Update] = []
        for raw in lines[1:]:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                provenance[key.strip()] = value.strip()
                continue
            parts = line.split()
            if len(parts) != 3 or parts[0] not in "+-":
                raise SequenceError(len(updates), f"malformed line {raw!r}")
            try:
                u, v = int(parts[1]), int(parts[2])
            except ValueError as exc:
                raise SequenceError(len(updates), f"malformed line {raw!r}") from exc
            updates.append((parts[0], u, v))
        seq = cls(n, updates, provenance)
        seq.validate()
        return seq

    @classmethod
    def read(cls, path: str | Path) -> "UpdateSequence":
        return cls.parse(Path(path).read_text(encoding="ascii"))


def validate_updates(n: int, updates: Sequence[Update]) -> None:
    present: Set[Tuple[int, int]] = set()
    for i, (op, u, v) in enumerate(updates):
        if not (0 <= u < n and 0 <= v < n):
            raise SequenceError(i, f"vertex out of range in ({u}, {v})")
        if u == v:
            raise SequenceError(i, f"self-loop ({u}, {v})")
        key = edge_key(u, v)
        if op == "+":
            if key in present:
                raise SequenceError(i, f"edge {key} inserted twice")
            present.add(key)
        elif op == "-":
            if key not in present:
                raise SequenceError(i, f"edge {key} deleted while absent")
            present.remove(key)
        else:
            raise SequenceError(i, f"unknown operation {op!r}")


# ----------------------------------------------------------------- generators
class _EdgePool:
    """Present edges with O(1) uniform draws; absent pairs found by rejection."""

    def __init__(self, n: int, rng: np.random.Generator) -> None:
        self.n = n
        self.rng = rng
        self.present = IndexedSet()
        self.codes: Dict[int, Tuple[int, int]] = {}
        self.capacity = n * (n - 1) // 2

    def _code(self, e: Tuple[int, int]) -> int:
        return e[0] * self.n + e[1]

    def __len__(self) -> int:
        return len(self.present)

    def has(self, e: Tuple[int, int]) -> bool:
        return self._code(e) in self.present

    def add(self, e: Tuple[int, int]) -> None:
        c = self._code(e)
        self.present.add(c)
        self.codes[c] = e

    def remove(self, e: Tuple[int, int]) -> None:
        c = self._code(e)
        self.present.remove(c)
        del self.codes[c]

    def random_present(self) -> Tuple[int, int]:
        items = self.present.items
        return self.codes[items[int(self.rng.integers(len(items)))]]

    def random_absent(self) -> Tuple[int, int]:
        if len(self) >= self.capacity:
            raise ValueError("graph is complete")
        if len(self) > 0.9 * self.capacity:
            absent = [
                (a, b) for a in range(self.n) for b in range(a + 1, self.n) if self._code((a, b)) not in self.present
            ]
            return absent[int(self.rng.integers(len(absent)))]
        while True:
            a, b = (int(x) for x in self.rng.integers(0, self.n, size=2))
            if a != b:
                e = edge_key(a, b)
                if not self.has(e):
                    return e


def _gen_random(n: int, length: int, rng, density: float) -> List[Update]:
    pool = _EdgePool(n, rng)
    target = max(1, int(density * pool.capacity))
    out: List[Update] = []
    while len(out) < length:
        m = len(pool)
        lean_insert = 0.7 if m < target else 0.3
        if m == 0 or (m < pool.capacity and rng.random() < lean_insert):
            e = pool.random_absent()
            pool.add(e)
            out.append(("+", *e))
        else:
            e = pool.random_present()
            pool.remove(e)
            out.append(("-", *e))
    return out


def _gen_sliding(n: int, length: int, rng, window: int) -> List[Update]:
    pool = _EdgePool(n, rng)
    if window < 1 or window >= pool.capacity:
        raise ValueError(f"window must lie in [1, {pool.capacity - 1}]")
    inserted: List[Tuple[int, int]] = []
    out: List[Update] = []
    while len(out) < length:
        e = pool.random_absent()
        pool.add(e)
        inserted.append(e)
        out.append(("+", *e))
        i = len(inserted) - 1
        if i >= window and len(out) < length:
            old = inserted[i - window]
            pool.remove(old)
            out.append(("-", *old))
    return out


def _gen_churn(n: int, length: int, rng, density: float, seed: int) -> List[Update]:
    proxy_cfg = Config(n=n, seed=(seed ^ PROXY_SEED_SALT) % 2**64)
    proxy = Engine(derive(proxy_cfg))
    pool = _EdgePool(n, rng)
    target = max(1, int(density * pool.capacity))
    out: List[Update] = []
    while len(out) < length:
        m = len(pool)
        lean_insert = 0.7 if m < target else 0.3
        if m == 0 or (m < pool.capacity and rng.random() < lean_insert):
            e = pool.random_absent()
            pool.add(e)
            op = "+"
        else:
            matched = proxy.graph.matched
            if matched and rng.random() < 0.8:
                eids = sorted(matched)
                rec = matched[eids[int(rng.integers(len(eids)))]]
                e = (rec.u, rec.v)
            else:
                e = pool.random_present()
            pool.remove(e)
            op = "-"
        out.append((op, *e))
        proxy.tick(op, *e)
    return out


def _gen_offline_stress(n: int, length: int, rng, density: float) -> List[Update]:
    pool = _EdgePool(n, rng)
    target = max(2, int(density * pool.capacity))
    out: List[Update] = []
    while len(out) < length:
        while len(pool) < target and len(out) < length:
            e = pool.random_absent()
            pool.add(e)
            out.append(("+", *e))
        burst = len(pool) // 2
        for _ in range(burst):
            if len(out) >= length:
                break
            e = pool.random_present()
            pool.remove(e)
            out.append(("-", *e))
    return out


def gen_sequence(
    model: str,
    n: int,
    length: int,
    seed: int,
    density: float = 0.5,
    window: Optional[int] = None,
    allow_long: bool = False,
) -> UpdateSequence:
    """Deterministic sequence for the given model and seed."""
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; choose from {', '.join(MODELS)}")
    if n < 2 or length < 0:
        raise ValueError("need n >= 2 and length >= 0")
    if not 0 < density <= 1:
        raise ValueError("density must lie in (0, 1]")
    if not allow_long and length > n * n:
        raise ValueError(f"length {length} exceeds n^2 = {n * n}; enable epoching to go longer")
    rng = np.random.Generator(np.random.Philox(seed))
    provenance: Dict[str, object] = {"model": model, "seed": seed, "density": density}
    if model == "random":
        updates = _gen_random(n, length, rng, density)
    elif model == "sliding-window":
        w = window if window is not None else max(1, int(density * n * (n - 1) // 2))
        provenance["window"] = w
        updates = _gen_sliding(n, length, rng, w)
    elif model == "churn-matched-proxy":
        updates = _gen_churn(n, length, rng, density, seed)
    else:
        updates = _gen_offline_stress(n, length, rng, density)
    seq = UpdateSequence(n, updates, provenance)
    seq.validate()
    return seq


# ---------------------------------------------------------------------- runs
@dataclass
class RunOptions:
    audit: str = "every"  # "none", "every", or an integer cadence as text
    full_audit_every: int = 0
    epoching: Optional[bool] = None
    combine: bool = False
    oracle_rho: float = 0.0
    approx_checkpoints: int = 0
    approx_tolerance: Fraction = Fraction(3, 10)
    abort_on_violation: bool = False
    metrics: Optional[IO[str]] = None
    log_intervals: bool = False
    c_am: int = 4
    c_log: int = 2


@dataclass
class RunResult:
    report: ViolationReport
    summary: Dict[str, object]
    digest: str
    checkpoints: List[Dict[str, object]]
    amm_samples: List[Tuple[int, int, int]]
    intervals: List[Tuple[str, int, Fraction, Fraction]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.report.empty() and not self.summary.get("overrun")


def _epoch_seed(base: int, epoch: int) -> int:
    if epoch == 0:
        return base
    state = np.random.SeedSequence([base, epoch]).generate_state(2, np.uint32)
    return int(state[0]) << 32 | int(state[1])


class _Side:
    """One engine plus its verification companions."""

    def __init__(self, params: Params, seed: int, oracle, audit: bool, full_every: int, log_intervals: bool) -> None:
        self.engine = Engine(params, seed=seed, oracle=oracle, log_intervals=log_intervals)
        self.shadow = BadEdgeShadow(params, self.engine.graph)
        self.engine.observers.append(self.shadow)
        self.auditor = IncrementalAuditor(self.engine, full_every) if audit else None
        self.max_tick = 0


class EpochState:
    """Two mirrored engines; the new one is filled while the old one serves output."""

    def __init__(self, params: Params, oracle, audit: bool, full_every: int, log_intervals: bool) -> None:
        self.params = params
        self.oracle = oracle
        self.audit = audit
        self.full_every = full_every
        self.log_intervals = log_intervals
        self.epoch = 0
        self.old = self._side(0)
        self.new = self._side(1)
        self.snapshot: List[Tuple[int, int]] = []
        self.cursor = 0
        self.edges: Set[Tuple[int, int]] = set()
        self.boundaries = 0
        self.retired_hits_cut = 0
        self.retired_max_tick = 0

    def _side(self, epoch: int) -> _Side:
        seed = _epoch_seed(self.params.config.seed, epoch)
        return _Side(self.params, seed, self.oracle, self.audit, self.full_every, self.log_intervals)

    def step(self, i: int, op: str, u: int, v: int) -> Tuple[object, List[object]]:
        key = edge_key(u, v)
        if op == "+":
            self.edges.add(key)
        else:
            self.edges.discard(key)
        main = self.old.engine.tick(op, u, v, now=i)
        extra = []
        new_engine = self.new.engine
        if op == "+" or new_engine.graph.has_edge(u, v):
            extra.append(new_engine.tick(op, u, v, now=i))
        copied = 0
        while copied < COPY_RATE and self.cursor < len(self.snapshot):
            e = self.snapshot[self.cursor]
            self.cursor += 1
            if e in self.edges and not new_engine.graph.has_edge(*e):
                extra.append(new_engine.tick("+", e[0], e[1], now=i))
                copied += 1
        return main, extra

    def at_boundary(self, i: int) -> bool:
        return (i + 1) % self.params.t_max == 0

    def swap(self) -> None:
        if set(self.new.engine.graph.edges()) != self.edges:
            raise AssertionError(f"epoch {self.epoch}: mirrored graph differs from the live graph")
        self.boundaries += 1
        self.retired_hits_cut += _hits_cut(self.old.engine)
        self.retired_max_tick = max(self.retired_max_tick, self.old.engine.stats.max_tick_steps)
        self.epoch += 1
        self.old = self.new
        self.new = self._side(self.epoch + 1)
        self.snapshot = sorted(self.edges)
        self.cursor = 0
        if len(self.snapshot) > COPY_RATE * self.params.t_max:
            raise AssertionError("copy rate too small to finish within one epoch")


def _hits_cut(engine: Engine) -> int:
    cut = engine.params.low_level_cut
    return sum(c for lvl, c in engine.stats.adversarial_hits.items() if lvl >= cut)


def _output_edges(side: _Side, fb: FallbackMatching, delta: int) -> List[Tuple[int, int]]:
    if select_output(fb.size, delta) == "use_mdelta":
        return fb.edges()
    return side.engine.graph.matching_edges()


def run(seq: UpdateSequence, config: Config, options: Optional[RunOptions] = None) -> RunResult:
    """Drive the engine over ``seq`` with the fallback, audits and optional extras."""
    opts = options or RunOptions()
    if seq.n != config.n:
        raise ValueError(f"sequence has n={seq.n} but config has n={config.n}")
    params = derive(config)
    epoching = config.epoching if opts.epoching is None else opts.epoching
    if not epoching and len(seq) > params.t_max:
        raise ValueError(f"{len(seq)} updates exceed t_max={params.t_max}; enable epoching")
    oracle = None
    if config.mode == "offline":
        oracle = OfflineOracle.from_updates(seq.updates, rho=opts.oracle_rho, seed=config.seed)
    cadence = 0
    if opts.audit == "every":
        cadence = 1
    elif opts.audit not in ("none", "", None):
        cadence = int(opts.audit)
        if cadence < 1:
            raise ValueError("audit cadence must be positive")
    state = EpochState(params, oracle, cadence > 0, opts.full_audit_every, opts.log_intervals)
    fb = FallbackMatching(config.n, params.delta_threshold)
    report = ViolationReport()
    ceiling = params.tick_ceiling()
    delta = params.delta_threshold
    cut = params.low_level_cut
    hasher = hashlib.sha256()
    rng = np.random.Generator(np.random.Philox(config.seed ^ 0xC0FFEE))
    checkpoint_at: Set[int] = set()
    if opts.approx_checkpoints and len(seq):
        count = min(opts.approx_checkpoints, len(seq))
        checkpoint_at = {int(x) for x in rng.choice(len(seq), size=count, replace=False)}
    checkpoints: List[Dict[str, object]] = []
    amm_samples: List[Tuple[int, int, int]] = []
    transform: Optional[Transform] = None
    window_checks = {"steps": 0, "max_replacements": 0, "bound_failures": 0, "invalid": 0, "windows": 0, "r_max": 0}
    max_queue_high = 0
    max_fallback_steps = 0
    overrun: Optional[Dict[str, object]] = None
    max_tick = 0
    processed = 0
    for i, (op, u, v) in enumerate(seq.updates):
        try:
            main, extra = state.step(i, op, u, v) if epoching else (state.old.engine.tick(op, u, v, now=i), [])
        except BudgetOverrun as exc:
            overrun = dict(exc.diagnostics, message=str(exc), index=i)
            report.add("budget", i, str(exc))
            break
        processed = i + 1
        fb_steps = fb.apply(op, u, v)
        max_fallback_steps = max(max_fallback_steps, fb_steps)
        for res in [main, *extra]:
            if res.steps_total > max_tick:
                max_tick = res.steps_total
            if res.steps_total > ceiling:
                report.add("budget", i, f"tick charged {res.steps_total} > {ceiling}")
        side = state.old
        eng = side.engine
        tick_report = ViolationReport()
        if cadence and (i + 1) % cadence == 0:
            tick_report.merge(side.auditor())
            if epoching:
                tick_report.merge(state.new.auditor())
            fallback_audit(fb, i, tick_report)
        report.merge(tick_report)
        queues = eng.queue_sizes()
        high = sum(queues[cut:])
        max_queue_high = max(max_queue_high, high)
        adv, alg = eng.temporarily_free()
        out_size = fb.size if select_output(fb.size, delta) == "use_mdelta" else eng.graph.matching_size()
        if transform is not None or opts.combine:
            deleted = [(u, v)] if op == "-" else []
            if transform is None or transform.phase == "done":
                if transform is not None:
                    window_checks["windows"] += 1
                    base = transform.output()
                else:
                    base = []
                transform = Transform(base, _output_edges(side, fb, delta), config.eps)
                window_checks["r_max"] = max(window_checks["r_max"], transform.r)
            changes = transform.step(deleted)
            window_checks["steps"] += 1
            window_checks["max_replacements"] = max(window_checks["max_replacements"], len(changes))
            if len(changes) > 3 * transform.r:
                report.add("budget", i, f"transform made {len(changes)} > 3r replacements")
            if not transform.size_bound_holds():
                window_checks["bound_failures"] += 1
            if not transform.valid(state.edges if epoching else None):
                window_checks["invalid"] += 1
        if out_size >= 50 or cadence:
            amm_samples.append((i, adv + alg, out_size))
        if i in checkpoint_at:
            graph_edges = eng.graph.edges()
            opt = max_matching_exact(config.n, graph_edges)
            entry = {"t": i, "opt": opt, "output": out_size, "rand": eng.graph.matching_size()}
            if transform is not None:
                entry["combined"] = len(transform.star)
            checkpoints.append(entry)
        record = {
            "t": i,
            "op": op,
            "steps_total": main.steps_total,
            "steps_by_scheduler": main.steps_by_scheduler,
            "|M|": out_size,
            "|M_rand|": eng.graph.matching_size(),
            "tf_adversary": adv,
            "tf_algorithm": alg,
            "per_level_queue_sizes": queues,
            "violations": tick_report.total,
        }
        line = json.dumps(record, sort_keys=True)
        hasher.update(line.encode())
        if opts.metrics is not None:
            opts.metrics.write(line + "\n")
        if opts.abort_on_violation and not report.empty():
            break
        if epoching and state.at_boundary(i):
            state.swap()
    final_engine = state.old.engine
    hasher.update(final_engine.graph.debug_dump().encode())
    if cadence:
        final = audit_invariants(final_engine)
        final.audits = 0
        report.merge(final)
    for side in (state.old, state.new) if epoching else (state.old,):
        report.merge(side.shadow.report)
    report.max_tick_steps = max_tick
    hits_cut = state.retired_hits_cut + _hits_cut(state.old.engine) + (_hits_cut(state.new.engine) if epoching else 0)
    summary: Dict[str, object] = {
        "n": config.n,
        "mode": config.mode,
        "updates": processed,
        "epoching": epoching,
        "epoch_boundaries": state.boundaries,
        "max_tick_steps": max_tick,
        "tick_ceiling": ceiling,
        "overrun": overrun,
        "hits_at_or_above_cut": hits_cut,
        "max_queue_at_or_above_cut": max_queue_high,
        "max_fallback_steps": max_fallback_steps,
        "fallback_step_bound": 3 * (delta + 1) + 2,
        "matching_size": final_engine.graph.matching_size(),
        "under_sampled_created": final_engine.graph.under_sampled_created,
        "engine": final_engine.stats.to_dict(),
        "bad_hits": state.old.shadow.bad_hits,
    }
    if opts.combine:
        summary["transform"] = window_checks
    intervals = list(state.old.engine.intervals) if opts.log_intervals and not epoching else []
    return RunResult(report, summary, hasher.hexdigest(), checkpoints, amm_samples, intervals)
