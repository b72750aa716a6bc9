"""Future-deletion lookups over a scripted update sequence."""

from __future__ import annotations

import bisect
import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .graph_core import edge_key

INF = math.inf

Update = Tuple[str, int, int]


class SequenceError(ValueError):
    def __init__(self, index: int, message: str) -> None:
        super().__init__(f"update {index}: {message}")
        self.index = index


class DeletionSchedule:
    """Per vertex pair, the ordered occurrence intervals ``(inserted_at, deleted_at)``.

    An interval still open at the end of the sequence has ``deleted_at = inf``.
    """

    def __init__(self, intervals: Dict[Tuple[int, int], List[Tuple[int, float]]]) -> None:
        self.intervals = intervals
        self._starts = {k: [a for a, _ in v] for k, v in intervals.items()}

    @classmethod
    def build(cls, updates: Sequence[Update]) -> "DeletionSchedule":
        open_at: Dict[Tuple[int, int], int] = {}
        intervals: Dict[Tuple[int, int], List[Tuple[int, float]]] = {}
        for i, (op, u, v) in enumerate(updates):
            if u == v:
                raise SequenceError(i, f"self-loop ({u}, {v})")
            key = edge_key(u, v)
            if op == "+":
                if key in open_at:
                    raise SequenceError(i, f"edge {key} inserted twice")
                open_at[key] = i
            elif op == "-":
                if key not in open_at:
                    raise SequenceError(i, f"edge {key} deleted while absent")
                intervals.setdefault(key, []).append((open_at.pop(key), i))
            else:
                raise SequenceError(i, f"unknown operation {op!r}")
        for key, start in open_at.items():
            intervals.setdefault(key, []).append((start, INF))
        for lst in intervals.values():
            lst.sort()
        return cls(intervals)

    def next_deletion(self, u: int, v: int, now: int) -> float:
        key = edge_key(u, v)
        starts = self._starts.get(key)
        if starts:
            i = bisect.bisect_right(starts, now) - 1
            if i >= 0:
                start, end = self.intervals[key][i]
                if start <= now < end:
                    return end
        raise KeyError(f"edge {key} not present at update {now}")


class OfflineOracle:
    """Deleted-last mate selection, optionally restricted to a random (1 - rho) share."""

    def __init__(self, schedule: DeletionSchedule, rho: float = 0.0, seed: int = 0) -> None:
        if not 0.0 <= rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")
        self.schedule = schedule
        self.rho = rho
        self._rng = np.random.Generator(np.random.Philox(seed)) if rho > 0 else None

    @classmethod
    def from_updates(cls, updates: Sequence[Update], rho: float = 0.0, seed: int = 0) -> "OfflineOracle":
        return cls(DeletionSchedule.build(updates), rho, seed)

    def next_deletion(self, u: int, v: int, now: int) -> float:
        return self.schedule.next_deletion(u, v, now)

    def pick_latest_deleted(self, v: int, candidates: Iterable[int], now: int) -> int:
        pool = sorted(candidates)
        if not pool:
            raise ValueError("no candidates")
        if self._rng is not None and len(pool) > 1:
            keep = max(1, math.ceil((1 - self.rho) * len(pool)))
            chosen = self._rng.choice(len(pool), size=keep, replace=False)
            pool = sorted(pool[i] for i in chosen)
        best: Optional[int] = None
        best_time = -1.0
        for w in pool:
            when = self.schedule.next_deletion(v, w, now)
            if when > best_time:
                best, best_time = w, when
        return best
