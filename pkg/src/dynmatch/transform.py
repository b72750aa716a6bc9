"""Bounded-replacement morphing of a source matching into a target matching."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Set, Tuple

from .graph_core import edge_key

Edge = Tuple[int, int]

C_W = Fraction(1, 4)
C_R = 4


class TransformError(ValueError):
    pass


def _mates(edges: Iterable[Edge], name: str) -> Dict[int, int]:
    mate: Dict[int, int] = {}
    for a, b in edges:
        if a == b or a in mate or b in mate:
            raise TransformError(f"{name} is not a matching at ({a}, {b})")
        mate[a] = b
        mate[b] = a
    return mate


def riskyedge_bound(mstar: Iterable[Edge], mprime: Iterable[Edge]) -> bool:
    """If every edge of M' outside M* touches two M* edges, then |M*| >= |M'|."""
    star = {edge_key(*e) for e in mstar}
    prime = {edge_key(*e) for e in mprime}
    mate = _mates(star, "M*")
    _mates(prime, "M'")
    for a, b in prime - star:
        if a not in mate or b not in mate:
            return True
    return len(star) >= len(prime)


class Transform:
    """Morph ``M*`` (starting at ``M``) into ``M'`` within a window of W updates."""

    def __init__(self, old: Iterable[Edge], target: Iterable[Edge], epsilon: Fraction) -> None:
        self.old: Set[Edge] = {edge_key(*e) for e in old}
        self.target: Set[Edge] = {edge_key(*e) for e in target}
        _mates(self.old, "M")
        self.target_mate = _mates(self.target, "M'")
        self.star: Set[Edge] = set(self.old)
        self.star_mate: Dict[int, int] = _mates(self.star, "M*")
        eps = Fraction(epsilon)
        self.W = max(1, math.ceil(C_W * eps * len(self.old)))
        self.half = Fraction(self.W, 2)
        self.r = max(1, math.ceil(C_R * (len(self.old) + len(self.target)) / self.half))
        self.phase = "classify"
        self._queue: List[Edge] = sorted(self.target)
        self._cursor = 0
        self.safe: Set[Edge] = set()
        self.risky: Set[Edge] = set()
        self.steps = 0
        self.max_replacements = 0

    # classification of a target edge by the number of M* edges it touches
    def _conflicts(self, e: Edge) -> int:
        a, b = e
        return (a in self.star_mate) + (b in self.star_mate)

    def _classify(self, e: Edge) -> None:
        self.safe.discard(e)
        self.risky.discard(e)
        if e not in self.target or e in self.star:
            return
        if self._conflicts(e) <= 1:
            self.safe.add(e)
        else:
            self.risky.add(e)

    def _reclassify_at(self, x: int) -> None:
        if self.phase == "classify" and self._cursor < len(self._queue):
            # edges not reached by the cursor are classified when it gets there
            y = self.target_mate.get(x)
            if y is None or edge_key(x, y) >= self._queue[self._cursor]:
                return
        y = self.target_mate.get(x)
        if y is not None:
            self._classify(edge_key(x, y))

    def _remove_star(self, e: Edge) -> None:
        self.star.discard(e)
        a, b = e
        del self.star_mate[a], self.star_mate[b]
        self._reclassify_at(a)
        self._reclassify_at(b)

    def _add_star(self, e: Edge) -> List[Edge]:
        a, b = e
        removed = []
        for x in (a, b):
            y = self.star_mate.get(x)
            if y is not None:
                gone = edge_key(x, y)
                self._remove_star(gone)
                removed.append(gone)
        self.star.add(e)
        self.star_mate[a] = b
        self.star_mate[b] = a
        self._classify(e)
        self._reclassify_at(a)
        self._reclassify_at(b)
        return removed

    def delete_edge(self, u: int, v: int) -> None:
        e = edge_key(u, v)
        self.old.discard(e)
        if e in self.star:
            self._remove_star(e)
        if e in self.target:
            self.target.discard(e)
            del self.target_mate[e[0]], self.target_mate[e[1]]
            self.safe.discard(e)
            self.risky.discard(e)

    def step(self, deleted: Iterable[Edge] = ()) -> List[Tuple[str, Edge]]:
        """Advance one update; returns the replacements made to M*."""
        for u, v in deleted:
            self.delete_edge(u, v)
        changes: List[Tuple[str, Edge]] = []
        self.steps += 1
        if self.phase == "classify":
            end = min(len(self._queue), self._cursor + self.r)
            for e in self._queue[self._cursor:end]:
                self._classify(e)
            self._cursor = end
            if self._cursor >= len(self._queue):
                self.phase = "morph"
        if self.phase == "morph":
            added = 0
            while added < self.r and (self.safe or self.risky):
                e = min(self.safe) if self.safe else min(self.risky)
                for gone in self._add_star(e):
                    changes.append(("-", gone))
                changes.append(("+", e))
                added += 1
        if self.phase != "classify" and not (self.target - self.star):
            self.phase = "done"
        self.max_replacements = max(self.max_replacements, len(changes))
        return changes

    def size_bound_holds(self) -> bool:
        """|M*| >= min(|M|, |M'|) - W/2 - 1 on the current (shrunk) matchings."""
        return len(self.star) >= min(len(self.old), len(self.target)) - self.half - 1

    def valid(self, graph_edges: Optional[Set[Edge]] = None) -> bool:
        seen: Set[int] = set()
        for a, b in self.star:
            if a in seen or b in seen:
                return False
            if graph_edges is not None and (a, b) not in graph_edges:
                return False
            seen.add(a)
            seen.add(b)
        return True

    def output(self) -> List[Edge]:
        return sorted(self.star)
