"""Partial-scan matching that stays maximal while it is smaller than delta."""

from __future__ import annotations

from typing import Dict, List, Optional, Set, Tuple

from .graph_core import GraphError


def select_output(size_mdelta: int, delta: int) -> str:
    return "use_mdelta" if size_mdelta < delta else "use_mrand"


class FallbackMatching:
    def __init__(self, n: int, delta: int) -> None:
        self.n = n
        self.delta = delta
        self.adj: List[Set[int]] = [set() for _ in range(n)]
        self.mate: List[Optional[int]] = [None] * n
        self.size = 0
        # free vertices whose degree is at least delta
        self.heavy_free: Set[int] = set()
        self.last_steps = 0

    def _refresh(self, x: int) -> None:
        if self.mate[x] is None and len(self.adj[x]) >= self.delta:
            self.heavy_free.add(x)
        else:
            self.heavy_free.discard(x)

    def _match(self, a: int, b: int) -> None:
        self.mate[a] = b
        self.mate[b] = a
        self.size += 1
        self._refresh(a)
        self._refresh(b)

    def _scan(self, x: int) -> int:
        """Look at up to delta neighbors of free ``x`` in ascending id; match the first free one."""
        steps = 0
        for y in sorted(self.adj[x])[: self.delta]:
            steps += 1
            if self.mate[y] is None:
                self._match(x, y)
                break
        return steps + 1

    def insert(self, u: int, v: int) -> int:
        if v in self.adj[u]:
            raise GraphError(f"duplicate edge ({u}, {v})")
        self.adj[u].add(v)
        self.adj[v].add(u)
        if self.mate[u] is None and self.mate[v] is None:
            self._match(u, v)
        else:
            self._refresh(u)
            self._refresh(v)
        self.last_steps = 3
        return self.last_steps

    def delete(self, u: int, v: int) -> int:
        if v not in self.adj[u]:
            raise GraphError(f"edge ({u}, {v}) absent")
        self.adj[u].discard(v)
        self.adj[v].discard(u)
        steps = 2
        was_matched = self.mate[u] == v
        if was_matched:
            self.mate[u] = self.mate[v] = None
            self.size -= 1
        self._refresh(u)
        self._refresh(v)
        # free endpoints are rescanned even after an unmatched deletion
        for x in (u, v):
            if self.mate[x] is None:
                steps += self._scan(x)
        if was_matched and self.heavy_free:
            steps += self._scan(min(self.heavy_free))
        self.last_steps = steps
        return steps

    def apply(self, op: str, u: int, v: int) -> int:
        return self.insert(u, v) if op == "+" else self.delete(u, v)

    def edges(self) -> List[Tuple[int, int]]:
        return sorted((x, y) for x, y in enumerate(self.mate) if y is not None and x < y)

    def free_free_edges(self) -> List[Tuple[int, int]]:
        out = []
        for x in range(self.n):
            if self.mate[x] is None:
                for y in self.adj[x]:
                    if x < y and self.mate[y] is None:
                        out.append((x, y))
        return out
