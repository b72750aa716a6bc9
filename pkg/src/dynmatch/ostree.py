"""Order-statistic set over integer keys (treap with subtree counts)."""

from __future__ import annotations

import random
from typing import Iterable, Iterator, List, Optional


class _Node:
    __slots__ = ("key", "prio", "size", "left", "right")

    def __init__(self, key: int, prio: int) -> None:
        self.key = key
        self.prio = prio
        self.size = 1
        self.left: Optional[_Node] = None
        self.right: Optional[_Node] = None


def _size(node: Optional[_Node]) -> int:
    return node.size if node is not None else 0


def _pull(node: _Node) -> None:
    node.size = 1 + _size(node.left) + _size(node.right)


class OrderStatSet:
    """Set of distinct integers supporting insert, delete and select-kth.

    Priorities come from a private PRNG seeded at construction, so the tree
    shape (and therefore the step counts reported by ``last_touched``) is a
    deterministic function of the operation history.
    """

    def __init__(self, keys: Iterable[int] = (), seed: int = 0x5EED) -> None:
        self._root: Optional[_Node] = None
        self._prio = random.Random(seed)
        self.last_touched = 0
        for key in keys:
            self.insert(key)

    @classmethod
    def from_sorted(cls, keys: List[int], seed: int = 0x5EED) -> "OrderStatSet":
        """Build a balanced tree from strictly increasing keys in linear time."""
        tree = cls(seed=seed)
        top = 1 << 40

        def build(lo: int, hi: int, depth: int) -> Optional[_Node]:
            if lo >= hi:
                return None
            mid = (lo + hi) // 2
            node = _Node(keys[mid], top - (depth << 30) + tree._prio.getrandbits(20))
            node.left = build(lo, mid, depth + 1)
            node.right = build(mid + 1, hi, depth + 1)
            _pull(node)
            return node

        for a, b in zip(keys, keys[1:]):
            if a >= b:
                raise ValueError("keys must be strictly increasing")
        tree._root = build(0, len(keys), 0)
        return tree

    def __len__(self) -> int:
        return _size(self._root)

    def __contains__(self, key: int) -> bool:
        node = self._root
        while node is not None:
            if key == node.key:
                return True
            node = node.left if key < node.key else node.right
        return False

    def __iter__(self) -> Iterator[int]:
        stack: List[_Node] = []
        node = self._root
        while stack or node is not None:
            while node is not None:
                stack.append(node)
                node = node.left
            node = stack.pop()
            yield node.key
            node = node.right

    def _split(self, node: Optional[_Node], key: int):
        # left part holds keys < key
        if node is None:
            return None, None
        self.last_touched += 1
        if node.key < key:
            l, r = self._split(node.right, key)
            node.right = l
            _pull(node)
            return node, r
        l, r = self._split(node.left, key)
        node.left = r
        _pull(node)
        return l, node

    def _merge(self, a: Optional[_Node], b: Optional[_Node]) -> Optional[_Node]:
        if a is None:
            return b
        if b is None:
            return a
        self.last_touched += 1
        if a.prio > b.prio:
            a.right = self._merge(a.right, b)
            _pull(a)
            return a
        b.left = self._merge(a, b.left)
        _pull(b)
        return b

    def insert(self, key: int) -> bool:
        self.last_touched = 0
        if key in self:
            return False
        left, right = self._split(self._root, key)
        node = _Node(key, self._prio.getrandbits(30))
        self._root = self._merge(self._merge(left, node), right)
        return True

    def delete(self, key: int) -> bool:
        self.last_touched = 0
        left, right = self._split(self._root, key)
        mid, right = self._split(right, key + 1)
        self._root = self._merge(left, right)
        return mid is not None

    def select(self, k: int) -> int:
        """Return the k-th smallest key, 1-indexed."""
        if not 1 <= k <= len(self):
            raise IndexError(f"rank {k} outside [1, {len(self)}]")
        self.last_touched = 0
        node = self._root
        while node is not None:
            self.last_touched += 1
            left = _size(node.left)
            if k == left + 1:
                return node.key
            if k <= left:
                node = node.left
            else:
                k -= left + 1
                node = node.right
        raise AssertionError("subtree counts are inconsistent")

    def rank(self, key: int) -> int:
        """Number of stored keys strictly smaller than ``key``."""
        node = self._root
        below = 0
        while node is not None:
            if key <= node.key:
                node = node.left
            else:
                below += _size(node.left) + 1
                node = node.right
        return below

    def depth(self) -> int:
        def walk(node: Optional[_Node]) -> int:
            if node is None:
                return 0
            return 1 + max(walk(node.left), walk(node.right))

        return walk(self._root)
