"""Balls-and-bins games and the shuffling game, as standalone simulators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np

VARIANTS = ("add-remove-largest", "remove-remove-smallest", "prefilled-add")
STRATEGIES = ("concentrate", "round-robin", "random", "anti-greedy")
MAL_SCHEDULES = ("eager", "drain", "burst-late", "sawtooth", "idle")

E = Fraction(math.e)  # the double nearest e lies just below e, so this bound is conservative


def bins_threshold(N: int, k: int, b: int, k_prime: int = 0) -> bool:
    """Whether Player I is guaranteed to win: b < (k - k') / (ln N + 1)."""
    if N < 1 or k <= k_prime or k_prime < 0 or b < 0:
        raise ValueError("need N >= 1, k > k' >= 0, b >= 0")
    return b < (k - k_prime) / (math.log(N) + 1)


def largest_safe_b(N: int, k: int, k_prime: int = 0) -> int:
    """Largest integer b strictly below the winning threshold."""
    limit = (k - k_prime) / (math.log(N) + 1)
    b = math.ceil(limit) - 1
    while b >= 0 and not bins_threshold(N, k, b, k_prime):
        b -= 1
    return max(b, 0)


@dataclass
class BinsGame:
    N: int
    k: int
    b: int
    variant: str = "add-remove-largest"
    k_prime: int = 0
    strategy: str = "concentrate"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.N < 1 or self.b < 0 or self.k <= self.k_prime or self.k_prime < 0:
            raise ValueError("need N >= 1, b >= 0 and k > k' >= 0")


@dataclass
class BinsResult:
    winner: str
    rounds: int
    claim_violations: int
    trace: List[Tuple[int, List[int]]] = field(default_factory=list)


def _harmonic_floor(count: int, b: int) -> np.ndarray:
    """floor(b * H_i) for i = 0 .. count-1, computed exactly."""
    out = np.zeros(max(count, 1), dtype=np.int64)
    h = Fraction(0)
    for i in range(1, count):
        h += Fraction(1, i)
        out[i] = math.floor(b * h)
    return out


def _water_fill(values: np.ndarray, b: int) -> np.ndarray:
    """Add ``b`` units one at a time to the first minimal entry; returns the increments."""
    order = np.argsort(values, kind="stable")
    srt = values[order]
    m = srt.size
    # cost to raise the first j entries up to srt[j]
    prefix = np.cumsum(srt)
    need = srt * np.arange(1, m + 1) - prefix
    j = int(np.searchsorted(need, b, side="right"))  # entries 0..j-1 take part
    spent = int(need[j - 1])
    level = int(srt[j - 1]) + (b - spent) // j
    extra = (b - spent) % j
    inc = np.zeros_like(values)
    raised = np.maximum(level - srt[:j], 0)
    inc[order[:j]] = raised
    final = values + inc
    # leftover units go to the lowest-index entries sitting at the level
    at_level = np.flatnonzero(final == level)
    inc[at_level[:extra]] += 1
    return inc


def _cyclic(count: int, start: int, b: int) -> np.ndarray:
    """Deal ``b`` units round-robin over ``count`` slots starting at position ``start``."""
    out = np.full(count, b // count, dtype=np.int64)
    rem = b % count
    if rem:
        pos = (start + np.arange(rem)) % count
        out[pos] += 1
    return out


def _place_adds(sizes: np.ndarray, alive: np.ndarray, b: int, strategy: str, rng, state: Dict) -> np.ndarray:
    """Distribution of b added balls over surviving bins (Player II, adding variants)."""
    idx = np.flatnonzero(alive)
    add = np.zeros_like(sizes)
    if b == 0 or idx.size == 0:
        return add
    if strategy == "concentrate":
        add[idx[np.argmax(sizes[idx])]] = b
    elif strategy == "round-robin":
        start = int(np.searchsorted(idx, state.get("ptr", 0))) % idx.size
        add[idx] = _cyclic(idx.size, start, b)
        state["ptr"] = int(idx[(start + b - 1) % idx.size]) + 1
    elif strategy == "random":
        np.add.at(add, idx[rng.integers(0, idx.size, size=b)], 1)
    else:
        add[idx] = _water_fill(sizes[idx], b)
    return add


def _place_removals(sizes: np.ndarray, alive: np.ndarray, b: int, strategy: str, rng, state: Dict) -> np.ndarray:
    """Mirror of _place_adds for the removing variant (never below zero)."""
    idx = np.flatnonzero(alive)
    take = np.zeros_like(sizes)
    if b == 0 or idx.size == 0:
        return take
    cur = sizes[idx]
    if strategy == "concentrate":
        # empty the smallest bins first
        left = b
        for j in np.argsort(cur, kind="stable"):
            if left == 0:
                break
            t = min(left, int(cur[j]))
            take[idx[j]] = t
            left -= t
    elif strategy == "round-robin":
        start = int(np.searchsorted(idx, state.get("ptr", 0))) % idx.size
        take[idx] = np.minimum(_cyclic(idx.size, start, b), cur)
        state["ptr"] = int(idx[(start + b - 1) % idx.size]) + 1
    elif strategy == "random":
        np.add.at(take, idx[rng.integers(0, idx.size, size=b)], 1)
        take[idx] = np.minimum(take[idx], cur)
    else:
        # keep the bins level by shaving the largest ones
        take[idx] = _water_fill(-cur, min(b, int(cur.sum())))
    return take


def bins_run(game: BinsGame, max_rounds: Optional[int] = None, keep_trace: bool = False) -> BinsResult:
    """Play to termination; audits the per-removal inequality chain at every removal."""
    N, k, b = game.N, game.k, game.b
    rng = np.random.Generator(np.random.Philox(game.seed))
    state: Dict = {}
    removing = game.variant == "remove-remove-smallest"
    if game.variant == "add-remove-largest":
        sizes = np.zeros(N, dtype=np.int64)
    elif game.variant == "prefilled-add":
        sizes = np.full(N, game.k_prime, dtype=np.int64)
    else:
        sizes = np.full(N, k, dtype=np.int64)
    alive = np.ones(N, dtype=bool)
    hfloor = _harmonic_floor(N + 1, b)
    removed: List[int] = []
    violations = 0
    trace: List[Tuple[int, List[int]]] = []
    limit = max_rounds if max_rounds is not None else N + 1
    rounds = 0
    while rounds < limit:
        rounds += 1
        live = np.flatnonzero(alive)
        if removing:
            pick = live[np.argmin(sizes[live])]
        else:
            pick = live[np.argmax(sizes[live])]
        S = int(sizes[pick])
        alive[pick] = False
        # i-th from last removal (this one is i = 1) against S -/+ b * H_{i-1}
        if removed:
            earlier = np.array(removed[::-1], dtype=np.int64)
            gaps = (earlier - S) if removing else (S - earlier)
            violations += int(np.count_nonzero(gaps > hfloor[1 : len(removed) + 1]))
        removed.append(S)
        if not alive.any():
            if keep_trace:
                trace.append((rounds, []))
            return BinsResult("I", rounds, violations, trace)
        if removing:
            sizes -= _place_removals(sizes, alive, b, game.strategy, rng, state)
            crossed = bool(np.any(sizes[alive] <= game.k_prime))
        else:
            sizes += _place_adds(sizes, alive, b, game.strategy, rng, state)
            crossed = bool(np.any(sizes[alive] >= k))
        if keep_trace:
            trace.append((rounds, [int(x) for x in sizes[alive]]))
        if crossed:
            return BinsResult("II", rounds, violations, trace)
    return BinsResult("inconclusive", rounds, violations, trace)


# ------------------------------------------------------------- shuffling game
@dataclass
class ShuffleGame:
    eps_hat: Fraction
    ratio: int
    schedule: str = "eager"
    variant: str = "deterministic"
    mal_enabled: bool = True
    bad_probability: Optional[Fraction] = None
    seed: int = 0
    k_min: int = 200

    def __post_init__(self) -> None:
        self.eps_hat = Fraction(self.eps_hat)
        if not (0 < self.eps_hat < 1):
            raise ValueError("eps_hat must lie in (0, 1)")
        if self.ratio < 1:
            raise ValueError("speed ratio must be >= 1")
        if self.schedule not in MAL_SCHEDULES:
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.variant not in ("deterministic", "randomized"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.bad_probability is None:
            self.bad_probability = self.eps_hat / 2
        self.bad_probability = Fraction(self.bad_probability)
        if self.bad_probability > self.eps_hat / 2:
            raise ValueError("adder bad probability must be <= eps_hat / 2")

    @property
    def bound(self) -> Fraction:
        return E * self.eps_hat


@dataclass
class ShuffleResult:
    max_fraction: Fraction
    bound: Fraction
    steps: int
    trace: List[Tuple[int, float]] = field(default_factory=list)

    @property
    def within_bound(self) -> bool:
        return self.max_fraction <= self.bound


def _schedule(name: str, horizon: int) -> Iterator[str]:
    """Intended moves: 'a' add, 's' shuffle-delete, 'm' malicious delete."""
    if name == "eager":
        grow = horizon // 3
        for i in range(horizon):
            if i < grow:
                yield "a" if i % 4 else "m"
            else:
                yield "m" if i % 2 else "s"
    elif name == "drain":
        grow = horizon // 2
        for i in range(horizon):
            yield "a" if i < grow else "m"
    elif name == "burst-late":
        grow = (3 * horizon) // 4
        for i in range(horizon):
            if i < grow:
                yield "a" if i % 3 else "s"
            else:
                yield "m"
    elif name == "sawtooth":
        period = max(8, horizon // 6)
        for i in range(horizon):
            phase = i % period
            yield "a" if phase < period // 2 else "m"
    else:
        for i in range(horizon):
            yield "a" if i < horizon // 2 else "s"


def shuffle_run(game: ShuffleGame, horizon: int, keep_trace: bool = False) -> ShuffleResult:
    """Play ``horizon`` moves; returns the largest bad fraction observed.

    Malicious deletions only fire once ``ratio`` shuffle deletions have happened
    since the previous one; a refused malicious move becomes a shuffle deletion.
    The randomized variant only scores states with at least ``k_min`` edges.
    """
    eps2 = game.bad_probability
    ratio = game.ratio
    rng = np.random.Generator(np.random.Philox(game.seed))
    exact = game.variant == "deterministic"
    good: Fraction | int = Fraction(0) if exact else 0
    bad: Fraction | int = Fraction(0) if exact else 0
    since_mal = 0
    best = Fraction(0)
    trace: List[Tuple[int, float]] = []
    p_bad = float(eps2)
    for step, move in enumerate(_schedule(game.schedule, horizon)):
        total = good + bad
        if move == "m" and not (game.mal_enabled and since_mal >= ratio and good >= 1):
            move = "s"
        if move == "s" and total < 1:
            move = "a"
        if move == "a":
            if exact:
                bad += eps2
                good += 1 - eps2
            elif rng.random() < p_bad:
                bad += 1
            else:
                good += 1
        elif move == "s":
            if exact:
                frac = bad / total
                bad -= frac
                good -= 1 - frac
            elif rng.random() * total < bad:
                bad -= 1
            else:
                good -= 1
            since_mal += 1
        else:
            good -= 1
            since_mal = 0
        total = good + bad
        if total > 0 and (exact or total >= game.k_min):
            frac = Fraction(bad) / Fraction(total)
            if frac > best:
                best = frac
            if keep_trace:
                trace.append((step, float(frac)))
    bound = game.bound
    if not exact:
        e_eps = float(bound)
        bound = bound + Fraction(3 * math.sqrt(e_eps * (1 - e_eps) / game.k_min))
    return ShuffleResult(best, bound, horizon, trace)
