"""Run configuration and the frozen parameter object derived from it."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from functools import cached_property
from fractions import Fraction
from typing import Any, Dict, Tuple

MODES = ("offline", "oblivious")

_CONSTANT_FIELDS = ("c_gamma", "c_T", "c_Delta", "c_phi", "c_delta", "c_active")


class ConfigError(ValueError):
    pass


def ceil_log2(x: int) -> int:
    """Smallest integer k with 2**k >= x (0 for x <= 1)."""
    if x <= 1:
        return 0
    return (x - 1).bit_length()


def ceil_log_base(x: int, base: int) -> int:
    """Smallest integer k >= 0 with base**k >= x, computed exactly."""
    k = 0
    p = 1
    while p < x:
        p *= base
        k += 1
    return k


def ceil_div(a: int | Fraction, b: int | Fraction) -> int:
    q = Fraction(a) / Fraction(b)
    return math.ceil(q)


@dataclass(frozen=True)
class Config:
    n: int
    epsilon: float = 0.1
    c_gamma: int = 1
    c_T: int = 4
    c_Delta: int = 2
    c_phi: int = 8
    c_delta: int = 1
    c_active: int = 8
    mode: str = "oblivious"
    seed: int = 0
    epoching: bool = False

    def __post_init__(self) -> None:
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 2:
            raise ConfigError(f"n must be an integer >= 2, got {self.n!r}")
        eps = Fraction(str(self.epsilon))
        if not (0 < eps < Fraction(1, 2)):
            raise ConfigError(f"epsilon must lie in (0, 1/2), got {self.epsilon!r}")
        for name in _CONSTANT_FIELDS:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        if not (0 <= self.seed < 2**64):
            raise ConfigError("seed must fit in 64 unsigned bits")
        if not isinstance(self.epoching, bool):
            raise ConfigError("epoching must be a boolean")

    @property
    def eps(self) -> Fraction:
        """Epsilon as an exact rational (parsed from its decimal text)."""
        return Fraction(str(self.epsilon))

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def replace(self, **changes: Any) -> "Config":
        data = self.to_dict()
        data.update(changes)
        return Config(**data)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Config":
        allowed = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - allowed)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        if "n" not in data:
            raise ConfigError("config is missing required key 'n'")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "Config":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config JSON must be an object")
        return cls.from_dict(data)


@dataclass(frozen=True)
class Params:
    config: Config
    n: int
    log_n: int
    gamma: int
    L_max: int
    T: Tuple[int, ...]
    Delta: int
    DeltaPrime: int
    delta_threshold: int
    low_level_cut: int
    t_max: int
    active_cap: int
    gamma_pow: Tuple[int, ...] = field(repr=False)
    update_cap: int = 0

    @property
    def epsilon(self) -> Fraction:
        return self.config.eps

    @property
    def levels(self) -> range:
        return range(self.L_max + 1)

    @cached_property
    def _sample_lo(self) -> Tuple[int, ...]:
        return tuple(math.ceil((1 - self.epsilon) * g) for g in self.gamma_pow)

    @cached_property
    def _sample_floor(self) -> Tuple[int, ...]:
        return tuple(math.floor((1 - 2 * self.epsilon) * g) for g in self.gamma_pow)

    @cached_property
    def _bad_rank(self) -> Tuple[Fraction, ...]:
        return tuple(2 * self.epsilon * g for g in self.gamma_pow)

    def sample_lo(self, level: int) -> int:
        return self._sample_lo[level]

    def sample_floor(self, level: int) -> int:
        return self._sample_floor[level]

    def phi_cap(self, level: int) -> int:
        return self.config.c_phi * self.gamma_pow[level] * self.log_n ** 2

    def bad_rank_limit(self, level: int) -> Fraction:
        """Deletion ranks strictly below this value (after 1) mark a sample edge as bad."""
        return self._bad_rank[level]

    def tick_ceiling(self) -> int:
        """Deterministic cap on steps charged in one tick."""
        levels = self.L_max + 1
        return 3 * self.DeltaPrime * levels + self.Delta * levels + self.update_cap

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "log_n": self.log_n,
            "gamma": self.gamma,
            "L_max": self.L_max,
            "T": list(self.T),
            "Delta": self.Delta,
            "DeltaPrime": self.DeltaPrime,
            "delta_threshold": self.delta_threshold,
            "low_level_cut": self.low_level_cut,
            "t_max": self.t_max,
            "active_cap": self.active_cap,
            "update_cap": self.update_cap,
            "sample_lo": [self.sample_lo(l) for l in self.levels],
            "sample_floor": [self.sample_floor(l) for l in self.levels],
            "phi_cap": [self.phi_cap(l) for l in self.levels],
        }


def derive(config: Config) -> Params:
    n = config.n
    eps = config.eps
    log_n = max(1, ceil_log2(n))
    gamma = max(2, config.c_gamma * log_n)
    L_max = ceil_log_base(n - 1, gamma)
    gamma_pow = tuple(gamma ** l for l in range(L_max + 1))
    T = tuple(config.c_T * g * log_n ** 4 for g in gamma_pow)
    Delta = ceil_div(config.c_Delta * log_n ** 5, eps)
    DeltaPrime = gamma * Delta
    delta_threshold = min(n, ceil_div(config.c_delta * log_n ** 5, eps ** 4))
    cut = L_max + 1
    for level, slot in enumerate(T):
        if slot >= Delta:
            cut = level
            break
    return Params(
        config=config,
        n=n,
        log_n=log_n,
        gamma=gamma,
        L_max=L_max,
        T=T,
        Delta=Delta,
        DeltaPrime=DeltaPrime,
        delta_threshold=delta_threshold,
        low_level_cut=cut,
        t_max=n * n,
        active_cap=config.c_active * (L_max + 1),
        gamma_pow=gamma_pow,
        update_cap=T[0],
    )
