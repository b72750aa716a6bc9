"""Shared notes the acceptance tests leave for the end-of-session summary."""

from __future__ import annotations

from typing import Dict, List

TITLES: Dict[int, str] = {
    1: "structural invariants, audit every tick",
    2: "worst-case step budget per tick",
    3: "offline mode: zero high-level hits, empty queues, replay",
    4: "almost-maximality in oblivious mode",
    5: "approximation ratio at exact checkpoints",
    6: "fallback maximality below delta",
    7: "balls-and-bins games",
    8: "shuffling game",
    9: "transform component and combined output",
    10: "oracle cross-checks",
}

NOTES: Dict[int, List[str]] = {k: [] for k in TITLES}


def note(criterion: int, text: str) -> None:
    NOTES[criterion].append(text)
