"""Balanced assignment of interpretation conditions to (player, question) pairs.

Each draw comes from an eight-class categorical distribution whose weight for
combination C is max(N - #(C,P), 0), where N is the per-combo exposure target
and #(C,P) counts how often player P has already seen C. That makes the
process sampling without replacement from 8N quota slots: after 8N draws every
combination has been seen exactly N times. If every weight hits zero the draw
falls back to uniform.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Iterable

from .interpretations import ALL_COMBOS, ConditionCombo


class DuplicateAssignmentError(Exception):
    """The same (player, question) pair was assigned twice."""


@dataclass
class ExposureHistory:
    """Per-player exposure counts, persisted between sessions."""

    n_target: int
    counts: dict[tuple[str, ConditionCombo], int] = field(default_factory=dict)
    assigned: set[tuple[str, str]] = field(default_factory=set)

    def count(self, player: str, combo: ConditionCombo) -> int:
        return self.counts.get((player, combo), 0)

    def player_counts(self, player: str) -> dict[ConditionCombo, int]:
        return {combo: self.count(player, combo) for combo in ALL_COMBOS}

    def questions_answered(self, player: str) -> int:
        return sum(self.player_counts(player).values())


def exposure_target(n_questions: int) -> int:
    """Per-combo target N for a question set split across the 8 combos."""
    return n_questions // len(ALL_COMBOS)


def sample_condition(
    history: ExposureHistory,
    player: str,
    rng: random.Random,
    question_id: str | None = None,
) -> ConditionCombo:
    """Draw a combo for one player and record the exposure."""
    if question_id is not None:
        key = (player, question_id)
        if key in history.assigned:
            raise DuplicateAssignmentError(f"player {player!r} already assigned question {question_id!r}")
        history.assigned.add(key)
    weights = [max(history.n_target - history.count(player, combo), 0) for combo in ALL_COMBOS]
    if sum(weights) == 0:
        weights = [1] * len(ALL_COMBOS)
    combo = rng.choices(ALL_COMBOS, weights=weights)[0]
    history.counts[(player, combo)] = history.count(player, combo) + 1
    return combo


def assign_for_room(
    history: ExposureHistory,
    players: Iterable[str],
    rng: random.Random,
    question_id: str | None = None,
) -> dict[str, ConditionCombo]:
    """One independent draw per player, in the given player order."""
    return {player: sample_condition(history, player, rng, question_id=question_id) for player in players}


def save_history(history: ExposureHistory, path) -> None:
    payload = {
        "n_target": history.n_target,
        "counts": [
            {"player": player, "combo": combo.name, "count": count}
            for (player, combo), count in sorted(
                history.counts.items(), key=lambda item: (item[0][0], item[0][1].name)
            )
        ],
        "assigned": sorted(list(pair) for pair in history.assigned),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)


def load_history(path) -> ExposureHistory:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    history = ExposureHistory(n_target=payload["n_target"])
    for row in payload["counts"]:
        history.counts[(row["player"], ConditionCombo.from_name(row["combo"]))] = row["count"]
    history.assigned = {(player, question) for player, question in payload["assigned"]}
    return history
