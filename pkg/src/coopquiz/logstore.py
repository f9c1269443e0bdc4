"""Durable gameplay records: one JSON object per line, append-only.

A GameRecord is one (player, question) play with everything the regression
needs: the condition combo, buzzing position as a fraction of question length
(1.0 when the player never buzzed), correctness, points, and the
competition-only statistics (active player count, top active player accuracy).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Callable, Iterable

from .interpretations import ConditionCombo

GROUPS = ("expert", "novice")


class StorageError(Exception):
    pass


class RecordError(Exception):
    """A record violates the gameplay-record invariants."""


@dataclass(frozen=True)
class GameRecord:
    player_id: str
    question_id: str
    group: str
    combo: ConditionCombo
    buzz_position_frac: float
    answered: bool
    correct: bool
    points: int
    active_players: int
    top_active_accuracy: float
    guess_shown: str
    timestamp: float

    @property
    def has_competition_stats(self) -> bool:
        """Active-player statistics only mean something for the expert group;
        novice records carry 0 sentinels."""
        return self.group == "expert"


def validate_record(record: GameRecord) -> None:
    if record.group not in GROUPS:
        raise RecordError(f"unknown group {record.group!r}")
    if record.correct and not record.answered:
        raise RecordError("a correct record must be an answered record")
    expected_points = 10 if record.correct else (-5 if record.answered else 0)
    if record.points != expected_points:
        raise RecordError(f"points {record.points} inconsistent with answered/correct flags")
    if not 0.0 <= record.buzz_position_frac <= 1.0:
        raise RecordError(f"buzz_position_frac {record.buzz_position_frac} outside [0, 1]")
    if not record.answered and record.buzz_position_frac != 1.0:
        raise RecordError("an unanswered record must carry the 1.0 buzz-position sentinel")
    if record.active_players < 1:
        raise RecordError("active_players must be at least 1")
    if not 0.0 <= record.top_active_accuracy <= 1.0:
        raise RecordError("top_active_accuracy outside [0, 1]")
    if record.group == "novice" and record.top_active_accuracy != 0.0:
        raise RecordError("novice records carry a 0 sentinel for top_active_accuracy")


def record_to_json(record: GameRecord) -> str:
    data = asdict(record)
    data["combo"] = record.combo.name
    return json.dumps(data)


def record_from_json(line: str) -> GameRecord:
    data = json.loads(line)
    data["combo"] = ConditionCombo.from_name(data["combo"])
    return GameRecord(**data)


class LogStore:
    """Append-only record store backed by one newline-delimited JSON file."""

    def __init__(self, path):
        self.path = path

    def append(self, record: GameRecord) -> None:
        validate_record(record)
        try:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(record_to_json(record) + "\n")
        except OSError as exc:
            raise StorageError(f"cannot append to {self.path}: {exc}") from exc

    def append_many(self, records: Iterable[GameRecord]) -> None:
        for record in records:
            self.append(record)

    def read_all(
        self,
        group: str | None = None,
        player: str | None = None,
        question: str | None = None,
        predicate: Callable[[GameRecord], bool] | None = None,
    ) -> list[GameRecord]:
        try:
            with open(self.path, encoding="utf-8") as fh:
                lines = fh.readlines()
        except OSError as exc:
            raise StorageError(f"cannot read {self.path}: {exc}") from exc
        records = []
        for line_number, line in enumerate(lines, 1):
            if not line.strip():
                continue
            try:
                record = record_from_json(line)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise StorageError(f"{self.path}: line {line_number}: corrupt record ({exc})") from exc
            if group is not None and record.group != group:
                continue
            if player is not None and record.player_id != player:
                continue
            if question is not None and record.question_id != question:
                continue
            if predicate is not None and not predicate(record):
                continue
            records.append(record)
        return records
