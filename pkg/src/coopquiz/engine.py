"""Quizbowl game state machine.

Words are revealed one at a time on a logical millisecond clock supplied by
the caller (`at` arguments); the engine never reads wall time. The guesser
refreshes after every 4th word and at the final word. A buzz freezes the
readout and opens an 8-second answer window; a correct answer scores +10 and
ends the question, a wrong answer scores -5 and locks that player out. After
the final word an 8-second grace window lets remaining players buzz; it is
paused while someone holds the floor. Every mutation appends a GameEvent, and
a finished game can be reconstructed from its event log alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence

from .corpus import Question
from .guesser import GuessState, empty_guess_state
from .interpretations import ConditionCombo

ANSWER_WINDOW_MS = 8000
GRACE_WINDOW_MS = 8000
REFRESH_EVERY_WORDS = 4

LOG_SCHEMA = "coopquiz-game-log/1"


class GameMode(str, Enum):
    NOVICE_SOLO = "novice_solo"
    EXPERT_COMPETITIVE = "expert_competitive"


class Phase(str, Enum):
    READING = "reading"
    BUZZED = "buzzed"
    FINISHED = "finished"


class EventKind(str, Enum):
    REVEAL_WORD = "reveal_word"
    REFRESH_GUESSES = "refresh_guesses"
    BUZZ = "buzz"
    SUBMIT_ANSWER = "submit_answer"
    ANSWER_TIMEOUT = "answer_timeout"
    QUESTION_END = "question_end"


class StateError(Exception):
    """An operation was applied in a phase that does not permit it."""


class ReplayError(Exception):
    """An event log could not be reconstructed into a consistent game."""


@dataclass(frozen=True, slots=True)
class GameEvent:
    kind: EventKind
    player: str | None
    payload: dict
    at: int


@dataclass(frozen=True, slots=True)
class Outcome:
    player: str
    correct: bool
    buzz_position_words: int
    buzz_position_frac: float
    points: int


@dataclass(slots=True)
class PlayerState:
    condition: ConditionCombo
    buzzed: bool = False
    correct: bool = False
    points: int = 0


@dataclass(slots=True)
class GameState:
    question: Question
    mode: GameMode
    seed: int
    players: dict[str, PlayerState]
    guess_fn: Callable[[int], GuessState]
    revealed: int = 0
    phase: Phase = Phase.READING
    clock: int = 0
    floor: str | None = None
    answer_deadline: int | None = None
    grace_deadline: int | None = None
    grace_remaining: int | None = None
    latest_guess_state: GuessState = field(default_factory=empty_guess_state)
    buzz_positions: dict[str, int] = field(default_factory=dict)
    outcomes: tuple[Outcome, ...] = ()
    end_reason: str | None = None
    events: list[GameEvent] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.question.n

    @property
    def active_players(self) -> int:
        return len(self.players)

    @property
    def readout_done(self) -> bool:
        return self.revealed >= self.question.n

    def eligible_players(self) -> list[str]:
        return [p for p, ps in self.players.items() if not ps.buzzed]

    def scores(self) -> dict[str, int]:
        return {p: ps.points for p, ps in self.players.items()}


def answers_match(submitted: str, canonical: str) -> bool:
    return submitted.strip().lower() == canonical.strip().lower()


def create_game(
    question: Question,
    players_with_conditions: Sequence[tuple[str, ConditionCombo]],
    mode: GameMode,
    seed: int = 0,
    guess_fn: Callable[[int], GuessState] | None = None,
) -> GameState:
    if not players_with_conditions:
        raise ValueError("a game needs at least one player")
    if mode == GameMode.NOVICE_SOLO and len(players_with_conditions) != 1:
        raise ValueError("novice_solo games take exactly one player")
    players: dict[str, PlayerState] = {}
    for player_id, combo in players_with_conditions:
        if player_id in players:
            raise ValueError(f"duplicate player id {player_id!r}")
        players[player_id] = PlayerState(condition=combo)
    if guess_fn is None:
        guess_fn = lambda revealed: empty_guess_state()  # noqa: E731
    return GameState(question=question, mode=mode, seed=seed, players=players, guess_fn=guess_fn)


def _emit(state: GameState, kind: EventKind, player: str | None, payload: dict, at: int) -> None:
    state.events.append(GameEvent(kind=kind, player=player, payload=payload, at=at))


def _tick(state: GameState, at: int) -> None:
    if at < state.clock:
        raise StateError(f"clock went backwards: {at} < {state.clock}")
    state.clock = at


def _refresh_payload(state: GuessState) -> dict:
    return {
        "query_len": state.guesses.query_len,
        "guesses": [[g.label, g.score, g.source_doc] for g in state.guesses.guesses],
        "question_highlights": sorted(state.question_highlights),
        "evidence_docs": [s.doc_id for s in state.snippets],
    }


def _finish(state: GameState, at: int, reason: str) -> None:
    state.phase = Phase.FINISHED
    state.end_reason = reason
    state.floor = None
    state.answer_deadline = None
    state.grace_deadline = None
    n = state.n
    outcomes = []
    for player_id in sorted(state.players):
        ps = state.players[player_id]
        words = state.buzz_positions.get(player_id, n)
        outcomes.append(
            Outcome(
                player=player_id,
                correct=ps.correct,
                buzz_position_words=words,
                buzz_position_frac=words / n,
                points=ps.points,
            )
        )
    state.outcomes = tuple(outcomes)
    _emit(state, EventKind.QUESTION_END, None, {"reason": reason, "scores": state.scores()}, at)


def advance(state: GameState, at: int) -> GameState:
    """Reveal the next word; refresh guesses on the schedule; maybe finish."""
    if state.phase != Phase.READING:
        raise StateError(f"cannot advance readout in phase {state.phase.value}")
    if state.readout_done:
        raise StateError("readout already complete")
    _tick(state, at)
    state.revealed += 1
    word = state.question.words[state.revealed - 1]
    _emit(state, EventKind.REVEAL_WORD, None, {"word": word, "revealed": state.revealed}, at)
    if state.revealed % REFRESH_EVERY_WORDS == 0 or state.revealed == state.n:
        state.latest_guess_state = state.guess_fn(state.revealed)
        _emit(state, EventKind.REFRESH_GUESSES, None, _refresh_payload(state.latest_guess_state), at)
    if state.readout_done:
        if state.eligible_players():
            state.grace_deadline = at + GRACE_WINDOW_MS
        else:
            _finish(state, at, "exhausted")
    return state


def buzz(state: GameState, player: str, at: int) -> bool:
    """Try to claim the floor. Returns whether the buzz was accepted.

    Rejections (floor taken, already answered, game over, readout not yet
    started, grace expired) leave the game variables untouched but are still
    recorded in the event log.
    """
    if player not in state.players:
        raise StateError(f"unknown player {player!r}")
    _tick(state, at)
    reason = None
    if state.phase == Phase.FINISHED:
        reason = "finished"
    elif state.phase == Phase.BUZZED:
        reason = "floor_taken"
    elif state.players[player].buzzed:
        reason = "already_answered"
    elif state.revealed == 0:
        reason = "not_started"
    elif state.grace_deadline is not None and at > state.grace_deadline:
        reason = "too_late"
    if reason is not None:
        _emit(state, EventKind.BUZZ, player, {"accepted": False, "reason": reason}, at)
        return False
    ps = state.players[player]
    ps.buzzed = True
    state.buzz_positions[player] = state.revealed
    state.floor = player
    state.answer_deadline = at + ANSWER_WINDOW_MS
    state.phase = Phase.BUZZED
    if state.grace_deadline is not None:
        state.grace_remaining = state.grace_deadline - at
        state.grace_deadline = None
    _emit(
        state,
        EventKind.BUZZ,
        player,
        {"accepted": True, "revealed": state.revealed, "deadline": state.answer_deadline},
        at,
    )
    return True


def _player_outcome(state: GameState, player: str) -> Outcome:
    ps = state.players[player]
    words = state.buzz_positions[player]
    return Outcome(
        player=player,
        correct=ps.correct,
        buzz_position_words=words,
        buzz_position_frac=words / state.n,
        points=ps.points,
    )


def _resolve_wrong(state: GameState, player: str, at: int) -> None:
    ps = state.players[player]
    ps.points -= 5
    state.floor = None
    state.answer_deadline = None
    state.phase = Phase.READING
    if not state.eligible_players():
        if state.readout_done:
            _finish(state, at, "exhausted")
        return
    if state.readout_done:
        remaining = state.grace_remaining if state.grace_remaining is not None else GRACE_WINDOW_MS
        state.grace_deadline = at + remaining
        state.grace_remaining = None


def submit_answer(state: GameState, player: str, answer: str, at: int) -> tuple[GameState, Outcome]:
    """Resolve the floor holder's answer. Late submissions count as wrong."""
    if state.phase != Phase.BUZZED:
        raise StateError("no answer window is open")
    if state.floor != player:
        raise StateError(f"{player!r} does not hold the floor")
    _tick(state, at)
    late = at > state.answer_deadline
    correct = (not late) and answers_match(answer, state.question.answer)
    ps = state.players[player]
    if correct:
        ps.correct = True
        ps.points += 10
    points = 10 if correct else -5
    _emit(
        state,
        EventKind.SUBMIT_ANSWER,
        player,
        {"answer": answer, "correct": correct, "points": points, "late": late},
        at,
    )
    if correct:
        _finish(state, at, "answered")
    else:
        _resolve_wrong(state, player, at)
    return state, _player_outcome(state, player)


def answer_timeout(state: GameState, at: int) -> tuple[GameState, Outcome]:
    """The floor holder let the window lapse; scored as a wrong answer."""
    if state.phase != Phase.BUZZED:
        raise StateError("no answer window is open")
    _tick(state, at)
    if at < state.answer_deadline:
        raise StateError("answer window is still open")
    player = state.floor
    _emit(state, EventKind.ANSWER_TIMEOUT, player, {"points": -5}, at)
    _resolve_wrong(state, player, at)
    return state, _player_outcome(state, player)


def end_question(state: GameState, at: int) -> GameState:
    """Close the question after the post-readout grace window expires."""
    if state.phase != Phase.READING or not state.readout_done:
        raise StateError("question is not in its grace window")
    if state.grace_deadline is None:
        raise StateError("no grace window is running")
    _tick(state, at)
    if at < state.grace_deadline:
        raise StateError("grace window has not expired")
    _finish(state, at, "grace_expired")
    return state


@dataclass(frozen=True)
class EventLog:
    schema: str
    question_id: str
    mode: GameMode
    seed: int
    players: tuple[tuple[str, ConditionCombo], ...]
    events: tuple[GameEvent, ...]


def event_log(state: GameState) -> EventLog:
    return EventLog(
        schema=LOG_SCHEMA,
        question_id=state.question.id,
        mode=state.mode,
        seed=state.seed,
        players=tuple((p, ps.condition) for p, ps in state.players.items()),
        events=tuple(state.events),
    )


def event_log_lines(log: EventLog) -> list[str]:
    header = {
        "schema": log.schema,
        "question_id": log.question_id,
        "mode": log.mode.value,
        "seed": log.seed,
        "players": [{"id": p, "combo": c.name} for p, c in log.players],
    }
    lines = [json.dumps(header)]
    for e in log.events:
        lines.append(json.dumps({"kind": e.kind.value, "player": e.player, "payload": e.payload, "at": e.at}))
    return lines


def save_event_log(log: EventLog, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(event_log_lines(log)) + "\n")


def parse_event_log(lines: Iterable[str]) -> EventLog:
    it = iter(lines)
    try:
        header = json.loads(next(it))
    except StopIteration:
        raise ReplayError("event log is empty") from None
    if header.get("schema") != LOG_SCHEMA:
        raise ReplayError(f"unsupported log schema {header.get('schema')!r}")
    events = []
    for line in it:
        if not line.strip():
            continue
        raw = json.loads(line)
        events.append(
            GameEvent(
                kind=EventKind(raw["kind"]),
                player=raw["player"],
                payload=raw["payload"],
                at=raw["at"],
            )
        )
    return EventLog(
        schema=header["schema"],
        question_id=header["question_id"],
        mode=GameMode(header["mode"]),
        seed=header["seed"],
        players=tuple((p["id"], ConditionCombo.from_name(p["combo"])) for p in header["players"]),
        events=tuple(events),
    )


def load_event_log(path) -> EventLog:
    with open(path, encoding="utf-8") as fh:
        return parse_event_log(fh)


def replay(
    log: EventLog,
    question: Question,
    guess_fn: Callable[[int], GuessState] | None = None,
) -> tuple[GameState, tuple[Outcome, ...]]:
    """Reconstruct a finished game from its log and verify it regenerates it.

    Input events (reveals, buzzes, answers, timeouts, grace expiry) are
    re-applied; derived events (guess refreshes, engine-emitted endings) are
    regenerated and must match the log exactly, floats and all.
    """
    if log.question_id != question.id:
        raise ReplayError(f"log is for question {log.question_id!r}, not {question.id!r}")
    state = create_game(question, log.players, log.mode, seed=log.seed, guess_fn=guess_fn)
    try:
        for e in log.events:
            if e.kind == EventKind.REVEAL_WORD:
                advance(state, e.at)
            elif e.kind == EventKind.BUZZ:
                buzz(state, e.player, e.at)
            elif e.kind == EventKind.SUBMIT_ANSWER:
                submit_answer(state, e.player, e.payload["answer"], e.at)
            elif e.kind == EventKind.ANSWER_TIMEOUT:
                answer_timeout(state, e.at)
            elif e.kind == EventKind.QUESTION_END:
                if state.phase != Phase.FINISHED:
                    end_question(state, e.at)
            elif e.kind == EventKind.REFRESH_GUESSES:
                continue
            else:  # pragma: no cover - enum is closed
                raise ReplayError(f"unhandled event kind {e.kind}")
    except StateError as exc:
        raise ReplayError(f"event log does not replay: {exc}") from exc
    if tuple(state.events) != log.events:
        raise ReplayError("replayed game diverged from the recorded event stream")
    return state, state.outcomes
