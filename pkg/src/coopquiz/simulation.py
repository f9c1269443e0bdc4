"""Synthetic gameplay at study scale.

Simulated players buzz at a position drawn from their aggressiveness plus any
planted per-combo shift, then answer correctly with a probability given by a
logistic model over player skill, question difficulty, buzz position, planted
per-combo log-odds, and trust in the guesser's top answer. Every play runs
through the real game engine (create_game/advance/buzz/submit_answer), so the
records it produces are exactly what live play would log.

Question difficulty comes from the guesser itself: the fraction of the
question that must be revealed before the correct answer reaches rank 1 (1.0
if it never does). Correctness draws default to systematic sampling within
each (player, combo) stream: each record's marginal probability is exact, but
realized frequencies track their expectations to within one count per cell,
which keeps recovered regression coefficients tight at study scale. Set
correctness_sampling="iid" for independent Bernoulli draws.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .corpus import Document, Question
from .engine import (
    EventLog,
    GameMode,
    Phase,
    advance,
    answers_match,
    buzz,
    create_game,
    event_log,
    submit_answer,
)
from .guesser import GuessState, Index, make_guess_fn
from .interpretations import NON_NULL_COMBOS, ConditionCombo
from .logstore import GameRecord
from .sampler import ExposureHistory, exposure_target, sample_condition

COMBO_NAMES = frozenset(c.name for c in NON_NULL_COMBOS) | {"null"}


@dataclass(frozen=True)
class SimPlayerProfile:
    id: str
    skill: float
    trust: float
    aggressiveness: float
    group: str

    def __post_init__(self):
        if not 0.0 <= self.trust <= 1.0:
            raise ValueError(f"trust must lie in [0, 1], got {self.trust}")
        if self.group not in ("expert", "novice"):
            raise ValueError(f"unknown group {self.group!r}")


@dataclass(frozen=True)
class PlantedEffects:
    """Ground-truth per-combo effects the analysis should recover.

    Keys are combo names ("guesses", "highlight+evidence", ...); missing
    combos default to zero effect.
    """

    correctness_logodds: dict[str, float] = field(default_factory=dict)
    buzz_shift: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for table in (self.correctness_logodds, self.buzz_shift):
            for name, value in table.items():
                if name not in COMBO_NAMES:
                    raise ValueError(f"unknown combo name {name!r}")
                if not math.isfinite(value):
                    raise ValueError(f"effect for {name!r} is not finite")

    @classmethod
    def none(cls) -> "PlantedEffects":
        return cls()


def buzz_shift_for_flag(flag: str, shift: float) -> dict[str, float]:
    """The per-combo shift table for 'every combo containing this flag'."""
    return {c.name: shift for c in NON_NULL_COMBOS if getattr(c, flag)}


def default_profiles(count: int, group: str, seed: int = 0, trust: float | None = None) -> list[SimPlayerProfile]:
    rng = random.Random(seed)
    profiles = []
    for i in range(count):
        profiles.append(
            SimPlayerProfile(
                id=f"{group[0]}{i:02d}",
                skill=rng.gauss(0.0, 0.5),
                trust=(rng.uniform(0.5, 0.9) if group == "novice" else rng.uniform(0.0, 0.4))
                if trust is None
                else trust,
                aggressiveness=rng.uniform(0.35, 0.75),
                group=group,
            )
        )
    return profiles


def refresh_points(n_words: int) -> list[int]:
    points = list(range(4, n_words + 1, 4))
    if n_words % 4 != 0:
        points.append(n_words)
    return points


def question_difficulty(question: Question, guess_fn: Callable[[int], GuessState]) -> float:
    """Fraction of the question needed before the correct answer hits rank 1;
    1.0 if it never does."""
    for revealed in refresh_points(question.n):
        top = guess_fn(revealed).guesses.top
        if top is not None and answers_match(top.label, question.answer):
            return revealed / question.n
    return 1.0


def _draw_correct(acc: dict, key, p: float, rng: random.Random, sampling: str) -> bool:
    if sampling == "iid":
        return rng.random() < p
    before = acc.get(key)
    if before is None:
        before = rng.random()
    after = before + p
    acc[key] = after
    return math.floor(after) != math.floor(before)


def simulate(
    questions: Sequence[Question],
    index: Index,
    profiles: Sequence[SimPlayerProfile],
    planted: PlantedEffects,
    seed: int,
    correctness_sampling: str = "stratified",
    base_logodds: float = 0.3,
    difficulty_weight: float = 2.0,
    buzz_correctness_weight: float = 1.5,
    buzz_noise: float = 0.15,
    pacing_ms: int = 250,
    answer_delay_ms: int = 2000,
    event_log_sink: Callable[[EventLog], None] | None = None,
) -> list[GameRecord]:
    """Play every profile against every question once; return their records."""
    if not questions:
        raise ValueError("no questions to simulate")
    if not profiles:
        raise ValueError("no player profiles to simulate")
    if correctness_sampling not in ("stratified", "iid"):
        raise ValueError(f"unknown correctness sampling {correctness_sampling!r}")
    rng = random.Random(seed)
    history = ExposureHistory(n_target=exposure_target(len(questions)))
    guess_fns = {q.id: make_guess_fn(index, q) for q in questions}
    difficulties = {q.id: question_difficulty(q, guess_fns[q.id]) for q in questions}
    acc: dict = {}
    answered_so_far = {p.id: 0 for p in profiles}
    correct_so_far = {p.id: 0 for p in profiles}
    records = []
    game_index = 0
    for question in questions:
        for profile in profiles:
            combo = sample_condition(history, profile.id, rng, question_id=question.id)
            record, log = _play_one(
                question=question,
                profile=profile,
                combo=combo,
                guess_fn=guess_fns[question.id],
                difficulty=difficulties[question.id],
                planted=planted,
                rng=rng,
                acc=acc,
                running_accuracy=(
                    correct_so_far[profile.id] / answered_so_far[profile.id]
                    if answered_so_far[profile.id]
                    else 0.0
                ),
                sampling=correctness_sampling,
                base_logodds=base_logodds,
                difficulty_weight=difficulty_weight,
                buzz_correctness_weight=buzz_correctness_weight,
                buzz_noise=buzz_noise,
                pacing_ms=pacing_ms,
                answer_delay_ms=answer_delay_ms,
                game_index=game_index,
                want_log=event_log_sink is not None,
            )
            answered_so_far[profile.id] += 1
            if record.correct:
                correct_so_far[profile.id] += 1
            records.append(record)
            if event_log_sink is not None:
                event_log_sink(log)
            game_index += 1
    return records


def _play_one(
    question: Question,
    profile: SimPlayerProfile,
    combo: ConditionCombo,
    guess_fn,
    difficulty: float,
    planted: PlantedEffects,
    rng: random.Random,
    acc: dict,
    running_accuracy: float,
    sampling: str,
    base_logodds: float,
    difficulty_weight: float,
    buzz_correctness_weight: float,
    buzz_noise: float,
    pacing_ms: int,
    answer_delay_ms: int,
    game_index: int,
    want_log: bool,
) -> tuple[GameRecord, EventLog | None]:
    n = question.n
    mode = GameMode.EXPERT_COMPETITIVE if profile.group == "expert" else GameMode.NOVICE_SOLO
    state = create_game(question, [(profile.id, combo)], mode, seed=game_index, guess_fn=guess_fn)

    target = profile.aggressiveness + rng.uniform(-buzz_noise, buzz_noise) + planted.buzz_shift.get(combo.name, 0.0)
    buzz_word = max(1, min(n, round(min(max(target, 0.0), 1.0) * n)))
    t = 0
    for word in range(1, buzz_word + 1):
        t = word * pacing_ms
        advance(state, t)
    accepted = buzz(state, profile.id, t)
    assert accepted, "a first buzz during readout is always accepted"

    top = state.latest_guess_state.guesses.top
    guesser_correct = top is not None and answers_match(top.label, question.answer)
    frac = buzz_word / n
    logit = (
        base_logodds
        + profile.skill
        - difficulty_weight * difficulty
        + buzz_correctness_weight * frac
        + planted.correctness_logodds.get(combo.name, 0.0)
        + profile.trust * (1.0 if guesser_correct else 0.0)
    )
    p = 1.0 / (1.0 + math.exp(-logit))
    correct = _draw_correct(acc, (profile.id, combo.name), p, rng, sampling)

    t += answer_delay_ms
    state, outcome = submit_answer(state, profile.id, question.answer if correct else "__unknown__", t)
    while state.phase != Phase.FINISHED:
        t += pacing_ms
        advance(state, t)  # locked-out solo rooms still hear the whole question

    record = GameRecord(
        player_id=profile.id,
        question_id=question.id,
        group=profile.group,
        combo=combo,
        buzz_position_frac=outcome.buzz_position_frac,
        answered=True,
        correct=outcome.correct,
        points=outcome.points,
        active_players=1,
        top_active_accuracy=running_accuracy if profile.group == "expert" else 0.0,
        guess_shown=top.label if top else "",
        timestamp=float(game_index),
    )
    return record, (event_log(state) if want_log else None)


SYLLABLES = (
    "ba", "co", "da", "fe", "gi", "ho", "ju", "ka", "lo", "mi",
    "nu", "pe", "qui", "ra", "so", "ta", "ve", "wi", "xa", "zo",
)


def _word(rng: random.Random, n_syllables: int) -> str:
    return "".join(rng.choice(SYLLABLES) for _ in range(n_syllables))


def synthetic_pack(
    n_questions: int = 160,
    n_labels: int = 40,
    seed: int = 0,
    words_per_question: tuple[int, int] = (16, 32),
    docs_per_label: tuple[int, int] = (2, 4),
) -> tuple[list[Question], list[Document]]:
    """A deterministic question/document set with pyramidal questions.

    Each label owns a pool of topic words; its documents mix topic words with
    common filler, and its questions start vague (filler plus strays from
    other topics) and grow topical toward the end, so the guesser converges to
    the right answer at different depths for different questions.
    """
    rng = random.Random(seed)
    common = sorted({_word(rng, 2) for _ in range(220)})
    labels = [f"Topic_{i:03d}" for i in range(n_labels)]
    topic_words: dict[str, list[str]] = {}
    taken = set(common)
    for label in labels:
        pool = []
        while len(pool) < 12:
            candidate = _word(rng, 3)
            if candidate not in taken:
                taken.add(candidate)
                pool.append(candidate)
        topic_words[label] = pool

    documents = []
    doc_index = 0
    for label in labels:
        for _ in range(rng.randint(*docs_per_label)):
            length = rng.randint(30, 60)
            words = [
                rng.choice(topic_words[label]) if rng.random() < 0.45 else rng.choice(common)
                for _ in range(length)
            ]
            documents.append(
                Document(
                    id=f"d{doc_index:04d}",
                    kind=rng.choice(("wikipedia", "past_question")),
                    label=label,
                    text=" ".join(words),
                )
            )
            doc_index += 1

    questions = []
    for i in range(n_questions):
        label = labels[i % n_labels]
        n = rng.randint(*words_per_question)
        words = []
        for position in range(n):
            ramp = 0.1 + 0.8 * position / max(n - 1, 1)
            roll = rng.random()
            if roll < ramp:
                words.append(rng.choice(topic_words[label]))
            elif roll < ramp + 0.12:
                words.append(rng.choice(topic_words[rng.choice(labels)]))
            else:
                words.append(rng.choice(common))
        questions.append(Question(id=f"q{i:04d}", words=tuple(words), answer=label))
    return questions, documents
