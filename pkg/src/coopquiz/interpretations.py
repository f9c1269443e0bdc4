"""Interpretation conditions and the per-refresh payload each player may see.

Three interpretation forms (guesses, question highlights, evidence snippets)
combine into 2x2x2 = 8 conditions including the null condition. Rendering only
masks: highlights are always computed from the full evidence, then fields the
player's condition does not grant are withheld. When highlights are granted
without evidence, only the question-side highlights show; when evidence is
granted without highlights, snippets are delivered with their marks stripped.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .guesser import EvidenceSnippet, GuessList, GuessState

FLAG_NAMES = ("guesses", "highlight", "evidence")


@dataclass(frozen=True, order=True)
class ConditionCombo:
    guesses: bool = False
    highlight: bool = False
    evidence: bool = False

    @property
    def name(self) -> str:
        parts = [flag for flag in FLAG_NAMES if getattr(self, flag)]
        return "+".join(parts) if parts else "null"

    @property
    def is_null(self) -> bool:
        return not (self.guesses or self.highlight or self.evidence)

    @classmethod
    def from_name(cls, name: str) -> "ConditionCombo":
        if name == "null":
            return cls()
        parts = name.split("+")
        if not all(p in FLAG_NAMES for p in parts) or len(set(parts)) != len(parts):
            raise ValueError(f"unknown condition combo {name!r}")
        return cls(**{p: True for p in parts})


ALL_COMBOS: tuple[ConditionCombo, ...] = tuple(
    ConditionCombo(guesses=g, highlight=h, evidence=e)
    for g in (False, True)
    for h in (False, True)
    for e in (False, True)
)

NON_NULL_COMBOS: tuple[ConditionCombo, ...] = tuple(c for c in ALL_COMBOS if not c.is_null)

MULTI_COMBOS: tuple[ConditionCombo, ...] = tuple(
    c for c in ALL_COMBOS if sum((c.guesses, c.highlight, c.evidence)) >= 2
)


@dataclass(frozen=True)
class InterpretationPayload:
    query_len: int
    guesses: GuessList | None
    evidence: tuple[EvidenceSnippet, ...] | None
    question_highlights: frozenset[int] | None
    evidence_highlights_visible: bool


def _strip_marks(snippets: tuple[EvidenceSnippet, ...]) -> tuple[EvidenceSnippet, ...]:
    return tuple(replace(s, highlighted=frozenset()) for s in snippets)


def render(state: GuessState, combo: ConditionCombo) -> InterpretationPayload:
    """Filter a guess state down to what one player's condition permits."""
    show_marks = combo.highlight and combo.evidence
    evidence_field: tuple[EvidenceSnippet, ...] | None = None
    if combo.evidence:
        evidence_field = state.snippets if show_marks else _strip_marks(state.snippets)
    return InterpretationPayload(
        query_len=state.guesses.query_len,
        guesses=state.guesses if combo.guesses else None,
        evidence=evidence_field,
        question_highlights=state.question_highlights if combo.highlight else None,
        evidence_highlights_visible=show_marks,
    )
