"""Questions and training documents: loading, validation, token normalization.

Questions are newline-delimited JSON objects {"id", "text", "answer"}; the
word sequence is the whitespace split of "text". Documents are
{"id", "kind", "label", "text"} with kind "wikipedia" or "past_question".
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, NamedTuple

DOCUMENT_KINDS = ("wikipedia", "past_question")


class CorpusError(Exception):
    """Base error for corpus loading and validation."""


class LoadError(CorpusError):
    """A file or record could not be parsed."""


class ValidationError(CorpusError):
    """A record violates a corpus invariant."""


@dataclass(frozen=True)
class Question:
    """One playable question: an ordered word sequence and its canonical answer."""

    id: str
    words: tuple[str, ...]
    answer: str

    @property
    def n(self) -> int:
        return len(self.words)

    @property
    def text(self) -> str:
        return " ".join(self.words)


@dataclass(frozen=True)
class Document:
    """A training example the guesser retrieves: a labeled text body."""

    id: str
    kind: str
    label: str
    text: str


class Token(NamedTuple):
    surface: str
    position: int


def normalize(piece: str) -> str:
    """Lowercase and strip leading/trailing non-alphanumeric characters.

    Internal punctuation (hyphens, apostrophes) is preserved so a highlighted
    term is literally the same surface form on both sides of a match.
    """
    piece = piece.lower()
    start, end = 0, len(piece)
    while start < end and not piece[start].isalnum():
        start += 1
    while end > start and not piece[end - 1].isalnum():
        end -= 1
    return piece[start:end]


def tokenize(text: str) -> list[Token]:
    """Whitespace-split, normalize each piece, drop pieces that become empty.

    Positions index the original whitespace-split sequence, so they can be
    mapped back onto the displayed words of a question.
    """
    return tokenize_words(text.split())


def tokenize_words(words: Iterable[str]) -> list[Token]:
    tokens = []
    for position, piece in enumerate(words):
        surface = normalize(piece)
        if surface:
            tokens.append(Token(surface, position))
    return tokens


def _iter_records(path) -> Iterable[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LoadError(f"{path}: line {line_number}: invalid JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise LoadError(f"{path}: line {line_number}: expected a JSON object")
            yield line_number, record


def _require_str(record: dict, key: str, where: str) -> str:
    value = record.get(key)
    if not isinstance(value, str):
        raise LoadError(f"{where}: field {key!r} missing or not a string")
    return value


def load_questions(path) -> list[Question]:
    """Load a question file, preserving order. Raises on malformed or duplicate records."""
    questions: list[Question] = []
    seen: set[str] = set()
    for line_number, record in _iter_records(path):
        where = f"{path}: line {line_number}"
        qid = _require_str(record, "id", where)
        text = _require_str(record, "text", where)
        answer = _require_str(record, "answer", where)
        words = tuple(text.split())
        if not words:
            raise ValidationError(f"{where}: question {qid!r} has no words")
        if not answer.strip():
            raise ValidationError(f"{where}: question {qid!r} has an empty answer")
        if qid in seen:
            raise ValidationError(f"{where}: duplicate question id {qid!r}")
        seen.add(qid)
        questions.append(Question(id=qid, words=words, answer=answer))
    return questions


def load_documents(path) -> list[Document]:
    """Load a document file, preserving order. Kind must be wikipedia or past_question."""
    documents: list[Document] = []
    seen: set[str] = set()
    for line_number, record in _iter_records(path):
        where = f"{path}: line {line_number}"
        doc_id = _require_str(record, "id", where)
        kind = _require_str(record, "kind", where)
        label = _require_str(record, "label", where)
        text = _require_str(record, "text", where)
        if kind not in DOCUMENT_KINDS:
            raise ValidationError(f"{where}: document {doc_id!r} has unknown kind {kind!r}")
        if not label.strip():
            raise ValidationError(f"{where}: document {doc_id!r} has an empty label")
        if doc_id in seen:
            raise ValidationError(f"{where}: duplicate document id {doc_id!r}")
        seen.add(doc_id)
        documents.append(Document(id=doc_id, kind=kind, label=label, text=text))
    return documents


def save_questions(questions: Iterable[Question], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for q in questions:
            fh.write(json.dumps({"id": q.id, "text": q.text, "answer": q.answer}) + "\n")


def save_documents(documents: Iterable[Document], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in documents:
            fh.write(json.dumps({"id": d.id, "kind": d.kind, "label": d.label, "text": d.text}) + "\n")
