"""Retrieval guesser: BM25 over the document corpus, label aggregation into
ranked guesses, and evidence snippets with term highlights.

Scoring is BM25 with k1=1.2, b=0.75 and the always-positive idf
ln(1 + (N - df + 0.5) / (df + 0.5)), summed over query token instances, so
duplicate query terms count twice and every score is nonnegative. Guesses keep
their scores unnormalized. The 50 most frequent corpus terms are treated as
stopwords: excluded from scoring, still matchable for display highlights.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .corpus import Document, Token, tokenize

K1 = 1.2
B = 0.75
DEFAULT_STOPWORD_COUNT = 50
DEFAULT_TOP_K = 10
DEFAULT_MAX_SNIPPETS = 4
DEFAULT_WINDOW = 30

INDEX_SCHEMA = "coopquiz-index/1"


class GuesserError(Exception):
    pass


class EmptyCorpusError(GuesserError):
    pass


class UnknownDocumentError(GuesserError):
    pass


@dataclass(frozen=True)
class Guess:
    label: str
    score: float
    source_doc: str


@dataclass(frozen=True)
class GuessList:
    guesses: tuple[Guess, ...]
    query_len: int

    def __len__(self) -> int:
        return len(self.guesses)

    @property
    def top(self) -> Guess | None:
        return self.guesses[0] if self.guesses else None


@dataclass(frozen=True)
class EvidenceSnippet:
    """A contiguous token window from one evidence document.

    `highlighted` holds positions relative to `tokens`; `start` is the window
    offset into the document's token sequence.
    """

    doc_id: str
    start: int
    tokens: tuple[str, ...]
    highlighted: frozenset[int]

    def highlighted_surfaces(self) -> frozenset[str]:
        return frozenset(self.tokens[i] for i in self.highlighted)


@dataclass(frozen=True)
class GuessState:
    """Everything the interface layer needs for one refresh of one prefix."""

    guesses: GuessList
    snippets: tuple[EvidenceSnippet, ...]
    question_highlights: frozenset[int]


class Index:
    """Immutable inverted index over a document corpus."""

    def __init__(self, documents: Sequence[Document], stopword_count: int = DEFAULT_STOPWORD_COUNT):
        if not documents:
            raise EmptyCorpusError("cannot index an empty corpus")
        self.documents: tuple[Document, ...] = tuple(documents)
        self.stopword_count = stopword_count
        self.docs_by_id: dict[str, Document] = {d.id: d for d in self.documents}
        self.doc_tokens: dict[str, tuple[str, ...]] = {}
        self.doc_term_counts: dict[str, Counter] = {}
        self.doc_lengths: dict[str, int] = {}
        self.postings: dict[str, list[tuple[str, int]]] = {}
        self.label_docs: dict[str, list[str]] = {}

        term_totals: Counter = Counter()
        for doc in self.documents:
            surfaces = tuple(t.surface for t in tokenize(doc.text))
            counts = Counter(surfaces)
            self.doc_tokens[doc.id] = surfaces
            self.doc_term_counts[doc.id] = counts
            self.doc_lengths[doc.id] = len(surfaces)
            term_totals.update(counts)
            self.label_docs.setdefault(doc.label, []).append(doc.id)
            for term, tf in counts.items():
                self.postings.setdefault(term, []).append((doc.id, tf))

        self.doc_count = len(self.documents)
        self.avg_doc_length = sum(self.doc_lengths.values()) / self.doc_count
        # Most frequent by total occurrences; ties break lexicographically so
        # the set is reproducible across runs.
        ranked = sorted(term_totals.items(), key=lambda item: (-item[1], item[0]))
        self.stopwords: frozenset[str] = frozenset(t for t, _ in ranked[:stopword_count])

    @property
    def labels(self) -> list[str]:
        return sorted(self.label_docs)


def build_index(documents: Sequence[Document], stopword_count: int = DEFAULT_STOPWORD_COUNT) -> Index:
    return Index(documents, stopword_count=stopword_count)


def _idf(doc_count: int, df: int) -> float:
    return math.log(1.0 + (doc_count - df + 0.5) / (df + 0.5))


def _tf_component(tf: int, doc_length: int, avg_doc_length: float) -> float:
    return (tf * (K1 + 1.0)) / (tf + K1 * (1.0 - B + B * doc_length / avg_doc_length))


def _surfaces(query_tokens: Iterable[Token | str]) -> list[str]:
    return [t.surface if isinstance(t, Token) else t for t in query_tokens]


def remove_stopwords(index: Index, query_tokens: Sequence[Token | str]) -> list[str]:
    return [s for s in _surfaces(query_tokens) if s not in index.stopwords]


def score_doc(index: Index, query_tokens: Sequence[Token | str], doc_id: str) -> float:
    """Plain BM25 of the given tokens against one document; no stopword logic."""
    counts = index.doc_term_counts.get(doc_id)
    if counts is None:
        raise UnknownDocumentError(f"document {doc_id!r} is not indexed")
    doc_length = index.doc_lengths[doc_id]
    score = 0.0
    for term in _surfaces(query_tokens):
        tf = counts.get(term, 0)
        if tf == 0:
            continue
        df = len(index.postings[term])
        score += _idf(index.doc_count, df) * _tf_component(tf, doc_length, index.avg_doc_length)
    return score


def query(index: Index, question_prefix: Sequence[Token | str], k: int = DEFAULT_TOP_K) -> GuessList:
    """Score the revealed prefix against the corpus and rank labels.

    Stopwords are dropped from scoring; only documents containing at least one
    remaining query term are candidates. Each label takes its best document's
    score; ties break by label, then by document id.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    terms = remove_stopwords(index, question_prefix)
    scores: dict[str, float] = {}
    for term in terms:
        postings = index.postings.get(term)
        if not postings:
            continue
        idf = _idf(index.doc_count, len(postings))
        for doc_id, tf in postings:
            contribution = idf * _tf_component(tf, index.doc_lengths[doc_id], index.avg_doc_length)
            scores[doc_id] = scores.get(doc_id, 0.0) + contribution

    best: dict[str, tuple[float, str]] = {}
    for doc_id in sorted(scores):
        score = scores[doc_id]
        label = index.docs_by_id[doc_id].label
        held = best.get(label)
        if held is None or score > held[0]:
            best[label] = (score, doc_id)

    ranked = sorted(best.items(), key=lambda item: (-item[1][0], item[0]))
    guesses = tuple(
        Guess(label=label, score=score, source_doc=doc_id)
        for label, (score, doc_id) in ranked[:k]
    )
    return GuessList(guesses=guesses, query_len=len(question_prefix))


def _best_window(match_positions: list[int], n_tokens: int, window: int) -> tuple[int, int]:
    """Start and length of the window holding the most matches, earliest on ties."""
    length = min(window, n_tokens)
    if not match_positions or length == 0:
        return 0, length
    hits = [0] * (n_tokens + 1)
    for p in match_positions:
        hits[p + 1] = 1
    for i in range(n_tokens):
        hits[i + 1] += hits[i]
    best_start, best_count = 0, -1
    for start in range(n_tokens - length + 1):
        count = hits[start + length] - hits[start]
        if count > best_count:
            best_start, best_count = start, count
    return best_start, length


def evidence(
    index: Index,
    question_prefix: Sequence[Token | str],
    top_guess: Guess,
    max_snippets: int = DEFAULT_MAX_SNIPPETS,
    window: int = DEFAULT_WINDOW,
) -> list[EvidenceSnippet]:
    """Snippets from the documents behind the top guess.

    Documents sharing the guess's label are ranked by prefix score (document id
    breaks ties); for each we pick the window with the most query-term matches.
    Matching is display-level: stopwords count here even though they never score.
    """
    query_surfaces = set(_surfaces(question_prefix))
    scoring_terms = remove_stopwords(index, question_prefix)
    label_doc_ids = index.label_docs.get(top_guess.label)
    if label_doc_ids is None:
        raise GuesserError(f"no indexed documents carry label {top_guess.label!r}")
    ranked = sorted(
        label_doc_ids,
        key=lambda doc_id: (-score_doc(index, scoring_terms, doc_id), doc_id),
    )
    snippets = []
    for doc_id in ranked[:max_snippets]:
        tokens = index.doc_tokens[doc_id]
        matches = [i for i, surface in enumerate(tokens) if surface in query_surfaces]
        start, length = _best_window(matches, len(tokens), window)
        end = start + length
        snippets.append(
            EvidenceSnippet(
                doc_id=doc_id,
                start=start,
                tokens=tokens[start:end],
                highlighted=frozenset(i - start for i in matches if start <= i < end),
            )
        )
    return snippets


def question_highlights(
    question_prefix: Sequence[Token], snippets: Sequence[EvidenceSnippet]
) -> frozenset[int]:
    """Question word positions whose surface appears highlighted in the evidence."""
    highlighted_surfaces: set[str] = set()
    for snippet in snippets:
        highlighted_surfaces.update(snippet.highlighted_surfaces())
    return frozenset(t.position for t in question_prefix if t.surface in highlighted_surfaces)


def guess_state(
    index: Index,
    question_prefix: Sequence[Token],
    k: int = DEFAULT_TOP_K,
    max_snippets: int = DEFAULT_MAX_SNIPPETS,
    window: int = DEFAULT_WINDOW,
) -> GuessState:
    """One-stop refresh: guesses, evidence for the top guess, question highlights."""
    guesses = query(index, question_prefix, k=k)
    if guesses.top is None:
        return GuessState(guesses=guesses, snippets=(), question_highlights=frozenset())
    snippets = tuple(evidence(index, question_prefix, guesses.top, max_snippets=max_snippets, window=window))
    return GuessState(
        guesses=guesses,
        snippets=snippets,
        question_highlights=question_highlights(question_prefix, snippets),
    )


def empty_guess_state() -> GuessState:
    return GuessState(GuessList(guesses=(), query_len=0), (), frozenset())


def make_guess_fn(index: Index, question, **kwargs) -> Callable[[int], GuessState]:
    """Per-question closure the game engine calls at each refresh.

    Results are cached by revealed-word count, so replays and repeated plays of
    the same question reuse the computation.
    """
    from .corpus import tokenize_words

    cache: dict[int, GuessState] = {}

    def fn(revealed: int) -> GuessState:
        state = cache.get(revealed)
        if state is None:
            prefix = tokenize_words(question.words[:revealed])
            state = guess_state(index, prefix, **kwargs)
            cache[revealed] = state
        return state

    return fn


def save_index(index: Index, path) -> None:
    """Persist as the corpus plus build parameters; rebuilding is deterministic."""
    payload = {
        "schema": INDEX_SCHEMA,
        "stopword_count": index.stopword_count,
        "documents": [
            {"id": d.id, "kind": d.kind, "label": d.label, "text": d.text}
            for d in index.documents
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_index(path) -> Index:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("schema") != INDEX_SCHEMA:
        raise GuesserError(f"{path}: unsupported index schema {payload.get('schema')!r}")
    documents = [Document(**record) for record in payload["documents"]]
    return Index(documents, stopword_count=payload["stopword_count"])
