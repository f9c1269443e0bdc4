"""Tokenization and NDJSON loading behaviour."""

import json
import random
import string

import pytest

from coopquiz.corpus import (
    LoadError,
    Token,
    ValidationError,
    load_documents,
    load_questions,
    normalize,
    save_documents,
    save_questions,
    tokenize,
)


def test_normalize_strips_edge_punctuation_and_lowercases():
    assert normalize('"Ad') == "ad"
    assert normalize("Lectorem,") == "lectorem"
    assert normalize("(1543)") == "1543"
    assert normalize("...") == ""


def test_normalize_preserves_internal_punctuation():
    assert normalize("Mexican-American") == "mexican-american"
    assert normalize("o'clock") == "o'clock"


def test_tokenize_positions_index_the_word_sequence():
    assert tokenize('the "Ad Lectorem," preface') == [
        Token("the", 0),
        Token("ad", 1),
        Token("lectorem", 2),
        Token("preface", 3),
    ]


def test_tokenize_drops_empty_pieces_but_keeps_positions():
    assert tokenize("a -- b") == [Token("a", 0), Token("b", 2)]


def test_tokenize_empty_text():
    assert tokenize("") == []
    assert tokenize("   ") == []


def test_tokenize_is_idempotent_on_surfaces():
    rng = random.Random(11)
    alphabet = string.ascii_letters + string.digits + "-'(),.\"!?"
    for _ in range(200):
        text = " ".join(
            "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 10)))
            for _ in range(rng.randint(0, 12))
        )
        for token in tokenize(text):
            assert normalize(token.surface) == token.surface


def _write_lines(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")


def test_load_questions_round_trip(tmp_path):
    path = tmp_path / "questions.ndjson"
    _write_lines(
        path,
        [
            {"id": "q1", "text": "He refused to pay a poll tax", "answer": "Henry_David_Thoreau"},
            {"id": "q2", "text": "This astronomer wrote De Revolutionibus", "answer": "Nicolaus_Copernicus"},
        ],
    )
    questions = load_questions(path)
    assert [q.id for q in questions] == ["q1", "q2"]
    assert questions[0].words[:4] == ("He", "refused", "to", "pay")
    assert questions[0].n == 7

    out = tmp_path / "copy.ndjson"
    save_questions(questions, out)
    assert load_questions(out) == questions


def test_load_questions_duplicate_id_names_the_id(tmp_path):
    path = tmp_path / "questions.ndjson"
    _write_lines(
        path,
        [
            {"id": "q1", "text": "one", "answer": "A"},
            {"id": "q1", "text": "two", "answer": "B"},
        ],
    )
    with pytest.raises(ValidationError) as excinfo:
        load_questions(path)
    assert "q1" in str(excinfo.value)
    assert "line 2" in str(excinfo.value)


def test_load_questions_rejects_blank_text_and_answer(tmp_path):
    path = tmp_path / "questions.ndjson"
    _write_lines(path, [{"id": "q1", "text": "   ", "answer": "A"}])
    with pytest.raises(ValidationError):
        load_questions(path)
    _write_lines(path, [{"id": "q1", "text": "fine", "answer": " "}])
    with pytest.raises(ValidationError):
        load_questions(path)


def test_load_questions_bad_json_names_the_line(tmp_path):
    path = tmp_path / "questions.ndjson"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"id": "q1", "text": "ok", "answer": "A"}) + "\n")
        fh.write("{not json\n")
    with pytest.raises(LoadError) as excinfo:
        load_questions(path)
    assert "line 2" in str(excinfo.value)


def test_load_questions_missing_field(tmp_path):
    path = tmp_path / "questions.ndjson"
    _write_lines(path, [{"id": "q1", "text": "ok"}])
    with pytest.raises(LoadError) as excinfo:
        load_questions(path)
    assert "answer" in str(excinfo.value)


def test_load_documents_round_trip_and_kinds(tmp_path):
    path = tmp_path / "docs.ndjson"
    _write_lines(
        path,
        [
            {"id": "d1", "kind": "wikipedia", "label": "Henry_David_Thoreau", "text": "..."},
            {"id": "d2", "kind": "past_question", "label": "Nicolaus_Copernicus", "text": "..."},
        ],
    )
    documents = load_documents(path)
    assert [d.kind for d in documents] == ["wikipedia", "past_question"]
    out = tmp_path / "copy.ndjson"
    save_documents(documents, out)
    assert load_documents(out) == documents


def test_load_documents_rejects_unknown_kind(tmp_path):
    path = tmp_path / "docs.ndjson"
    _write_lines(path, [{"id": "d1", "kind": "book", "label": "X", "text": "t"}])
    with pytest.raises(ValidationError) as excinfo:
        load_documents(path)
    assert "book" in str(excinfo.value)


def test_load_documents_rejects_empty_label_and_duplicate_id(tmp_path):
    path = tmp_path / "docs.ndjson"
    _write_lines(path, [{"id": "d1", "kind": "wikipedia", "label": "", "text": "t"}])
    with pytest.raises(ValidationError):
        load_documents(path)
    _write_lines(
        path,
        [
            {"id": "d1", "kind": "wikipedia", "label": "X", "text": "t"},
            {"id": "d1", "kind": "wikipedia", "label": "Y", "text": "t"},
        ],
    )
    with pytest.raises(ValidationError) as excinfo:
        load_documents(path)
    assert "d1" in str(excinfo.value)


def test_empty_file_loads_empty_list(tmp_path):
    path = tmp_path / "empty.ndjson"
    path.write_text("")
    assert load_questions(path) == []
    assert load_documents(path) == []


def test_blank_lines_are_skipped(tmp_path):
    path = tmp_path / "questions.ndjson"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n")
        fh.write(json.dumps({"id": "q1", "text": "ok then", "answer": "A"}) + "\n")
        fh.write("\n")
    assert len(load_questions(path)) == 1
