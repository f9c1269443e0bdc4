import csv
import json

import pytest
from fastapi.testclient import TestClient

from coopquiz.cli import build_parser, build_serve_app, main
from coopquiz.corpus import load_documents, load_questions
from coopquiz.engine import load_event_log
from coopquiz.guesser import load_index
from coopquiz.logstore import LogStore


@pytest.fixture(scope="module")
def pack_files(tmp_path_factory):
    base = tmp_path_factory.mktemp("pack")
    q_path, d_path = base / "questions.ndjson", base / "documents.ndjson"
    rc = main(
        [
            "synth",
            "--questions-out", str(q_path),
            "--documents-out", str(d_path),
            "--n-questions", "16",
            "--n-labels", "6",
            "--seed", "5",
        ]
    )
    assert rc == 0
    return base, q_path, d_path


def sim_config(base, q_path, d_path, **overrides):
    cfg = {
        "questions": q_path.name,
        "documents": d_path.name,
        "stopword_count": 50,
        "profile_defaults": {"count": 3, "group": "expert", "seed": 2},
        "planted": {"correctness_logodds": {"guesses": 0.4}},
    }
    cfg.update(overrides)
    path = base / "sim.json"
    path.write_text(json.dumps(cfg))
    return path


def test_synth_outputs_load_cleanly(pack_files):
    _, q_path, d_path = pack_files
    questions = load_questions(q_path)
    documents = load_documents(d_path)
    assert len(questions) == 16
    assert {q.answer for q in questions} <= {d.label for d in documents}


def test_ingest_builds_loadable_index(pack_files, tmp_path, capsys):
    _, q_path, d_path = pack_files
    out = tmp_path / "index.json"
    rc = main(["ingest", "--questions", str(q_path), "--documents", str(d_path), "--out", str(out)])
    assert rc == 0
    assert "indexed" in capsys.readouterr().out
    index = load_index(out)
    assert index.doc_count == len(load_documents(d_path))


def test_ingest_warns_on_unanswerable_questions(pack_files, tmp_path, capsys):
    base, q_path, d_path = pack_files
    odd = tmp_path / "odd.ndjson"
    lines = q_path.read_text().splitlines()
    record = json.loads(lines[0])
    record["id"], record["answer"] = "q_orphan", "No_Such_Label"
    odd.write_text("\n".join(lines + [json.dumps(record)]) + "\n")
    rc = main(["ingest", "--questions", str(odd), "--documents", str(d_path), "--out", str(tmp_path / "i.json")])
    assert rc == 0
    assert "1 of 17 questions" in capsys.readouterr().err


def test_ingest_reports_missing_file(tmp_path, capsys):
    rc = main(
        [
            "ingest",
            "--questions", str(tmp_path / "absent.ndjson"),
            "--documents", str(tmp_path / "absent2.ndjson"),
            "--out", str(tmp_path / "i.json"),
        ]
    )
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_simulate_writes_records_and_event_logs(pack_files, tmp_path):
    base, q_path, d_path = pack_files
    cfg = sim_config(base, q_path, d_path)
    out = tmp_path / "records.ndjson"
    logs = tmp_path / "logs"
    rc = main(
        [
            "simulate",
            "--config", str(cfg),
            "--seed", "7",
            "--out", str(out),
            "--event-logs", str(logs),
            "--event-log-limit", "5",
        ]
    )
    assert rc == 0
    records = LogStore(out).read_all()
    assert len(records) == 16 * 3
    saved = sorted(logs.iterdir())
    assert len(saved) == 5
    log = load_event_log(saved[0])
    assert log.question_id.startswith("q")


def test_simulate_is_deterministic_per_seed(pack_files, tmp_path):
    base, q_path, d_path = pack_files
    cfg = sim_config(base, q_path, d_path)
    a, b = tmp_path / "a.ndjson", tmp_path / "b.ndjson"
    assert main(["simulate", "--config", str(cfg), "--seed", "3", "--out", str(a)]) == 0
    assert main(["simulate", "--config", str(cfg), "--seed", "3", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_simulate_rejects_config_without_profiles(pack_files, tmp_path, capsys):
    base, q_path, d_path = pack_files
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"questions": str(q_path), "documents": str(d_path)}))
    rc = main(["simulate", "--config", str(cfg), "--seed", "1", "--out", str(tmp_path / "r.ndjson")])
    assert rc == 1
    assert "profiles" in capsys.readouterr().err


def test_analyze_emits_csvs(pack_files, tmp_path, capsys):
    base, q_path, d_path = pack_files
    cfg = sim_config(base, q_path, d_path)
    records_path = tmp_path / "records.ndjson"
    assert main(["simulate", "--config", str(cfg), "--seed", "2", "--out", str(records_path)]) == 0
    out_dir = tmp_path / "analysis"
    rc = main(
        [
            "analyze",
            "--records", str(records_path),
            "--group", "expert",
            "--out", str(out_dir),
            "--epochs", "200",
        ]
    )
    assert rc == 0
    output = capsys.readouterr().out
    assert "combo guesses:" in output
    with open(out_dir / "coefficients.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["feature", "coefficient"]
    assert rows[1][0] == "bias"
    for name in ("combo_effects.csv", "buzz_stats.csv", "histograms.csv"):
        assert (out_dir / name).exists()


def test_analyze_fails_cleanly_when_group_empty(pack_files, tmp_path, capsys):
    base, q_path, d_path = pack_files
    cfg = sim_config(base, q_path, d_path)
    records_path = tmp_path / "records.ndjson"
    assert main(["simulate", "--config", str(cfg), "--seed", "2", "--out", str(records_path)]) == 0
    rc = main(["analyze", "--records", str(records_path), "--group", "novice", "--out", str(tmp_path / "x")])
    assert rc == 1
    assert "novice" in capsys.readouterr().err


def test_serve_app_builds_from_artifacts(pack_files, tmp_path):
    base, q_path, d_path = pack_files
    index_path = tmp_path / "index.json"
    assert main(["ingest", "--questions", str(q_path), "--documents", str(d_path), "--out", str(index_path)]) == 0
    args = build_parser().parse_args(
        [
            "serve",
            "--index", str(index_path),
            "--questions", str(q_path),
            "--port", "8100",
            "--mode", "novice",
            "--seed", "9",
        ]
    )
    app = build_serve_app(args)
    with TestClient(app) as client:
        created = client.post("/rooms", json={"question_count": 1}).json()
        assert created["mode"] == "novice"
        assert client.get(f"/rooms/{created['room']}").json()["status"] == "lobby"


def test_unknown_command_exits_with_usage_error():
    with pytest.raises(SystemExit) as excinfo:
        main(["frobnicate"])
    assert excinfo.value.code == 2
