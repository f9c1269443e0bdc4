"""Command line entry points.

    coopquiz synth     generate a synthetic question/document pack
    coopquiz ingest    build a retrieval index from question and document files
    coopquiz simulate  play synthetic games and append their records
    coopquiz analyze   fit the regression and emit coefficient/buzz CSVs
    coopquiz serve     run the realtime room server

The simulate config is a JSON file with paths (relative to the config file),
player profiles, and planted effects:

    {
      "questions": "questions.ndjson",
      "documents": "documents.ndjson",
      "stopword_count": 50,
      "profiles": [{"id": "e00", "skill": 0.3, "trust": 0.1,
                    "aggressiveness": 0.5, "group": "expert"}],
      "planted": {"correctness_logodds": {"guesses": 0.5},
                  "buzz_shift": {"highlight": -0.1}},
      "params": {"correctness_sampling": "stratified"}
    }

Instead of an explicit "profiles" list, "profile_defaults" may give
{"count": 30, "group": "expert", "seed": 1, "trust": 0.0} to generate one.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .analysis import AnalysisError, Hyperparams, run_analysis
from .corpus import CorpusError, load_documents, load_questions, save_documents, save_questions
from .engine import save_event_log
from .guesser import GuesserError, build_index, load_index, save_index
from .logstore import LogStore, RecordError, StorageError
from .sampler import DuplicateAssignmentError
from .simulation import PlantedEffects, SimPlayerProfile, default_profiles, simulate, synthetic_pack


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coopquiz", description="cooperative quizbowl toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic question/document pack")
    synth.add_argument("--questions-out", required=True)
    synth.add_argument("--documents-out", required=True)
    synth.add_argument("--n-questions", type=int, default=160)
    synth.add_argument("--n-labels", type=int, default=40)
    synth.add_argument("--seed", type=int, default=0)
    synth.set_defaults(func=cmd_synth)

    ingest = sub.add_parser("ingest", help="build a retrieval index")
    ingest.add_argument("--questions", required=True)
    ingest.add_argument("--documents", required=True)
    ingest.add_argument("--out", required=True)
    ingest.add_argument("--stopword-count", type=int, default=50)
    ingest.set_defaults(func=cmd_ingest)

    sim = sub.add_parser("simulate", help="run synthetic games and record them")
    sim.add_argument("--config", required=True)
    sim.add_argument("--seed", type=int, required=True)
    sim.add_argument("--out", required=True)
    sim.add_argument("--event-logs", help="directory for a sample of game event logs")
    sim.add_argument("--event-log-limit", type=int, default=25)
    sim.set_defaults(func=cmd_simulate)

    analyze = sub.add_parser("analyze", help="fit the regression and emit CSVs")
    analyze.add_argument("--records", required=True)
    analyze.add_argument("--group", required=True, choices=("expert", "novice"))
    analyze.add_argument("--no-buzz-feature", action="store_true")
    analyze.add_argument("--out", required=True)
    analyze.add_argument("--learning-rate", type=float, default=1.0)
    analyze.add_argument("--epochs", type=int, default=4000)
    analyze.add_argument("--l2", type=float, default=1e-4)
    analyze.set_defaults(func=cmd_analyze)

    serve = sub.add_parser("serve", help="run the realtime room server")
    serve.add_argument("--index", required=True)
    serve.add_argument("--questions", required=True)
    serve.add_argument("--port", type=int, required=True)
    serve.add_argument("--mode", required=True, choices=("novice", "expert"))
    serve.add_argument("--seed", type=int, required=True)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--records", help="append game records to this store")
    serve.add_argument("--logs-dir", help="persist per-room message and game logs here")
    serve.set_defaults(func=cmd_serve)

    return parser


def cmd_synth(args) -> int:
    questions, documents = synthetic_pack(
        n_questions=args.n_questions, n_labels=args.n_labels, seed=args.seed
    )
    save_questions(questions, args.questions_out)
    save_documents(documents, args.documents_out)
    print(f"wrote {len(questions)} questions to {args.questions_out}")
    print(f"wrote {len(documents)} documents to {args.documents_out}")
    return 0


def cmd_ingest(args) -> int:
    questions = load_questions(args.questions)
    documents = load_documents(args.documents)
    index = build_index(documents, stopword_count=args.stopword_count)
    labels = set(index.labels)
    unanswerable = sum(1 for q in questions if q.answer not in labels)
    if unanswerable:
        print(
            f"warning: {unanswerable} of {len(questions)} questions have answers "
            "with no documents; the guesser can never rank them",
            file=sys.stderr,
        )
    save_index(index, args.out)
    print(
        f"indexed {index.doc_count} documents ({len(index.labels)} labels, "
        f"{len(index.stopwords)} stopwords) to {args.out}"
    )
    return 0


def _load_sim_config(path: Path):
    cfg = json.loads(path.read_text(encoding="utf-8"))
    base = path.parent
    questions = load_questions(base / cfg["questions"])
    documents = load_documents(base / cfg["documents"])
    index = build_index(documents, stopword_count=int(cfg.get("stopword_count", 50)))
    if "profiles" in cfg:
        profiles = [SimPlayerProfile(**p) for p in cfg["profiles"]]
    elif "profile_defaults" in cfg:
        profiles = default_profiles(**cfg["profile_defaults"])
    else:
        raise ValueError("config needs either 'profiles' or 'profile_defaults'")
    planted_cfg = cfg.get("planted", {})
    planted = PlantedEffects(
        correctness_logodds=dict(planted_cfg.get("correctness_logodds", {})),
        buzz_shift=dict(planted_cfg.get("buzz_shift", {})),
    )
    return questions, index, profiles, planted, dict(cfg.get("params", {}))


def cmd_simulate(args) -> int:
    questions, index, profiles, planted, params = _load_sim_config(Path(args.config))
    sink = None
    if args.event_logs:
        log_dir = Path(args.event_logs)
        log_dir.mkdir(parents=True, exist_ok=True)
        kept = []

        def sink(log):
            if len(kept) < args.event_log_limit:
                save_event_log(log, log_dir / f"{len(kept):05d}-{log.question_id}.ndjson")
                kept.append(log.question_id)

    records = simulate(
        questions, index, profiles, planted, seed=args.seed, event_log_sink=sink, **params
    )
    store = LogStore(args.out)
    store.append_many(records)
    correct = sum(r.correct for r in records)
    print(
        f"simulated {len(records)} games ({len(profiles)} players x {len(questions)} questions), "
        f"{correct / len(records):.1%} correct, appended to {args.out}"
    )
    return 0


def cmd_analyze(args) -> int:
    records = LogStore(args.records).read_all()
    hyperparams = Hyperparams(learning_rate=args.learning_rate, epochs=args.epochs, l2=args.l2)
    result, effects, _ = run_analysis(
        records,
        args.group,
        args.out,
        hyperparams,
        include_buzz_feature=not args.no_buzz_feature,
    )
    print(f"fit {args.group} model on {sum(1 for r in records if r.group == args.group)} records")
    for name, coef in sorted(result.combo_coefficients().items()):
        print(f"  combo {name}: {coef:+.3f}")
    for name, gain in sorted(effects.items()):
        print(f"  gain/loss {name}: {gain:+.3f}")
    print(f"wrote CSVs to {args.out}")
    return 0


def build_serve_app(args):
    from .service import create_app

    index = load_index(args.index)
    questions = load_questions(args.questions)
    return create_app(
        index,
        questions,
        records_store=LogStore(args.records) if args.records else None,
        message_log_dir=args.logs_dir,
        default_mode=args.mode,
        default_seed=args.seed,
    )


def cmd_serve(args) -> int:
    import uvicorn

    app = build_serve_app(args)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (
        CorpusError,
        GuesserError,
        StorageError,
        RecordError,
        AnalysisError,
        DuplicateAssignmentError,
        ValueError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
