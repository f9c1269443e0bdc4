"""Feature extraction, gradient descent fitting, combo effects, buzz stats."""

import csv
import math
import random

import numpy as np
import pytest
from scipy import sparse

from coopquiz.analysis import (
    AnalysisError,
    BuzzCell,
    DivergenceError,
    FitResult,
    Hyperparams,
    buzz_stats,
    combo_effects,
    extract_features,
    fit,
    fit_feature_vectors,
    loss_and_gradient,
    predict_proba,
    run_analysis,
    vectorize,
)
from coopquiz.analysis import FeatureVector
from coopquiz.interpretations import ALL_COMBOS, NON_NULL_COMBOS, ConditionCombo
from coopquiz.logstore import GameRecord


def make_record(**overrides) -> GameRecord:
    base = dict(
        player_id="p1",
        question_id="q1",
        group="novice",
        combo=ConditionCombo(),
        buzz_position_frac=0.5,
        answered=True,
        correct=False,
        points=-5,
        active_players=1,
        top_active_accuracy=0.0,
        guess_shown="",
        timestamp=0.0,
    )
    base.update(overrides)
    return GameRecord(**base)


def test_extract_features_null_combo_has_no_combo_indicators():
    vec = extract_features(make_record(), "novice")
    assert not any(name.startswith("combo:") for name in vec.features)
    assert vec.features["player:p1"] == 1.0
    assert vec.features["question:q1"] == 1.0
    assert vec.features["buzz_position_frac"] == 0.5
    assert vec.label == 0


def test_extract_features_multi_combo_is_a_single_indicator():
    record = make_record(combo=ConditionCombo(guesses=True, evidence=True))
    vec = extract_features(record, "novice")
    combo_names = [n for n in vec.features if n.startswith("combo:")]
    assert combo_names == ["combo:guesses+evidence"]


def test_extract_features_expert_only_columns():
    novice = extract_features(make_record(), "novice")
    assert "active_players" not in novice.features
    assert "top_active_accuracy" not in novice.features
    expert = extract_features(
        make_record(group="expert", active_players=4, top_active_accuracy=0.7), "expert"
    )
    assert expert.features["active_players"] == 4.0
    assert expert.features["top_active_accuracy"] == 0.7


def test_extract_features_group_mismatch_rejected():
    with pytest.raises(AnalysisError):
        extract_features(make_record(group="expert"), "novice")
    with pytest.raises(AnalysisError):
        extract_features(make_record(), "elsewhere")


def test_extract_features_buzz_flag():
    vec = extract_features(make_record(), "novice", include_buzz_feature=False)
    assert "buzz_position_frac" not in vec.features


def test_gradient_matches_central_finite_differences():
    rng = np.random.default_rng(7)
    for _ in range(50):
        m = int(rng.integers(5, 40))
        d = int(rng.integers(2, 9))
        dense = rng.normal(size=(m, d)) * (rng.random(size=(m, d)) < 0.6)
        matrix = sparse.csr_matrix(dense)
        labels = (rng.random(m) < 0.5).astype(np.float64)
        weights = rng.normal(scale=0.8, size=d)
        bias = float(rng.normal())
        l2 = float(rng.choice([0.0, 1e-3, 0.1]))
        _, grad_w, grad_b = loss_and_gradient(matrix, labels, weights, bias, l2)
        h = 1e-5

        def loss_at(w, b):
            value, _, _ = loss_and_gradient(matrix, labels, w, b, l2)
            return value

        for j in range(d):
            bump = np.zeros(d)
            bump[j] = h
            fd = (loss_at(weights + bump, bias) - loss_at(weights - bump, bias)) / (2 * h)
            denom = max(abs(fd), abs(grad_w[j]), 1e-8)
            assert abs(fd - grad_w[j]) / denom < 1e-6
        fd_b = (loss_at(weights, bias + h) - loss_at(weights, bias - h)) / (2 * h)
        assert abs(fd_b - grad_b) / max(abs(fd_b), abs(grad_b), 1e-8) < 1e-6


def test_loss_is_monotone_under_small_steps():
    rng = random.Random(11)
    records = [
        make_record(
            player_id=f"p{rng.randint(0, 4)}",
            question_id=f"q{i % 12}",
            combo=rng.choice(ALL_COMBOS),
            buzz_position_frac=rng.random(),
            correct=(c := rng.random() < 0.5),
            answered=True,
            points=10 if c else -5,
        )
        for i in range(300)
    ]
    result = fit(records, "novice", Hyperparams(learning_rate=0.05, epochs=400), record_loss=True)
    diffs = np.diff(np.asarray(result.loss_history))
    assert (diffs <= 1e-12).all()


def test_uniform_labels_push_bias_not_combos():
    records = [
        make_record(
            question_id=f"q{i}",
            combo=ALL_COMBOS[i % 8],
            correct=True,
            answered=True,
            points=10,
        )
        for i in range(160)
    ]
    result = fit(records, "novice", Hyperparams(learning_rate=0.5, epochs=500))
    assert result.bias > 2.0
    for name, value in result.combo_coefficients().items():
        assert abs(value) < 0.05, name


PLANTED = {
    "guesses": 0.5,
    "highlight": -0.4,
    "evidence": 0.35,
    "guesses+highlight": 0.8,
    "guesses+evidence": -0.6,
    "highlight+evidence": 0.45,
    "guesses+highlight+evidence": -0.35,
}


def _systematic_draw(acc: dict, key, p: float, rng: random.Random) -> bool:
    """Madow systematic sampling: exact per-record marginals, tiny variance."""
    state = acc.get(key)
    if state is None:
        state = rng.random()
    before = state
    state += p
    acc[key] = state
    return math.floor(state) != math.floor(before)


def test_fit_recovers_planted_coefficients_at_scale():
    rng = random.Random(23)
    n_records = 50000
    players = [f"p{i}" for i in range(20)]
    questions = [f"q{i}" for i in range(40)]
    player_eff = {p: rng.gauss(0, 0.6) for p in players}
    question_eff = {q: rng.gauss(0, 0.8) for q in questions}
    bias, buzz_coef = -0.3, 1.2
    acc: dict = {}
    records = []
    for i in range(n_records):
        player = players[i % len(players)]
        question = questions[(i // len(players)) % len(questions)]
        combo = ALL_COMBOS[rng.randrange(8)]
        frac = round(rng.uniform(0.05, 1.0), 4)
        logit = (
            bias
            + player_eff[player]
            + question_eff[question]
            + buzz_coef * frac
            + (0.0 if combo.is_null else PLANTED[combo.name])
        )
        p = 1.0 / (1.0 + math.exp(-logit))
        correct = _systematic_draw(acc, combo.name, p, rng)
        records.append(
            make_record(
                player_id=player,
                question_id=question,
                combo=combo,
                buzz_position_frac=frac,
                answered=True,
                correct=correct,
                points=10 if correct else -5,
                timestamp=float(i),
            )
        )
    result = fit(records, "novice")
    recovered = result.combo_coefficients()
    for name, planted in PLANTED.items():
        assert recovered[name] == pytest.approx(planted, abs=0.05), name
    assert result.coefficients["buzz_position_frac"] == pytest.approx(buzz_coef, abs=0.15)


def test_doubling_l2_never_grows_the_weight_norm():
    rng = random.Random(31)
    records = [
        make_record(
            player_id=f"p{rng.randint(0, 3)}",
            question_id=f"q{i % 10}",
            combo=rng.choice(ALL_COMBOS),
            buzz_position_frac=rng.random(),
            correct=(c := rng.random() < 0.4),
            answered=True,
            points=10 if c else -5,
        )
        for i in range(400)
    ]

    def norm(l2):
        result = fit(records, "novice", Hyperparams(learning_rate=0.3, epochs=3000, l2=l2))
        return math.sqrt(sum(v * v for v in result.coefficients.values()))

    norms = [norm(l2) for l2 in (0.001, 0.002, 0.004, 0.008)]
    for lighter, heavier in zip(norms, norms[1:]):
        assert heavier <= lighter + 1e-9


def test_predictions_ignore_feature_insertion_order():
    forward = [FeatureVector({"a": 1.0, "b": 2.0, "c": 0.5}, 1), FeatureVector({"a": 0.5, "c": 1.0}, 0)]
    backward = [FeatureVector({"c": 0.5, "b": 2.0, "a": 1.0}, 1), FeatureVector({"c": 1.0, "a": 0.5}, 0)]
    hp = Hyperparams(learning_rate=0.2, epochs=200)
    first, second = fit_feature_vectors(forward, hp), fit_feature_vectors(backward, hp)
    assert first.coefficients == second.coefficients
    assert first.bias == second.bias
    probe = {"b": 2.0, "a": 1.0, "c": 0.5}
    assert predict_proba(first, probe) == predict_proba(second, dict(reversed(list(probe.items()))))


def test_vectorize_columns_are_sorted_names():
    matrix, labels, names = vectorize([FeatureVector({"z": 1.0, "a": 2.0}, 1)])
    assert names == ["a", "z"]
    assert matrix.toarray().tolist() == [[2.0, 1.0]]
    assert labels.tolist() == [1.0]


def test_divergence_is_reported_with_the_learning_rate():
    records = [
        make_record(
            question_id=f"q{i}",
            buzz_position_frac=(i + 1) / 20,
            correct=i % 3 == 0,
            points=10 if i % 3 == 0 else -5,
        )
        for i in range(20)
    ]
    with np.errstate(over="ignore", invalid="ignore"), pytest.raises(DivergenceError) as excinfo:
        fit(records, "novice", Hyperparams(learning_rate=1e150, epochs=8))
    assert "1e+150" in str(excinfo.value)


def test_fit_rejects_empty_records():
    with pytest.raises(AnalysisError):
        fit([], "novice")
    with pytest.raises(ValueError):
        Hyperparams(learning_rate=-1).validate()
    with pytest.raises(ValueError):
        Hyperparams(epochs=0).validate()


def test_combo_effects_match_arithmetic_sum_definition():
    coefficients = {f"combo:{c.name}": 0.0 for c in NON_NULL_COMBOS}
    coefficients.update(
        {
            "combo:highlight": 0.2,
            "combo:evidence": 0.1,
            "combo:highlight+evidence": 0.5,
            "combo:guesses": 0.1,
            "combo:guesses+evidence": 0.05,
        }
    )
    result = FitResult(coefficients=coefficients, bias=0.0, hyperparams=Hyperparams(), final_loss=0.0)
    effects = combo_effects(result)
    assert effects["highlight+evidence"] == pytest.approx(0.2)
    assert effects["guesses+evidence"] == pytest.approx(-0.15)
    assert effects["guesses+highlight"] == pytest.approx(-0.3)
    assert effects["guesses+highlight+evidence"] == pytest.approx(-0.4)


def test_combo_effects_triple_uses_all_three_components():
    coefficients = {
        "combo:guesses": 0.1,
        "combo:highlight": 0.2,
        "combo:evidence": 0.3,
        "combo:guesses+highlight": 0.0,
        "combo:guesses+evidence": 0.0,
        "combo:highlight+evidence": 0.0,
        "combo:guesses+highlight+evidence": 1.0,
    }
    result = FitResult(coefficients=coefficients, bias=0.0, hyperparams=Hyperparams(), final_loss=0.0)
    assert combo_effects(result)["guesses+highlight+evidence"] == pytest.approx(1.0 - 0.6)


def test_combo_effects_scale_linearly_with_coefficients():
    rng = random.Random(41)
    coefficients = {f"combo:{c.name}": rng.uniform(-1, 1) for c in NON_NULL_COMBOS}
    base = FitResult(coefficients=coefficients, bias=0.0, hyperparams=Hyperparams(), final_loss=0.0)
    scaled = FitResult(
        coefficients={k: 3.5 * v for k, v in coefficients.items()},
        bias=0.0,
        hyperparams=Hyperparams(),
        final_loss=0.0,
    )
    base_effects, scaled_effects = combo_effects(base), combo_effects(scaled)
    for name in base_effects:
        assert scaled_effects[name] == pytest.approx(3.5 * base_effects[name])


def test_combo_effects_requires_every_combo_coefficient():
    result = FitResult(coefficients={"combo:guesses": 0.1}, bias=0.0, hyperparams=Hyperparams(), final_loss=0.0)
    with pytest.raises(AnalysisError) as excinfo:
        combo_effects(result)
    assert "highlight" in str(excinfo.value)


def test_buzz_stats_means_and_empty_cells():
    records = [
        make_record(combo=ConditionCombo(highlight=True), buzz_position_frac=0.2),
        make_record(
            question_id="q2", combo=ConditionCombo(highlight=True), buzz_position_frac=0.4
        ),
        make_record(question_id="q3", combo=ConditionCombo(), buzz_position_frac=0.8),
    ]
    stats = buzz_stats(records)
    assert stats.flag_means[("novice", "highlight", True)] == BuzzCell(2, pytest.approx(0.3))
    assert stats.flag_means[("novice", "highlight", False)] == BuzzCell(1, pytest.approx(0.8))
    assert stats.flag_means[("novice", "evidence", True)] == BuzzCell(0, None)
    assert stats.flag_means[("expert", "guesses", True)] == BuzzCell(0, None)
    assert stats.combo_means[("novice", "highlight")].count == 2


def test_buzz_stats_ignore_records_that_never_buzzed():
    records = [
        make_record(buzz_position_frac=0.5),
        make_record(question_id="q2", answered=False, correct=False, points=0, buzz_position_frac=1.0),
    ]
    stats = buzz_stats(records)
    assert stats.flag_means[("novice", "guesses", False)] == BuzzCell(1, pytest.approx(0.5))


def test_buzz_stats_histograms_split_correct_and_wrong():
    records = [
        make_record(buzz_position_frac=0.03, correct=True, points=10),
        make_record(question_id="q2", buzz_position_frac=0.07, correct=False),
        make_record(question_id="q3", buzz_position_frac=1.0, correct=True, points=10),
    ]
    stats = buzz_stats(records)
    hist = stats.histograms["novice"]
    assert hist["correct"][0] == 1  # 0.03 -> [0.00, 0.05)
    assert hist["wrong"][1] == 1  # 0.07 -> [0.05, 0.10)
    assert hist["correct"][19] == 1  # 1.0 lands in the final bin
    assert sum(hist["correct"]) + sum(hist["wrong"]) == 3


def test_run_analysis_emits_csv_set(tmp_path):
    rng = random.Random(43)
    records = []
    for i in range(400):
        correct = rng.random() < 0.5
        records.append(
            make_record(
                player_id=f"p{rng.randint(0, 5)}",
                question_id=f"q{i % 25}",
                combo=rng.choice(ALL_COMBOS),
                buzz_position_frac=round(rng.uniform(0.05, 1.0), 3),
                correct=correct,
                points=10 if correct else -5,
            )
        )
    result, effects, stats = run_analysis(
        records, "novice", tmp_path, Hyperparams(learning_rate=0.3, epochs=300)
    )
    for name in ("coefficients.csv", "combo_effects.csv", "buzz_stats.csv", "histograms.csv"):
        assert (tmp_path / name).exists()
    with open(tmp_path / "coefficients.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["feature", "coefficient"]
    assert rows[1][0] == "bias"
    assert float(rows[1][1]) == result.bias
    by_name = {row[0]: row[1] for row in rows[2:]}
    for c in NON_NULL_COMBOS:
        assert float(by_name[f"combo:{c.name}"]) == result.coefficients[f"combo:{c.name}"]
    with open(tmp_path / "combo_effects.csv", newline="") as fh:
        effect_rows = {row[0]: float(row[1]) for row in list(csv.reader(fh))[1:]}
    assert effect_rows == pytest.approx(effects)
    with pytest.raises(AnalysisError):
        run_analysis(records, "expert", tmp_path)
