"""Regression analysis of gameplay records.

Per-record features follow the study design: one indicator per non-null
condition combo (the null condition is absorbed by the bias), one indicator
per player and per question, the buzzing position as a fraction of question
length, and, for the expert group only, the number of active players and the
top active player's running accuracy. A logistic model is fit by full-batch
gradient descent with L2 on the non-bias weights. Combo gain/loss compares a
multi-interpretation coefficient against the arithmetic sum of its components.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.special import expit

from .interpretations import MULTI_COMBOS, NON_NULL_COMBOS
from .logstore import GROUPS, GameRecord

COMBO_FEATURES = tuple(f"combo:{c.name}" for c in NON_NULL_COMBOS)


class AnalysisError(Exception):
    pass


class DivergenceError(AnalysisError):
    pass


@dataclass(frozen=True)
class Hyperparams:
    learning_rate: float = 1.0
    epochs: int = 4000
    l2: float = 1e-4
    seed: int = 0

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.l2 < 0:
            raise ValueError("l2 strength cannot be negative")


@dataclass(frozen=True)
class FeatureVector:
    features: dict[str, float]
    label: int


@dataclass
class FitResult:
    coefficients: dict[str, float]
    bias: float
    hyperparams: Hyperparams
    final_loss: float
    loss_history: list[float] = field(default_factory=list)

    def combo_coefficients(self) -> dict[str, float]:
        return {
            name.removeprefix("combo:"): value
            for name, value in self.coefficients.items()
            if name.startswith("combo:")
        }


def extract_features(record: GameRecord, setting: str, include_buzz_feature: bool = True) -> FeatureVector:
    if setting not in GROUPS:
        raise AnalysisError(f"unknown setting {setting!r}")
    if record.group != setting:
        raise AnalysisError(f"record group {record.group!r} does not match setting {setting!r}")
    features: dict[str, float] = {}
    if not record.combo.is_null:
        features[f"combo:{record.combo.name}"] = 1.0
    features[f"player:{record.player_id}"] = 1.0
    features[f"question:{record.question_id}"] = 1.0
    if include_buzz_feature:
        features["buzz_position_frac"] = record.buzz_position_frac
    if setting == "expert":
        features["active_players"] = float(record.active_players)
        features["top_active_accuracy"] = record.top_active_accuracy
    return FeatureVector(features=features, label=1 if record.correct else 0)


def vectorize(vectors: Sequence[FeatureVector]) -> tuple[sparse.csr_matrix, np.ndarray, list[str]]:
    """Canonical design matrix: feature columns in sorted-name order."""
    names = sorted({name for vec in vectors for name in vec.features})
    index = {name: i for i, name in enumerate(names)}
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for vec in vectors:
        for name in sorted(vec.features):
            indices.append(index[name])
            data.append(vec.features[name])
        indptr.append(len(indices))
    matrix = sparse.csr_matrix(
        (np.asarray(data), np.asarray(indices, dtype=np.int32), np.asarray(indptr, dtype=np.int32)),
        shape=(len(vectors), len(names)),
    )
    labels = np.asarray([vec.label for vec in vectors], dtype=np.float64)
    return matrix, labels, names


def loss_and_gradient(
    matrix: sparse.csr_matrix,
    labels: np.ndarray,
    weights: np.ndarray,
    bias: float,
    l2: float,
) -> tuple[float, np.ndarray, float]:
    """Mean logistic loss with L2 on the weights, and its analytic gradient."""
    m = matrix.shape[0]
    z = matrix @ weights + bias
    # log(1 + e^z) - y z, computed stably
    loss = float(np.mean(np.logaddexp(0.0, z) - labels * z) + 0.5 * l2 * np.dot(weights, weights))
    error = expit(z) - labels
    grad_w = (matrix.T @ error) / m + l2 * weights
    grad_b = float(np.mean(error))
    return loss, grad_w, grad_b


def fit_feature_vectors(
    vectors: Sequence[FeatureVector],
    hyperparams: Hyperparams | None = None,
    record_loss: bool = False,
) -> FitResult:
    if not vectors:
        raise AnalysisError("cannot fit on an empty record set")
    hp = hyperparams or Hyperparams()
    hp.validate()
    matrix, labels, names = vectorize(vectors)
    weights = np.zeros(len(names))
    # Warm-start the bias at the base rate; a free constant-only head start.
    base = min(max(float(labels.mean()), 1e-6), 1.0 - 1e-6)
    bias = math.log(base / (1.0 - base))
    m = matrix.shape[0]
    history: list[float] = []
    for _ in range(hp.epochs):
        z = matrix @ weights + bias
        if record_loss:
            history.append(
                float(np.mean(np.logaddexp(0.0, z) - labels * z) + 0.5 * hp.l2 * np.dot(weights, weights))
            )
        error = expit(z) - labels
        weights -= hp.learning_rate * ((matrix.T @ error) / m + hp.l2 * weights)
        bias -= hp.learning_rate * float(np.mean(error))
    final_loss, _, _ = loss_and_gradient(matrix, labels, weights, bias, hp.l2)
    if not (np.isfinite(final_loss) and np.isfinite(weights).all() and np.isfinite(bias)):
        raise DivergenceError(f"training diverged at learning rate {hp.learning_rate}")
    return FitResult(
        coefficients={name: float(w) for name, w in zip(names, weights)},
        bias=float(bias),
        hyperparams=hp,
        final_loss=final_loss,
        loss_history=history,
    )


def fit(
    records: Sequence[GameRecord],
    setting: str,
    hyperparams: Hyperparams | None = None,
    include_buzz_feature: bool = True,
    record_loss: bool = False,
) -> FitResult:
    vectors = [extract_features(r, setting, include_buzz_feature=include_buzz_feature) for r in records]
    return fit_feature_vectors(vectors, hyperparams, record_loss=record_loss)


def predict_proba(result: FitResult, features: dict[str, float]) -> float:
    z = result.bias + sum(result.coefficients.get(name, 0.0) * value for name, value in features.items())
    return float(expit(z))


def combo_effects(result: FitResult) -> dict[str, float]:
    """Gain (positive) or loss (negative) of each multi-interpretation combo
    relative to the arithmetic sum of its components' coefficients."""
    coefs = result.coefficients
    missing = [name for name in COMBO_FEATURES if name not in coefs]
    if missing:
        raise AnalysisError(f"fit is missing combo coefficients: {', '.join(missing)}")
    effects = {}
    for combo in MULTI_COMBOS:
        parts = combo.name.split("+")
        effects[combo.name] = coefs[f"combo:{combo.name}"] - sum(coefs[f"combo:{part}"] for part in parts)
    return effects


@dataclass(frozen=True)
class BuzzCell:
    count: int
    mean: float | None


@dataclass
class BuzzStats:
    """Buzz-position summaries over answered records only: a record where the
    player never buzzed has no buzzing position, so it joins no cell."""

    flag_means: dict[tuple[str, str, bool], BuzzCell]
    combo_means: dict[tuple[str, str], BuzzCell]
    histograms: dict[str, dict[str, list[int]]]
    bin_edges: list[float]


HISTOGRAM_BINS = 20


def _cell(values: list[float]) -> BuzzCell:
    if not values:
        return BuzzCell(count=0, mean=None)
    return BuzzCell(count=len(values), mean=sum(values) / len(values))


def buzz_stats(records: Iterable[GameRecord]) -> BuzzStats:
    answered = [r for r in records if r.answered]
    edges = [i / HISTOGRAM_BINS for i in range(HISTOGRAM_BINS + 1)]
    flag_means = {}
    combo_means: dict[tuple[str, str], BuzzCell] = {}
    histograms: dict[str, dict[str, list[int]]] = {}
    for group in GROUPS:
        group_records = [r for r in answered if r.group == group]
        for flag in ("guesses", "highlight", "evidence"):
            for state in (True, False):
                values = [
                    r.buzz_position_frac for r in group_records if getattr(r.combo, flag) is state
                ]
                flag_means[(group, flag, state)] = _cell(values)
        combos = sorted({r.combo.name for r in group_records})
        for combo_name in combos:
            values = [r.buzz_position_frac for r in group_records if r.combo.name == combo_name]
            combo_means[(group, combo_name)] = _cell(values)
        counts = {"correct": [0] * HISTOGRAM_BINS, "wrong": [0] * HISTOGRAM_BINS}
        for r in group_records:
            bin_index = min(int(r.buzz_position_frac * HISTOGRAM_BINS), HISTOGRAM_BINS - 1)
            counts["correct" if r.correct else "wrong"][bin_index] += 1
        histograms[group] = counts
    return BuzzStats(flag_means=flag_means, combo_means=combo_means, histograms=histograms, bin_edges=edges)


def write_coefficients_csv(result: FitResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "coefficient"])
        writer.writerow(["bias", repr(result.bias)])
        for name in sorted(result.coefficients):
            writer.writerow([name, repr(result.coefficients[name])])


def write_combo_effects_csv(effects: dict[str, float], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["combo", "gain_or_loss"])
        for name, value in sorted(effects.items()):
            writer.writerow([name, repr(value)])


def write_buzz_stats_csv(stats: BuzzStats, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "interpretation", "state", "count", "mean_buzz_position"])
        for (group, flag, state), cell in sorted(stats.flag_means.items()):
            writer.writerow(
                [group, flag, "with" if state else "without", cell.count, "" if cell.mean is None else repr(cell.mean)]
            )


def write_histograms_csv(stats: BuzzStats, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "bin_low", "bin_high", "correct_count", "wrong_count"])
        for group, counts in sorted(stats.histograms.items()):
            for i in range(HISTOGRAM_BINS):
                writer.writerow(
                    [group, stats.bin_edges[i], stats.bin_edges[i + 1], counts["correct"][i], counts["wrong"][i]]
                )


def run_analysis(
    records: Sequence[GameRecord],
    setting: str,
    out_dir,
    hyperparams: Hyperparams | None = None,
    include_buzz_feature: bool = True,
):
    """Fit, derive combo effects and buzz statistics, and emit the CSV set."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    group_records = [r for r in records if r.group == setting]
    if not group_records:
        raise AnalysisError(f"no records for setting {setting!r}")
    result = fit(group_records, setting, hyperparams, include_buzz_feature=include_buzz_feature)
    effects = combo_effects(result)
    stats = buzz_stats(group_records)
    write_coefficients_csv(result, out / "coefficients.csv")
    write_combo_effects_csv(effects, out / "combo_effects.csv")
    write_buzz_stats_csv(stats, out / "buzz_stats.csv")
    write_histograms_csv(stats, out / "histograms.csv")
    return result, effects, stats
