"""
Generalization and fidelity metrics.

AUC-PRC is one-vs-rest average precision with tied scores grouped into
one bucket, macro-averaged over classes; AUC-ROC is the Mann-Whitney
statistic with average ranks for ties.
"""

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from loguru import logger

from tsd_lab.domain.errors import ShapeError
from tsd_lab.domain.experiment_schemas import DEFAULT_TAU_KD
from tsd_lab.ml.autograd import kl_divergence, softmax_temperature


def _score_matrix(scores: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray, list[int]]:
    """
    Normalize inputs to (per-class score columns, labels, classes to evaluate).

    1D scores are positive-class scores of a binary problem.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if scores.shape[0] != labels.shape[0]:
        raise ShapeError("scores and labels differ in length", axis="instances", expected=labels.shape[0], actual=scores.shape[0])
    if scores.ndim == 1:
        return scores[:, np.newaxis], (labels == 1).astype(np.int64), [0]
    if not np.allclose(scores.sum(axis=1), 1.0, rtol=0.0, atol=1e-4):
        raise ValueError("score rows must be probability vectors (sum to 1 within 1e-4)")
    return scores, labels, list(range(scores.shape[1]))


def average_precision(scores: np.ndarray, positives: np.ndarray) -> float:
    """
    Average precision of one binary ranking.

    Instances sharing a score form one bucket; AP = sum over buckets of
    (new true positives / total positives) * precision at that bucket.
    """
    scores = np.asarray(scores, dtype=np.float64)
    positives = np.asarray(positives, dtype=np.int64)
    num_pos = int(positives.sum())
    if num_pos == 0:
        raise ValueError("average precision needs at least one positive")
    order = np.argsort(-scores, kind="mergesort")
    sorted_scores, sorted_hits = scores[order], positives[order]
    last_of_bucket = np.append(sorted_scores[:-1] != sorted_scores[1:], True)
    predicted = np.flatnonzero(last_of_bucket) + 1
    true_pos = np.cumsum(sorted_hits)[last_of_bucket]
    new_hits = np.diff(np.concatenate([[0], true_pos]))
    return math.fsum((hits / num_pos) * (tp / pp) for hits, tp, pp in zip(new_hits, true_pos, predicted) if hits)


def auc_prc(scores: np.ndarray, labels: np.ndarray) -> float:
    """
    Macro one-vs-rest average precision.

    Args:
        scores: [M, C] class probabilities, or [M] positive-class scores
        labels: [M] class indices (0/1 for 1D scores)

    Raises:
        ValueError: Malformed scores, or no class has a positive instance
    """
    matrix, labels, classes = _score_matrix(scores, labels)
    binary = matrix.shape[1] == 1
    values = []
    for c in classes:
        positives = labels if binary else (labels == c).astype(np.int64)
        if positives.sum() == 0:
            logger.warning(f"AUC-PRC: class {c} has no positive instance; skipped")
            continue
        values.append(average_precision(matrix[:, c], positives))
    if not values:
        raise ValueError("AUC-PRC undefined: no class has a positive instance")
    return float(np.mean(values))


def auc_roc(scores: np.ndarray, labels: np.ndarray) -> float:
    """
    Macro one-vs-rest AUC-ROC via the rank-sum statistic.

    Raises:
        ValueError: No class has both a positive and a negative instance
    """
    matrix, labels, classes = _score_matrix(scores, labels)
    binary = matrix.shape[1] == 1
    values = []
    for c in classes:
        positives = labels.astype(bool) if binary else labels == c
        num_pos, num_neg = int(positives.sum()), int((~positives).sum())
        if num_pos == 0 or num_neg == 0:
            logger.warning(f"AUC-ROC: class {c} lacks positives or negatives; skipped")
            continue
        ranks = pd.Series(matrix[:, c]).rank(method="average").to_numpy()
        u_stat = ranks[positives].sum() - num_pos * (num_pos + 1) / 2.0
        values.append(u_stat / (num_pos * num_neg))
    if not values:
        raise ValueError("AUC-ROC undefined: no class has both positives and negatives")
    return float(np.mean(values))


def accuracy(preds: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of exact top-1 matches."""
    preds, labels = np.asarray(preds), np.asarray(labels)
    if preds.shape != labels.shape:
        raise ShapeError("predictions and labels differ in length", axis="instances", expected=labels.size, actual=preds.size)
    if preds.size == 0:
        raise ValueError("accuracy needs at least one instance")
    return float(np.mean(preds == labels))


def top1_agreement(teacher_preds: np.ndarray, student_preds: np.ndarray) -> float:
    """Fraction of instances where teacher and student pick the same class."""
    teacher_preds, student_preds = np.asarray(teacher_preds), np.asarray(student_preds)
    if teacher_preds.shape != student_preds.shape:
        raise ShapeError("prediction vectors differ in length", axis="instances", expected=teacher_preds.size, actual=student_preds.size)
    if teacher_preds.size == 0:
        raise ValueError("top1_agreement needs at least one instance")
    return float(np.mean(teacher_preds == student_preds))


def _soften(probs: np.ndarray, tau: float) -> np.ndarray:
    """softmax(log p / tau) row-wise; zero entries stay zero and tau = 1 is the identity."""
    probs = np.asarray(probs, dtype=np.float64)
    if tau == 1.0:
        return probs
    with np.errstate(divide="ignore", invalid="ignore"):
        log_probs = np.log(probs)
    return softmax_temperature(log_probs, tau).data


def predictive_kl(teacher_probs: np.ndarray, student_probs: np.ndarray, tau: float = DEFAULT_TAU_KD) -> float:
    """
    Mean KL(teacher || student) over instances after softening both sides at tau.

    Softening unit-temperature probabilities at tau equals taking the softmax
    of the logits at tau.

    Raises:
        ValueError: tau <= 0 or rows that are not distributions
        ShapeError: Matrices differ in shape
    """
    if tau <= 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    teacher_probs = np.atleast_2d(np.asarray(teacher_probs, dtype=np.float64))
    student_probs = np.atleast_2d(np.asarray(student_probs, dtype=np.float64))
    if teacher_probs.shape != student_probs.shape:
        raise ShapeError("probability matrices differ in shape", axis="instances", expected=teacher_probs.shape[0], actual=student_probs.shape[0])
    return float(kl_divergence(_soften(teacher_probs, tau), _soften(student_probs, tau)).data.mean())


def saliency_mse(map_a: np.ndarray, map_b: np.ndarray) -> float:
    """Mean squared difference of two maps (or two equally shaped stacks of maps)."""
    a, b = np.asarray(map_a, dtype=np.float64), np.asarray(map_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError("saliency maps differ in length", axis="length", expected=a.shape[-1], actual=b.shape[-1])
    return float(np.mean((a - b) ** 2))


@dataclass(frozen=True)
class FidelityReport:
    """How closely a student reproduces its teacher."""

    top1_agreement: float
    predictive_kl: float
    tau: float

    def as_dict(self) -> dict[str, float]:
        return {"top1_agreement": self.top1_agreement, "predictive_kl": self.predictive_kl}


def fidelity_report(teacher_logits: np.ndarray, student_logits: np.ndarray, tau: float) -> FidelityReport:
    """Top-1 agreement and predictive KL at temperature tau from raw logits."""
    teacher_logits = np.asarray(teacher_logits, dtype=np.float64)
    student_logits = np.asarray(student_logits, dtype=np.float64)
    return FidelityReport(
        top1_agreement=top1_agreement(teacher_logits.argmax(axis=-1), student_logits.argmax(axis=-1)),
        predictive_kl=predictive_kl(
            softmax_temperature(teacher_logits, tau).data,
            softmax_temperature(student_logits, tau).data,
            tau=1.0,
        ),
        tau=tau,
    )


def classification_metrics(probs: np.ndarray, labels: np.ndarray) -> dict[str, float]:
    """AUC-PRC, AUC-ROC and accuracy of a probability matrix."""
    return {
        "auc_prc": auc_prc(probs, labels),
        "auc_roc": auc_roc(probs, labels),
        "accuracy": accuracy(np.asarray(probs).argmax(axis=-1), labels),
    }
