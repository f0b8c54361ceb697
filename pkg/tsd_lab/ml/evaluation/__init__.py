"""Metrics and score aggregation."""

from tsd_lab.ml.evaluation.metrics import (
    FidelityReport,
    accuracy,
    auc_prc,
    auc_roc,
    average_precision,
    classification_metrics,
    fidelity_report,
    predictive_kl,
    saliency_mse,
    top1_agreement,
)
from tsd_lab.ml.evaluation.score_table import ScoreTable, rank_and_wins, rank_table

__all__ = [
    "FidelityReport",
    "ScoreTable",
    "accuracy",
    "auc_prc",
    "auc_roc",
    "average_precision",
    "classification_metrics",
    "fidelity_report",
    "predictive_kl",
    "rank_and_wins",
    "rank_table",
    "saliency_mse",
    "top1_agreement",
]
