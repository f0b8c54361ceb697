"""
Service scoring trained models.

Generalization (AUC-PRC, AUC-ROC, accuracy) on the test split, fidelity to
the teacher (top-1 agreement, predictive KL), interpretability transfer
(attribution-map MSE against the teacher) and robustness under FGSM.
"""

from collections.abc import Sequence
from pathlib import Path

import numpy as np
from loguru import logger

from tsd_lab.domain.enums import AttackTarget, SaliencyVariant
from tsd_lab.domain.experiment_schemas import DEFAULT_TAU_KD, AttributionConfig, GridConfig
from tsd_lab.ml.data.dataset import TimeSeriesDataset
from tsd_lab.ml.evaluation import classification_metrics, fidelity_report, saliency_mse
from tsd_lab.ml.models import ModelParams
from tsd_lab.ml.saliency import (
    BackgroundSelector,
    batch_temporal_saliency,
    fgsm_batch,
    gradient_saliency_maps,
    integrated_gradients_maps,
    make_grid,
    maps_frame,
    normalize_max_abs,
    occlusion_maps,
)
from tsd_lab.ml.serving import predict
from tsd_lab.shared.io import atomic_write_tsv

CLASSIFICATION_METRICS = ("auc_prc", "auc_roc", "accuracy")
FIDELITY_METRICS = ("top1_agreement", "predictive_kl")

AttributionMaps = dict[str, np.ndarray]


def _select(metrics: dict[str, float], wanted: Sequence[str]) -> dict[str, float]:
    return {name: value for name, value in metrics.items() if name in wanted}


def attribution_subset(dataset: TimeSeriesDataset, num_instances: int) -> TimeSeriesDataset:
    """First num_instances of a split (fixed, so teacher and students see the same rows)."""
    return dataset.subset(range(min(num_instances, len(dataset))))


class EvaluationService:
    """Scores teachers and students; writes per-instance saliency exports."""

    def __init__(self, metrics: Sequence[str] = CLASSIFICATION_METRICS + FIDELITY_METRICS, fidelity_tau: float = DEFAULT_TAU_KD) -> None:
        self.metrics = tuple(metrics)
        self.fidelity_tau = fidelity_tau

    def with_settings(self, metrics: Sequence[str], fidelity_tau: float) -> "EvaluationService":
        """Copy scoring the given metrics with the given fidelity temperature."""
        return EvaluationService(metrics=metrics, fidelity_tau=fidelity_tau)

    def classification(self, params: ModelParams, values: np.ndarray | TimeSeriesDataset, labels: np.ndarray) -> dict[str, float]:
        probs = predict(params, values).probabilities
        return _select(classification_metrics(probs, labels), self.metrics)

    def evaluate_teacher(self, teacher: ModelParams, test: TimeSeriesDataset) -> dict[str, float]:
        return self.classification(teacher, test, test.labels)

    def evaluate_student(self, teacher: ModelParams, student: ModelParams, test: TimeSeriesDataset) -> dict[str, float]:
        """Generalization plus fidelity of one student on the test split."""
        scores = self.classification(student, test, test.labels)
        if any(name in self.metrics for name in FIDELITY_METRICS):
            fidelity = fidelity_report(predict(teacher, test).logits, predict(student, test).logits, self.fidelity_tau)
            scores.update(_select(fidelity.as_dict(), self.metrics))
        return scores

    @staticmethod
    def attribution_maps(params: ModelParams, values: np.ndarray, config: AttributionConfig) -> AttributionMaps:
        """Every configured attribution method on a [N, T] matrix."""
        maps: AttributionMaps = {}
        for method in config.methods:
            if method == "occlusion":
                maps[method] = occlusion_maps(params, values, window=config.occlusion_window, baseline_value=config.baseline_value)
            elif method == "gradient":
                maps[method] = gradient_saliency_maps(params, values)
            else:
                baselines = np.full_like(values, config.baseline_value)
                maps[method] = integrated_gradients_maps(params, values, baselines, steps=config.ig_steps)
        return maps

    @staticmethod
    def attribution_mse(teacher_maps: AttributionMaps, student_maps: AttributionMaps, normalize: bool = True) -> dict[str, float]:
        """Test-set average MSE between teacher and student maps, per method."""
        scores = {}
        for method, teacher_map in teacher_maps.items():
            student_map = student_maps[method]
            if normalize:
                teacher_map, student_map = normalize_max_abs(teacher_map), normalize_max_abs(student_map)
            scores[method] = saliency_mse(teacher_map, student_map)
        return scores

    def adversarial(
        self,
        teacher: ModelParams,
        student: ModelParams,
        test: TimeSeriesDataset,
        epsilon: float,
        target: AttackTarget,
    ) -> dict[str, float]:
        """Student classification metrics on FGSM examples crafted against the teacher or the student."""
        source = teacher if target is AttackTarget.TEACHER else student
        perturbed = fgsm_batch(source, test.values, test.labels, epsilon)
        scores = self.classification(student, perturbed, test.labels)
        logger.debug(f"FGSM eps={epsilon:g} against {target.value}: {scores}")
        return scores

    @staticmethod
    def temporal_profiles(
        params: ModelParams,
        dataset: TimeSeriesDataset,
        backgrounds_from: TimeSeriesDataset,
        grid_config: GridConfig,
        tau: float,
        variant: SaliencyVariant,
        seed: int,
    ) -> np.ndarray:
        """[N, G] temporal saliency with opposing-class backgrounds drawn from another split."""
        grid = make_grid(dataset.series_length, grid_config.num_subsequences, grid_config.width)
        selector = BackgroundSelector(backgrounds_from, seed=seed)
        labels = dataset.labels
        backgrounds = selector.select_batch(labels, 0, np.arange(len(labels)))
        profile = batch_temporal_saliency(params.frozen(), dataset.values, backgrounds, grid, tau, variant, targets=labels)
        return profile.values

    @staticmethod
    def export_maps(directory: str | Path, instance_ids: np.ndarray, maps: AttributionMaps) -> list[Path]:
        """One <method>.tsv per attribution method."""
        directory = Path(directory)
        return [
            atomic_write_tsv(directory / f"{method}.tsv", maps_frame(instance_ids, values), float_format="%.17g")
            for method, values in sorted(maps.items())
        ]
