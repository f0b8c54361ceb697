"""
Teacher training and student distillation.

Objectives:
    BASE     alpha * CE
    BASE_KD  alpha * CE + beta * tau_kd^2 * KL(teacher || student)
    TSD      alpha * CE + beta * SmoothL1(student saliency / mu_s, teacher saliency / mu_t)

The teacher only ever runs through a frozen view of its parameters, so
nothing is recorded for it and its weights cannot move.
"""

from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field

import numpy as np
from loguru import logger

from tsd_lab.domain.enums import Objective
from tsd_lab.domain.errors import ConfigError
from tsd_lab.domain.experiment_schemas import DistillConfig, OptimizerConfig
from tsd_lab.domain.model_schemas import ModelSpec
from tsd_lab.ml.autograd import cross_entropy
from tsd_lab.ml.data.dataset import TimeSeriesDataset
from tsd_lab.ml.models import ModelParams, build_model, forward
from tsd_lab.ml.saliency import BackgroundSelector, SubsequenceGrid, batch_temporal_saliency, make_grid
from tsd_lab.ml.training.experiment_tracker import ExperimentTracker
from tsd_lab.ml.training.losses import base_kd_loss, total_loss, tsd_loss
from tsd_lab.ml.training.trainer import BatchLoss, TrainedArtifact, Trainer


class CrossEntropyObjective:
    """alpha * CE on the true labels."""

    def __init__(self, alpha: float = 1.0) -> None:
        self.alpha = alpha

    def __call__(self, params: ModelParams, values: np.ndarray, labels: np.ndarray, positions: np.ndarray, epoch: int) -> BatchLoss:
        ce = cross_entropy(forward(params, values[:, np.newaxis, :]), labels)
        return BatchLoss(total=total_loss(ce, 0.0, self.alpha, 0.0), ce=ce.item(), kd=0.0)


class DistillationObjective:
    """CE plus the configured distillation term against a frozen teacher."""

    def __init__(
        self,
        config: DistillConfig,
        teacher: ModelParams,
        selector: BackgroundSelector | None = None,
        grid: SubsequenceGrid | None = None,
    ) -> None:
        self.config = config
        self.teacher = teacher.frozen()
        self.selector = selector
        self.grid = grid
        if config.objective is Objective.TSD and (selector is None or grid is None):
            raise ConfigError("TSD objective needs a background selector and a subsequence grid")

    def __call__(self, params: ModelParams, values: np.ndarray, labels: np.ndarray, positions: np.ndarray, epoch: int) -> BatchLoss:
        config = self.config
        batch = values[:, np.newaxis, :]
        logits = forward(params, batch)
        ce = cross_entropy(logits, labels)
        if config.objective is Objective.BASE or config.beta == 0:
            return BatchLoss(total=total_loss(ce, 0.0, config.alpha, 0.0), ce=ce.item(), kd=0.0)

        if config.objective is Objective.BASE_KD:
            teacher_logits = forward(self.teacher, batch).data
            kd = base_kd_loss(teacher_logits, logits, config.tau_kd)
        else:
            backgrounds = self.selector.select_batch(labels, epoch, positions)
            teacher_profile = batch_temporal_saliency(
                self.teacher, values, backgrounds, self.grid, config.tau_saliency, config.variant, targets=labels
            )
            student_profile = batch_temporal_saliency(
                params, values, backgrounds, self.grid, config.tau_saliency, config.variant, targets=labels
            )
            kd = tsd_loss(teacher_profile, student_profile)
        return BatchLoss(total=total_loss(ce, kd, config.alpha, config.beta), ce=ce.item(), kd=kd.item())


def train_single(
    spec: ModelSpec,
    train: TimeSeriesDataset,
    val: TimeSeriesDataset,
    optimizer: OptimizerConfig,
    seed: int,
    tracker: ExperimentTracker | None = None,
    run_name: str = "teacher",
) -> TrainedArtifact:
    """One cross-entropy training run from build_model(spec, seed)."""
    params = build_model(spec, seed)
    artifact = Trainer(optimizer, tracker).fit(params, train, val, CrossEntropyObjective(), seed=seed, run_name=run_name)
    logger.info(f"[{run_name}] seed {seed}: best epoch {artifact.best_epoch}, val AUC-PRC {artifact.best_val_auc_prc:.4f}")
    return artifact


def select_teacher(candidates: Sequence[TrainedArtifact]) -> int:
    """Index of the max validation AUC-PRC; the first one wins ties."""
    if not candidates:
        raise ValueError("no teacher candidates to select from")
    scores = [c.best_val_auc_prc for c in candidates]
    return int(np.argmax(scores))


def train_teacher(
    spec: ModelSpec,
    train: TimeSeriesDataset,
    val: TimeSeriesDataset,
    optimizer: OptimizerConfig,
    num_seeds: int = 5,
    seeds: Sequence[int] | None = None,
) -> TrainedArtifact:
    """
    Train num_seeds independent teachers and keep the best on validation.

    Args:
        seeds: Explicit candidate seeds (defaults to 0..num_seeds-1)
    """
    seeds = list(range(num_seeds)) if seeds is None else list(seeds)
    if not seeds:
        raise ValueError("train_teacher needs at least one seed")
    candidates = [train_single(spec, train, val, optimizer, seed, run_name=f"teacher-seed{seed}") for seed in seeds]
    chosen = select_teacher(candidates)
    best = candidates[chosen]
    best.metadata.update({"selected_seed": seeds[chosen], "num_candidates": len(seeds)})
    return best


def check_compatible(teacher: ModelSpec, student: ModelSpec, train: TimeSeriesDataset, config: DistillConfig) -> None:
    """
    Raises:
        ConfigError: Teacher/student/data shapes disagree, or the grid does not fit the series
    """
    if (teacher.input_length, teacher.input_channels) != (student.input_length, student.input_channels):
        raise ConfigError(
            f"teacher input [{teacher.input_channels}, {teacher.input_length}] differs from "
            f"student input [{student.input_channels}, {student.input_length}]"
        )
    if teacher.num_classes != student.num_classes:
        raise ConfigError(f"teacher has {teacher.num_classes} classes, student {student.num_classes}")
    if train.series_length != student.input_length or train.num_classes != student.num_classes:
        raise ConfigError(
            f"data (T={train.series_length}, C={train.num_classes}) does not match the models "
            f"(T={student.input_length}, C={student.num_classes})"
        )
    if config.objective is Objective.TSD:
        grid = config.grid
        if grid.width > train.series_length:
            raise ConfigError(f"subsequence width {grid.width} exceeds series length {train.series_length}")
        if grid.num_subsequences > train.series_length - grid.width + 1:
            raise ConfigError(
                f"{grid.num_subsequences} subsequences of width {grid.width} do not fit length {train.series_length}"
            )


def distill(
    teacher: TrainedArtifact | ModelParams,
    student_spec: ModelSpec,
    train: TimeSeriesDataset,
    val: TimeSeriesDataset,
    config: DistillConfig,
    background_seed: int | None = None,
    tracker: ExperimentTracker | None = None,
    run_name: str = "student",
) -> TrainedArtifact:
    """
    Train a student from build_model(student_spec, config.seed) under config.objective.

    Args:
        teacher: Trained teacher (never modified)
        background_seed: Seed of the opposing-class background draws (defaults to config.seed)

    Raises:
        ConfigError: Incompatible shapes or grid
        RuntimeError: Teacher parameters changed during training
    """
    teacher_params = teacher.params if isinstance(teacher, TrainedArtifact) else teacher
    check_compatible(teacher_params.spec, student_spec, train, config)

    selector, grid = None, None
    if config.objective is Objective.TSD:
        grid = make_grid(train.series_length, config.grid.num_subsequences, config.grid.width)
        selector = BackgroundSelector(train, seed=config.seed if background_seed is None else background_seed)
    objective = DistillationObjective(config, teacher_params, selector, grid)

    before = teacher_params.snapshot()
    params = build_model(student_spec, config.seed)
    artifact = Trainer(config.optimizer, tracker).fit(params, train, val, objective, seed=config.seed, run_name=run_name)
    after = teacher_params.snapshot()
    if any(not np.array_equal(before[name], after[name]) for name in before):
        raise RuntimeError("teacher parameters changed during distillation")

    artifact.objective = config.objective
    artifact.config = config
    logger.info(
        f"[{run_name}] {config.objective.value} beta={config.beta:g}: best epoch {artifact.best_epoch}, "
        f"val AUC-PRC {artifact.best_val_auc_prc:.4f}"
    )
    return artifact


@dataclass
class BetaSearchResult:
    """Outcome of a beta grid search; unpacks as (best_beta, artifact)."""

    best_beta: float
    artifact: TrainedArtifact
    scores: dict[float, float] = field(default_factory=dict)

    def __iter__(self) -> Iterator:
        return iter((self.best_beta, self.artifact))


def select_beta(scores: dict[float, float]) -> float:
    """Beta with the highest validation score; ties go to the smaller beta."""
    if not scores:
        raise ValueError("beta grid is empty")
    best = max(scores.values())
    return min(beta for beta, score in scores.items() if score == best)


def grid_search_beta(
    teacher: TrainedArtifact | ModelParams,
    student_spec: ModelSpec,
    train: TimeSeriesDataset,
    val: TimeSeriesDataset,
    config: DistillConfig,
    background_seed: int | None = None,
    tracker: ExperimentTracker | None = None,
    run_name: str = "student",
) -> BetaSearchResult:
    """
    One distillation per beta of config.beta_grid, all with config.seed.

    Each grid point is tracked as "<run_name>-beta=<beta>".

    Raises:
        ValueError: Empty beta grid
    """
    if not config.beta_grid:
        raise ValueError("beta grid is empty")
    runs: dict[float, TrainedArtifact] = {}
    for beta in config.beta_grid:
        runs[beta] = distill(
            teacher,
            student_spec,
            train,
            val,
            config.model_copy(update={"beta": beta}),
            background_seed=background_seed,
            tracker=tracker,
            run_name=f"{run_name}-beta={beta:g}",
        )
    scores = {beta: run.best_val_auc_prc for beta, run in runs.items()}
    best_beta = select_beta(scores)
    logger.info(f"Selected beta={best_beta:g} from {len(scores)} grid points")
    return BetaSearchResult(best_beta=best_beta, artifact=runs[best_beta], scores=scores)
