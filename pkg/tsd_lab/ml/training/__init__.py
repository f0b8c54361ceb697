"""Training loop, optimizer, losses and the distillation protocol."""

from tsd_lab.ml.training.distillation import (
    BetaSearchResult,
    CrossEntropyObjective,
    DistillationObjective,
    check_compatible,
    distill,
    grid_search_beta,
    select_beta,
    select_teacher,
    train_single,
    train_teacher,
)
from tsd_lab.ml.training.experiment_tracker import ExperimentTracker, RunInfo, RunStatus
from tsd_lab.ml.training.losses import base_kd_loss, total_loss, tsd_loss
from tsd_lab.ml.training.optim import Adam, MultiStepSchedule
from tsd_lab.ml.training.seeding import derive_seed
from tsd_lab.ml.training.trainer import BatchLoss, EpochRecord, TrainedArtifact, Trainer

__all__ = [
    "Adam",
    "BatchLoss",
    "BetaSearchResult",
    "CrossEntropyObjective",
    "DistillationObjective",
    "EpochRecord",
    "ExperimentTracker",
    "MultiStepSchedule",
    "RunInfo",
    "RunStatus",
    "TrainedArtifact",
    "Trainer",
    "base_kd_loss",
    "check_compatible",
    "derive_seed",
    "distill",
    "grid_search_beta",
    "select_beta",
    "select_teacher",
    "total_loss",
    "train_single",
    "train_teacher",
    "tsd_loss",
]
