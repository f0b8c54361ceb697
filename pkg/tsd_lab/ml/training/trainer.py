"""
Model Trainer.

Mini-batch training loop shared by teacher training and every student
objective: seeded shuffling, Adam with a multi-step schedule, validation
AUC-PRC after each epoch, best-epoch snapshot and patience-based early
stopping.
"""

from collections.abc import Callable
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
from loguru import logger

from tsd_lab.domain.enums import Objective
from tsd_lab.domain.errors import DatasetError
from tsd_lab.domain.experiment_schemas import DistillConfig, OptimizerConfig
from tsd_lab.ml.autograd import Tape, Tensor
from tsd_lab.ml.data.dataset import TimeSeriesDataset
from tsd_lab.ml.evaluation.metrics import auc_prc
from tsd_lab.ml.models import ModelParams
from tsd_lab.ml.serving import predict
from tsd_lab.ml.training.experiment_tracker import ExperimentTracker, RunStatus
from tsd_lab.ml.training.optim import Adam, MultiStepSchedule


@dataclass(frozen=True)
class BatchLoss:
    """Differentiable total plus its logged parts."""

    total: Tensor
    ce: float
    kd: float


# (params, values [B, T], labels [B], source positions [B], epoch) -> BatchLoss
BatchObjective = Callable[[ModelParams, np.ndarray, np.ndarray, np.ndarray, int], BatchLoss]


@dataclass(frozen=True)
class EpochRecord:
    """One line of the training log."""

    epoch: int
    lr: float
    train_loss: float
    ce: float
    kd: float
    val_auc_prc: float


@dataclass
class TrainedArtifact:
    """Best-epoch parameters with their training history."""

    params: ModelParams
    history: list[EpochRecord]
    best_epoch: int
    best_val_auc_prc: float
    seed: int
    objective: Objective = Objective.BASE
    config: DistillConfig | None = None
    metadata: dict[str, float | int | str] = field(default_factory=dict)

    def history_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(record) for record in self.history], columns=list(EpochRecord.__annotations__))

    @property
    def epochs_run(self) -> int:
        return len(self.history)


def validation_auc_prc(params: ModelParams, val: TimeSeriesDataset) -> float:
    """Macro AUC-PRC of a model on a validation split."""
    return auc_prc(predict(params, val).probabilities, val.labels)


class Trainer:
    """
    Generic mini-batch trainer.

    Provides:
    - Seeded shuffling and Adam updates
    - Multi-step learning-rate decay
    - Best-epoch snapshot on strict validation improvement
    - Early stopping once epoch - best_epoch reaches patience
    - Per-epoch history through an optional ExperimentTracker
    """

    def __init__(self, config: OptimizerConfig, experiment_tracker: ExperimentTracker | None = None) -> None:
        """
        Initialize trainer.

        Args:
            config: Optimizer, schedule and stopping settings
            experiment_tracker: Optional tracker receiving one row per epoch
        """
        self.config = config
        self.tracker = experiment_tracker
        self.schedule = MultiStepSchedule(
            initial_lr=config.initial_lr,
            factor=config.decay_factor,
            milestones=tuple(config.decay_epochs),
        )

    def fit(
        self,
        params: ModelParams,
        train: TimeSeriesDataset,
        val: TimeSeriesDataset,
        objective: BatchObjective,
        seed: int,
        run_name: str = "run",
    ) -> TrainedArtifact:
        """
        Train params in place and return the best-epoch snapshot.

        Args:
            params: Trainable parameters (updated in place)
            train: Training split
            val: Validation split for model selection
            objective: Batch loss builder
            seed: Shuffling seed
            run_name: Name used in logs and the tracker

        Returns:
            TrainedArtifact holding a copy of the best-epoch parameters
        """
        if len(train) == 0 or len(val) == 0:
            raise DatasetError("training needs non-empty train and validation splits")
        config = self.config
        rng = np.random.default_rng(seed)
        optimizer = Adam(params, lr=config.initial_lr)
        values, labels = train.values, train.labels

        if self.tracker is not None:
            self.tracker.start_run("training", run_name, tags={"seed": str(seed)})
            self.tracker.log_params(config.model_dump(mode="json"))

        history: list[EpochRecord] = []
        best_score, best_epoch = -np.inf, -1
        best_state = params.snapshot()
        try:
            for epoch in range(config.max_epochs):
                optimizer.lr = self.schedule.lr(epoch)
                order = rng.permutation(len(train))
                totals = np.zeros(3)
                for start in range(0, len(order), config.batch_size):
                    idx = order[start : start + config.batch_size]
                    params.zero_grad()
                    with Tape() as tape:
                        batch_loss = objective(params, values[idx], labels[idx], idx, epoch)
                    tape.backward(batch_loss.total)
                    optimizer.step()
                    totals += len(idx) * np.array([batch_loss.total.item(), batch_loss.ce, batch_loss.kd])
                totals /= len(order)

                score = validation_auc_prc(params, val)
                record = EpochRecord(
                    epoch=epoch,
                    lr=optimizer.lr,
                    train_loss=float(totals[0]),
                    ce=float(totals[1]),
                    kd=float(totals[2]),
                    val_auc_prc=score,
                )
                history.append(record)
                if self.tracker is not None:
                    self.tracker.log_metrics({k: v for k, v in asdict(record).items() if k != "epoch"}, step=epoch)
                logger.debug(
                    f"[{run_name}] epoch {epoch} lr={record.lr:.6g} loss={record.train_loss:.5f} "
                    f"ce={record.ce:.5f} kd={record.kd:.5f} val_auc_prc={score:.4f}"
                )

                if score > best_score:
                    best_score, best_epoch = score, epoch
                    best_state = params.snapshot()
                if epoch - best_epoch >= config.patience:
                    logger.debug(f"[{run_name}] early stop at epoch {epoch} (best {best_epoch})")
                    break
        except Exception:
            if self.tracker is not None:
                self.tracker.end_run(RunStatus.FAILED)
            raise

        best = params.copy()
        for name, array in best_state.items():
            best.tensors[name].data[...] = array
        if self.tracker is not None:
            self.tracker.end_run(RunStatus.COMPLETED, {"best_epoch": best_epoch, "best_val_auc_prc": best_score})
        return TrainedArtifact(
            params=best,
            history=history,
            best_epoch=best_epoch,
            best_val_auc_prc=float(best_score),
            seed=seed,
        )
