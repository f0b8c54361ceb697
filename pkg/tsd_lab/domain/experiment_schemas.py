"""
Experiment Schemas.

Pydantic models for the JSON experiment configuration. Unknown keys are
rejected; every default is materialized when the config is echoed into a
run directory.
"""

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from tsd_lab.domain.enums import AttackTarget, ModelFamily, Objective, SaliencyVariant
from tsd_lab.domain.model_schemas import ModelSpec

KNOWN_METRICS = ("auc_prc", "auc_roc", "accuracy", "top1_agreement", "predictive_kl")
DEFAULT_BETA_GRID = (0.1, 0.5, 1.0, 10.0, 100.0, 200.0)
DEFAULT_TAU_KD = 4.0


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DatasetSource(StrictModel):
    """Where a dataset comes from: an archive train/test pair or the CBF generator."""

    name: str
    kind: Literal["archive", "synthetic"] = "synthetic"
    train_path: str | None = None
    test_path: str | None = None
    generator: Literal["cbf"] = "cbf"
    train_per_class: int = Field(default=10, ge=1)
    test_per_class: int = Field(default=300, ge=1)
    raw_length: int = Field(default=128, ge=16)
    # None derives the generator seed from the global seed
    seed: int | None = None
    target_length: int = Field(default=100, ge=2)
    val_fraction: float = Field(default=0.2, gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def _check_paths(self) -> "DatasetSource":
        if self.kind == "archive" and (not self.train_path or not self.test_path):
            raise ValueError(f"archive dataset '{self.name}' needs train_path and test_path")
        return self


class ArchitectureConfig(StrictModel):
    """Architecture without the data-dependent dimensions."""

    family: ModelFamily = ModelFamily.FCN
    num_blocks: int = Field(default=1, ge=1)
    width: int = Field(default=8, ge=1)
    kernel_sizes: list[int] | None = None

    def to_spec(self, num_classes: int, input_length: int, input_channels: int = 1) -> ModelSpec:
        return ModelSpec(
            family=self.family,
            num_blocks=self.num_blocks,
            width=self.width,
            kernel_sizes=tuple(self.kernel_sizes) if self.kernel_sizes is not None else None,
            num_classes=num_classes,
            input_length=input_length,
            input_channels=input_channels,
        )

    @property
    def label(self) -> str:
        if self.family is ModelFamily.LINEAR:
            return "LINEAR"
        return f"{self.family.value}{self.num_blocks}-{self.width}"


class GridConfig(StrictModel):
    num_subsequences: int = Field(default=50, ge=1)
    width: int = Field(default=5, ge=1)


class OptimizerConfig(StrictModel):
    """Adam with a multi-step schedule and patience-based early stopping."""

    initial_lr: float = Field(default=0.01, gt=0.0)
    decay_factor: float = Field(default=0.5, gt=0.0)
    decay_epochs: list[int] = Field(default_factory=lambda: [25, 30, 35])
    batch_size: int = Field(default=32, ge=1)
    max_epochs: int = Field(default=500, ge=1)
    patience: int = Field(default=50, ge=1)

    @model_validator(mode="after")
    def _check_patience(self) -> "OptimizerConfig":
        if self.patience > self.max_epochs:
            raise ValueError(f"patience ({self.patience}) exceeds max_epochs ({self.max_epochs})")
        if sorted(self.decay_epochs) != list(self.decay_epochs):
            raise ValueError("decay_epochs must be sorted")
        return self


class DistillConfig(StrictModel):
    """Loss composition and training protocol of one distillation."""

    alpha: float = Field(default=1.0, ge=0.0)
    beta: float = Field(default=1.0, ge=0.0)
    beta_grid: list[float] = Field(default_factory=lambda: list(DEFAULT_BETA_GRID))
    grid_search: bool = False
    tau_saliency: float = Field(default=8.0, gt=0.0)
    tau_kd: float = Field(default=DEFAULT_TAU_KD, gt=0.0)
    grid: GridConfig = Field(default_factory=GridConfig)
    variant: SaliencyVariant = SaliencyVariant.WHOLE
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    seed: int = 0
    objective: Objective = Objective.TSD

    @field_validator("beta_grid")
    @classmethod
    def _check_grid(cls, values: list[float]) -> list[float]:
        if any(v < 0 for v in values):
            raise ValueError("beta_grid values must be >= 0")
        return values


class AttributionConfig(StrictModel):
    """Post-hoc attribution maps compared between teacher and students."""

    methods: list[Literal["occlusion", "gradient", "integrated_gradients"]] = Field(
        default_factory=lambda: ["occlusion", "gradient", "integrated_gradients"]
    )
    num_instances: int = Field(default=100, ge=1)
    occlusion_window: int = Field(default=1, ge=1)
    baseline_value: float = 0.0
    ig_steps: int = Field(default=32, ge=1)
    normalize: bool = True
    export: bool = True


class AblationConfig(StrictModel):
    """Values swept per axis."""

    objectives: list[Objective] = Field(default_factory=lambda: [Objective.BASE, Objective.BASE_KD, Objective.TSD])
    tau: list[float] = Field(default_factory=lambda: [1.0, 2.0, 4.0, 8.0, 16.0])
    width: list[int] = Field(default_factory=lambda: [1, 3, 5, 10, 20])
    num_subsequences: list[int] = Field(default_factory=lambda: [10, 25, 50, 75])
    variant: list[SaliencyVariant] = Field(default_factory=lambda: list(SaliencyVariant))
    train_fraction: list[float] = Field(default_factory=lambda: [0.25, 0.5, 0.75, 1.0])
    fgsm_epsilon: list[float] = Field(default_factory=lambda: [0.0, 0.05, 0.1, 0.2])
    attack_targets: list[AttackTarget] = Field(default_factory=lambda: list(AttackTarget))

    @model_validator(mode="after")
    def _check_values(self) -> "AblationConfig":
        if any(t <= 0 for t in self.tau):
            raise ValueError("tau values must be > 0")
        if any(not 0 < f <= 1 for f in self.train_fraction):
            raise ValueError("train_fraction values must lie in (0, 1]")
        if any(e < 0 for e in self.fgsm_epsilon):
            raise ValueError("fgsm_epsilon values must be >= 0")
        return self


class ExperimentConfig(StrictModel):
    """Declarative description of a whole run."""

    datasets: list[DatasetSource] = Field(default_factory=lambda: [DatasetSource(name="CBF")])
    teacher: ArchitectureConfig = Field(default_factory=lambda: ArchitectureConfig(num_blocks=3, width=32))
    students: list[ArchitectureConfig] = Field(default_factory=lambda: [ArchitectureConfig(num_blocks=2, width=4)])
    objectives: list[Objective] = Field(default_factory=lambda: list(Objective))
    distill: DistillConfig = Field(default_factory=DistillConfig)
    num_teacher_seeds: int = Field(default=5, ge=1)
    seeds: list[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4])
    metrics: list[str] = Field(default_factory=lambda: list(KNOWN_METRICS))
    # None means tau_kd; materialized by the validator
    fidelity_tau: float | None = Field(default=None, gt=0.0)
    attribution: AttributionConfig = Field(default_factory=AttributionConfig)
    ablation: AblationConfig = Field(default_factory=AblationConfig)
    output_dir: str | None = None
    seed: int = 0
    jobs: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _materialize(self) -> "ExperimentConfig":
        unknown = sorted(set(self.metrics) - set(KNOWN_METRICS))
        if unknown:
            raise ValueError(f"unknown metrics {unknown}; known: {list(KNOWN_METRICS)}")
        if not self.seeds or len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be a non-empty list of distinct integers")
        if not self.datasets:
            raise ValueError("at least one dataset is required")
        names = [d.name for d in self.datasets]
        if len(set(names)) != len(names):
            raise ValueError(f"dataset names must be unique, got {names}")
        if not self.objectives:
            raise ValueError("at least one objective is required")
        labels = self.student_labels()
        if not labels or len(set(labels)) != len(labels):
            raise ValueError(f"students must be a non-empty list of distinct architectures, got {labels}")
        if self.fidelity_tau is None:
            self.fidelity_tau = self.distill.tau_kd
        return self

    def student_labels(self) -> list[str]:
        return [s.label for s in self.students]
