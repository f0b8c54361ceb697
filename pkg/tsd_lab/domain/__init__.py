"""Domain layer: enums, errors and pydantic schemas."""

from tsd_lab.domain.enums import AblationAxis, AttackTarget, ModelFamily, ModelRole, Objective, SaliencyVariant, Split
from tsd_lab.domain.errors import (
    ArchiveParseError,
    ConfigError,
    DatasetError,
    GradientError,
    IncompleteRunError,
    ShapeError,
    TSDLabError,
)
from tsd_lab.domain.experiment_schemas import (
    AblationConfig,
    ArchitectureConfig,
    AttributionConfig,
    DatasetSource,
    DistillConfig,
    ExperimentConfig,
    GridConfig,
    OptimizerConfig,
)
from tsd_lab.domain.model_schemas import CheckpointDocument, ModelSpec, TensorRecord

__all__ = [
    "AblationAxis",
    "AblationConfig",
    "ArchitectureConfig",
    "ArchiveParseError",
    "AttackTarget",
    "AttributionConfig",
    "CheckpointDocument",
    "ConfigError",
    "DatasetError",
    "DatasetSource",
    "DistillConfig",
    "ExperimentConfig",
    "GradientError",
    "GridConfig",
    "IncompleteRunError",
    "ModelFamily",
    "ModelRole",
    "ModelSpec",
    "Objective",
    "OptimizerConfig",
    "SaliencyVariant",
    "ShapeError",
    "Split",
    "TSDLabError",
    "TensorRecord",
]
