"""
Model Schemas.

Pydantic models describing classifier architectures and the on-disk
checkpoint container.
"""

from pydantic import BaseModel, ConfigDict, Field, model_validator

from tsd_lab.domain.enums import ModelFamily

# FCN kernel pattern, repeated/truncated to the number of blocks.
DEFAULT_FCN_KERNELS: tuple[int, ...] = (8, 5, 3)

CHECKPOINT_FORMAT = "tsd-lab-checkpoint"
CHECKPOINT_VERSION = 1


class ModelSpec(BaseModel):
    """Declarative classifier architecture."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    family: ModelFamily
    num_blocks: int = Field(default=1, ge=1)
    width: int = Field(default=8, ge=1)
    kernel_sizes: tuple[int, ...] | None = None
    num_classes: int = Field(ge=2)
    input_length: int = Field(ge=1)
    input_channels: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _check_kernels(self) -> "ModelSpec":
        if self.family is not ModelFamily.FCN:
            return self
        kernels = self.effective_kernel_sizes
        if len(kernels) != self.num_blocks:
            raise ValueError(f"kernel_sizes has {len(kernels)} entries for {self.num_blocks} blocks")
        if any(k < 1 for k in kernels):
            raise ValueError(f"kernel sizes must be positive, got {kernels}")
        if self.input_length < max(kernels):
            raise ValueError(f"input_length {self.input_length} is shorter than kernel {max(kernels)}")
        return self

    @property
    def effective_kernel_sizes(self) -> tuple[int, ...]:
        """Declared kernels, or the default pattern sized to num_blocks."""
        if self.kernel_sizes is not None:
            return tuple(self.kernel_sizes)
        pattern = DEFAULT_FCN_KERNELS * (self.num_blocks // len(DEFAULT_FCN_KERNELS) + 1)
        return pattern[: self.num_blocks]

    @property
    def label(self) -> str:
        """Short architecture name, e.g. FCN2-4."""
        if self.family is ModelFamily.LINEAR:
            return "LINEAR"
        return f"{self.family.value}{self.num_blocks}-{self.width}"


class TensorRecord(BaseModel):
    """One parameter tensor: shape plus flat row-major values."""

    shape: list[int]
    values: list[float]


class CheckpointDocument(BaseModel):
    """Self-describing checkpoint container."""

    format: str = CHECKPOINT_FORMAT
    version: int = CHECKPOINT_VERSION
    spec: ModelSpec
    tensors: dict[str, TensorRecord]
    metadata: dict[str, str | int | float] = Field(default_factory=dict)
