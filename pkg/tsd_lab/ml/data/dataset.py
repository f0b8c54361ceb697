"""
Dataset types.

Instance and TimeSeriesDataset are immutable; every transformation
(preparation, splitting, reduction) returns a new object.
"""

from collections import Counter
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field, replace

import numpy as np

from tsd_lab.domain.enums import Split
from tsd_lab.domain.errors import DatasetError


@dataclass(frozen=True, eq=False)
class Instance:
    """One labeled univariate series."""

    values: np.ndarray
    label: int
    prepared: bool = False
    # Position in the source file/generator, kept through splits for exports.
    instance_id: int = 0

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise DatasetError(f"Instance values must be a non-empty 1D sequence, got shape {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "label", int(self.label))

    @property
    def length(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True, eq=False)
class TimeSeriesDataset:
    """
    Labeled series sharing one length.

    Invariants: M >= 1, every label in [0, C), C >= 2, equal lengths.
    """

    instances: tuple[Instance, ...]
    num_classes: int
    name: str = "dataset"
    split: Split = Split.TRAIN
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        instances = tuple(self.instances)
        object.__setattr__(self, "instances", instances)
        object.__setattr__(self, "split", Split(self.split))
        if not instances:
            raise DatasetError(f"Dataset '{self.name}' ({self.split.value}) has no instances")
        if self.num_classes < 2:
            raise DatasetError(f"Dataset '{self.name}' needs at least 2 classes, got {self.num_classes}")
        lengths = {inst.length for inst in instances}
        if len(lengths) != 1:
            raise DatasetError(f"Dataset '{self.name}' mixes series lengths {sorted(lengths)}")
        bad = [inst.label for inst in instances if not 0 <= inst.label < self.num_classes]
        if bad:
            raise DatasetError(f"Dataset '{self.name}' has labels outside [0, {self.num_classes}): {sorted(set(bad))}")

    @classmethod
    def from_arrays(
        cls,
        values: np.ndarray,
        labels: Sequence[int] | np.ndarray,
        num_classes: int | None = None,
        name: str = "dataset",
        split: Split = Split.TRAIN,
        prepared: bool = False,
    ) -> "TimeSeriesDataset":
        """Build from a [M, T] matrix and M labels."""
        matrix = np.asarray(values, dtype=np.float64)
        label_array = np.asarray(labels, dtype=np.int64)
        if matrix.ndim != 2 or matrix.shape[0] != label_array.shape[0]:
            raise DatasetError(f"values {matrix.shape} and labels {label_array.shape} do not align")
        if num_classes is None:
            num_classes = int(label_array.max()) + 1 if label_array.size else 0
        instances = tuple(
            Instance(values=row, label=int(label), prepared=prepared, instance_id=i)
            for i, (row, label) in enumerate(zip(matrix, label_array))
        )
        return cls(instances=instances, num_classes=num_classes, name=name, split=split)

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self) -> Iterator[Instance]:
        return iter(self.instances)

    def __getitem__(self, index: int) -> Instance:
        return self.instances[index]

    @property
    def series_length(self) -> int:
        return self.instances[0].length

    @property
    def prepared(self) -> bool:
        return all(inst.prepared for inst in self.instances)

    @property
    def values(self) -> np.ndarray:
        """[M, T] matrix of series values."""
        return np.stack([inst.values for inst in self.instances])

    @property
    def labels(self) -> np.ndarray:
        return np.array([inst.label for inst in self.instances], dtype=np.int64)

    @property
    def instance_ids(self) -> np.ndarray:
        return np.array([inst.instance_id for inst in self.instances], dtype=np.int64)

    def as_batch(self) -> np.ndarray:
        """[M, 1, T] model input."""
        return self.values[:, np.newaxis, :]

    def class_counts(self) -> dict[int, int]:
        counts = Counter(int(label) for label in self.labels)
        return {c: counts.get(c, 0) for c in range(self.num_classes)}

    def subset(self, indices: Sequence[int] | np.ndarray, split: Split | None = None) -> "TimeSeriesDataset":
        """Dataset of the given positions (in the given order)."""
        chosen = tuple(self.instances[int(i)] for i in indices)
        return replace(self, instances=chosen, split=self.split if split is None else split, metadata=dict(self.metadata))

    def with_metadata(self, **entries: str) -> "TimeSeriesDataset":
        """Same instances with a new metadata dict (this dataset's entries plus entries)."""
        return replace(self, metadata={**self.metadata, **entries})

    def describe(self) -> dict[str, str | int | bool]:
        """Metadata sidecar content."""
        return {
            "name": self.name,
            "split": self.split.value,
            "num_classes": self.num_classes,
            "series_length": self.series_length,
            "num_instances": len(self),
            "prepared": self.prepared,
        }
