"""
Model Registry.

Checkpoint files plus a run-scoped index (``registry.json``) of every
model a run produced, keyed by name and tagged with a role.
"""

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from loguru import logger

from tsd_lab.domain.enums import ModelRole
from tsd_lab.domain.model_schemas import CHECKPOINT_FORMAT, CHECKPOINT_VERSION, CheckpointDocument, TensorRecord
from tsd_lab.ml.autograd import Tensor
from tsd_lab.ml.models.base import ModelParams
from tsd_lab.ml.models.factory import get_classifier
from tsd_lab.shared.io import atomic_write_json, atomic_write_text, read_json

REGISTRY_FILE = "registry.json"


def save_checkpoint(params: ModelParams, path: str | Path, metadata: dict[str, Any] | None = None) -> Path:
    """
    Write a self-describing JSON checkpoint.

    Floats are written with their shortest round-trip repr, so loading
    gives back bitwise-identical arrays.
    """
    document = CheckpointDocument(
        spec=params.spec,
        tensors={
            name: TensorRecord(shape=list(t.shape), values=t.data.ravel().tolist())
            for name, t in params.tensors.items()
        },
        metadata=metadata or {},
    )
    return atomic_write_text(path, json.dumps(document.model_dump(mode="json"), sort_keys=True) + "\n")


def load_checkpoint(path: str | Path) -> tuple[ModelParams, dict[str, Any]]:
    """
    Read a checkpoint written by ``save_checkpoint``.

    Raises:
        ValueError: Unknown format/version or tensors not matching the spec
    """
    document = CheckpointDocument.model_validate(read_json(path))
    if document.format != CHECKPOINT_FORMAT or document.version != CHECKPOINT_VERSION:
        raise ValueError(f"Unsupported checkpoint {document.format} v{document.version} in {path}")

    shapes = get_classifier(document.spec.family).parameter_shapes(document.spec)
    if set(shapes) != set(document.tensors):
        raise ValueError(f"Checkpoint {path} tensors do not match its spec: {sorted(set(shapes) ^ set(document.tensors))}")

    tensors: dict[str, Tensor] = {}
    for name, shape in shapes.items():
        record = document.tensors[name]
        if tuple(record.shape) != tuple(shape):
            raise ValueError(f"Tensor '{name}' has shape {record.shape}, spec declares {list(shape)}")
        values = np.asarray(record.values, dtype=np.float64).reshape(shape)
        tensors[name] = Tensor(values, requires_grad=True)
    return ModelParams(spec=document.spec, tensors=tensors), dict(document.metadata)


@dataclass
class ModelInfo:
    """Index entry of a registered checkpoint."""

    name: str
    path: str
    role: ModelRole
    metadata: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"path": self.path, "role": self.role.value, "metadata": self.metadata}


class ModelRegistry:
    """
    Registry for the checkpoints of one run directory.

    Provides:
    - Registration (checkpoint write + index update)
    - Lazy loading with in-memory caching
    - Filtering by role
    """

    def __init__(self, root: str | Path) -> None:
        """
        Open (or start) the registry of a run directory.

        Args:
            root: Run directory; checkpoint paths are stored relative to it
        """
        self.root = Path(root)
        self._lock = threading.Lock()
        self._registry: dict[str, ModelInfo] = {}
        self._loaded_models: dict[str, ModelParams] = {}
        index_path = self.root / REGISTRY_FILE
        if index_path.exists():
            for name, entry in read_json(index_path).items():
                self._registry[name] = ModelInfo(
                    name=name,
                    path=entry["path"],
                    role=ModelRole(entry["role"]),
                    metadata=entry.get("metadata", {}),
                )

    def register(
        self,
        name: str,
        params: ModelParams,
        role: ModelRole,
        relative_path: str | Path,
        metadata: dict[str, Any] | None = None,
    ) -> Path:
        """
        Save a checkpoint and record it in the index.

        Args:
            name: Unique model identifier within the run
            params: Parameters to store
            role: Teacher candidate, selected teacher or student
            relative_path: Checkpoint location under the run directory
            metadata: Extra scalars stored in both checkpoint and index

        Returns:
            Absolute checkpoint path
        """
        metadata = dict(metadata or {})
        path = save_checkpoint(params, self.root / relative_path, metadata={"name": name, "role": role.value, **metadata})
        with self._lock:
            self._registry[name] = ModelInfo(name=name, path=Path(relative_path).as_posix(), role=role, metadata=metadata)
            self._loaded_models[name] = params
            self._write_index()
        logger.debug(f"Registered {role.value} '{name}' at {path}")
        return path

    def _write_index(self) -> None:
        payload = {name: info.to_dict() for name, info in sorted(self._registry.items())}
        atomic_write_json(self.root / REGISTRY_FILE, payload)

    async def load(self, name: str) -> ModelParams:
        """Async wrapper around ``load_sync`` for service code."""
        return self.load_sync(name)

    def load_sync(self, name: str) -> ModelParams:
        """
        Load model by name (lazy loading with cache).

        Raises:
            KeyError: If model not registered
        """
        with self._lock:
            if name not in self._registry:
                raise KeyError(f"Model '{name}' not found in registry")
            if name in self._loaded_models:
                return self._loaded_models[name]
            info = self._registry[name]
        params, _ = load_checkpoint(self.root / info.path)
        with self._lock:
            self._loaded_models[name] = params
        return params

    def get_info(self, name: str) -> ModelInfo | None:
        return self._registry.get(name)

    def list_models(self, role: ModelRole | None = None) -> list[ModelInfo]:
        """List registered models, optionally filtered by role, sorted by name."""
        infos = sorted(self._registry.values(), key=lambda info: info.name)
        if role is None:
            return infos
        return [info for info in infos if info.role == role]

    def is_loaded(self, name: str) -> bool:
        return name in self._loaded_models
