"""Shared fixtures: tiny datasets, model specs and fast optimizer settings."""

import json
from pathlib import Path

import numpy as np
import pytest
from loguru import logger

from tsd_lab.domain.enums import ModelFamily
from tsd_lab.domain.experiment_schemas import OptimizerConfig
from tsd_lab.domain.model_schemas import ModelSpec
from tsd_lab.ml.data import TimeSeriesDataset, generate_cbf, split_train_val
from tsd_lab.ml.models import ModelParams, build_model
from tsd_lab.ml.preprocessing import SeriesConfig, SeriesPreprocessor


@pytest.fixture(autouse=True)
def quiet_logs():
    logger.remove()
    yield


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def cbf_splits() -> tuple[TimeSeriesDataset, TimeSeriesDataset, TimeSeriesDataset]:
    """Prepared CBF train/val/test at T=32."""
    preprocessor = SeriesPreprocessor(SeriesConfig(target_length=32))
    train_full = preprocessor.process_dataset(generate_cbf(per_class=6, length=32, seed=3))
    test = preprocessor.process_dataset(generate_cbf(per_class=4, length=32, seed=4))
    train, val = split_train_val(train_full, val_fraction=0.34, seed=0)
    return train, val, test


@pytest.fixture
def fast_optimizer() -> OptimizerConfig:
    return OptimizerConfig(initial_lr=0.01, decay_epochs=[1, 2], batch_size=8, max_epochs=3, patience=2)


@pytest.fixture
def fcn_spec() -> ModelSpec:
    return ModelSpec(family=ModelFamily.FCN, num_blocks=2, width=4, kernel_sizes=(3, 3), num_classes=3, input_length=32)


@pytest.fixture
def teacher_spec() -> ModelSpec:
    return ModelSpec(family=ModelFamily.FCN, num_blocks=2, width=6, kernel_sizes=(5, 3), num_classes=3, input_length=32)


@pytest.fixture
def make_linear():
    """Factory of LINEAR classifiers with hand-set [C, T] weights."""

    def make(weight: np.ndarray, bias: np.ndarray | None = None) -> ModelParams:
        weight = np.asarray(weight, dtype=np.float64)
        num_classes, length = weight.shape
        spec = ModelSpec(family=ModelFamily.LINEAR, num_classes=num_classes, input_length=length)
        params = build_model(spec, seed=0)
        params["head.weight"].data[...] = weight
        params["head.bias"].data[...] = 0.0 if bias is None else bias
        return params

    return make


@pytest.fixture
def tiny_config(tmp_path: Path) -> Path:
    """Smallest complete experiment: CBF T=24, two FCNs, one seed, a few epochs."""
    config = {
        "datasets": [
            {"name": "CBF", "train_per_class": 4, "test_per_class": 3, "raw_length": 32, "target_length": 24, "val_fraction": 0.25}
        ],
        "teacher": {"family": "FCN", "num_blocks": 2, "width": 4, "kernel_sizes": [5, 3]},
        "students": [{"family": "FCN", "num_blocks": 1, "width": 2, "kernel_sizes": [3]}],
        "objectives": ["BASE", "BASE_KD", "TSD"],
        "num_teacher_seeds": 2,
        "seeds": [0],
        "distill": {
            "grid": {"num_subsequences": 4, "width": 3},
            "optimizer": {"initial_lr": 0.01, "decay_epochs": [1], "batch_size": 8, "max_epochs": 2, "patience": 1},
        },
        "attribution": {"num_instances": 3, "ig_steps": 4},
        "ablation": {"tau": [1.0, 8.0], "fgsm_epsilon": [0.0, 0.1], "train_fraction": [0.5, 1.0]},
    }
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    return path
