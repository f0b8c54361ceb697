"""
Service resolving configured dataset sources into prepared splits.

A source is either an archive train/test pair or the CBF generator. Both
go through the same preparation (resample, then z-normalize) and the same
seeded stratified train/validation split.
"""

import asyncio
from dataclasses import dataclass
from pathlib import Path

from loguru import logger

from tsd_lab.domain.enums import Split
from tsd_lab.domain.errors import DatasetError
from tsd_lab.domain.experiment_schemas import DatasetSource
from tsd_lab.ml.data import TimeSeriesDataset, generate_cbf, split_train_val
from tsd_lab.ml.preprocessing import SeriesConfig, SeriesPreprocessor
from tsd_lab.ml.training.seeding import derive_seed
from tsd_lab.services.archive_service import load_archive, save_archive


@dataclass(frozen=True)
class PreparedData:
    """Prepared train/val/test splits of one dataset."""

    name: str
    train: TimeSeriesDataset
    val: TimeSeriesDataset
    test: TimeSeriesDataset

    @property
    def num_classes(self) -> int:
        return self.train.num_classes

    @property
    def series_length(self) -> int:
        return self.train.series_length

    def splits(self) -> dict[Split, TimeSeriesDataset]:
        return {Split.TRAIN: self.train, Split.VAL: self.val, Split.TEST: self.test}


class DatasetService:
    """Loads, generates, prepares, splits and exports datasets."""

    def load_raw(self, source: DatasetSource, global_seed: int) -> tuple[TimeSeriesDataset, TimeSeriesDataset]:
        """
        Unprepared (train, test) pair of a source.

        Raises:
            FileNotFoundError: Archive path missing
            ArchiveParseError: Malformed archive
            DatasetError: Train and test disagree on the class set
        """
        if source.kind == "archive":
            train = load_archive(source.train_path, name=source.name, split=Split.TRAIN)
            label_set = [int(label) for label in train.metadata["source_labels"].split(",")]
            test = load_archive(source.test_path, name=source.name, split=Split.TEST, label_set=label_set)
            return train, test

        seed = source.seed
        train_seed = seed if seed is not None else derive_seed(global_seed, "data", source.name, "train")
        test_seed = seed + 1 if seed is not None else derive_seed(global_seed, "data", source.name, "test")
        train = generate_cbf(source.train_per_class, source.raw_length, train_seed, name=source.name, split=Split.TRAIN)
        test = generate_cbf(source.test_per_class, source.raw_length, test_seed, name=source.name, split=Split.TEST)
        return train, test

    def prepare(self, source: DatasetSource, global_seed: int) -> PreparedData:
        """Load or generate, prepare every split, then split train into train/val."""
        raw_train, raw_test = self.load_raw(source, global_seed)
        preprocessor = SeriesPreprocessor(SeriesConfig(target_length=source.target_length))
        train_full = preprocessor.process_dataset(raw_train)
        test = preprocessor.process_dataset(raw_test)
        if train_full.num_classes != test.num_classes:
            raise DatasetError(
                f"'{source.name}': train has {train_full.num_classes} classes, test {test.num_classes}"
            )
        train, val = split_train_val(train_full, source.val_fraction, derive_seed(global_seed, "split", source.name))
        logger.info(
            f"✅ Dataset '{source.name}' ready: {len(train)} train / {len(val)} val / {len(test)} test, "
            f"C={train.num_classes}, T={train.series_length}"
        )
        return PreparedData(name=source.name, train=train, val=val, test=test)

    async def resolve(self, source: DatasetSource, global_seed: int) -> PreparedData:
        return await asyncio.to_thread(self.prepare, source, global_seed)

    @staticmethod
    def export(data: PreparedData, directory: str | Path) -> list[Path]:
        """Write <directory>/<split>.tsv plus sidecars for each split."""
        directory = Path(directory)
        return [save_archive(dataset, directory / f"{split.value}.tsv") for split, dataset in data.splits().items()]
