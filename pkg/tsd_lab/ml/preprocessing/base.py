"""
Base Preprocessor Abstract Class.

All preprocessors should inherit from this class to ensure
consistent interface across datasets.
"""

from abc import ABC, abstractmethod

import numpy as np

from tsd_lab.ml.data.dataset import TimeSeriesDataset


class BasePreprocessor(ABC):
    """
    Abstract base class for series preprocessors.

    Provides consistent interface for:
    - Single series processing
    - Whole dataset processing
    - Input validation
    """

    @abstractmethod
    def process(self, values: np.ndarray) -> np.ndarray:
        """
        Process a single series.

        Args:
            values: Raw 1D series

        Returns:
            Preprocessed series ready for model input
        """

    @abstractmethod
    def process_dataset(self, dataset: TimeSeriesDataset) -> TimeSeriesDataset:
        """
        Process every instance of a dataset.

        Args:
            dataset: Raw dataset

        Returns:
            New dataset with prepared instances
        """

    @abstractmethod
    def validate(self, values: np.ndarray) -> bool:
        """
        Validate input before processing.

        Returns:
            True if the series can be processed
        """
