"""
Dependency Injection Container for tsd-lab.

Wires the services behind the command line:
- DatasetService: dataset resolution, preparation and splits
- EvaluationService: metrics, attribution comparison, FGSM
- ExperimentService: train-teacher, distill and ablate
- ReportService: run summaries
"""

from collections.abc import Iterable
from typing import Any

import aioinject

from tsd_lab.config import LabSettings, get_lab_settings
from tsd_lab.services.dataset_service import DatasetService
from tsd_lab.services.evaluation_service import EvaluationService
from tsd_lab.services.experiment_service import ExperimentService
from tsd_lab.services.report_service import ReportService


async def create_settings() -> LabSettings:
    """
    Factory function for LabSettings.

    Returns:
        Cached process settings
    """
    return get_lab_settings()


async def create_dataset_service() -> DatasetService:
    """
    Factory function for DatasetService.

    Returns:
        DatasetService instance
    """
    return DatasetService()


async def create_evaluation_service() -> EvaluationService:
    """
    Factory function for EvaluationService.

    Returns:
        EvaluationService with the default metric set
    """
    return EvaluationService()


async def create_experiment_service(
    dataset_service: DatasetService,
    evaluation_service: EvaluationService,
) -> ExperimentService:
    """
    Factory function for ExperimentService.

    Args:
        dataset_service: Dataset resolution
        evaluation_service: Scoring of trained models

    Returns:
        ExperimentService instance
    """
    return ExperimentService(dataset_service, evaluation_service)


async def create_report_service() -> ReportService:
    """
    Factory function for ReportService.

    Returns:
        ReportService instance
    """
    return ReportService()


def providers() -> Iterable[aioinject.Provider[Any]]:
    """
    Create and return all dependency injection providers.

    Includes:
    - LabSettings: Process-level settings
    - DatasetService: Data access
    - EvaluationService, ExperimentService: Experiment protocol
    - ReportService: Run summaries
    """
    providers_list: list[aioinject.Provider[Any]] = []

    providers_list.append(aioinject.Singleton(create_settings))

    # Data
    providers_list.append(aioinject.Singleton(create_dataset_service))

    # Experiments
    providers_list.append(aioinject.Singleton(create_evaluation_service))
    providers_list.append(aioinject.Singleton(create_experiment_service))
    providers_list.append(aioinject.Singleton(create_report_service))

    return providers_list


def build_lab_container() -> aioinject.Container:
    """
    Create and configure a fresh tsd-lab DI container.

    Each CLI invocation builds its own, so singletons never outlive the
    event loop that created them.

    Returns:
        Configured aioinject.Container instance
    """
    container = aioinject.Container()
    for provider in providers():
        container.register(provider)
    return container
