"""tsd-lab services used by the command line."""

from tsd_lab.services.archive_service import load_archive, save_archive
from tsd_lab.services.dataset_service import DatasetService, PreparedData
from tsd_lab.services.evaluation_service import EvaluationService
from tsd_lab.services.experiment_service import ExperimentService
from tsd_lab.services.report_service import ReportService, environment_record
from tsd_lab.services.run_layout import RunLayout

__all__ = [
    "DatasetService",
    "EvaluationService",
    "ExperimentService",
    "PreparedData",
    "ReportService",
    "RunLayout",
    "environment_record",
    "load_archive",
    "save_archive",
]
