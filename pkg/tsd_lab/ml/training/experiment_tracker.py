"""
Experiment Tracker.

Tracks training runs on the local filesystem: parameters, per-epoch
metrics and the final status land in ``<root>/<run_name>/``.
"""

import time
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import pandas as pd

from tsd_lab.shared.io import atomic_write_json, atomic_write_tsv

RUN_FILE = "run.json"
HISTORY_FILE = "history.tsv"


class RunStatus(str, Enum):
    """Status of an experiment run."""

    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


@dataclass
class RunInfo:
    """Information about an experiment run."""

    run_id: str
    experiment_name: str
    status: RunStatus
    start_time: float
    end_time: float | None = None
    params: dict[str, Any] = field(default_factory=dict)
    metrics: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        payload = asdict(self)
        payload["status"] = self.status.value
        # Wall-clock times stay out of the record so reruns are byte-identical.
        payload.pop("start_time")
        payload.pop("end_time")
        return payload


class ExperimentTracker:
    """
    Filesystem tracker for training runs.

    Provides:
    - Run start/end with status
    - Parameter logging
    - Per-step metric logging, exported as a TSV history
    """

    def __init__(self, artifact_location: str | Path | None = None) -> None:
        """
        Initialize tracker.

        Args:
            artifact_location: Root directory; None keeps everything in memory
        """
        self.artifact_location = Path(artifact_location) if artifact_location else None
        self._current_run: RunInfo | None = None
        self._history: list[dict[str, float]] = []

    @property
    def current_run(self) -> RunInfo | None:
        return self._current_run

    @property
    def history(self) -> pd.DataFrame:
        return pd.DataFrame(self._history)

    def start_run(self, experiment_name: str, run_name: str, tags: dict[str, str] | None = None) -> str:
        """
        Start a new run.

        Returns:
            Run ID (the run name)
        """
        self._current_run = RunInfo(
            run_id=run_name,
            experiment_name=experiment_name,
            status=RunStatus.RUNNING,
            start_time=time.time(),
            params=dict(tags or {}),
        )
        self._history = []
        return run_name

    def _run(self) -> RunInfo:
        if self._current_run is None:
            raise RuntimeError("No active run; call start_run() first")
        return self._current_run

    def log_params(self, params: dict[str, Any]) -> None:
        self._run().params.update(params)

    def log_metrics(self, metrics: dict[str, float], step: int | None = None) -> None:
        """Append one history row (step first)."""
        self._run()
        row = {"epoch": step} if step is not None else {}
        row.update(metrics)
        self._history.append(row)

    def end_run(self, status: RunStatus = RunStatus.COMPLETED, final_metrics: dict[str, float] | None = None) -> None:
        """Close the run and persist it when a location is configured."""
        run = self._run()
        run.status = status
        run.end_time = time.time()
        run.metrics.update(final_metrics or {})
        if self.artifact_location is not None:
            run_dir = self.artifact_location / run.run_id
            atomic_write_json(run_dir / RUN_FILE, run.to_dict())
            atomic_write_tsv(run_dir / HISTORY_FILE, self.history, float_format="%.17g")

