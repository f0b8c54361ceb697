"""
Run directory layout.

    <run>/config.json                 effective config (every default materialized)
    <run>/environment.json            interpreter, library and platform versions
    <run>/run.log                     log of every command run against the directory
    <run>/registry.json               checkpoint index (ModelRegistry)
    <run>/datasets/<ds>/<split>.tsv   prepared splits + JSON sidecars
    <run>/models/...                  checkpoints
    <run>/runs/...                    per-run training histories
    <run>/teachers/<ds>/selection.json
    <run>/teacher_scores.tsv          teacher candidates on the test split
    <run>/scores.tsv                  students on the test split
    <run>/saliency_mse.tsv            attribution-map MSE against the teacher
    <run>/beta_search/...             per-beta validation scores
    <run>/saliency/...                per-instance attribution and temporal saliency exports
    <run>/sweeps/<axis>.tsv           ablation sweeps
    <run>/report/...                  written by the report command
"""

from dataclasses import dataclass
from pathlib import Path

from tsd_lab.domain.enums import Objective


@dataclass(frozen=True)
class RunLayout:
    root: Path

    def __post_init__(self) -> None:
        object.__setattr__(self, "root", Path(self.root))

    @property
    def config(self) -> Path:
        return self.root / "config.json"

    @property
    def environment(self) -> Path:
        return self.root / "environment.json"

    @property
    def log(self) -> Path:
        return self.root / "run.log"

    @property
    def teacher_scores(self) -> Path:
        return self.root / "teacher_scores.tsv"

    @property
    def scores(self) -> Path:
        return self.root / "scores.tsv"

    @property
    def saliency_mse(self) -> Path:
        return self.root / "saliency_mse.tsv"

    @property
    def report(self) -> Path:
        return self.root / "report"

    def dataset_dir(self, dataset: str) -> Path:
        return self.root / "datasets" / dataset

    def selection(self, dataset: str) -> Path:
        return self.root / "teachers" / dataset / "selection.json"

    def runs_dir(self, dataset: str, *parts: str) -> Path:
        return self.root.joinpath("runs", dataset, *parts)

    def sweep(self, axis: str) -> Path:
        return self.root / "sweeps" / f"{axis}.tsv"

    def beta_search(self, dataset: str, student: str, objective: Objective, seed: int) -> Path:
        return self.root / "beta_search" / dataset / student / objective.value / f"seed{seed}.json"

    def saliency_dir(self, dataset: str, *parts: str) -> Path:
        return self.root.joinpath("saliency", dataset, *parts)

    # Registry names double as checkpoint paths under models/.

    @staticmethod
    def candidate_name(dataset: str, seed: int) -> str:
        return f"{dataset}/teacher_candidates/seed{seed}"

    @staticmethod
    def teacher_name(dataset: str) -> str:
        return f"{dataset}/teacher"

    @staticmethod
    def student_name(dataset: str, student: str, objective: Objective, seed: int) -> str:
        return f"{dataset}/students/{student}/{objective.value}/seed{seed}"

    @staticmethod
    def checkpoint_path(name: str) -> str:
        return f"models/{name}.json"
