"""
Service running the experiment protocol behind the CLI verbs.

train-teacher  one teacher per dataset, best of several seeds on validation
distill        one student per (dataset, student, objective, seed)
ablate         one distillation per value of a swept factor, teacher reused

Independent runs go through asyncio.to_thread under a semaphore of size
``jobs``; results are collected by key and written in sorted order, so the
artifacts do not depend on the degree of parallelism.
"""

import asyncio
from collections.abc import Callable, Hashable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, TypeVar

import numpy as np
import pandas as pd
from loguru import logger

from tsd_lab.domain.enums import AblationAxis, AttackTarget, ModelRole, Objective, SaliencyVariant
from tsd_lab.domain.errors import ConfigError, IncompleteRunError
from tsd_lab.domain.experiment_schemas import ArchitectureConfig, DistillConfig, ExperimentConfig
from tsd_lab.ml.data import TimeSeriesDataset, reduce_fraction
from tsd_lab.ml.evaluation import ScoreTable
from tsd_lab.ml.models import ModelParams, ModelRegistry
from tsd_lab.ml.models.registry import REGISTRY_FILE
from tsd_lab.ml.training import (
    ExperimentTracker,
    TrainedArtifact,
    derive_seed,
    distill,
    grid_search_beta,
    select_teacher,
    train_single,
)
from tsd_lab.services.dataset_service import DatasetService, PreparedData
from tsd_lab.services.evaluation_service import AttributionMaps, EvaluationService, attribution_subset
from tsd_lab.services.report_service import environment_record
from tsd_lab.services.run_layout import RunLayout
from tsd_lab.shared.io import atomic_write_json, atomic_write_tsv

T = TypeVar("T")

TEACHER_METHOD = "TEACHER"
SWEEP_COLUMNS = ["axis_value", "scenario", "method", "dataset", "seed", "metric", "value"]
CLEAN = "clean"


@dataclass
class StudentOutcome:
    """Trained student with its scores."""

    artifact: TrainedArtifact
    metrics: dict[str, float]
    saliency_mse: dict[str, float] = field(default_factory=dict)
    maps: AttributionMaps = field(default_factory=dict)
    temporal: np.ndarray | None = None
    beta_scores: dict[float, float] | None = None


def method_name(objective: Objective, student: ArchitectureConfig, config: ExperimentConfig) -> str:
    """Objective name, qualified by the student architecture when several are compared."""
    if len(config.students) == 1:
        return objective.value
    return f"{objective.value}-{student.label}"


def format_axis_value(value: Any) -> str:
    if isinstance(value, SaliencyVariant):
        return value.value
    return f"{value:g}"


def axis_distill_config(axis: AblationAxis, value: Any, objective: Objective, base: DistillConfig) -> DistillConfig:
    """DistillConfig for one sweep point; factors an objective does not use leave it unchanged."""
    if axis is AblationAxis.TAU:
        if objective is Objective.TSD:
            return base.model_copy(update={"tau_saliency": float(value)})
        if objective is Objective.BASE_KD:
            return base.model_copy(update={"tau_kd": float(value)})
        return base
    if objective is not Objective.TSD:
        return base
    if axis is AblationAxis.WIDTH:
        return base.model_copy(update={"grid": base.grid.model_copy(update={"width": int(value)})})
    if axis is AblationAxis.NUM_SUBSEQUENCES:
        return base.model_copy(update={"grid": base.grid.model_copy(update={"num_subsequences": int(value)})})
    if axis is AblationAxis.VARIANT:
        return base.model_copy(update={"variant": SaliencyVariant(value)})
    return base


class ExperimentService:
    """
    Orchestrates teacher training, distillation and ablations for a run directory.

    Provides:
    - Dataset resolution ahead of any write
    - Seed fan-out from the global seed
    - Parallel independent runs with sorted, atomic output
    """

    def __init__(self, dataset_service: DatasetService, evaluation_service: EvaluationService) -> None:
        self.datasets = dataset_service
        self.evaluation = evaluation_service

    # ------------------------------------------------------------------
    # Helpers
    # ------------------------------------------------------------------

    @staticmethod
    async def _gather(jobs: int, tasks: dict[Hashable, Callable[[], T]]) -> dict[Hashable, T]:
        semaphore = asyncio.Semaphore(jobs)

        async def run(key: Hashable, fn: Callable[[], T]) -> tuple[Hashable, T]:
            async with semaphore:
                return key, await asyncio.to_thread(fn)

        results = await asyncio.gather(*(run(key, fn) for key, fn in tasks.items()))
        return dict(sorted(results, key=lambda item: item[0]))

    async def load_data(self, config: ExperimentConfig) -> dict[str, PreparedData]:
        """Resolve every dataset; nothing is written."""
        resolved = await asyncio.gather(*(self.datasets.resolve(source, config.seed) for source in config.datasets))
        return {data.name: data for data in sorted(resolved, key=lambda d: d.name)}

    @staticmethod
    def _write_provenance(config: ExperimentConfig, layout: RunLayout) -> None:
        atomic_write_json(layout.config, config.model_dump(mode="json"))
        atomic_write_json(layout.environment, environment_record())

    def check_inputs(
        self, command: str, config: ExperimentConfig, out: str | Path, data: dict[str, PreparedData], axis: AblationAxis | str | None = None
    ) -> None:
        """
        Fail before a command writes anything to the run directory.

        Raises:
            ConfigError: Unknown ablation axis, or no values listed for it
            IncompleteRunError: distill/ablate without a registered teacher for some dataset
        """
        if command == "ablate":
            self._sweep_values(config, axis)
        if command in ("distill", "ablate"):
            self._check_teachers(RunLayout(out), data)

    @staticmethod
    def _sweep_values(config: ExperimentConfig, axis: AblationAxis | str | None) -> tuple[AblationAxis, list]:
        try:
            axis = AblationAxis(axis)
        except ValueError:
            raise ConfigError(f"Unknown ablation axis '{axis}'; choose from {[a.value for a in AblationAxis]}") from None
        values = list(getattr(config.ablation, axis.value))
        if not values:
            raise ConfigError(f"No values listed for ablation axis '{axis.value}'")
        return axis, values

    @staticmethod
    def _check_teachers(layout: RunLayout, data: dict[str, PreparedData]) -> None:
        """
        Raises:
            IncompleteRunError: A dataset has no trained teacher
        """
        registry = ModelRegistry(layout.root)
        missing = [
            layout.checkpoint_path(layout.teacher_name(name))
            for name in data
            if registry.get_info(layout.teacher_name(name)) is None
        ]
        if missing:
            if not (layout.root / REGISTRY_FILE).exists():
                missing.insert(0, REGISTRY_FILE)
            raise IncompleteRunError(str(layout.root), missing)

    @classmethod
    def _load_teachers(cls, layout: RunLayout, config: ExperimentConfig, data: dict[str, PreparedData]) -> dict[str, ModelParams]:
        """
        Raises:
            IncompleteRunError: A dataset has no trained teacher
        """
        cls._check_teachers(layout, data)
        registry = ModelRegistry(layout.root)
        teachers = {}
        for name in data:
            info = registry.get_info(layout.teacher_name(name))
            if info.metadata.get("global_seed") != config.seed:
                logger.warning(
                    f"Teacher of '{name}' was trained with seed {info.metadata.get('global_seed')}, "
                    f"this run uses {config.seed}; splits may differ"
                )
            teachers[name] = registry.load_sync(layout.teacher_name(name))
        return teachers

    @staticmethod
    def _train_student(
        teacher: ModelParams,
        student: ArchitectureConfig,
        train: TimeSeriesDataset,
        val: TimeSeriesDataset,
        distill_config: DistillConfig,
        background_seed: int,
        tracker: ExperimentTracker | None,
        run_name: str,
    ) -> tuple[TrainedArtifact, dict[float, float] | None]:
        spec = student.to_spec(train.num_classes, train.series_length)
        if distill_config.grid_search and distill_config.objective is not Objective.BASE:
            search = grid_search_beta(
                teacher, spec, train, val, distill_config, background_seed=background_seed, tracker=tracker, run_name=run_name
            )
            search.artifact.metadata["beta"] = search.best_beta
            return search.artifact, search.scores
        artifact = distill(teacher, spec, train, val, distill_config, background_seed, tracker=tracker, run_name=run_name)
        return artifact, None

    @staticmethod
    def _student_config(config: ExperimentConfig, base: DistillConfig, dataset: str, objective: Objective, seed: int) -> DistillConfig:
        return base.model_copy(update={"objective": objective, "seed": derive_seed(config.seed, "student", dataset, seed)})

    # ------------------------------------------------------------------
    # train-teacher
    # ------------------------------------------------------------------

    async def train_teacher(self, config: ExperimentConfig, out: str | Path, data: dict[str, PreparedData]) -> ScoreTable:
        """
        Train num_teacher_seeds candidates per dataset and register the best.

        Writes the candidate checkpoints, per-candidate histories, the
        selection record and the teacher rows of the score table.
        """
        layout = RunLayout(out)
        evaluation = self.evaluation.with_settings(config.metrics, config.fidelity_tau)
        optimizer = config.distill.optimizer

        tasks: dict[Hashable, Callable[[], TrainedArtifact]] = {}
        for name, prepared in data.items():
            spec = config.teacher.to_spec(prepared.num_classes, prepared.series_length)
            for index in range(config.num_teacher_seeds):
                seed = derive_seed(config.seed, "teacher", name, index)
                tracker = ExperimentTracker(layout.runs_dir(name, "teacher"))

                def run(spec=spec, prepared=prepared, seed=seed, tracker=tracker, index=index) -> TrainedArtifact:
                    return train_single(spec, prepared.train, prepared.val, optimizer, seed, tracker, run_name=f"seed{index}")

                tasks[(name, index)] = run

        logger.info(f"🚀 Training {len(tasks)} teacher candidates ({config.teacher.label}) with jobs={config.jobs}")
        artifacts = await self._gather(config.jobs, tasks)

        registry = ModelRegistry(layout.root)
        table = ScoreTable()
        for name, prepared in data.items():
            candidates = [artifacts[(name, index)] for index in range(config.num_teacher_seeds)]
            chosen = select_teacher(candidates)
            for index, candidate in enumerate(candidates):
                candidate_name = layout.candidate_name(name, index)
                registry.register(
                    candidate_name,
                    candidate.params,
                    ModelRole.TEACHER_CANDIDATE,
                    layout.checkpoint_path(candidate_name),
                    {"seed": candidate.seed, "best_epoch": candidate.best_epoch, "best_val_auc_prc": candidate.best_val_auc_prc},
                )
                table.add(TEACHER_METHOD, name, index, evaluation.evaluate_teacher(candidate.params, prepared.test))

            best = candidates[chosen]
            registry.register(
                layout.teacher_name(name),
                best.params,
                ModelRole.TEACHER,
                layout.checkpoint_path(layout.teacher_name(name)),
                {
                    "candidate_index": chosen,
                    "seed": best.seed,
                    "best_epoch": best.best_epoch,
                    "best_val_auc_prc": best.best_val_auc_prc,
                    "global_seed": config.seed,
                },
            )
            atomic_write_json(
                layout.selection(name),
                {
                    "dataset": name,
                    "architecture": config.teacher.label,
                    "criterion": "max validation AUC-PRC; first candidate wins ties",
                    "candidates": [
                        {
                            "index": index,
                            "seed": c.seed,
                            "best_epoch": c.best_epoch,
                            "epochs_run": c.epochs_run,
                            "val_auc_prc": c.best_val_auc_prc,
                        }
                        for index, c in enumerate(candidates)
                    ],
                    "selected_index": chosen,
                    "selected_seed": best.seed,
                },
            )
            self.datasets.export(prepared, layout.dataset_dir(name))
            logger.info(
                f"✅ Teacher for '{name}': candidate {chosen} (val AUC-PRC {best.best_val_auc_prc:.4f}, "
                f"epoch {best.best_epoch})"
            )

        table.to_tsv(layout.teacher_scores)
        self._write_provenance(config, layout)
        return table

    # ------------------------------------------------------------------
    # distill
    # ------------------------------------------------------------------

    async def distill(self, config: ExperimentConfig, out: str | Path, data: dict[str, PreparedData]) -> ScoreTable:
        """
        One student per (dataset, student, objective, seed) against the registered teacher.

        Raises:
            IncompleteRunError: No teacher checkpoint for some dataset
            ConfigError: Teacher and student shapes disagree
        """
        layout = RunLayout(out)
        teachers = self._load_teachers(layout, config, data)
        evaluation = self.evaluation.with_settings(config.metrics, config.fidelity_tau)
        attribution = config.attribution
        base = config.distill

        teacher_views: dict[str, TimeSeriesDataset] = {name: attribution_subset(d.test, attribution.num_instances) for name, d in data.items()}
        teacher_maps = await self._gather(
            config.jobs,
            {
                name: (lambda name=name: evaluation.attribution_maps(teachers[name], teacher_views[name].values, attribution))
                for name in data
            },
        )

        tasks: dict[Hashable, Callable[[], StudentOutcome]] = {}
        for name, prepared in data.items():
            for student in config.students:
                for objective in config.objectives:
                    for seed in config.seeds:
                        dconfig = self._student_config(config, base, name, objective, seed)
                        background_seed = derive_seed(config.seed, "background", name, seed)
                        tracker = ExperimentTracker(layout.runs_dir(name, student.label, objective.value))

                        def run(
                            name=name,
                            prepared=prepared,
                            student=student,
                            dconfig=dconfig,
                            background_seed=background_seed,
                            tracker=tracker,
                            seed=seed,
                        ) -> StudentOutcome:
                            artifact, beta_scores = self._train_student(
                                teachers[name], student, prepared.train, prepared.val, dconfig, background_seed, tracker, f"seed{seed}"
                            )
                            metrics = evaluation.evaluate_student(teachers[name], artifact.params, prepared.test)
                            maps = evaluation.attribution_maps(artifact.params, teacher_views[name].values, attribution)
                            temporal = None
                            if attribution.export:
                                temporal = evaluation.temporal_profiles(
                                    artifact.params,
                                    teacher_views[name],
                                    prepared.train,
                                    base.grid,
                                    base.tau_saliency,
                                    base.variant,
                                    derive_seed(config.seed, "export", name),
                                )
                            return StudentOutcome(
                                artifact=artifact,
                                metrics=metrics,
                                saliency_mse=evaluation.attribution_mse(teacher_maps[name], maps, attribution.normalize),
                                maps=maps,
                                temporal=temporal,
                                beta_scores=beta_scores,
                            )

                        tasks[(name, student.label, objective.value, seed)] = run

        logger.info(f"🚀 Distilling {len(tasks)} students with jobs={config.jobs}")
        outcomes = await self._gather(config.jobs, tasks)

        registry = ModelRegistry(layout.root)
        scores, mse = ScoreTable(), ScoreTable()
        by_label = {s.label: s for s in config.students}
        for (name, label, objective_value, seed), outcome in outcomes.items():
            objective = Objective(objective_value)
            method = method_name(objective, by_label[label], config)
            artifact = outcome.artifact
            student_name = layout.student_name(name, label, objective, seed)
            registry.register(
                student_name,
                artifact.params,
                ModelRole.STUDENT,
                layout.checkpoint_path(student_name),
                {
                    "objective": objective.value,
                    "seed": seed,
                    "best_epoch": artifact.best_epoch,
                    "best_val_auc_prc": artifact.best_val_auc_prc,
                    "beta": artifact.metadata.get("beta", artifact.config.beta if artifact.config else 0.0),
                },
            )
            scores.add(method, name, seed, outcome.metrics)
            if outcome.saliency_mse:
                mse.add(method, name, seed, outcome.saliency_mse)
            if outcome.beta_scores is not None:
                atomic_write_json(
                    layout.beta_search(name, label, objective, seed),
                    {
                        "grid": [{"beta": beta, "val_auc_prc": score} for beta, score in sorted(outcome.beta_scores.items())],
                        "best_beta": artifact.metadata["beta"],
                    },
                )
            if attribution.export:
                directory = layout.saliency_dir(name, method, f"seed{seed}")
                ids = teacher_views[name].instance_ids
                self.evaluation.export_maps(directory, ids, outcome.maps)
                if outcome.temporal is not None:
                    self._export_temporal(directory / "temporal.tsv", ids, outcome.temporal)

        if attribution.export:
            for name in data:
                directory = layout.saliency_dir(name, TEACHER_METHOD)
                ids = teacher_views[name].instance_ids
                self.evaluation.export_maps(directory, ids, teacher_maps[name])
                temporal = self.evaluation.temporal_profiles(
                    teachers[name],
                    teacher_views[name],
                    data[name].train,
                    base.grid,
                    base.tau_saliency,
                    base.variant,
                    derive_seed(config.seed, "export", name),
                )
                self._export_temporal(directory / "temporal.tsv", ids, temporal)

        scores.to_tsv(layout.scores)
        mse.to_tsv(layout.saliency_mse)
        self._write_provenance(config, layout)
        logger.info(f"✅ Distillation finished: {len(outcomes)} students, {len(scores)} score rows")
        return scores

    @staticmethod
    def _export_temporal(path: Path, instance_ids: np.ndarray, profiles: np.ndarray) -> None:
        frame = pd.DataFrame(profiles, columns=[f"s{i}" for i in range(profiles.shape[1])])
        frame.insert(0, "instance_id", np.asarray(instance_ids, dtype=np.int64))
        atomic_write_tsv(path, frame, float_format="%.17g")

    # ------------------------------------------------------------------
    # ablate
    # ------------------------------------------------------------------

    async def ablate(self, config: ExperimentConfig, out: str | Path, data: dict[str, PreparedData], axis: AblationAxis | str) -> pd.DataFrame:
        """
        Sweep one factor with the trained teacher and shared seeds.

        Raises:
            ConfigError: Unknown axis or no values listed for it
            IncompleteRunError: No teacher checkpoint for some dataset
        """
        axis, values = self._sweep_values(config, axis)
        layout = RunLayout(out)
        teachers = self._load_teachers(layout, config, data)
        evaluation = self.evaluation.with_settings(config.metrics, config.fidelity_tau)
        base = config.distill
        objectives = config.ablation.objectives
        sweep_values = [None] if axis is AblationAxis.FGSM_EPSILON else values

        # Identical (dataset, student, config, train fraction, seed) points are trained once.
        points: dict[tuple, tuple[str, Hashable]] = {}
        tasks: dict[Hashable, Callable[[], TrainedArtifact]] = {}
        for position, value in enumerate(sweep_values):
            value_label = "" if value is None else format_axis_value(value)
            for name, prepared in data.items():
                for student in config.students:
                    for objective in objectives:
                        for seed in config.seeds:
                            dconfig = self._student_config(config, base, name, objective, seed)
                            fraction = 1.0
                            if value is not None and axis is AblationAxis.TRAIN_FRACTION:
                                fraction = float(value)
                            elif value is not None:
                                dconfig = axis_distill_config(axis, value, objective, dconfig)
                            run_key = (name, student.label, dconfig.model_dump_json(), fraction, seed)
                            points[(position, name, student.label, objective.value, seed)] = (value_label, run_key)
                            if run_key in tasks:
                                continue
                            background_seed = derive_seed(config.seed, "background", name, seed)

                            def run(
                                name=name,
                                prepared=prepared,
                                student=student,
                                dconfig=dconfig,
                                fraction=fraction,
                                background_seed=background_seed,
                                seed=seed,
                            ) -> TrainedArtifact:
                                train = reduce_fraction(prepared.train, fraction, derive_seed(config.seed, "fraction", name))
                                artifact, _ = self._train_student(
                                    teachers[name], student, train, prepared.val, dconfig, background_seed, None, f"seed{seed}"
                                )
                                return artifact

                            tasks[run_key] = run

        logger.info(f"🚀 Ablation '{axis.value}': {len(points)} sweep points, {len(tasks)} distinct trainings")
        artifacts = await self._gather(config.jobs, tasks)

        by_label = {s.label: s for s in config.students}
        rows: list[dict[str, Any]] = []
        for (_, name, label, objective_value, seed), (value_label, run_key) in sorted(points.items()):
            artifact = artifacts[run_key]
            method = method_name(Objective(objective_value), by_label[label], config)
            test = data[name].test
            if axis is AblationAxis.FGSM_EPSILON:
                scenarios = [
                    (format_axis_value(epsilon), f"attack:{target.value}", epsilon, target)
                    for epsilon in values
                    for target in config.ablation.attack_targets
                ]
                for axis_value, scenario, epsilon, target in scenarios:
                    metrics = evaluation.adversarial(teachers[name], artifact.params, test, float(epsilon), AttackTarget(target))
                    rows.extend(self._sweep_rows(axis_value, scenario, method, name, seed, metrics))
            else:
                metrics = evaluation.evaluate_student(teachers[name], artifact.params, test)
                rows.extend(self._sweep_rows(value_label, CLEAN, method, name, seed, metrics))

        frame = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
        atomic_write_tsv(layout.sweep(axis.value), frame, float_format="%.17g")
        self._write_provenance(config, layout)
        logger.info(f"✅ Ablation '{axis.value}' written to {layout.sweep(axis.value)}")
        return frame

    @staticmethod
    def _sweep_rows(axis_value: str, scenario: str, method: str, dataset: str, seed: int, metrics: dict[str, float]) -> list[dict[str, Any]]:
        return [
            {
                "axis_value": axis_value,
                "scenario": scenario,
                "method": method,
                "dataset": dataset,
                "seed": seed,
                "metric": metric,
                "value": value,
            }
            for metric, value in metrics.items()
        ]

