"""
Service rendering the report of a finished run directory.

Everything is derived from files already in the run directory, so
rendering twice produces byte-identical output.
"""

import asyncio
import platform
import sys
from importlib import metadata
from pathlib import Path

import numpy as np
import pandas as pd
from loguru import logger

from tsd_lab.domain.errors import IncompleteRunError
from tsd_lab.domain.experiment_schemas import ExperimentConfig
from tsd_lab.ml.evaluation import ScoreTable, rank_and_wins, rank_table
from tsd_lab.ml.models import ModelRegistry
from tsd_lab.ml.models.factory import get_classifier
from tsd_lab.services.run_layout import RunLayout
from tsd_lab.shared.io import atomic_write_text, atomic_write_tsv, read_json

# Metrics where larger is better; predictive KL is reported but not ranked.
RANKED_METRICS = ("auc_prc", "auc_roc", "accuracy", "top1_agreement")
TEACHER_METHOD = "TEACHER"
REPORTED_PACKAGES = ("tsd-lab", "numpy", "pandas", "pydantic", "pydantic-settings", "loguru", "aioinject")


def environment_record() -> dict[str, str]:
    """Interpreter, platform and library versions of the running build."""
    record = {
        "python": sys.version.split()[0],
        "implementation": platform.python_implementation(),
        "platform": platform.platform(),
        "machine": platform.machine(),
    }
    for package in REPORTED_PACKAGES:
        try:
            record[package] = metadata.version(package)
        except metadata.PackageNotFoundError:
            record[package] = "not installed"
    return record


def _fmt(frame: pd.DataFrame) -> str:
    if frame.empty:
        return "  (none)"
    return frame.to_string(index=False, float_format=lambda v: f"{v:.4f}")


class ReportService:
    """Builds pivots, rank tables, sweep summaries and the text summary of a run."""

    REQUIRED = ("config.json", "teacher_scores.tsv", "scores.tsv")

    def check_complete(self, run_dir: str | Path) -> RunLayout:
        """
        Raises:
            IncompleteRunError: Listing every required file that is absent
        """
        layout = RunLayout(run_dir)
        missing = [name for name in self.REQUIRED if not (layout.root / name).is_file()]
        if missing:
            raise IncompleteRunError(str(layout.root), missing)
        return layout

    def render_sync(self, run_dir: str | Path) -> str:
        """Write report/ under the run directory and return the summary text."""
        layout = self.check_complete(run_dir)
        config = ExperimentConfig.model_validate(read_json(layout.config))
        students = ScoreTable.from_tsv(layout.scores)
        teacher = ScoreTable.from_tsv(layout.teacher_scores)
        combined = ScoreTable()
        combined.extend([students, teacher])
        out = layout.report

        sections = [
            "tsd-lab report",
            "==============",
            f"run directory: {layout.root}",
            f"datasets: {', '.join(d.name for d in config.datasets)}",
            f"teacher: {config.teacher.label}; students: {', '.join(config.student_labels())}",
            f"objectives: {', '.join(o.value for o in config.objectives)}; seeds: {config.seeds}",
            f"global seed: {config.seed}; fidelity tau: {config.fidelity_tau:g}",
        ]
        if layout.environment.is_file():
            env = read_json(layout.environment)
            sections.append("environment: " + ", ".join(f"{k}={v}" for k, v in sorted(env.items())))

        sections += ["", "Teacher selection", "-----------------"]
        for source in config.datasets:
            path = layout.selection(source.name)
            if not path.is_file():
                sections.append(f"  {source.name}: no selection record")
                continue
            record = read_json(path)
            scores = ", ".join(f"{c['val_auc_prc']:.4f}" for c in record["candidates"])
            sections.append(f"  {source.name}: candidate {record['selected_index']} of [{scores}]")

        sizes = self._model_sizes(layout, config)
        if not sizes.empty:
            atomic_write_tsv(out / "model_sizes.tsv", sizes, float_format="%.17g")
            sections += ["", "Model sizes", "-----------", _fmt(sizes)]

        for metric in combined.metrics:
            pivot = combined.pivot(metric)
            if metric in teacher.metrics:
                frame = teacher.frame
                maxima = frame[frame["metric"] == metric].groupby("dataset")["value"].max()
                pivot["max"] = [
                    maxima.get(dataset, np.nan) if method == TEACHER_METHOD else np.nan
                    for dataset, method in zip(pivot["dataset"], pivot["method"])
                ]
            atomic_write_tsv(out / f"pivot_{metric}.tsv", pivot, float_format="%.17g")
            sections += ["", f"{metric} (mean / std over seeds)", "-" * (len(metric) + 25), _fmt(pivot)]

            if metric not in RANKED_METRICS or not students.methods:
                continue
            wins = rank_and_wins(students, metric)
            atomic_write_tsv(out / f"ranks_{metric}.tsv", wins, float_format="%.17g")
            atomic_write_tsv(out / f"rank_table_{metric}.tsv", rank_table(students, metric).reset_index(), float_format="%.17g")
            sections += [f"  ranks and wins ({metric}, students):", _fmt(wins)]
            if metric in teacher.metrics:
                with_teacher = rank_and_wins(combined, metric)
                atomic_write_tsv(out / f"ranks_{metric}_with_teacher.tsv", with_teacher, float_format="%.17g")
                sections += [f"  ranks and wins ({metric}, with teacher):", _fmt(with_teacher)]

        if layout.saliency_mse.is_file():
            mse = ScoreTable.from_tsv(layout.saliency_mse)
            sections += ["", "Attribution MSE against the teacher", "-----------------------------------"]
            for method in mse.metrics:
                pivot = mse.pivot(method)
                atomic_write_tsv(out / f"saliency_mse_{method}.tsv", pivot, float_format="%.17g")
                sections += [f"  {method}:", _fmt(pivot)]

        beta = self._beta_summary(layout)
        if not beta.empty:
            atomic_write_tsv(out / "beta_search.tsv", beta, float_format="%.17g")
            sections += ["", "Beta grid search", "----------------", _fmt(beta)]

        for path in sorted((layout.root / "sweeps").glob("*.tsv")):
            sweep = self._sweep_summary(path)
            atomic_write_tsv(out / f"sweep_{path.stem}.tsv", sweep, float_format="%.17g")
            sections += ["", f"Sweep: {path.stem}", "-" * (len(path.stem) + 7), _fmt(sweep)]

        exports = sorted(p.relative_to(layout.root).as_posix() for p in (layout.root / "saliency").rglob("*.tsv"))
        sections += ["", f"Saliency exports: {len(exports)} files under saliency/"]

        summary = "\n".join(sections) + "\n"
        atomic_write_text(out / "summary.txt", summary)
        logger.info(f"✅ Report written to {out}")
        return summary

    async def render(self, run_dir: str | Path) -> str:
        return await asyncio.to_thread(self.render_sync, run_dir)

    @staticmethod
    def _model_sizes(layout: RunLayout, config: ExperimentConfig) -> pd.DataFrame:
        """Parameter counts of each registered teacher and the configured students, with compression ratios."""
        registry = ModelRegistry(layout.root)
        rows = []
        for source in config.datasets:
            name = layout.teacher_name(source.name)
            if registry.get_info(name) is None:
                continue
            teacher_spec = registry.load_sync(name).spec
            teacher = get_classifier(teacher_spec.family).get_info(teacher_spec)
            specs = [("teacher", teacher_spec)] + [
                ("student", s.to_spec(teacher_spec.num_classes, teacher_spec.input_length, teacher_spec.input_channels))
                for s in config.students
            ]
            for role, spec in specs:
                info = get_classifier(spec.family).get_info(spec)
                rows.append(
                    {
                        "dataset": source.name,
                        "role": role,
                        "model": info["label"],
                        "num_parameters": info["num_parameters"],
                        "compression": teacher["num_parameters"] / info["num_parameters"],
                    }
                )
        return pd.DataFrame(rows, columns=["dataset", "role", "model", "num_parameters", "compression"])

    @staticmethod
    def _beta_summary(layout: RunLayout) -> pd.DataFrame:
        rows = []
        for path in sorted((layout.root / "beta_search").glob("*/*/*/seed*.json")):
            dataset, student, objective = path.parts[-4:-1]
            record = read_json(path)
            rows.append(
                {
                    "dataset": dataset,
                    "student": student,
                    "objective": objective,
                    "seed": int(path.stem.removeprefix("seed")),
                    "best_beta": record["best_beta"],
                    "best_val_auc_prc": max(point["val_auc_prc"] for point in record["grid"]),
                }
            )
        columns = ["dataset", "student", "objective", "seed", "best_beta", "best_val_auc_prc"]
        return pd.DataFrame(rows, columns=columns).sort_values(columns[:4], kind="mergesort").reset_index(drop=True)

    @staticmethod
    def _sweep_summary(path: Path) -> pd.DataFrame:
        """Mean and std over datasets and seeds per (axis value, scenario, method, metric), in sweep order."""
        frame = pd.read_csv(
            path, sep="\t", dtype={"axis_value": str, "scenario": str, "method": str, "metric": str}, keep_default_na=False
        )
        grouped = frame.groupby(["axis_value", "scenario", "method", "metric"], sort=False)["value"].agg(["mean", "std", "count"])
        grouped["std"] = grouped["std"].fillna(0.0)
        return grouped.reset_index()
